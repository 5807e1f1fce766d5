//! Seeded sampling from densities.
//!
//! Every random choice in the crate flows through one fixed generator,
//! ChaCha8 seeded from a `u64`, so identical seeds reproduce bit-identical
//! runs on every platform.  Trial `i` of a batch run uses
//! `base_seed + i * SEED_STRIDE` (wrapping), which keeps per-trial streams
//! disjoint while staying order-independent under parallel dispatch.

use crate::bits::{mask_last_word, words_for, SampleBatch};
use crate::density::{Density, Mode};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The one generator used everywhere.
pub type TrialRng = ChaCha8Rng;

/// Golden-ratio stride between per-trial seeds.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn trial_rng(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

pub fn trial_seed(base: u64, trial: u64) -> u64 {
    base.wrapping_add(trial.wrapping_mul(SEED_STRIDE))
}

/// Uniform draw from `[0, 1)` with 53 random bits.
pub fn unit_f64(rng: &mut TrialRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unbiased uniform draw from `0..bound` by rejection.
pub fn gen_below(rng: &mut TrialRng, bound: u64) -> u64 {
    assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % bound;
        }
    }
}

/// A finite source ran out of samples.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("source `{label}` has {available} samples left of {requested} requested")]
pub struct SourceExhausted {
    pub label: String,
    pub available: usize,
    pub requested: usize,
}

/// A stream of samples from some distribution on `{-1,1}^n`.
///
/// `begin_trial` draws any per-trial randomness (for example a fresh
/// random shift); `fill` appends `count` samples.  Splitting one logical
/// draw of `m` samples into several `fill` calls on the same generator
/// yields the identical sample sequence, which lets large runs stream.
pub trait SampleSource {
    fn n(&self) -> usize;

    fn begin_trial(&mut self, _rng: &mut TrialRng) {}

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, rng: &mut TrialRng);

    /// Like [`fill`](Self::fill), but finite sources refuse (without a
    /// partial append) when fewer than `count` samples remain.
    /// Generators never exhaust, so the default always succeeds.
    fn try_fill(
        &mut self,
        batch: &mut SampleBatch,
        count: usize,
        rng: &mut TrialRng,
    ) -> Result<(), SourceExhausted> {
        self.fill(batch, count, rng);
        Ok(())
    }

    /// Draws `count` samples and adds them to a per-point histogram
    /// (`counts[x] += 1`) without materializing rows.  Only meaningful
    /// for `n` small enough that one slot per point fits (`counts.len()
    /// == 2^n`); `count` must stay below `u32::MAX` so no slot can wrap.
    ///
    /// The default routes through [`fill`](Self::fill) in chunks.  Bulk
    /// generators override it with a tight loop; the sample
    /// *distribution* is identical either way, but the two paths may
    /// consume generator words differently, so a given seed commits to
    /// one path for reproducibility.
    fn fill_histogram(
        &mut self,
        counts: &mut [u32],
        count: usize,
        rng: &mut TrialRng,
    ) -> Result<(), SourceExhausted> {
        fill_histogram_via_rows(self, counts, count, rng)
    }

    /// A short name used in result rows.
    fn label(&self) -> String {
        "source".to_string()
    }
}

/// Fallback histogram accumulation: draw rows in chunks and count them.
/// Works for any source; bulk generators use specialized loops instead.
pub fn fill_histogram_via_rows<S: SampleSource + ?Sized>(
    source: &mut S,
    counts: &mut [u32],
    count: usize,
    rng: &mut TrialRng,
) -> Result<(), SourceExhausted> {
    let n = source.n();
    assert!(counts.len() == 1usize << n, "one count slot per point");
    assert!(count < u32::MAX as usize, "histogram slots could wrap");
    let chunk = 1usize << 16;
    let mut batch = SampleBatch::with_capacity(n, chunk.min(count));
    let mut left = count;
    while left > 0 {
        let take = left.min(chunk);
        batch.clear();
        source.try_fill(&mut batch, take, rng)?;
        for i in 0..batch.len() {
            counts[batch.row(i)[0] as usize] += 1;
        }
        left -= take;
    }
    Ok(())
}

/// Inverse-CDF sampler for an arbitrary [`Density`].
///
/// Explicit mode walks a cumulative table over all `2^n` points;
/// symmetric mode first draws a weight class, then a uniform string of
/// that weight by a partial shuffle.
pub struct DensitySampler {
    n: usize,
    mode: Mode,
    cdf: Vec<f64>,
    scratch: Vec<u32>,
}

impl DensitySampler {
    pub fn new(d: &Density) -> Self {
        let n = d.n();
        match d.mode() {
            Mode::Explicit => {
                let total = d.values().len() as f64;
                let mut acc = 0.0;
                let cdf = d
                    .values()
                    .iter()
                    .map(|v| {
                        acc += v / total;
                        acc
                    })
                    .collect();
                DensitySampler {
                    n,
                    mode: Mode::Explicit,
                    cdf,
                    scratch: Vec::new(),
                }
            }
            Mode::Symmetric => {
                let masses: Vec<f64> = (0..=n)
                    .map(|t| d.values()[t] * crate::density::ln_class_weight(n, t).exp())
                    .collect();
                let total: f64 = masses.iter().sum();
                let mut acc = 0.0;
                let cdf = masses
                    .iter()
                    .map(|m| {
                        acc += m / total;
                        acc
                    })
                    .collect();
                DensitySampler {
                    n,
                    mode: Mode::Symmetric,
                    cdf,
                    scratch: (0..n as u32).collect(),
                }
            }
        }
    }

    fn draw_index(&self, rng: &mut TrialRng) -> usize {
        let u = unit_f64(rng);
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1)
    }
}

impl SampleSource for DensitySampler {
    fn n(&self) -> usize {
        self.n
    }

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, rng: &mut TrialRng) {
        match self.mode {
            Mode::Explicit => {
                for _ in 0..count {
                    batch.push_word(self.draw_index(rng) as u64);
                }
            }
            Mode::Symmetric => {
                let stride = words_for(self.n).max(1);
                let mut row = vec![0u64; stride];
                for _ in 0..count {
                    let t = self.draw_index(rng);
                    row.iter_mut().for_each(|w| *w = 0);
                    // partial Fisher-Yates: the first t entries of the
                    // scratch permutation become the set coordinates
                    for i in 0..t {
                        let j = i as u64 + gen_below(rng, (self.n - i) as u64);
                        self.scratch.swap(i, j as usize);
                        let pos = self.scratch[i] as usize;
                        row[pos / 64] |= 1u64 << (pos % 64);
                    }
                    batch.push_row(&row).expect("stride fixed");
                }
            }
        }
    }

    fn label(&self) -> String {
        "density".to_string()
    }
}

/// Draws `m` samples from a density with a fresh generator at `seed`.
pub fn sample(d: &Density, m: usize, seed: u64) -> SampleBatch {
    let mut src = DensitySampler::new(d);
    let mut rng = trial_rng(seed);
    let mut batch = SampleBatch::with_capacity(d.n(), m);
    src.begin_trial(&mut rng);
    src.fill(&mut batch, m, &mut rng);
    batch
}

/// The uniform distribution, sampled straight from the generator.
pub struct UniformSource {
    pub n: usize,
}

impl SampleSource for UniformSource {
    fn n(&self) -> usize {
        self.n
    }

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, rng: &mut TrialRng) {
        let stride = words_for(self.n).max(1);
        let top = mask_last_word(self.n, stride);
        if self.n <= 32 {
            // A 32-bit draw covers the whole point; skipping the unused
            // half of each 64-bit draw nearly halves generator time at
            // the sample counts the estimation tester asks for.
            for _ in 0..count {
                batch.push_word(u64::from(rng.next_u32()) & top);
            }
            return;
        }
        let mut row = vec![0u64; stride];
        for _ in 0..count {
            for w in row.iter_mut() {
                *w = rng.next_u64();
            }
            row[stride - 1] &= top;
            batch.push_row(&row).expect("stride fixed");
        }
    }

    fn fill_histogram(
        &mut self,
        counts: &mut [u32],
        count: usize,
        rng: &mut TrialRng,
    ) -> Result<(), SourceExhausted> {
        assert!(counts.len() == 1usize << self.n, "one count slot per point");
        assert!(count < u32::MAX as usize, "histogram slots could wrap");
        if self.n > 24 {
            return fill_histogram_via_rows(self, counts, count, rng);
        }
        // Bulk generator bytes, smallest whole number of bytes per point.
        let bytes_per = self.n.div_ceil(8);
        let mask = (counts.len() - 1) as u32;
        let chunk = 1usize << 14;
        let mut buf = vec![0u8; chunk * bytes_per];
        let mut left = count;
        while left > 0 {
            let take = left.min(chunk);
            let used = &mut buf[..take * bytes_per];
            rng.fill_bytes(used);
            match bytes_per {
                1 => {
                    for b in used.iter() {
                        counts[(u32::from(*b) & mask) as usize] += 1;
                    }
                }
                2 => {
                    for pair in used.chunks_exact(2) {
                        let x = u32::from(u16::from_le_bytes([pair[0], pair[1]]));
                        counts[(x & mask) as usize] += 1;
                    }
                }
                _ => {
                    for trio in used.chunks_exact(3) {
                        let x = u32::from(trio[0])
                            | u32::from(trio[1]) << 8
                            | u32::from(trio[2]) << 16;
                        counts[(x & mask) as usize] += 1;
                    }
                }
            }
            left -= take;
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!("uniform(n={})", self.n)
    }
}

/// The density `1 + coeff * x^S` for a single subset mask `S`, sampled in
/// constant time per point: draw the parity sign with the right bias,
/// then a uniform string conditioned on it.  The mask must live in the
/// low 64 coordinates.
pub struct ParityPlantedSource {
    n: usize,
    mask: u64,
    coeff: f64,
    /// Bernoulli threshold: the parity sign comes out `+1` exactly when
    /// a fresh 32-bit word is below this.
    thresh: u64,
}

impl ParityPlantedSource {
    pub fn new(n: usize, mask: u64, coeff: f64) -> Self {
        assert!(mask != 0, "empty parity set");
        assert!(coeff.abs() <= 1.0, "coefficient out of range");
        assert!(
            n >= 64 || mask < (1u64 << n),
            "mask outside the first n coordinates"
        );
        let thresh = (((1.0 + coeff) / 2.0) * 4_294_967_296.0).round() as u64;
        ParityPlantedSource {
            n,
            mask,
            coeff,
            thresh,
        }
    }

    /// The parity coefficient actually sampled: the requested one
    /// rounded to a multiple of `2^-31`.  Use this, not the requested
    /// value, when computing the exact low-level weight of the source.
    pub fn effective_coeff(&self) -> f64 {
        2.0 * (self.thresh as f64 / 4_294_967_296.0) - 1.0
    }

    #[inline]
    fn plant(&self, raw: u64, bern: u64, flip_bit: u64) -> u64 {
        // flip so the parity sign matches the drawn Bernoulli
        let want_plus = (bern < self.thresh) as u64;
        let parity = u64::from((raw & self.mask).count_ones()) & 1;
        raw ^ (flip_bit * (parity ^ want_plus ^ 1))
    }
}

impl SampleSource for ParityPlantedSource {
    fn n(&self) -> usize {
        self.n
    }

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, rng: &mut TrialRng) {
        let stride = words_for(self.n).max(1);
        let top = mask_last_word(self.n, stride);
        let flip_bit = 1u64 << self.mask.trailing_zeros();
        if self.n <= 32 {
            // One generator word per point: low half is the string, high
            // half drives the parity sign.
            for _ in 0..count {
                let r = rng.next_u64();
                let word = self.plant((r & 0xFFFF_FFFF) & top, r >> 32, flip_bit);
                batch.push_word(word);
            }
            return;
        }
        let mut row = vec![0u64; stride];
        for _ in 0..count {
            let bern = u64::from(rng.next_u32());
            for w in row.iter_mut() {
                *w = rng.next_u64();
            }
            row[stride - 1] &= top;
            row[0] = self.plant(row[0], bern, flip_bit);
            batch.push_row(&row).expect("stride fixed");
        }
    }

    fn fill_histogram(
        &mut self,
        counts: &mut [u32],
        count: usize,
        rng: &mut TrialRng,
    ) -> Result<(), SourceExhausted> {
        assert!(counts.len() == 1usize << self.n, "one count slot per point");
        assert!(count < u32::MAX as usize, "histogram slots could wrap");
        if self.n > 32 {
            return fill_histogram_via_rows(self, counts, count, rng);
        }
        let top = mask_last_word(self.n, 1);
        let flip_bit = 1u64 << self.mask.trailing_zeros();
        for _ in 0..count {
            let r = rng.next_u64();
            let word = self.plant((r & 0xFFFF_FFFF) & top, r >> 32, flip_bit);
            counts[word as usize] += 1;
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!(
            "parity(n={},mask={:#x},coeff={})",
            self.n, self.mask, self.coeff
        )
    }
}

/// Returns one fixed point over and over; the degenerate adversary for
/// pair-based tests.
pub struct ConstantSource {
    n: usize,
    row: Vec<u64>,
}

impl ConstantSource {
    pub fn all_minus_one(n: usize) -> Self {
        let stride = words_for(n).max(1);
        let mut row = vec![u64::MAX; stride];
        row[stride - 1] &= mask_last_word(n, stride);
        ConstantSource { n, row }
    }
}

impl SampleSource for ConstantSource {
    fn n(&self) -> usize {
        self.n
    }

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, _rng: &mut TrialRng) {
        for _ in 0..count {
            batch.push_row(&self.row).expect("stride fixed");
        }
    }

    fn label(&self) -> String {
        format!("constant(n={})", self.n)
    }
}

/// Replays a recorded batch in order; exhausts when the recording ends.
pub struct ReplaySource {
    batch: SampleBatch,
    pos: usize,
}

impl ReplaySource {
    pub fn new(batch: SampleBatch) -> Self {
        ReplaySource { batch, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.batch.len() - self.pos
    }
}

impl SampleSource for ReplaySource {
    fn n(&self) -> usize {
        self.batch.n()
    }

    /// Appends as many of the requested rows as remain; use
    /// [`try_fill`](SampleSource::try_fill) to treat a shortfall as an
    /// error instead.
    fn fill(&mut self, batch: &mut SampleBatch, count: usize, _rng: &mut TrialRng) {
        let take = count.min(self.remaining());
        for _ in 0..take {
            batch.push_row(self.batch.row(self.pos)).expect("same n");
            self.pos += 1;
        }
    }

    fn try_fill(
        &mut self,
        batch: &mut SampleBatch,
        count: usize,
        rng: &mut TrialRng,
    ) -> Result<(), SourceExhausted> {
        if count > self.remaining() {
            return Err(SourceExhausted {
                label: self.label(),
                available: self.remaining(),
                requested: count,
            });
        }
        self.fill(batch, count, rng);
        Ok(())
    }

    fn label(&self) -> String {
        format!("replay(n={},m={})", self.batch.n(), self.batch.len())
    }
}
