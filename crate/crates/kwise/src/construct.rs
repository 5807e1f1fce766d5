//! Distribution families used to probe the testers: symmetric top-level
//! tilts that are nearly k-wise uniform yet far in total variation,
//! pairwise tilts hidden by random shifting, the fixed-suffix mending
//! blocks, and seeded perturbation families for experiments.

use crate::bits::{mask_last_word, words_for, SampleBatch};
use crate::density::{Density, DensityError, Spectrum};
use crate::poly::{ln_binomial, KrawtchoukTable};
use crate::sampling::{trial_rng, unit_f64, DensitySampler, SampleSource, TrialRng};
use rand_core::RngCore;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstructError {
    #[error("k must be even and in [2, n]; got k = {k}, n = {n}")]
    KRange { n: usize, k: usize },
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("index j = {j} out of range [1, {n}]")]
    JRange { n: usize, j: usize },
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Parameters of the symmetric level-`k` tilt
/// `phi(x) = 1 + mu C(n,k)^{-1/2} sum_{|S|=k} x^S`.
///
/// `mu = sqrt(k!) / (2 (c k)^k)` and every level-`k` coefficient equals
/// `eps = mu C(n,k)^{-1/2}`, so the density is `(eps, k)`-wise uniform
/// while its distance from true k-wise uniformity stays bounded below.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundParams {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub mu: f64,
    pub eps: f64,
}

impl LowerBoundParams {
    pub fn new(n: usize, k: usize, c: f64) -> Result<Self, ConstructError> {
        if k < 2 || k > n || k % 2 != 0 {
            return Err(ConstructError::KRange { n, k });
        }
        if !(c >= 1.0) {
            return Err(ConstructError::Parameter {
                name: "c",
                value: c,
                reason: "needs c >= 1",
            });
        }
        let kf = k as f64;
        // log space: (ck)^k and k! overflow f64 long before mu stops
        // being representable
        let ln_mu = 0.5 * crate::poly::ln_factorial(k) - std::f64::consts::LN_2
            - kf * (c * kf).ln();
        let mu = ln_mu.exp();
        let eps = (ln_mu - 0.5 * ln_binomial(n, k)).exp();
        if mu >= 2f64.powf(-1.5 * kf) {
            // The analysis behind the family wants mu below 2^(-3k/2);
            // the density itself only needs a nonnegative profile, which
            // the builder checks pointwise, so this is a warning.
            log::warn!(
                "mu = {mu} is not below 2^(-3k/2) = {}; distance guarantees weaken",
                2f64.powf(-1.5 * kf)
            );
        }
        Ok(LowerBoundParams { n, k, c, mu, eps })
    }

    /// True when `mu < 2^(-3k/2)`, the regime the distance lower bound
    /// was proved in.  `c = 4` comfortably satisfies it for every k.
    pub fn mu_within_analysis_bound(&self) -> bool {
        self.mu < 2f64.powf(-1.5 * self.k as f64)
    }
}

/// Builds the symmetric tilt of [`LowerBoundParams`] as a profile over
/// weight classes: `profile(t) = 1 + mu C(n,k)^{-1/2} K_k(t)`.  Fails
/// with the offending class if any profile value is meaningfully
/// negative at finite `n`.
pub fn theorem12_density(p: &LowerBoundParams) -> Result<Density, ConstructError> {
    let table = KrawtchoukTable::new(p.n, p.k).expect("k <= n checked");
    let scale = p.mu * (-0.5 * ln_binomial(p.n, p.k)).exp();
    let profile: Vec<f64> = (0..=p.n).map(|t| 1.0 + scale * table.value(p.k, t)).collect();
    Ok(Density::from_profile(p.n, profile)?)
}

/// Smallest profile value of the tilt before clamping; negative values
/// here mean the family breaks down at this `(n, k, c)`.
pub fn theorem12_min_profile(p: &LowerBoundParams) -> f64 {
    let table = KrawtchoukTable::new(p.n, p.k).expect("k <= n checked");
    let scale = p.mu * (-0.5 * ln_binomial(p.n, p.k)).exp();
    (0..=p.n)
        .map(|t| 1.0 + scale * table.value(p.k, t))
        .fold(f64::INFINITY, f64::min)
}

/// The pairwise tilt `1 + (delta/n) sum_{i<j} x_i x_j` as a symmetric
/// profile; every level-2 coefficient is `delta/n`.
pub fn pairwise_density(n: usize, delta: f64) -> Result<Density, ConstructError> {
    if n < 2 {
        return Err(ConstructError::KRange { n, k: 2 });
    }
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(ConstructError::Parameter {
            name: "delta",
            value: delta,
            reason: "profile goes negative outside (0, 2]",
        });
    }
    let table = KrawtchoukTable::new(n, 2).expect("n >= 2");
    let profile: Vec<f64> = (0..=n)
        .map(|t| 1.0 + delta / n as f64 * table.value(2, t))
        .collect();
    Ok(Density::from_profile(n, profile)?)
}

/// Tuple experiment parameters: `m` samples per trial from a randomly
/// shifted copy of the pairwise tilt.
#[derive(Debug, Clone, Copy)]
pub struct PairwiseShiftParams {
    pub n: usize,
    pub delta: f64,
    pub m: usize,
}

impl PairwiseShiftParams {
    /// `m delta^2 / n`; the tuple distribution stays statistically close
    /// to uniform while this is small.
    pub fn regime_ratio(&self) -> f64 {
        self.m as f64 * self.delta * self.delta / self.n as f64
    }
}

/// Chi-square divergence between the distribution of a shifted
/// `m`-sample tuple and a uniform tuple:
/// `sum_t 2^-n C(n,t) (1 + (delta^2/n^2) K_2(t))^m - 1`,
/// accumulated in log space so extreme `m` degrades to `inf` instead of
/// wrapping.
pub fn chi2_tuple_vs_uniform(p: &PairwiseShiftParams) -> Result<f64, ConstructError> {
    if !(p.delta > 0.0 && p.delta <= 2.0) {
        return Err(ConstructError::Parameter {
            name: "delta",
            value: p.delta,
            reason: "profile goes negative outside (0, 2]",
        });
    }
    let n = p.n;
    let table = KrawtchoukTable::new(n, 2).expect("n >= 2");
    let u_over = p.delta * p.delta / (n as f64 * n as f64);
    let m = p.m as f64;
    // ln of each weight-class term
    let ln_terms: Vec<f64> = (0..=n)
        .map(|t| {
            let u = u_over * table.value(2, t);
            crate::density::ln_class_weight(n, t) + m * u.ln_1p()
        })
        .collect();
    let peak = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak > 0.5 {
        // far regime: the -1 is negligible next to the sum
        let s: f64 = ln_terms.iter().map(|lt| (lt - peak).exp()).sum();
        Ok((peak + s.ln()).exp() - 1.0)
    } else {
        // near-uniform regime: sum w_t * ((1+u)^m - 1) keeps precision
        let mut acc = 0.0;
        for t in 0..=n {
            let u = u_over * table.value(2, t);
            acc += crate::density::ln_class_weight(n, t).exp() * (m * u.ln_1p()).exp_m1();
        }
        Ok(acc)
    }
}

/// Geometric-series bound `sum_{l>=1} (m delta^2 / n)^l` on the
/// chi-square divergence; `inf` once the ratio reaches 1.
pub fn chi2_geometric_bound(p: &PairwiseShiftParams) -> f64 {
    let r = p.regime_ratio();
    if r >= 1.0 {
        f64::INFINITY
    } else {
        r / (1.0 - r)
    }
}

/// Wraps a source, XORing a fresh uniform shift into every sample of a
/// trial.  Each trial sees one shared shift, so the marginal per trial
/// is the shifted density, matching the tuple experiment.
pub struct ShiftedSource<S: SampleSource> {
    base: S,
    shift: Vec<u64>,
}

impl<S: SampleSource> ShiftedSource<S> {
    pub fn new(base: S) -> Self {
        let stride = words_for(base.n()).max(1);
        ShiftedSource {
            base,
            shift: vec![0u64; stride],
        }
    }

    pub fn current_shift(&self) -> &[u64] {
        &self.shift
    }
}

impl<S: SampleSource> SampleSource for ShiftedSource<S> {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn begin_trial(&mut self, rng: &mut TrialRng) {
        self.base.begin_trial(rng);
        let stride = self.shift.len();
        for w in self.shift.iter_mut() {
            *w = rng.next_u64();
        }
        self.shift[stride - 1] &= mask_last_word(self.base.n(), stride);
    }

    fn fill(&mut self, batch: &mut SampleBatch, count: usize, rng: &mut TrialRng) {
        let start = batch.len();
        self.base.fill(batch, count, rng);
        for i in start..batch.len() {
            batch.xor_row_in_place(i, &self.shift);
        }
    }

    fn label(&self) -> String {
        format!("shifted({})", self.base.label())
    }
}

/// Sampler for the tuple experiment: pairwise tilt, fresh shift per trial.
pub fn pairwise_shifted_source(
    n: usize,
    delta: f64,
) -> Result<ShiftedSource<DensitySampler>, ConstructError> {
    let d = pairwise_density(n, delta)?;
    Ok(ShiftedSource::new(DensitySampler::new(&d)))
}

/// The mending block `psi_j`: uniform on coordinates below `j`
/// (1-indexed), constantly `-1` on coordinates `j..=n`.  Every
/// first-level coefficient at or past `j` equals `-1`.
pub fn psi_j_density(n: usize, j: usize) -> Result<Density, ConstructError> {
    if j < 1 || j > n {
        return Err(ConstructError::JRange { n, j });
    }
    let fixed: u64 = ((1u64 << (n - j + 1)) - 1) << (j - 1);
    let value = (1u64 << (n - j + 1)) as f64;
    let values: Vec<f64> = (0u64..1 << n)
        .map(|x| if x & fixed == fixed { value } else { 0.0 })
        .collect();
    Ok(Density::from_values(n, values)?)
}

/// Shapes for seeded near-uniform families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbShape {
    /// `1 + eps x_1`: all the low-level mass on one singleton.
    SingleSet,
    /// `1 + eps sum_{|S|=k} sigma_S x^S` with seeded random signs.
    RandomSignsLevelK,
    /// `(1 - eps) uniform + eps (point mass)`: every nonempty bias has
    /// magnitude exactly `eps`, and the distance from uniform is large.
    PlantedMixture,
}

/// Seeded family of densities with all biases on levels `1..=k` of
/// magnitude at most `eps`.  Shapes that can go pointwise negative
/// (random signs at large `eps`) report it as a density error.
pub fn epsilon_perturbed_family(
    n: usize,
    k: usize,
    eps: f64,
    shape: PerturbShape,
    seed: u64,
) -> Result<Density, ConstructError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(ConstructError::Parameter {
            name: "eps",
            value: eps,
            reason: "needs eps in [0, 1]",
        });
    }
    if k < 1 || k > n {
        return Err(ConstructError::KRange { n, k });
    }
    let mut rng = trial_rng(seed);
    match shape {
        PerturbShape::SingleSet => {
            let values: Vec<f64> = (0u64..1 << n)
                .map(|x| 1.0 + eps * crate::bits::parity_sign(x, 1))
                .collect();
            Ok(Density::from_values(n, values)?)
        }
        PerturbShape::RandomSignsLevelK => {
            let mut coeffs = vec![0.0; 1 << n];
            coeffs[0] = 1.0;
            for mask in 1u64..1 << n {
                if mask.count_ones() as usize == k {
                    let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                    coeffs[mask as usize] = eps * sign;
                }
            }
            let spec = Spectrum::from_coefficients(n, coeffs)?;
            Ok(spec.density()?)
        }
        PerturbShape::PlantedMixture => {
            let x0 = rng.next_u64() & ((1u64 << n) - 1);
            let point = (1u64 << n) as f64;
            let values: Vec<f64> = (0u64..1 << n)
                .map(|x| (1.0 - eps) + if x == x0 { eps * point } else { 0.0 })
                .collect();
            Ok(Density::from_values(n, values)?)
        }
    }
}

/// A seeded unstructured density: independent exponential weights,
/// normalized to mean 1.  Fodder for randomized solver tests.
pub fn random_density(n: usize, seed: u64) -> Density {
    let mut rng = trial_rng(seed);
    let weights: Vec<f64> = (0..1usize << n)
        .map(|_| -(-unit_f64(&mut rng)).ln_1p())
        .collect();
    Density::normalized_from_weights(n, weights).expect("positive weights")
}
