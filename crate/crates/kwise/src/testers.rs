//! Sample-based tests: the pair statistic and its exact all-pairs
//! average, the low-weight estimation test, the distance tester built on
//! it, the skewed-pair filter, and the two-stage combined algorithm,
//! plus the Monte-Carlo harness that measures their error rates.

use crate::bits::SampleBatch;
use crate::density::{Density, DensityError};
use crate::poly::{binomial, KrawtchoukTable, PolyError};
use crate::sampling::{trial_rng, trial_seed, SampleSource, SourceExhausted, TrialRng};
use serde::Serialize;
use thiserror::Error;

/// Caps for the exact second-moment computation.
pub const L_K_MAX_N: usize = 14;
pub const L_K_MAX_K: usize = 4;
/// Largest `n` for which the all-pairs statistic may be computed through
/// a value histogram instead of a pair loop.
pub const HISTOGRAM_MAX_N: usize = 22;

/// Every analysis constant, named and overridable.  Defaults are the
/// proven values; shrinking them voids the guarantees but makes
/// desk-scale Monte-Carlo runs affordable, which is exactly what the
/// `enforce_sample_bound` escape hatch is for.
#[derive(Debug, Clone, Serialize)]
pub struct Knobs {
    /// Multiplier in the estimation sample bound
    /// `m >= estimation_coeff * 2^k sqrt(A) n^{k/2} / theta`.
    pub estimation_coeff: f64,
    /// Leading constant in the two-stage threshold parameter `t`.
    pub overall_t_coeff: f64,
    /// Skew-probability constant: densities whose pair-skew probability
    /// is at least `skew_prob_coeff / m1^2` are filter-rejectable.
    pub skew_prob_coeff: f64,
    /// The estimation stage of the two-stage algorithm gets
    /// `m1 / m2_divisor` samples.
    pub m2_divisor: f64,
    /// Safety margin on the level-weight bound `A` passed to the
    /// estimation stage of the two-stage algorithm.
    pub a_margin: f64,
    /// The filter budget satisfies `m1^2 <= t^kbar / (filter_budget_divisor * kbar^{kbar/2})`.
    pub filter_budget_divisor: f64,
    /// When set, estimation refuses sample counts below the proven
    /// bound; clear it to run reduced-scale experiments.
    pub enforce_sample_bound: bool,
    /// Experimental: size the distance tester by the conjectured
    /// `(O(1)/k)^{k/2} n^k / delta^2` complexity instead of the proven
    /// `2^{O(k)}` one.  No guarantee is attached to this path.
    pub sharp: bool,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            estimation_coeff: 1000.0,
            overall_t_coeff: 1e11,
            skew_prob_coeff: 1e7,
            m2_divisor: 200.0,
            a_margin: 1.01,
            filter_budget_divisor: 5.0,
            enforce_sample_bound: true,
            sharp: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum TesterError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("sample count {m} is below the proven bound {required:.3e} for these parameters")]
    SampleBound { m: usize, required: f64 },
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    BadParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("{context}: computed sample budget {computed:.3e} does not fit a machine integer")]
    Overflow { context: &'static str, computed: f64 },
    #[error("no threshold in [{lo}, {hi}] satisfies the false-rejection constraint")]
    NoCalibration { lo: f64, hi: f64 },
    #[error("cap exceeded: {what} = {got} (limit {max})")]
    SizeCap {
        what: &'static str,
        got: usize,
        max: usize,
    },
    #[error(transparent)]
    Exhausted(#[from] SourceExhausted),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// The pair function `F(x, y) = sum over nonempty subsets S of size at
/// most k of x^S y^S`, tabulated by Hamming distance:
/// `F(x, y) = sum_{j=1..k} K_j(d(x, y))`.
#[derive(Debug, Clone)]
pub struct PairKernel {
    n: usize,
    k: usize,
    by_distance: Vec<f64>,
}

impl PairKernel {
    pub fn new(n: usize, k: usize) -> Result<Self, TesterError> {
        if k < 1 || k > n {
            return Err(TesterError::BadParameter {
                name: "k",
                value: k as f64,
                reason: "needs 1 <= k <= n",
            });
        }
        let table = KrawtchoukTable::new(n, k)?;
        let by_distance = (0..=n)
            .map(|d| (1..=k).map(|j| table.value(j, d)).sum())
            .collect();
        Ok(PairKernel { n, k, by_distance })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `F` for a pair at Hamming distance `d`; `O(1)` after the table
    /// build, never a subset enumeration.
    pub fn at_distance(&self, d: usize) -> f64 {
        self.by_distance[d]
    }

    /// `F` on rows `i`, `j` of a batch.
    pub fn eval(&self, batch: &SampleBatch, i: usize, j: usize) -> f64 {
        self.by_distance[batch.hamming(i, j) as usize]
    }
}

/// Whether the all-pairs average for given sizes goes through the value
/// histogram (exact same sum, grouped by XOR) or the literal pair loop.
/// Deterministic in `(n, m)` so identical runs take identical paths.
pub fn histogram_path(n: usize, m: usize) -> bool {
    if n > HISTOGRAM_MAX_N || m < 2 {
        return false;
    }
    let histogram_cost = (n as f64 + 2.0) * (1u64 << n) as f64;
    let pair_cost = 0.5 * m as f64 * (m as f64 - 1.0) * (crate::bits::words_for(n).max(1) as f64 + 1.0);
    histogram_cost < pair_cost
}

pub(crate) fn delta_pairs(batch: &SampleBatch, kernel: &PairKernel) -> f64 {
    let m = batch.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            acc += kernel.eval(batch, i, j);
        }
    }
    acc / (0.5 * m as f64 * (m as f64 - 1.0))
}

/// All-pairs sum through the XOR autocorrelation of the value histogram:
/// with `c` the histogram, `G = WHT(WHT(c)^2) / 2^n` counts ordered pairs
/// (including self-pairs) at each XOR offset, and every pair at offset
/// `z` contributes `F(popcount(z))`.  Exactly the pair-exhaustive sum,
/// reorganized; float error stays relative (~`n * 2^-52`) because every
/// accumulated quantity is a nonnegative count.
pub(crate) fn delta_histogram(counts: &mut [f64], m: usize, kernel: &PairKernel) -> f64 {
    let nn = counts.len();
    crate::density::wht_inplace(counts);
    for c in counts.iter_mut() {
        *c *= *c;
    }
    crate::density::wht_inplace(counts);
    // counts[z] now holds 2^n * G(z)
    let mut ordered = 0.0;
    for (z, g) in counts.iter().enumerate() {
        ordered += g * kernel.at_distance(z.count_ones() as usize);
    }
    ordered /= nn as f64;
    let pair_sum = 0.5 * (ordered - m as f64 * kernel.at_distance(0));
    pair_sum / (0.5 * m as f64 * (m as f64 - 1.0))
}

pub(crate) fn counts_from_batch(batch: &SampleBatch) -> Vec<f64> {
    let mut counts = vec![0.0; 1usize << batch.n()];
    for i in 0..batch.len() {
        counts[batch.row(i)[0] as usize] += 1.0;
    }
    counts
}

/// Average of the pair function over all `C(m,2)` unordered sample
/// pairs — an unbiased estimator of the squared low-level Fourier mass
/// of the sampled density.  Every pair participates; the histogram path
/// only regroups the same sum.
pub fn delta_statistic(batch: &SampleBatch, k: usize) -> Result<f64, TesterError> {
    let m = batch.len();
    if m < 2 {
        return Err(TesterError::TooFewSamples { got: m, need: 2 });
    }
    let kernel = PairKernel::new(batch.n(), k)?;
    if histogram_path(batch.n(), m) {
        let mut counts = counts_from_batch(batch);
        Ok(delta_histogram(&mut counts, m, &kernel))
    } else {
        Ok(delta_pairs(batch, &kernel))
    }
}

/// Draws `m` samples from the source and computes the all-pairs average,
/// streaming through the histogram when the path choice allows it (the
/// batch then never materializes).
pub fn delta_from_source<S: SampleSource + ?Sized>(
    source: &mut S,
    m: usize,
    k: usize,
    rng: &mut TrialRng,
) -> Result<f64, TesterError> {
    if m < 2 {
        return Err(TesterError::TooFewSamples { got: m, need: 2 });
    }
    let n = source.n();
    let kernel = PairKernel::new(n, k)?;
    if histogram_path(n, m) {
        if m >= u32::MAX as usize {
            return Err(TesterError::Overflow {
                context: "histogram sample count",
                computed: m as f64,
            });
        }
        let mut raw = vec![0u32; 1usize << n];
        source.fill_histogram(&mut raw, m, rng)?;
        let mut counts: Vec<f64> = raw.into_iter().map(f64::from).collect();
        Ok(delta_histogram(&mut counts, m, &kernel))
    } else {
        let mut batch = SampleBatch::with_capacity(n, m);
        source.try_fill(&mut batch, m, rng)?;
        Ok(delta_pairs(&batch, &kernel))
    }
}

/// Number of subset pairs `(S1, S2)`, both nonempty of size at most `k`,
/// with `|S1 xor S2| = s`: split `S1` into `a` elements inside the
/// symmetric difference and `t` outside (shared with `S2`), so `S2` has
/// the remaining `b = s - a` plus the same `t`.
pub fn xor_pair_multiplicity(n: usize, k: usize, s: usize) -> f64 {
    if s > n || s > 2 * k {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..=s {
        let b = s - a;
        if a > k || b > k {
            continue;
        }
        let t_min = usize::from(a == 0 || b == 0);
        let t_max = k - a.max(b);
        let mut inner = 0.0;
        let mut t = t_min;
        while t <= t_max {
            inner += binomial(n - s, t);
            t += 1;
        }
        total += binomial(s, a) * inner;
    }
    total
}

/// The exact second moment `L_k = sum over pairs (S1, S2) of
/// phi_hat(S1 xor S2)^2`, via multiplicity counting per symmetric
/// difference size.
pub fn l_k(phi: &Density, k: usize) -> Result<f64, TesterError> {
    let n = phi.n();
    if n > L_K_MAX_N {
        return Err(TesterError::SizeCap {
            what: "n",
            got: n,
            max: L_K_MAX_N,
        });
    }
    if k > L_K_MAX_K || k < 1 || k > n {
        return Err(TesterError::SizeCap {
            what: "k",
            got: k,
            max: L_K_MAX_K.min(n),
        });
    }
    let phi = phi.expand_explicit()?;
    let mut total = 0.0;
    for s in 0..=(2 * k).min(n) {
        let mult = xor_pair_multiplicity(n, k, s);
        if mult > 0.0 {
            total += mult * phi.fourier_weight(s, s)?;
        }
    }
    Ok(total)
}

/// `2^{2k+2} A n^k`: the bound on `L_k` under the level-weight promise
/// `W^i <= A n^{i/2}` for all `i <= 2k`.
pub fn l_k_upper_bound(n: usize, k: usize, a: f64) -> f64 {
    4.0 * 4f64.powi(k as i32) * a * (n as f64).powi(k as i32)
}

/// Mean of the all-pairs statistic under i.i.d. draws: the low-level
/// squared Fourier mass `W^{1..k}`.
pub fn delta_mean(phi: &Density, k: usize) -> Result<f64, TesterError> {
    Ok(phi.fourier_weight(1, k.min(phi.n()))?)
}

/// Variance bound `(4/m^2) L_k + (4/m) sqrt(L_k) mean` for the
/// all-pairs statistic over `m` i.i.d. samples.
pub fn delta_variance_bound(l_k: f64, mean: f64, m: usize) -> f64 {
    let mf = m as f64;
    4.0 / (mf * mf) * l_k + 4.0 / mf * l_k.sqrt() * mean
}

/// Exact variance of the all-pairs statistic over `m` i.i.d. samples,
/// from the spectrum: pair variance plus the covariance of pairs that
/// share one sample.
pub fn delta_variance_exact(phi: &Density, k: usize, m: usize) -> Result<f64, TesterError> {
    if m < 2 {
        return Err(TesterError::TooFewSamples { got: m, need: 2 });
    }
    let n = phi.n();
    if n > L_K_MAX_N {
        return Err(TesterError::SizeCap {
            what: "n",
            got: n,
            max: L_K_MAX_N,
        });
    }
    let phi = phi.expand_explicit()?;
    let spec = phi.spectrum()?;
    let low: Vec<u64> = (1u64..1 << n)
        .filter(|s| (s.count_ones() as usize) <= k)
        .collect();
    let mean: f64 = low.iter().map(|s| spec.coefficient(*s).powi(2)).sum();
    let l = l_k(&phi, k)?;
    let var_pair = l - mean * mean;
    let mut second = 0.0;
    for &s1 in &low {
        for &s2 in &low {
            second += spec.coefficient(s1 ^ s2) * spec.coefficient(s1) * spec.coefficient(s2);
        }
    }
    let cov_share = second - mean * mean;
    let mf = m as f64;
    let pairs = 0.5 * mf * (mf - 1.0);
    Ok((var_pair + 2.0 * (mf - 2.0) * cov_share) / pairs)
}

/// Parameters of the low-weight estimation test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimationParams {
    pub k: usize,
    /// Decision threshold on the squared low-level mass.
    pub theta: f64,
    /// Level-weight bound parameter: the promise `W^i <= A n^{i/2}`.
    pub a: f64,
    /// Sample count.
    pub m: usize,
}

/// The proven sample requirement
/// `estimation_coeff * 2^k sqrt(A) n^{k/2} / theta`.
pub fn estimation_sample_bound(n: usize, p: &EstimationParams, knobs: &Knobs) -> f64 {
    knobs.estimation_coeff * 2f64.powi(p.k as i32) * p.a.sqrt()
        * (n as f64).powf(p.k as f64 / 2.0)
        / p.theta
}

impl EstimationParams {
    fn validate(&self, n: usize, knobs: &Knobs) -> Result<(), TesterError> {
        if self.m < 2 {
            return Err(TesterError::TooFewSamples {
                got: self.m,
                need: 2,
            });
        }
        if !(self.theta > 0.0) {
            return Err(TesterError::BadParameter {
                name: "theta",
                value: self.theta,
                reason: "needs theta > 0",
            });
        }
        if !(self.a >= 1.0) {
            return Err(TesterError::BadParameter {
                name: "a",
                value: self.a,
                reason: "needs A >= 1",
            });
        }
        if knobs.enforce_sample_bound {
            let required = estimation_sample_bound(n, self, knobs);
            if (self.m as f64) < required {
                return Err(TesterError::SampleBound {
                    m: self.m,
                    required,
                });
            }
        }
        Ok(())
    }
}

/// Which way a test decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    /// Estimation: the squared low-level mass is on the small side.
    Low,
    /// Estimation: the mass is on the large side.
    High,
    Accept,
    Reject,
}

impl Decision {
    pub fn is_positive(self) -> bool {
        matches!(self, Decision::Low | Decision::Accept)
    }
}

/// Outcome of one test run.  The decision is a pure function of
/// `statistic` and the test's threshold, so it can be re-derived.
#[derive(Debug, Clone, Serialize)]
pub struct TesterVerdict {
    pub decision: Decision,
    /// The realized all-pairs average, or the signed inner product of
    /// the deciding pair for the filter.
    pub statistic: f64,
    pub samples_used: usize,
    pub seed: u64,
    /// For a filter rejection: the indices of the first skewed pair.
    pub witness_pair: Option<(usize, usize)>,
}

/// Decides whether the squared low-level Fourier mass of the source's
/// density is small: draws `m` samples, averages the pair function over
/// all pairs, reports `Low` iff the average is at most `3 theta / 4`.
/// Distinguishes mass `<= theta/2` from mass `> theta` with probability
/// at least 3/4 when `m` meets the bound.
pub fn estimation_test<S: SampleSource + ?Sized>(
    source: &mut S,
    p: &EstimationParams,
    knobs: &Knobs,
    seed: u64,
) -> Result<TesterVerdict, TesterError> {
    p.validate(source.n(), knobs)?;
    let mut rng = trial_rng(seed);
    source.begin_trial(&mut rng);
    let delta = delta_from_source(source, p.m, p.k, &mut rng)?;
    let decision = if delta <= 0.75 * p.theta {
        Decision::Low
    } else {
        Decision::High
    };
    Ok(TesterVerdict {
        decision,
        statistic: delta,
        samples_used: p.m,
        seed,
        witness_pair: None,
    })
}

/// Sample count for [`kwise_test`] at distance target `delta`:
/// the estimation bound at `theta = (delta / e^k)^2`, `A = n^k`, or the
/// conjectured sharper budget when `knobs.sharp` is set.
pub fn kwise_sample_size(
    n: usize,
    k: usize,
    delta: f64,
    knobs: &Knobs,
) -> Result<usize, TesterError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TesterError::BadParameter {
            name: "delta",
            value: delta,
            reason: "needs delta in (0, 1)",
        });
    }
    let nf = n as f64;
    let kf = k as f64;
    let m = if knobs.sharp {
        knobs.estimation_coeff * nf.powf(kf) / (kf.powf(kf / 2.0) * delta * delta)
    } else {
        let theta = (delta / kf.exp()).powi(2);
        let p = EstimationParams {
            k,
            theta,
            a: nf.powi(k as i32),
            m: 2,
        };
        estimation_sample_bound(n, &p, knobs)
    };
    if !m.is_finite() || m > 9.0e15 {
        return Err(TesterError::Overflow {
            context: "distance-tester sample size",
            computed: m,
        });
    }
    Ok((m.ceil() as usize).max(2))
}

/// Distance tester: accepts when the source looks k-wise uniform,
/// rejects when it is at total-variation distance more than `delta`
/// from every k-wise uniform density (each with probability at least
/// 3/4 at the default knobs).  Runs the estimation test at
/// `theta = (delta / e^k)^2`, `A = n^k`.
pub fn kwise_test<S: SampleSource + ?Sized>(
    source: &mut S,
    k: usize,
    delta: f64,
    m: usize,
    knobs: &Knobs,
    seed: u64,
) -> Result<TesterVerdict, TesterError> {
    let theta = (delta / (k as f64).exp()).powi(2);
    let p = EstimationParams {
        k,
        theta,
        a: (source.n() as f64).powi(k as i32),
        m,
    };
    let mut v = estimation_test(source, &p, knobs, seed)?;
    v.decision = if v.decision == Decision::Low {
        Decision::Accept
    } else {
        Decision::Reject
    };
    Ok(v)
}

/// Skewed-pair filter: draws `m1` samples and rejects iff any of the
/// `C(m1, 2)` pairs has `|sum_i x_i y_i| > t sqrt(n)`.  On rejection the
/// statistic and witness record the first skewed pair in scan order;
/// on acceptance the statistic is the largest inner product seen.
pub fn filter_test<S: SampleSource + ?Sized>(
    source: &mut S,
    t: f64,
    m1: usize,
    seed: u64,
) -> Result<TesterVerdict, TesterError> {
    if m1 < 2 {
        return Err(TesterError::TooFewSamples { got: m1, need: 2 });
    }
    if !(t > 0.0) {
        return Err(TesterError::BadParameter {
            name: "t",
            value: t,
            reason: "needs t > 0",
        });
    }
    let n = source.n();
    let mut rng = trial_rng(seed);
    source.begin_trial(&mut rng);
    let mut batch = SampleBatch::with_capacity(n, m1);
    source.try_fill(&mut batch, m1, &mut rng)?;
    let threshold = t * (n as f64).sqrt();
    let mut max_abs: i64 = i64::MIN;
    let mut max_signed: i64 = 0;
    for i in 0..m1 {
        for j in i + 1..m1 {
            let ip = batch.dot_pm(i, j);
            if (ip.abs() as f64) > threshold {
                return Ok(TesterVerdict {
                    decision: Decision::Reject,
                    statistic: ip as f64,
                    samples_used: m1,
                    seed,
                    witness_pair: Some((i, j)),
                });
            }
            if ip.abs() > max_abs {
                max_abs = ip.abs();
                max_signed = ip;
            }
        }
    }
    Ok(TesterVerdict {
        decision: Decision::Accept,
        statistic: max_signed as f64,
        samples_used: m1,
        seed,
        witness_pair: None,
    })
}

/// Probability that two independent draws from `phi` form a skewed pair
/// (`|sum_i x_i y_i| > t sqrt(n)`), computed exactly from the
/// distribution of the pair's XOR: densities whose skew probability is
/// at least `skew_prob_coeff / m1^2` are reliably caught by
/// [`filter_test`] at budget `m1`.
pub fn skew_probability(phi: &Density, t: f64) -> Result<f64, TesterError> {
    let n = phi.n();
    let conv = phi.convolve(phi)?;
    let conv = conv.expand_explicit()?;
    let threshold = t * (n as f64).sqrt();
    let nn = conv.values().len() as f64;
    let mut p = 0.0;
    for (z, v) in conv.values().iter().enumerate() {
        let ip = (n as i64 - 2 * (z as u64).count_ones() as i64).abs() as f64;
        if ip > threshold {
            p += v / nn;
        }
    }
    Ok(p)
}

/// How the two-stage algorithm was calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverallMode {
    /// The source promises its density is `alpha * k`-wise uniform.
    AlphaKwise { alpha: usize },
    /// No moment promise; the filter threshold comes from the Gaussian
    /// pair-tail of a fully uniform source.
    FullyUniform,
}

/// Calibrated parameters of the two-stage algorithm.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FilterParams {
    pub k: usize,
    /// Moment order backing the filter analysis (even).
    pub kbar: usize,
    /// Skew threshold multiplier on `sqrt(n)`.
    pub t: f64,
    /// Filter sample count.
    pub m1: usize,
    /// Estimation sample count.
    pub m2: usize,
    pub delta: f64,
    pub mode: OverallMode,
}

impl FilterParams {
    /// Threshold and weight-bound parameters of the estimation stage:
    /// `theta = (delta / e^k)^2`, `A = a_margin * t^{2k}`.
    pub fn estimation_params(&self, knobs: &Knobs) -> EstimationParams {
        EstimationParams {
            k: self.k,
            theta: (self.delta / (self.k as f64).exp()).powi(2),
            a: knobs.a_margin * self.t.powi(2 * self.k as i32),
            m: self.m2,
        }
    }
}

fn filter_budget(t: f64, kbar: usize, knobs: &Knobs) -> f64 {
    let kb = kbar as f64;
    // m1 = sqrt(t^kbar / (divisor * kbar^{kbar/2})), in logs
    (0.5 * (kb * t.ln() - knobs.filter_budget_divisor.ln() - 0.5 * kb * kb.ln())).exp()
}

/// Calibrates the two-stage algorithm under an `alpha * k`-wise
/// uniformity promise (`alpha > 4`): threshold
/// `t = (overall_t_coeff (4 e^4)^k kbar^{kbar/2} n^k / delta^4)^{1/(kbar - 2k)}`,
/// filter budget `m1` from the moment bound, estimation budget
/// `m2 = m1 / m2_divisor`.  An odd `alpha * k` is rounded up to the next
/// even moment order with a logged note.  Astronomical budgets are
/// reported as overflow errors carrying the computed `m1`.
pub fn overall_params(
    n: usize,
    k: usize,
    alpha: usize,
    delta: f64,
    knobs: &Knobs,
) -> Result<FilterParams, TesterError> {
    if k < 1 {
        return Err(TesterError::BadParameter {
            name: "k",
            value: k as f64,
            reason: "needs k >= 1",
        });
    }
    if alpha <= 4 {
        return Err(TesterError::BadParameter {
            name: "alpha",
            value: alpha as f64,
            reason: "the moment argument needs alpha > 4",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TesterError::BadParameter {
            name: "delta",
            value: delta,
            reason: "needs delta in (0, 1)",
        });
    }
    let mut kbar = alpha * k;
    if kbar % 2 != 0 {
        kbar += 1;
        log::info!("moment order alpha*k = {} is odd; rounded up to {kbar}", alpha * k);
    }
    let kf = k as f64;
    let kb = kbar as f64;
    let ln_t = (knobs.overall_t_coeff.ln()
        + kf * (4.0 * (4.0f64).exp()).ln()
        + 0.5 * kb * kb.ln()
        + kf * (n as f64).ln()
        - 4.0 * delta.ln())
        / (kb - 2.0 * kf);
    let t = ln_t.exp();
    if !t.is_finite() {
        return Err(TesterError::Overflow {
            context: "two-stage threshold",
            computed: t,
        });
    }
    let m1f = filter_budget(t, kbar, knobs);
    if !m1f.is_finite() || m1f > 9.0e15 {
        return Err(TesterError::Overflow {
            context: "two-stage filter budget m1",
            computed: m1f,
        });
    }
    let m1 = (m1f.floor() as usize).max(2);
    let m2 = ((m1 as f64 / knobs.m2_divisor).floor() as usize).max(2);
    Ok(FilterParams {
        k,
        kbar,
        t,
        m1,
        m2,
        delta,
        mode: OverallMode::AlphaKwise { alpha },
    })
}

/// Calibrates the two-stage algorithm with no moment promise: the
/// filter's false rejections are controlled by the Gaussian tail of
/// fully uniform pairs, so `t` is the smallest value in
/// `[1, 20 sqrt(log n)]` (64 bisection steps) with
/// `m1(t)^2 <= (1/10) e^{t^2/2}`, where `m1(t) = m2_divisor *` (the
/// estimation bound at `A = a_margin t^{2k}`).
pub fn overall_params_uniform(
    n: usize,
    k: usize,
    delta: f64,
    knobs: &Knobs,
) -> Result<FilterParams, TesterError> {
    if k < 1 {
        return Err(TesterError::BadParameter {
            name: "k",
            value: k as f64,
            reason: "needs k >= 1",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TesterError::BadParameter {
            name: "delta",
            value: delta,
            reason: "needs delta in (0, 1)",
        });
    }
    let theta = (delta / (k as f64).exp()).powi(2);
    let m1_needed = |t: f64| -> f64 {
        let p = EstimationParams {
            k,
            theta,
            a: knobs.a_margin * t.powi(2 * k as i32),
            m: 2,
        };
        knobs.m2_divisor * estimation_sample_bound(n, &p, knobs)
    };
    // feasibility margin: m1^2 <= (1/10) e^{t^2/2}, in logs
    let slack = |t: f64| -> f64 { 0.5 * t * t + (0.1f64).ln() - 2.0 * m1_needed(t).ln() };
    let lo = 1.0;
    let hi = (20.0 * (n.max(2) as f64).ln().sqrt()).max(lo + 1.0);
    if slack(hi) < 0.0 {
        return Err(TesterError::NoCalibration { lo, hi });
    }
    let (mut lo_t, mut hi_t) = (lo, hi);
    for _ in 0..64 {
        let mid = 0.5 * (lo_t + hi_t);
        if slack(mid) >= 0.0 {
            hi_t = mid;
        } else {
            lo_t = mid;
        }
    }
    let t = hi_t;
    let m1f = m1_needed(t);
    if !m1f.is_finite() || m1f > 9.0e15 {
        return Err(TesterError::Overflow {
            context: "two-stage filter budget m1",
            computed: m1f,
        });
    }
    let m1 = (m1f.ceil() as usize).max(2);
    let m2 = ((m1 as f64 / knobs.m2_divisor).floor() as usize).max(2);
    Ok(FilterParams {
        k,
        kbar: 0,
        t,
        m1,
        m2,
        delta,
        mode: OverallMode::FullyUniform,
    })
}

/// Both stages of the two-stage run, plus the combined verdict.
#[derive(Debug, Clone, Serialize)]
pub struct OverallOutcome {
    pub verdict: TesterVerdict,
    pub filter: TesterVerdict,
    pub estimation: Option<TesterVerdict>,
}

/// The two-stage algorithm: filter first (reject on any skewed pair),
/// then the estimation stage on fresh samples; accepts iff the filter
/// passes and the estimated mass is low.
pub fn overall_algorithm<S: SampleSource + ?Sized>(
    source: &mut S,
    params: &FilterParams,
    knobs: &Knobs,
    seed: u64,
) -> Result<OverallOutcome, TesterError> {
    let filter = filter_test(source, params.t, params.m1, seed)?;
    if filter.decision == Decision::Reject {
        let verdict = TesterVerdict {
            decision: Decision::Reject,
            statistic: filter.statistic,
            samples_used: filter.samples_used,
            seed,
            witness_pair: filter.witness_pair,
        };
        return Ok(OverallOutcome {
            verdict,
            filter,
            estimation: None,
        });
    }
    let ep = params.estimation_params(knobs);
    let est = estimation_test(source, &ep, knobs, trial_seed(seed, 1))?;
    let decision = if est.decision == Decision::Low {
        Decision::Accept
    } else {
        Decision::Reject
    };
    let verdict = TesterVerdict {
        decision,
        statistic: est.statistic,
        samples_used: filter.samples_used + est.samples_used,
        seed,
        witness_pair: None,
    };
    Ok(OverallOutcome {
        verdict,
        filter,
        estimation: Some(est),
    })
}

/// Majority vote over `repetitions` runs with per-repetition seeds from
/// the trial stream; pushes a 2/3 per-run success rate exponentially
/// close to 1.  Ties (even counts) go to reject.  Returns the vote and
/// the number of positive runs.
pub fn majority_vote<E, F>(repetitions: usize, base_seed: u64, mut run: F) -> Result<(bool, usize), E>
where
    F: FnMut(u64) -> Result<bool, E>,
{
    let mut positive = 0usize;
    for i in 0..repetitions {
        if run(trial_seed(base_seed, i as u64))? {
            positive += 1;
        }
    }
    Ok((2 * positive > repetitions, positive))
}

/// 95%-style Wilson score interval for `successes` out of `trials` at
/// normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One row of a Monte-Carlo error-rate table.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRateRow {
    pub construction: String,
    pub tester: String,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub m: usize,
    pub trials: usize,
    pub accept_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Runs `trials` independent repetitions of `trial` over the disjoint
/// per-trial seed stream, split across `threads`, and reports the
/// acceptance frequency with its Wilson interval.  Aggregation is a
/// count, so thread scheduling cannot affect the result.
#[allow(clippy::too_many_arguments)]
pub fn empirical_error_rate<F, E>(
    construction: &str,
    tester: &str,
    n: usize,
    k: usize,
    delta: f64,
    m: usize,
    trials: usize,
    base_seed: u64,
    threads: usize,
    trial: F,
) -> Result<ErrorRateRow, E>
where
    F: Fn(u64) -> Result<bool, E> + Sync,
    E: Send,
{
    let threads = threads.max(1).min(trials.max(1));
    let accepted = if threads == 1 {
        let mut acc = 0usize;
        for i in 0..trials {
            if trial(trial_seed(base_seed, i as u64))? {
                acc += 1;
            }
        }
        acc
    } else {
        let chunk = trials.div_ceil(threads);
        let results: Vec<Result<usize, E>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..threads {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(trials);
                let trial = &trial;
                handles.push(scope.spawn(move || {
                    let mut acc = 0usize;
                    for i in lo..hi {
                        if trial(trial_seed(base_seed, i as u64))? {
                            acc += 1;
                        }
                    }
                    Ok(acc)
                }));
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut acc = 0usize;
        for r in results {
            acc += r?;
        }
        acc
    };
    let (ci_low, ci_high) = wilson_interval(accepted, trials, 1.96);
    Ok(ErrorRateRow {
        construction: construction.to_string(),
        tester: tester.to_string(),
        n,
        k,
        delta,
        m,
        trials,
        accept_rate: accepted as f64 / trials.max(1) as f64,
        ci_low,
        ci_high,
        seed: base_seed,
    })
}
