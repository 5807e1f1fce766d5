//! Distances to, and tests for, low-degree uniformity of distributions
//! on the Boolean cube `{-1, 1}^n`.
//!
//! A distribution is *k-wise uniform* when every marginal on `k`
//! coordinates is uniform — equivalently, when every Fourier
//! coefficient of its density on levels `1..=k` vanishes.  This crate
//! covers that property from four sides:
//!
//! * **Representation** ([`Density`], [`Spectrum`]): densities stored
//!   pointwise (up to `n = 24`) or as symmetric weight-class profiles
//!   (arbitrary `n`; full-spectrum transforms cap at `n = 512`, level
//!   prefixes work far beyond), with transforms, convolution, shifts,
//!   biases, and total-variation distance.
//! * **Closeness** ([`closeness_exact`], [`mend_min_weight`],
//!   [`mend_1wise`]): the exact total-variation distance from a density
//!   to the set of k-wise uniform densities, by linear programming, with
//!   a degree-k dual witness extracted and re-certifiable on its own;
//!   plus mixture mending that cancels low-level coefficients and turns
//!   small bias into an explicit nearby k-wise density.
//! * **Testing** ([`kwise_test`], [`filter_test`], [`overall_algorithm`]):
//!   sample-based deciders built on an unbiased pair statistic whose
//!   expectation is exactly the low-level squared-coefficient mass, a
//!   pair-correlation filter for very high degrees, and the combined
//!   two-stage routine, all with explicit sample-size accounting.
//! * **Constructions** ([`theorem12_density`], [`pairwise_density`],
//!   [`psi_j_density`]): hard instances — tilted symmetric densities
//!   with all their low weight on one level, shifted pairwise tilts
//!   whose m-sample tuples stay statistically close to uniform, and
//!   block densities used by the mending argument.
//!
//! Everything desk-scale is backed by brute-force oracles; run
//! [`run_selftest`] for the named integrity battery.
//!
//! Conventions: points are bit masks (`u64`), bit value 1 encodes the
//! cube value `-1`, and the character `x^S` at a point `x` is
//! `(-1)^{popcount(x & S)}`.  Densities are nonnegative with mean 1,
//! so the uniform density is identically 1.

pub mod bits;
pub mod closeness;
pub mod construct;
pub mod density;
pub mod lp;
pub mod poly;
pub mod sampling;
pub mod selftest;
pub mod testers;

pub use bits::SampleBatch;
pub use closeness::{
    closeness_exact, closeness_exact_rational, correction_density, epsilon_k, mend_1wise,
    mend_min_weight, theorem12_witness, ClosenessError, ClosenessResult, DualWitness, MendResult,
    WitnessReport,
};
pub use construct::{
    chi2_geometric_bound, chi2_tuple_vs_uniform, epsilon_perturbed_family, pairwise_density,
    pairwise_shifted_source, psi_j_density, random_density, theorem12_density, ConstructError,
    LowerBoundParams, PairwiseShiftParams, PerturbShape, ShiftedSource,
};
pub use density::{Density, DensityError, Spectrum};
pub use lp::{LinearProgram, LpError, LpSolution, LpStatus, Sense};
pub use poly::{
    binomial, hermite, krawtchouk, krawtchouk_hermite_gap, level_kernel, KrawtchoukTable,
    PolyError,
};
pub use sampling::{
    sample, trial_rng, trial_seed, ConstantSource, DensitySampler, ParityPlantedSource,
    ReplaySource, SampleSource, SourceExhausted, TrialRng, UniformSource,
};
pub use selftest::{run_selftest, CheckResult, SelfTestOptions, SelfTestReport};
pub use testers::{
    delta_mean, delta_statistic, delta_variance_bound, delta_variance_exact, empirical_error_rate,
    estimation_test, filter_test, kwise_sample_size, kwise_test, overall_algorithm, overall_params,
    overall_params_uniform, skew_probability, wilson_interval, Decision, ErrorRateRow,
    EstimationParams, FilterParams, Knobs, OverallMode, OverallOutcome, PairKernel, TesterError,
    TesterVerdict,
};
