//! Integrity battery: every check recomputes a quantity two independent
//! ways at desk scale and compares.  All seeds and grids are fixed, so
//! the report is identical from run to run; any failure names the
//! invariant that broke and shows the measured defect.

use crate::closeness::{closeness_exact, closeness_exact_rational, mend_1wise, mend_min_weight};
use crate::construct::{
    pairwise_density, psi_j_density, random_density, theorem12_density, LowerBoundParams,
    PairwiseShiftParams,
};
use crate::density::Density;
use crate::poly::{hermite, krawtchouk, krawtchouk_hermite_gap, KrawtchoukTable};
use crate::sampling::{sample, ConstantSource, ReplaySource};
use crate::testers::{
    counts_from_batch, delta_histogram, delta_pairs, estimation_test, filter_test, Decision,
    EstimationParams, Knobs, PairKernel,
};
use num_traits::ToPrimitive;

/// Outcome of one named invariant check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured defect or a short account of what was compared.
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: false,
            detail,
        }
    }

    fn from_defect(name: &'static str, defect: f64, tol: f64) -> Self {
        let detail = format!("defect {:.3e} (tolerance {:.1e})", defect, tol);
        if defect.abs() <= tol {
            CheckResult::pass(name, detail)
        } else {
            CheckResult::fail(name, detail)
        }
    }
}

/// Full battery outcome; iterate `checks` for per-invariant status.
#[derive(Debug, Clone)]
pub struct SelfTestReport {
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// One `ok`/`FAIL` line per check, stable across runs.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {:<30} {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

/// Knobs for the battery.  `corrupt_krawtchouk` perturbs one entry of
/// the polynomial table before the table checks run; it exists so that
/// callers can demonstrate the battery actually detects a bad table.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelfTestOptions {
    pub corrupt_krawtchouk: bool,
}

/// Runs every check and returns the deterministic report.
pub fn run_selftest(options: &SelfTestOptions) -> SelfTestReport {
    let table = build_table(options);
    let checks = vec![
        check_wht_roundtrip(),
        check_parseval(),
        check_convolution_spectra(),
        check_shift_sign_flips(),
        check_krawtchouk_entries(&table),
        check_krawtchouk_orthogonality(&table),
        check_pair_kernel_subsets(),
        check_delta_paths_agree(),
        check_delta_mean_identity(),
        check_sampler_support(),
        check_estimation_replay(),
        check_filter_constant(),
        check_lp_singleton_distance(),
        check_lp_rational_agreement(),
        check_mend_staircase(),
        check_mend_lp_levels(),
        check_tilt_witness_value(),
        check_chi2_closed_form(),
        check_chi2_brute_force(),
        check_hermite_derivative(),
        check_hermite_limit_gap(),
    ];
    SelfTestReport { checks }
}

fn build_table(options: &SelfTestOptions) -> KrawtchoukTable {
    let n = 10;
    let k_max = 4;
    let table = KrawtchoukTable::new(n, k_max).expect("k_max <= n");
    if !options.corrupt_krawtchouk {
        return table;
    }
    let mut values = Vec::with_capacity((k_max + 1) * (n + 1));
    for k in 0..=k_max {
        for t in 0..=n {
            values.push(table.value(k, t));
        }
    }
    // One flipped interior entry; the entry and orthogonality checks
    // must both name it.
    values[2 * (n + 1) + 3] += 1.0;
    KrawtchoukTable::from_raw(n, k_max, values).expect("same shape")
}

fn check_wht_roundtrip() -> CheckResult {
    let phi = random_density(6, 01_6601);
    let spectrum = match phi.spectrum() {
        Ok(s) => s,
        Err(e) => return CheckResult::fail("wht_roundtrip", e.to_string()),
    };
    let back = match spectrum.density() {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("wht_roundtrip", e.to_string()),
    };
    let defect = phi
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    CheckResult::from_defect("wht_roundtrip", defect, 1e-10)
}

fn check_parseval() -> CheckResult {
    let phi = random_density(6, 02_6602);
    let nn = phi.values().len() as f64;
    let mean_sq = phi.values().iter().map(|v| v * v).sum::<f64>() / nn;
    let spectrum = match phi.spectrum() {
        Ok(s) => s,
        Err(e) => return CheckResult::fail("parseval", e.to_string()),
    };
    let coeff_sq: f64 = (0..phi.values().len() as u64)
        .map(|s| {
            let c = spectrum.coefficient(s);
            c * c
        })
        .sum();
    CheckResult::from_defect("parseval", mean_sq - coeff_sq, 1e-10)
}

fn check_convolution_spectra() -> CheckResult {
    let a = random_density(5, 03_5503);
    let b = random_density(5, 03_5504);
    let conv = match a.convolve(&b) {
        Ok(c) => c,
        Err(e) => return CheckResult::fail("convolution_spectra", e.to_string()),
    };
    let (sa, sb, sc) = match (a.spectrum(), b.spectrum(), conv.spectrum()) {
        (Ok(x), Ok(y), Ok(z)) => (x, y, z),
        _ => return CheckResult::fail("convolution_spectra", "spectrum failed".into()),
    };
    let defect = (0..32u64)
        .map(|s| (sc.coefficient(s) - sa.coefficient(s) * sb.coefficient(s)).abs())
        .fold(0.0f64, f64::max);
    CheckResult::from_defect("convolution_spectra", defect, 1e-10)
}

fn check_shift_sign_flips() -> CheckResult {
    let phi = random_density(6, 04_6604);
    let t: u64 = 0b010110;
    let shifted = match phi.shift(t) {
        Ok(s) => s,
        Err(e) => return CheckResult::fail("shift_sign_flips", e.to_string()),
    };
    let (sp, ss) = match (phi.spectrum(), shifted.spectrum()) {
        (Ok(x), Ok(y)) => (x, y),
        _ => return CheckResult::fail("shift_sign_flips", "spectrum failed".into()),
    };
    let defect = (0..64u64)
        .map(|s| {
            let sign = if (s & t).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            (ss.coefficient(s) - sign * sp.coefficient(s)).abs()
        })
        .fold(0.0f64, f64::max);
    CheckResult::from_defect("shift_sign_flips", defect, 1e-10)
}

/// Every table entry against an independent one-off evaluation of the
/// defining alternating sum.
fn check_krawtchouk_entries(table: &KrawtchoukTable) -> CheckResult {
    let n = table.n();
    let mut worst = 0.0f64;
    let mut worst_at = (0usize, 0usize);
    for k in 0..=table.k_max() {
        for t in 0..=n {
            let fresh = match krawtchouk(n, k, t) {
                Ok(v) => v,
                Err(e) => return CheckResult::fail("krawtchouk_entries", e.to_string()),
            };
            let d = (table.value(k, t) - fresh).abs();
            if d > worst {
                worst = d;
                worst_at = (k, t);
            }
        }
    }
    let detail = format!(
        "worst |table - direct sum| = {:.3e} at (k={}, t={})",
        worst, worst_at.0, worst_at.1
    );
    if worst <= 1e-9 {
        CheckResult::pass("krawtchouk_entries", detail)
    } else {
        CheckResult::fail("krawtchouk_entries", detail)
    }
}

fn check_krawtchouk_orthogonality(table: &KrawtchoukTable) -> CheckResult {
    let defect = table.orthogonality_defect_float();
    CheckResult::from_defect("krawtchouk_orthogonality", defect, 1e-9)
}

/// Pairwise kernel against term-by-term subset enumeration.
fn check_pair_kernel_subsets() -> CheckResult {
    let n = 6;
    let k = 3;
    let kernel = match PairKernel::new(n, k) {
        Ok(kk) => kk,
        Err(e) => return CheckResult::fail("pair_kernel_subsets", e.to_string()),
    };
    let mut worst = 0.0f64;
    for z in 0..(1u64 << n) {
        let mut brute = 0i64;
        for s in 1..(1u64 << n) {
            if (s.count_ones() as usize) <= k {
                brute += if (s & z).count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        let d = (kernel.at_distance(z.count_ones() as usize) - brute as f64).abs();
        worst = worst.max(d);
    }
    CheckResult::from_defect("pair_kernel_subsets", worst, 0.0)
}

/// The all-pairs loop and the xor-histogram transform compute the same
/// statistic.
fn check_delta_paths_agree() -> CheckResult {
    let phi = random_density(8, 07_8807);
    let batch = sample(&phi, 300, 07_0007);
    let mut worst = 0.0f64;
    for k in 1..=3usize {
        let kernel = match PairKernel::new(8, k) {
            Ok(kk) => kk,
            Err(e) => return CheckResult::fail("delta_paths_agree", e.to_string()),
        };
        let direct = delta_pairs(&batch, &kernel);
        let mut counts = counts_from_batch(&batch);
        let transformed = delta_histogram(&mut counts, batch.len(), &kernel);
        worst = worst.max((direct - transformed).abs());
    }
    CheckResult::from_defect("delta_paths_agree", worst, 1e-9)
}

/// Mean of the pair statistic over the product distribution, by brute
/// double sum, equals the low-level squared-coefficient mass.
fn check_delta_mean_identity() -> CheckResult {
    let n = 5;
    let k = 2;
    let phi = random_density(n, 08_5508);
    let kernel = match PairKernel::new(n, k) {
        Ok(kk) => kk,
        Err(e) => return CheckResult::fail("delta_mean_identity", e.to_string()),
    };
    let nn = 1u64 << n;
    let scale = 1.0 / (nn as f64 * nn as f64);
    let mut brute = 0.0f64;
    for x in 0..nn {
        for y in 0..nn {
            brute += scale
                * phi.value_at(x)
                * phi.value_at(y)
                * kernel.at_distance((x ^ y).count_ones() as usize);
        }
    }
    let weight = match phi.fourier_weight(1, k) {
        Ok(w) => w,
        Err(e) => return CheckResult::fail("delta_mean_identity", e.to_string()),
    };
    CheckResult::from_defect("delta_mean_identity", brute - weight, 1e-9)
}

fn check_sampler_support() -> CheckResult {
    let j = 3;
    let n = 6;
    let block = match psi_j_density(n, j) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("sampler_support", e.to_string()),
    };
    // Support of the block density: a fixed window of coordinates is
    // pinned to -1 (bit 1); find the pinned mask from the density itself.
    let mask: u64 = (0..(1u64 << n))
        .filter(|&x| block.value_at(x) > 0.0)
        .fold((1u64 << n) - 1, |acc, x| acc & x);
    let batch = sample(&block, 256, 09_0009);
    for i in 0..batch.len() {
        let row = batch.row(i)[0];
        if row & mask != mask || block.value_at(row) == 0.0 {
            return CheckResult::fail(
                "sampler_support",
                format!("draw {:#x} outside the block support", row),
            );
        }
    }
    let point = match Density::point_mass(n, 0b101) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("sampler_support", e.to_string()),
    };
    let pb = sample(&point, 64, 09_0010);
    for i in 0..pb.len() {
        if pb.row(i)[0] != 0b101 {
            return CheckResult::fail(
                "sampler_support",
                format!("point-mass draw {:#x} != 0x5", pb.row(i)[0]),
            );
        }
    }
    CheckResult::pass(
        "sampler_support",
        "320 draws from block and point densities all in support".into(),
    )
}

/// Exact decisions on replayed hand-built batches.
fn check_estimation_replay() -> CheckResult {
    let n = 4;
    let knobs = Knobs {
        enforce_sample_bound: false,
        ..Knobs::default()
    };

    // Two identical points: every low-level character agrees, the
    // statistic hits the kernel's value at distance zero (4 + 6 + ... );
    // far above any small threshold.
    let mut same = crate::bits::SampleBatch::new(n);
    same.push_word(0b0110);
    same.push_word(0b0110);
    let mut src = ReplaySource::new(same);
    let p = EstimationParams {
        k: 1,
        theta: 0.04,
        a: 1.0,
        m: 2,
    };
    let hi = match estimation_test(&mut src, &p, &knobs, 0) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("estimation_replay", e.to_string()),
    };
    // Two antipodal points: statistic is the kernel at full distance,
    // which is negative for k = 1; must come out Low.
    let mut anti = crate::bits::SampleBatch::new(n);
    anti.push_word(0b0000);
    anti.push_word(0b1111);
    let mut src = ReplaySource::new(anti);
    let lo = match estimation_test(&mut src, &p, &knobs, 0) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("estimation_replay", e.to_string()),
    };
    let good = hi.decision == Decision::High
        && (hi.statistic - 4.0).abs() < 1e-12
        && lo.decision == Decision::Low
        && (lo.statistic + 4.0).abs() < 1e-12;
    let detail = format!(
        "identical pair -> {:?} ({:+.1}), antipodal pair -> {:?} ({:+.1})",
        hi.decision, hi.statistic, lo.decision, lo.statistic
    );
    if good {
        CheckResult::pass("estimation_replay", detail)
    } else {
        CheckResult::fail("estimation_replay", detail)
    }
}

fn check_filter_constant() -> CheckResult {
    let mut src = ConstantSource::all_minus_one(9);
    let verdict = match filter_test(&mut src, 2.0, 3, 11) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("filter_constant", e.to_string()),
    };
    let good = verdict.decision == Decision::Reject
        && verdict.statistic == 9.0
        && verdict.witness_pair == Some((0, 1));
    let detail = format!(
        "{:?} with inner product {} at pair {:?}",
        verdict.decision, verdict.statistic, verdict.witness_pair
    );
    if good {
        CheckResult::pass("filter_constant", detail)
    } else {
        CheckResult::fail("filter_constant", detail)
    }
}

/// `1 + 0.6 x_1` sits at distance exactly `0.3` from the 1-wise polytope.
fn check_lp_singleton_distance() -> CheckResult {
    let n = 4;
    let mut values = vec![0.0; 1 << n];
    for (x, v) in values.iter_mut().enumerate() {
        let sign = if x & 1 == 0 { 1.0 } else { -1.0 };
        *v = 1.0 + 0.6 * sign;
    }
    let phi = match Density::from_values(n, values) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("lp_singleton_distance", e.to_string()),
    };
    let result = match closeness_exact(&phi, 1) {
        Ok(r) => r,
        Err(e) => return CheckResult::fail("lp_singleton_distance", e.to_string()),
    };
    let report = match result.witness.certify(&phi, 1e-7) {
        Ok(r) => r,
        Err(e) => return CheckResult::fail("lp_singleton_distance", e.to_string()),
    };
    let defect = (result.distance - 0.3).abs();
    let detail = format!(
        "distance {:.12} (expected 0.3), witness violations: {}",
        result.distance,
        report.violations.len()
    );
    if defect <= 1e-9 && report.violations.is_empty() {
        CheckResult::pass("lp_singleton_distance", detail)
    } else {
        CheckResult::fail("lp_singleton_distance", detail)
    }
}

fn check_lp_rational_agreement() -> CheckResult {
    let phi = random_density(4, 13_4413);
    let float = match closeness_exact(&phi, 2) {
        Ok(r) => r,
        Err(e) => return CheckResult::fail("lp_rational_agreement", e.to_string()),
    };
    let exact = match closeness_exact_rational(&phi, 2) {
        Ok(r) => r,
        Err(e) => return CheckResult::fail("lp_rational_agreement", e.to_string()),
    };
    let exact_f = exact.to_f64().unwrap_or(f64::NAN);
    CheckResult::from_defect("lp_rational_agreement", float.distance - exact_f, 1e-7)
}

fn check_mend_staircase() -> CheckResult {
    let phi = random_density(6, 14_6614);
    let mend = match mend_1wise(&phi) {
        Ok(m) => m,
        Err(e) => return CheckResult::fail("mend_staircase", e.to_string()),
    };
    let eps = crate::closeness::epsilon_k(&phi, 1).unwrap_or(f64::NAN);
    let kwise = mend
        .mended
        .is_kwise_uniform(1, 1e-9)
        .unwrap_or(false);
    let tv = phi.tv_distance(&mend.mended).unwrap_or(f64::NAN);
    let good = kwise && (mend.weight - eps).abs() <= 1e-12 && tv <= mend.distance_bound() + 1e-12;
    let detail = format!(
        "weight {:.6} vs max bias {:.6}; mended 1-wise: {}; tv {:.6} <= bound {:.6}",
        mend.weight,
        eps,
        kwise,
        tv,
        mend.distance_bound()
    );
    if good {
        CheckResult::pass("mend_staircase", detail)
    } else {
        CheckResult::fail("mend_staircase", detail)
    }
}

fn check_mend_lp_levels() -> CheckResult {
    let phi = random_density(5, 15_5515);
    let k = 2;
    let mend = match mend_min_weight(&phi, k) {
        Ok(m) => m,
        Err(e) => return CheckResult::fail("mend_lp_levels", e.to_string()),
    };
    let kwise = mend
        .mended
        .is_kwise_uniform(k, 1e-8)
        .unwrap_or(false);
    let weight = phi.fourier_weight(1, k).unwrap_or(f64::NAN);
    let bound = (k as f64).exp() * weight.sqrt();
    let good = kwise && mend.weight <= bound + 1e-6;
    let detail = format!(
        "weight {:.6} <= e^k sqrt(W) = {:.6}; mended {}-wise: {}",
        mend.weight, bound, k, kwise
    );
    if good {
        CheckResult::pass("mend_lp_levels", detail)
    } else {
        CheckResult::fail("mend_lp_levels", detail)
    }
}

fn check_tilt_witness_value() -> CheckResult {
    let params = match LowerBoundParams::new(8, 2, 4.0) {
        Ok(p) => p,
        Err(e) => return CheckResult::fail("tilt_witness_value", e.to_string()),
    };
    let phi = match theorem12_density(&params) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("tilt_witness_value", e.to_string()),
    };
    let witness = match crate::closeness::theorem12_witness(&params) {
        Ok(w) => w,
        Err(e) => return CheckResult::fail("tilt_witness_value", e.to_string()),
    };
    let value = match witness.value(&phi) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("tilt_witness_value", e.to_string()),
    };
    let expect = params.mu * params.mu / 2.0;
    let report = match witness.certify(&phi, 1e-9) {
        Ok(r) => r,
        Err(e) => return CheckResult::fail("tilt_witness_value", e.to_string()),
    };
    let defect = (value - expect).abs();
    let detail = format!(
        "value {:.3e} vs mu^2/2 = {:.3e}; violations: {}",
        value,
        expect,
        report.violations.len()
    );
    if defect <= 1e-12 && report.violations.is_empty() {
        CheckResult::pass("tilt_witness_value", detail)
    } else {
        CheckResult::fail("tilt_witness_value", detail)
    }
}

fn check_chi2_closed_form() -> CheckResult {
    let delta = 0.8f64;
    let p = PairwiseShiftParams {
        n: 2,
        delta,
        m: 2,
    };
    let chi2 = match crate::construct::chi2_tuple_vs_uniform(&p) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("chi2_closed_form", e.to_string()),
    };
    CheckResult::from_defect("chi2_closed_form", chi2 - delta.powi(4) / 16.0, 1e-12)
}

/// Tuple divergence against the correlation-moment brute force
/// `E_z[(phi * phi)(z)^m] - 1`.
fn check_chi2_brute_force() -> CheckResult {
    let n = 4;
    let m = 3;
    let delta = 1.0;
    let p = PairwiseShiftParams { n, delta, m };
    let chi2 = match crate::construct::chi2_tuple_vs_uniform(&p) {
        Ok(v) => v,
        Err(e) => return CheckResult::fail("chi2_brute_force", e.to_string()),
    };
    let phi = match pairwise_density(n, delta) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("chi2_brute_force", e.to_string()),
    };
    let phi = match phi.expand_explicit() {
        Ok(d) => d,
        Err(e) => return CheckResult::fail("chi2_brute_force", e.to_string()),
    };
    let conv = match phi.convolve(&phi) {
        Ok(c) => c,
        Err(e) => return CheckResult::fail("chi2_brute_force", e.to_string()),
    };
    let conv = match conv.expand_explicit() {
        Ok(c) => c,
        Err(e) => return CheckResult::fail("chi2_brute_force", e.to_string()),
    };
    let nn = conv.values().len() as f64;
    let brute: f64 = conv.values().iter().map(|v| v.powi(m as i32)).sum::<f64>() / nn - 1.0;
    CheckResult::from_defect("chi2_brute_force", chi2 - brute, 1e-10)
}

fn check_hermite_derivative() -> CheckResult {
    let k = 5;
    let z = 1.7;
    let h = 1e-5;
    let finite = (hermite(k, z + h) - hermite(k, z - h)) / (2.0 * h);
    let analytic = (k as f64).sqrt() * hermite(k - 1, z);
    let scale = analytic.abs().max(1.0);
    CheckResult::from_defect("hermite_derivative", (finite - analytic) / scale, 1e-8)
}

fn check_hermite_limit_gap() -> CheckResult {
    let k = 3;
    let z = 1.2;
    let coarse = match krawtchouk_hermite_gap(64, k, z) {
        Ok(g) => g.abs(),
        Err(e) => return CheckResult::fail("hermite_limit_gap", e.to_string()),
    };
    let fine = match krawtchouk_hermite_gap(4096, k, z) {
        Ok(g) => g.abs(),
        Err(e) => return CheckResult::fail("hermite_limit_gap", e.to_string()),
    };
    let detail = format!(
        "|gap| {:.3e} at n=64 -> {:.3e} at n=4096",
        coarse, fine
    );
    if fine < coarse {
        CheckResult::pass("hermite_limit_gap", detail)
    } else {
        CheckResult::fail("hermite_limit_gap", detail)
    }
}
