//! Release gate: ten numbered checks covering the toolkit's contract,
//! one printed line per check.  Every expected value is produced by an
//! independent route (subset enumeration, brute-force convolution,
//! exact tabulation) rather than by the code under test.
//!
//! Run with `cargo test -p kwise-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines; several checks carry wall-clock
//! budgets sized for a single-core desktop.

use std::time::Instant;

use kwise::bits::parity_sign;
use kwise::closeness::{closeness_exact, epsilon_k, mend_min_weight, theorem12_witness};
use kwise::construct::{
    chi2_tuple_vs_uniform, pairwise_density, random_density, theorem12_density, LowerBoundParams,
    PairwiseShiftParams,
};
use kwise::poly::{hermite, krawtchouk_hermite_gap, ln_factorial};
use kwise::sampling::{gen_below, trial_rng, trial_seed, ParityPlantedSource, UniformSource};
use kwise::testers::{
    delta_mean, delta_statistic, delta_variance_bound, filter_test, kwise_sample_size, kwise_test,
    l_k, Decision, Knobs, PairKernel,
};
use kwise::SampleBatch;
use kwise::sampling::SampleSource;

// ------------------------------------------------------------ reporting

fn report(num: usize, slug: &str, started: Instant, result: Result<String, String>) {
    let secs = started.elapsed().as_secs_f64();
    match result {
        Ok(detail) => println!("criterion {num:2} ({slug}): PASS — {detail} [{secs:.1}s]"),
        Err(msg) => {
            println!("criterion {num:2} ({slug}): FAIL — {msg} [{secs:.1}s]");
            panic!("criterion {num} ({slug}) failed: {msg}");
        }
    }
}

fn budget(started: Instant, limit_s: f64) -> Result<(), String> {
    let secs = started.elapsed().as_secs_f64();
    if secs < limit_s {
        Ok(())
    } else {
        Err(format!("runtime {secs:.1}s exceeded the {limit_s:.0}s budget"))
    }
}

// ------------------------------------------------- 1: unbiased estimator

/// The all-pairs statistic averages a kernel whose expectation over two
/// independent draws must equal the squared Fourier mass on levels
/// 1..=k.  The expectation here is computed by direct double summation
/// against a subset-enumerated kernel table.
#[test]
fn criterion_01_estimator_unbiasedness() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        let mut worst = 0.0f64;
        for i in 0..50usize {
            let n = 4 + i % 5;
            let k = 1 + i % 3;
            let phi = random_density(n, 1000 + i as u64);
            let nn = 1usize << n;

            // kernel by XOR value, from explicit subset enumeration
            let masks: Vec<u64> = (1u64..1 << n)
                .filter(|m| (m.count_ones() as usize) <= k)
                .collect();
            let kernel: Vec<f64> = (0..nn as u64)
                .map(|z| masks.iter().map(|&s| parity_sign(z, s)).sum())
                .collect();

            // E[pair kernel] under two independent draws from phi
            let p: Vec<f64> = phi.values().iter().map(|v| v / nn as f64).collect();
            let mut mean = 0.0;
            let mut c = 0.0; // Kahan correction
            for x in 0..nn {
                for y in 0..nn {
                    let term = p[x] * p[y] * kernel[x ^ y];
                    let t = mean + (term - c);
                    c = (t - mean) - (term - c);
                    mean = t;
                }
            }

            let w = phi.fourier_weight(1, k).map_err(|e| e.to_string())?;
            let lib_mean = delta_mean(&phi, k).map_err(|e| e.to_string())?;
            let dev = (mean - w).abs().max((lib_mean - w).abs());
            worst = worst.max(dev);
            if dev > 1e-9 {
                return Err(format!(
                    "density {i} (n={n}, k={k}): E[pair kernel] deviates from the level mass by {dev:.3e}"
                ));
            }
        }
        budget(started, 10.0)?;
        Ok(format!(
            "50 random densities (n in 4..=8, k in 1..=3): worst |E - mass| = {worst:.3e} <= 1e-9"
        ))
    })();
    report(1, "estimator-unbiasedness", started, result);
}

// --------------------------------------------------- 2: variance bound

/// Empirical variance of the statistic over 10^4 seeded trials must sit
/// below `(4/m^2) L_k + (4/m) sqrt(L_k) mu` for every configuration.
#[test]
fn criterion_02_variance_bound() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        const TRIALS: usize = 10_000;
        let mut worst_ratio = 0.0f64;
        let mut cfg_index = 0u64;
        for &n in &[8usize, 10] {
            for k in 1..=3usize {
                for &m in &[4usize, 16, 64] {
                    let phi = random_density(n, 2000 + cfg_index);
                    let l = l_k(&phi, k).map_err(|e| e.to_string())?;
                    let mu = delta_mean(&phi, k).map_err(|e| e.to_string())?;
                    let bound = delta_variance_bound(l, mu, m);
                    let formula = 4.0 / (m as f64 * m as f64) * l + 4.0 / m as f64 * l.sqrt() * mu;
                    if (bound - formula).abs() > 1e-12 * (1.0 + formula.abs()) {
                        return Err(format!(
                            "variance bound {bound:.6e} is not (4/m^2)L + (4/m)sqrt(L)mu = {formula:.6e}"
                        ));
                    }

                    let mut sampler = kwise::sampling::DensitySampler::new(&phi);
                    let mut batch = SampleBatch::with_capacity(n, m);
                    let base = 20_000 + 97 * cfg_index;
                    let mut sum = 0.0f64;
                    let mut sumsq = 0.0f64;
                    for t in 0..TRIALS {
                        let mut rng = trial_rng(trial_seed(base, t as u64));
                        sampler.begin_trial(&mut rng);
                        batch.clear();
                        sampler.fill(&mut batch, m, &mut rng);
                        let d = delta_statistic(&batch, k).map_err(|e| e.to_string())?;
                        sum += d;
                        sumsq += d * d;
                    }
                    let tf = TRIALS as f64;
                    let var = (sumsq - sum * sum / tf) / (tf - 1.0);
                    let ratio = var / bound;
                    worst_ratio = worst_ratio.max(ratio);
                    if var > bound {
                        return Err(format!(
                            "(n={n}, k={k}, m={m}): empirical variance {var:.6e} exceeds bound {bound:.6e}"
                        ));
                    }
                    cfg_index += 1;
                }
            }
        }
        budget(started, 120.0)?;
        Ok(format!(
            "18 configs x 10^4 trials: worst empirical/bound ratio = {worst_ratio:.3}"
        ))
    })();
    report(2, "variance-bound", started, result);
}

// ------------------------------------------- 3: distance/mend/mass chain

/// The exact distance is at most the mend weight, which is at most
/// `e^k sqrt(mass)`; for k = 1 the distance is also at most the largest
/// first-level bias magnitude.
#[test]
fn criterion_03_distance_mend_chain() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        let mut worst_gap = f64::NEG_INFINITY;
        for i in 0..100usize {
            let n = 4 + i % 5;
            let k = 1 + i % 3;
            let phi = random_density(n, 3000 + i as u64);
            let w = phi.fourier_weight(1, k).map_err(|e| e.to_string())?;
            let exact = closeness_exact(&phi, k).map_err(|e| e.to_string())?;
            let mend = mend_min_weight(&phi, k).map_err(|e| e.to_string())?;
            let cap = (k as f64).exp() * w.sqrt();
            if exact.distance > mend.weight + 1e-9 {
                return Err(format!(
                    "density {i} (n={n}, k={k}): distance {:.6e} exceeds mend weight {:.6e}",
                    exact.distance, mend.weight
                ));
            }
            if mend.weight > cap + 1e-6 {
                return Err(format!(
                    "density {i} (n={n}, k={k}): mend weight {:.6e} exceeds e^k sqrt(mass) = {cap:.6e}",
                    mend.weight
                ));
            }
            worst_gap = worst_gap.max(mend.weight - cap);
            if k == 1 {
                let eps = epsilon_k(&phi, 1).map_err(|e| e.to_string())?;
                if exact.distance > eps + 1e-9 {
                    return Err(format!(
                        "density {i} (n={n}): 1-wise distance {:.6e} exceeds the largest bias {eps:.6e}",
                        exact.distance
                    ));
                }
            }
        }
        budget(started, 300.0)?;
        Ok(format!(
            "100 random densities: distance <= mend weight <= e^k sqrt(mass) throughout \
             (worst weight-to-cap margin {worst_gap:.3e})"
        ))
    })();
    report(3, "distance-mend-chain", started, result);
}

// ------------------------------------------------ 4: duality sandwich

/// On the tilted lower-bound construction the hand-built dual witness
/// must be feasible and its (doubled) value must land in
/// `(0, 2 * distance + 1e-6]`.
#[test]
fn criterion_04_duality_sandwich() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        let mut details = Vec::new();
        for &n in &[6usize, 8, 10] {
            let params = LowerBoundParams::new(n, 2, 4.0).map_err(|e| e.to_string())?;
            let phi = theorem12_density(&params)
                .map_err(|e| e.to_string())?
                .expand_explicit()
                .map_err(|e| e.to_string())?;
            let exact = closeness_exact(&phi, 2).map_err(|e| e.to_string())?;
            let witness = theorem12_witness(&params).map_err(|e| e.to_string())?;
            let value = witness.value(&phi).map_err(|e| e.to_string())?;
            let doubled = 2.0 * value;
            let cap = 2.0 * exact.distance + 1e-6;
            if !(doubled > 0.0 && doubled <= cap) {
                return Err(format!(
                    "n={n}: doubled witness value {doubled:.6e} outside (0, {cap:.6e}]"
                ));
            }
            let rep = witness.certify(&phi, 1e-9).map_err(|e| e.to_string())?;
            if !rep.violations.is_empty() {
                return Err(format!(
                    "n={n}: hand-built witness violates constraints: {:?}",
                    rep.violations
                ));
            }
            let lp_rep = exact.witness.certify(&phi, 1e-5).map_err(|e| e.to_string())?;
            if !lp_rep.violations.is_empty() {
                return Err(format!(
                    "n={n}: solver dual violates constraints: {:?}",
                    lp_rep.violations
                ));
            }
            details.push(format!(
                "n={n}: {doubled:.3e} in (0, {:.3e}]",
                cap
            ));
        }
        Ok(details.join("; "))
    })();
    report(4, "duality-sandwich", started, result);
}

// --------------------------------------------------- 5: chi-square form

/// The closed-form tuple divergence must match a literal all-shift
/// brute force at small n, and respect the truncated geometric bound in
/// the large-n regime where `m delta^2 / n <= 1/2`.
#[test]
fn criterion_05_chi_square_formula() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        // small n: chi^2 + 1 = average over all shift pairs (t, t') of
        // corr(t xor t')^m, with corr computed pointwise from the
        // density table
        let mut worst_small = 0.0f64;
        for &n in &[2usize, 3, 4, 6, 8] {
            for m in 1..=4usize {
                for &delta in &[0.5f64, 1.0, 2.0] {
                    let phi = pairwise_density(n, delta)
                        .map_err(|e| e.to_string())?
                        .expand_explicit()
                        .map_err(|e| e.to_string())?;
                    let v = phi.values();
                    let nn = 1usize << n;
                    let corr: Vec<f64> = (0..nn)
                        .map(|z| {
                            (0..nn).map(|x| v[x] * v[x ^ z]).sum::<f64>() / nn as f64
                        })
                        .collect();
                    let mut acc = 0.0f64;
                    for t in 0..nn {
                        for tp in 0..nn {
                            acc += corr[t ^ tp].powi(m as i32);
                        }
                    }
                    let brute = acc / (nn * nn) as f64 - 1.0;
                    let lib = chi2_tuple_vs_uniform(&PairwiseShiftParams { n, delta, m })
                        .map_err(|e| e.to_string())?;
                    let dev = (lib - brute).abs();
                    worst_small = worst_small.max(dev);
                    if dev > 1e-9 {
                        return Err(format!(
                            "(n={n}, m={m}, delta={delta}): closed form {lib:.6e} vs brute force {brute:.6e}"
                        ));
                    }
                }
            }
        }

        // large n, symmetric mode: truncated geometric-series bound
        let mut worst_margin = f64::NEG_INFINITY;
        let cases: &[(usize, usize, f64)] = &[
            (100, 10, 0.1),
            (100, 50, 0.5),
            (1_000, 500, 0.5),
            (10_000, 2_500, 0.25),
            (10_000, 5_000, 0.5),
            (10_000, 10_000, 0.5),
            (64, 16, 0.5),
        ];
        for &(n, m, r) in cases {
            let delta = (n as f64 * r / m as f64).sqrt();
            let p = PairwiseShiftParams { n, delta, m };
            let ratio = p.regime_ratio();
            if (ratio - r).abs() > 1e-12 || ratio > 0.5 + 1e-12 {
                return Err(format!(
                    "(n={n}, m={m}): regime ratio {ratio} is not the intended {r} <= 1/2"
                ));
            }
            let lib = chi2_tuple_vs_uniform(&p).map_err(|e| e.to_string())?;
            let truncated = r * (1.0 - r.powi(m as i32)) / (1.0 - r);
            if lib > truncated + 1e-12 {
                return Err(format!(
                    "(n={n}, m={m}, r={r}): chi^2 = {lib:.6e} exceeds the truncated geometric sum {truncated:.6e}"
                ));
            }
            worst_margin = worst_margin.max(lib - truncated);
        }
        Ok(format!(
            "60 brute-force cases (worst dev {worst_small:.3e}); 7 large-n cases under the \
             truncated geometric bound (worst margin {worst_margin:.3e})"
        ))
    })();
    report(5, "chi-square-formula", started, result);
}

// ---------------------------------------------- 6: distance tester rates

/// At proven sample budgets (n=16, k=2, delta=0.5) the tester must
/// accept a fully uniform source and reject a panel-certified far
/// source, each in at least 70% of 200 seeded trials.
#[test]
fn criterion_06_tester_guarantees() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        const N: usize = 16;
        const K: usize = 2;
        const DELTA: f64 = 0.5;
        const TRIALS: usize = 200;
        let knobs = Knobs::default();
        let m = kwise_sample_size(N, K, DELTA, &knobs).map_err(|e| e.to_string())?;
        let theta = (DELTA / (K as f64).exp()).powi(2);

        // far arm: one planted parity with squared coefficient above the
        // decision threshold, certified from the quantized coefficient
        // the sampler actually uses
        let coeff = 2.0 * theta.sqrt();
        let certified = ParityPlantedSource::new(N, 0b1, coeff).effective_coeff().powi(2);
        if certified <= theta {
            return Err(format!(
                "planted source certifies mass {certified:.6e}, not above theta = {theta:.6e}"
            ));
        }

        let mut uniform_accepts = 0usize;
        for t in 0..TRIALS {
            let mut source = UniformSource { n: N };
            let v = kwise_test(&mut source, K, DELTA, m, &knobs, trial_seed(61, t as u64))
                .map_err(|e| e.to_string())?;
            if v.decision == Decision::Accept {
                uniform_accepts += 1;
            }
        }
        let mut planted_rejects = 0usize;
        for t in 0..TRIALS {
            let mut source = ParityPlantedSource::new(N, 0b1, coeff);
            let v = kwise_test(&mut source, K, DELTA, m, &knobs, trial_seed(62, t as u64))
                .map_err(|e| e.to_string())?;
            if v.decision == Decision::Reject {
                planted_rejects += 1;
            }
        }
        if uniform_accepts * 10 < TRIALS * 7 {
            return Err(format!(
                "uniform source accepted only {uniform_accepts}/{TRIALS} (< 70%)"
            ));
        }
        if planted_rejects * 10 < TRIALS * 7 {
            return Err(format!(
                "certified far source rejected only {planted_rejects}/{TRIALS} (< 70%)"
            ));
        }
        budget(started, 600.0)?;
        Ok(format!(
            "m = {m} per trial: uniform accepted {uniform_accepts}/{TRIALS}, \
             far source (mass {certified:.3e} > theta {theta:.3e}) rejected {planted_rejects}/{TRIALS}"
        ))
    })();
    report(6, "tester-guarantees", started, result);
}

// ------------------------------------------------------- 7: pair filter

/// With the pair budget inside its feasibility region the filter must
/// accept a fully uniform source at least 85% of the time and reject
/// the identical-samples adversary always.
#[test]
fn criterion_07_pair_filter() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        const N: usize = 64;
        const KBAR: f64 = 4.0;
        const T: f64 = 6.0;
        const M1: usize = 4;
        const TRIALS: usize = 200;
        let feasible = T.powf(KBAR) / (5.0 * KBAR.powf(KBAR / 2.0));
        if (M1 * M1) as f64 > feasible {
            return Err(format!(
                "budget premise broken: m1^2 = {} > t^kbar/(5 kbar^(kbar/2)) = {feasible:.3}",
                M1 * M1
            ));
        }
        let mut accepts = 0usize;
        for t in 0..TRIALS {
            let mut source = UniformSource { n: N };
            let v = filter_test(&mut source, T, M1, trial_seed(71, t as u64))
                .map_err(|e| e.to_string())?;
            if v.decision == Decision::Accept {
                accepts += 1;
            }
        }
        let mut rejects = 0usize;
        for t in 0..TRIALS {
            let mut source = kwise::sampling::ConstantSource::all_minus_one(N);
            let v = filter_test(&mut source, T, M1, trial_seed(72, t as u64))
                .map_err(|e| e.to_string())?;
            if v.decision == Decision::Reject {
                rejects += 1;
            }
        }
        if accepts * 100 < TRIALS * 85 {
            return Err(format!("uniform accepted only {accepts}/{TRIALS} (< 85%)"));
        }
        if rejects != TRIALS {
            return Err(format!(
                "identical-samples adversary rejected {rejects}/{TRIALS}, not always"
            ));
        }
        Ok(format!(
            "m1 = {M1} (m1^2 = {} <= {feasible:.2}): uniform accepted {accepts}/{TRIALS}, \
             adversary rejected {rejects}/{TRIALS}",
            M1 * M1
        ))
    })();
    report(7, "pair-filter", started, result);
}

// -------------------------------------- 8: kernel subset-sum equivalence

/// The tabulated pair kernel must equal, integer for integer, the
/// explicit sum of parity signs over all nonempty sets of size at most
/// k — exhaustively at small n, on 10^5 random pairs at n in {8, 10}.
#[test]
fn criterion_08_kernel_equivalence() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        fn oracle_table(n: usize, k: usize) -> Vec<i64> {
            let masks: Vec<u64> = (1u64..1 << n)
                .filter(|m| (m.count_ones() as usize) <= k)
                .collect();
            (0..1u64 << n)
                .map(|z| {
                    masks
                        .iter()
                        .map(|&s| if (z & s).count_ones() % 2 == 0 { 1i64 } else { -1 })
                        .sum()
                })
                .collect()
        }

        let mut checked_exhaustive = 0usize;
        for n in 2..=6usize {
            for k in 1..=n.min(4) {
                let kernel = PairKernel::new(n, k).map_err(|e| e.to_string())?;
                let oracle = oracle_table(n, k);
                let mut batch = SampleBatch::with_capacity(n, 1 << n);
                for x in 0..1u64 << n {
                    batch.push_word(x);
                }
                for x in 0..1usize << n {
                    for y in 0..1usize << n {
                        let expect = oracle[x ^ y];
                        let via_batch = kernel.eval(&batch, x, y);
                        let via_distance = kernel.at_distance((x ^ y).count_ones() as usize);
                        if via_batch != expect as f64 || via_distance != expect as f64 {
                            return Err(format!(
                                "(n={n}, k={k}): kernel({x}, {y}) = {via_batch} / {via_distance}, \
                                 subset sum says {expect}"
                            ));
                        }
                        checked_exhaustive += 1;
                    }
                }
            }
        }

        let mut checked_random = 0usize;
        for &n in &[8usize, 10] {
            for k in 1..=4usize {
                let kernel = PairKernel::new(n, k).map_err(|e| e.to_string())?;
                let oracle = oracle_table(n, k);
                let mut rng = trial_rng(8_000 + (n * 10 + k) as u64);
                for _ in 0..100_000 {
                    let x = gen_below(&mut rng, 1 << n);
                    let y = gen_below(&mut rng, 1 << n);
                    let expect = oracle[(x ^ y) as usize];
                    let got = kernel.at_distance((x ^ y).count_ones() as usize);
                    if got != expect as f64 {
                        return Err(format!(
                            "(n={n}, k={k}): kernel at pair ({x}, {y}) = {got}, subset sum says {expect}"
                        ));
                    }
                    checked_random += 1;
                }
            }
        }
        Ok(format!(
            "{checked_exhaustive} exhaustive pairs (n <= 6) and {checked_random} random pairs \
             (n in {{8, 10}}) matched exactly"
        ))
    })();
    report(8, "kernel-equivalence", started, result);
}

// --------------------------------------- 9: orthonormal-polynomial facts

/// Derivative identity by central difference, the three envelope
/// properties of the normalized polynomials, and shrinkage of the
/// scaled-binomial-to-Gaussian gap as n grows.
#[test]
fn criterion_09_polynomial_properties() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        // derivative: d/dz h_k = sqrt(k) h_{k-1}, relative error <= 1e-6
        // by central difference at h = 1e-4
        let h = 1e-4f64;
        let mut worst_rel = 0.0f64;
        for k in 1..=10usize {
            let mut z = -5.0f64;
            while z <= 5.0 + 1e-12 {
                let fd = (hermite(k, z + h) - hermite(k, z - h)) / (2.0 * h);
                let exact = (k as f64).sqrt() * hermite(k - 1, z);
                let rel = (fd - exact).abs() / exact.abs().max(1.0);
                worst_rel = worst_rel.max(rel);
                if rel > 1e-6 {
                    return Err(format!(
                        "derivative mismatch at (k={k}, z={z}): relative error {rel:.3e}"
                    ));
                }
                z += 0.25;
            }
        }

        // envelope (1): |h_k(z)| <= h_k(k) on |z| <= k
        for k in 1..=10usize {
            let peak = hermite(k, k as f64);
            let steps = (20 * k) as i64;
            for i in 0..=steps {
                let z = -(k as f64) + i as f64 * (2.0 * k as f64) / steps as f64;
                let v = hermite(k, z).abs();
                if v > peak * (1.0 + 1e-12) + 1e-12 {
                    return Err(format!(
                        "envelope broken at (k={k}, z={z:.2}): |h| = {v:.6e} > h(k) = {peak:.6e}"
                    ));
                }
            }
        }

        // envelope (2): positive and increasing for z >= k
        for k in 1..=10usize {
            let mut prev = hermite(k, k as f64);
            if prev < 0.0 {
                return Err(format!("h_{k}(k) = {prev:.3e} is negative"));
            }
            for i in 1..=100usize {
                let z = k as f64 + i as f64 * 0.1;
                let v = hermite(k, z);
                if v <= 0.0 || v < prev {
                    return Err(format!(
                        "monotonicity broken at (k={k}, z={z:.1}): {prev:.6e} -> {v:.6e}"
                    ));
                }
                prev = v;
            }
        }

        // envelope (3): h_k(Ck) <= (Ck)^k / sqrt(k!) for C >= 1
        for &c in &[1.0f64, 1.5, 2.0, 3.0] {
            for k in 1..=10usize {
                let z = c * k as f64;
                let v = hermite(k, z);
                let cap = (k as f64 * z.ln() - 0.5 * ln_factorial(k)).exp();
                if v > cap * (1.0 + 1e-12) {
                    return Err(format!(
                        "growth cap broken at (k={k}, C={c}): h = {v:.6e} > {cap:.6e}"
                    ));
                }
            }
        }

        // limit: the scaled-binomial gap shrinks from n=100 to n=10^4
        let mut worst_shrink = f64::NEG_INFINITY;
        for k in 1..=4usize {
            let mut z = -3.0f64;
            while z <= 3.0 + 1e-12 {
                let coarse = krawtchouk_hermite_gap(100, k, z).map_err(|e| e.to_string())?;
                let fine = krawtchouk_hermite_gap(10_000, k, z).map_err(|e| e.to_string())?;
                if fine > coarse + 1e-9 {
                    return Err(format!(
                        "gap grew at (k={k}, z={z:.2}): {coarse:.3e} (n=100) -> {fine:.3e} (n=10^4)"
                    ));
                }
                worst_shrink = worst_shrink.max(fine - coarse);
                z += 0.25;
            }
        }
        Ok(format!(
            "derivative worst relative error {worst_rel:.3e}; envelopes (1)-(3) hold on their grids; \
             gap shrinks n=100 -> 10^4 (worst fine-minus-coarse {worst_shrink:.3e})"
        ))
    })();
    report(9, "polynomial-properties", started, result);
}

// ---------------------------------------------------- 10: reproducibility

/// Two invocations of the test subcommand with identical configuration
/// and seed must produce byte-identical CSV.
#[test]
fn criterion_10_reproducible_csv() {
    let started = Instant::now();
    let result = (|| -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out1 = dir.path().join("run1.csv");
        let out2 = dir.path().join("run2.csv");
        let run = |out: &std::path::Path| -> Result<std::process::ExitStatus, String> {
            std::process::Command::new(env!("CARGO_BIN_EXE_kwise"))
                .args([
                    "test",
                    "--construction",
                    "parity(n=10,mask=0x1,coeff=0.6)",
                    "--k",
                    "1",
                    "--delta",
                    "0.5",
                    "--m",
                    "2000",
                    "--trials",
                    "25",
                    "--override",
                    "enforce_sample_bound=false",
                    "--seed",
                    "12345",
                    "--out",
                ])
                .arg(out)
                .status()
                .map_err(|e| e.to_string())
        };
        let s1 = run(&out1)?;
        let s2 = run(&out2)?;
        // the far source is rejected, so the verdict exit code is 1
        for (i, s) in [(1, &s1), (2, &s2)] {
            match s.code() {
                Some(0) | Some(1) => {}
                other => return Err(format!("run {i} exited with {other:?}")),
            }
        }
        let b1 = std::fs::read(&out1).map_err(|e| e.to_string())?;
        let b2 = std::fs::read(&out2).map_err(|e| e.to_string())?;
        if b1.is_empty() {
            return Err("first run produced no output".into());
        }
        if !b1.starts_with(b"construction,tester,n,k,delta,m,trials,accept_rate,ci_low,ci_high,seed") {
            return Err("CSV header does not match the documented schema".into());
        }
        if b1 != b2 {
            return Err(format!(
                "reruns differ: {} vs {} bytes",
                b1.len(),
                b2.len()
            ));
        }
        Ok(format!(
            "identical configuration and seed reproduced {} CSV bytes exactly",
            b1.len()
        ))
    })();
    report(10, "reproducible-csv", started, result);
}
