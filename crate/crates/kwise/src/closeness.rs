//! Exact closeness machinery: the distance from a density to the set of
//! k-wise uniform densities as a linear program, certificate extraction
//! from the dual, correction ("mending") programs that cancel low-level
//! bias, and the constructive first-level mend.

use crate::construct::LowerBoundParams;
use crate::density::{Density, DensityError, Mode, NEG_CLAMP};
use crate::lp::{solve, solve_exact, BigRational, LinearProgram, LpError, LpStatus, Sense};
use thiserror::Error;

/// Largest `n` the full closeness program accepts; the tableau has
/// `2^n + sum_{j<=k} C(n,j)` rows and about `5 * 2^n` columns, which at
/// this cap already means seconds of pivoting.
pub const MAX_CLOSENESS_N: usize = 10;
/// Largest `n` for the correction program, whose row count is only
/// `sum_{1<=j<=k} C(n,j)`.
pub const MAX_MEND_N: usize = 16;
/// Largest `n` for the exact-rational reference solver.
pub const MAX_EXACT_N: usize = 6;

#[derive(Debug, Error)]
pub enum ClosenessError {
    #[error("n = {n} exceeds the cap {max} for this solver")]
    TooLarge { n: usize, max: usize },
    #[error("degree k = {k} out of range [0, {n}]")]
    DegreeRange { n: usize, k: usize },
    #[error("solver reported {status:?} on a program that is feasible and bounded by construction")]
    Degenerate { status: LpStatus },
    #[error("primal objective {primal} and certificate value {dual} disagree beyond tolerance")]
    DualityGap { primal: f64, dual: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Construct(#[from] crate::construct::ConstructError),
}

/// A closeness certificate: point values of a pair `(p, q)` with
/// `q(x) <= 1`, `p(x) >= q(x)` everywhere, and `p` of degree at most
/// `degree`.  For every k-wise uniform density `psi`,
/// `E[psi p] = p_hat(empty)`, so
/// `dist(phi) >= (E[phi q] - p_hat(empty)) / 2`
/// no matter where `(p, q)` came from.
#[derive(Debug, Clone)]
pub struct DualWitness {
    pub n: usize,
    pub degree: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// One broken certificate condition, with the worst offending point.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessViolation {
    QAboveOne { x: u64, value: f64 },
    QBelowMinusOne { x: u64, value: f64 },
    PBelowQ { x: u64, gap: f64 },
    PHighDegree { mask: u64, coefficient: f64 },
}

/// Outcome of checking a certificate against a density.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    /// `(E[phi q] - p_hat(empty)) / 2`; a distance lower bound when
    /// `violations` is empty.
    pub value: f64,
    pub violations: Vec<WitnessViolation>,
}

impl DualWitness {
    /// The certified bound `(E[phi q] - p_hat(empty)) / 2` without any
    /// validity checking.
    pub fn value(&self, phi: &Density) -> Result<f64, ClosenessError> {
        let phi = phi.expand_explicit()?;
        let nn = self.p.len() as f64;
        let inner: f64 = phi
            .values()
            .iter()
            .zip(&self.q)
            .map(|(f, q)| f * q)
            .sum::<f64>()
            / nn;
        let p_mean: f64 = self.p.iter().sum::<f64>() / nn;
        Ok(0.5 * (inner - p_mean))
    }

    /// Checks every certificate condition to tolerance `tol` and
    /// evaluates the bound.  Worst violation per condition is reported.
    pub fn certify(&self, phi: &Density, tol: f64) -> Result<WitnessReport, ClosenessError> {
        let mut violations = Vec::new();
        let mut worst_hi: Option<(u64, f64)> = None;
        let mut worst_lo: Option<(u64, f64)> = None;
        let mut worst_gap: Option<(u64, f64)> = None;
        for x in 0..self.q.len() {
            let q = self.q[x];
            let p = self.p[x];
            if q > 1.0 + tol && worst_hi.map_or(true, |(_, w)| q > w) {
                worst_hi = Some((x as u64, q));
            }
            if q < -1.0 - tol && worst_lo.map_or(true, |(_, w)| q < w) {
                worst_lo = Some((x as u64, q));
            }
            if p - q < -tol && worst_gap.map_or(true, |(_, w)| p - q < w) {
                worst_gap = Some((x as u64, p - q));
            }
        }
        if let Some((x, value)) = worst_hi {
            violations.push(WitnessViolation::QAboveOne { x, value });
        }
        if let Some((x, value)) = worst_lo {
            violations.push(WitnessViolation::QBelowMinusOne { x, value });
        }
        if let Some((x, gap)) = worst_gap {
            violations.push(WitnessViolation::PBelowQ { x, gap });
        }
        // degree check through the transform of p
        let mut coeffs = self.p.clone();
        crate::density::wht_inplace(&mut coeffs);
        let scale = 1.0 / self.p.len() as f64;
        let mut worst_deg: Option<(u64, f64)> = None;
        for (mask, c) in coeffs.iter().enumerate() {
            let c = c * scale;
            if (mask as u64).count_ones() as usize > self.degree
                && c.abs() > tol
                && worst_deg.map_or(true, |(_, w)| c.abs() > w.abs())
            {
                worst_deg = Some((mask as u64, c));
            }
        }
        if let Some((mask, coefficient)) = worst_deg {
            violations.push(WitnessViolation::PHighDegree { mask, coefficient });
        }
        Ok(WitnessReport {
            value: self.value(phi)?,
            violations,
        })
    }
}

/// Output of the exact distance computation.
#[derive(Debug, Clone)]
pub struct ClosenessResult {
    /// Total variation distance from the input to the nearest k-wise
    /// uniform density.
    pub distance: f64,
    /// A k-wise uniform density attaining the distance.
    pub nearest: Density,
    /// Dual certificate proving the distance from below.
    pub witness: DualWitness,
}

fn low_masks(n: usize, k: usize) -> Vec<u64> {
    (0u64..1 << n)
        .filter(|m| (m.count_ones() as usize) <= k)
        .collect()
}

/// Builds the distance program for `phi` (explicit point values):
/// minimize `2^-n sum (s_plus + s_minus) / 2` subject to
/// `psi + s_plus - s_minus = phi` pointwise, `sum_x psi(x) chi_S(x)`
/// pinned to `2^n` for the empty set and `0` for every other `|S| <= k`,
/// all variables nonnegative.
fn closeness_program(values: &[f64], n: usize, k: usize) -> (LinearProgram, Vec<u64>) {
    let nn = values.len();
    let mut lp = LinearProgram::new(3 * nn);
    let half_point = 0.5 / nn as f64;
    for x in 0..nn {
        lp.minimize[nn + x] = half_point;
        lp.minimize[2 * nn + x] = half_point;
    }
    for (x, v) in values.iter().enumerate() {
        let mut row = vec![0.0; 3 * nn];
        row[x] = 1.0;
        row[nn + x] = 1.0;
        row[2 * nn + x] = -1.0;
        lp.push_row(row, Sense::Eq, *v);
    }
    let masks = low_masks(n, k);
    for &mask in &masks {
        let mut row = vec![0.0; 3 * nn];
        for (x, slot) in row.iter_mut().enumerate().take(nn) {
            *slot = crate::bits::parity_sign(x as u64, mask);
        }
        let rhs = if mask == 0 { nn as f64 } else { 0.0 };
        lp.push_row(row, Sense::Eq, rhs);
    }
    (lp, masks)
}

/// Exact distance from `phi` to the set of k-wise uniform densities,
/// with the attaining density and a dual certificate.  The certificate
/// is rebuilt from the raw duals and re-verified; a gap beyond
/// `100 * GAP_TOL`-ish slack is reported as an error instead of being
/// smoothed over.
pub fn closeness_exact(phi: &Density, k: usize) -> Result<ClosenessResult, ClosenessError> {
    let n = phi.n();
    if n > MAX_CLOSENESS_N {
        return Err(ClosenessError::TooLarge {
            n,
            max: MAX_CLOSENESS_N,
        });
    }
    if k > n {
        return Err(ClosenessError::DegreeRange { n, k });
    }
    let phi = phi.expand_explicit()?;
    let nn = phi.values().len();
    let (lp, masks) = closeness_program(phi.values(), n, k);
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(ClosenessError::Degenerate { status: sol.status });
    }

    // nearest density: the psi block, cleaned of solver dust
    let mut psi: Vec<f64> = sol.x[..nn].to_vec();
    let mean: f64 = psi.iter().sum::<f64>() / nn as f64;
    for v in &mut psi {
        *v /= mean;
    }
    let nearest = Density::from_values(n, psi)?;

    // certificate from the duals: q = 2^{n+1} u, p = -2^{n+1} sum v_S chi_S
    let scale = 2.0 * nn as f64;
    let q: Vec<f64> = sol.duals[..nn].iter().map(|u| u * scale).collect();
    let mut p = vec![0.0; nn];
    for (i, &mask) in masks.iter().enumerate() {
        let v = sol.duals[nn + i];
        if v == 0.0 {
            continue;
        }
        for (x, slot) in p.iter_mut().enumerate() {
            *slot -= scale * v * crate::bits::parity_sign(x as u64, mask);
        }
    }
    let witness = DualWitness {
        n,
        degree: k,
        p,
        q,
    };
    let certified = witness.value(&phi)?;
    if (certified - sol.objective).abs() > 1e-6 * (1.0 + sol.objective.abs()) {
        return Err(ClosenessError::DualityGap {
            primal: sol.objective,
            dual: certified,
        });
    }
    Ok(ClosenessResult {
        distance: sol.objective,
        nearest,
        witness,
    })
}

/// The same distance in exact rational arithmetic; a slow reference for
/// cross-checking the float path at small `n`.
pub fn closeness_exact_rational(phi: &Density, k: usize) -> Result<BigRational, ClosenessError> {
    let n = phi.n();
    if n > MAX_EXACT_N {
        return Err(ClosenessError::TooLarge { n, max: MAX_EXACT_N });
    }
    if k > n {
        return Err(ClosenessError::DegreeRange { n, k });
    }
    let phi = phi.expand_explicit()?;
    let (lp, _) = closeness_program(phi.values(), n, k);
    let sol = solve_exact(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(ClosenessError::Degenerate { status: sol.status });
    }
    Ok(sol.objective)
}

/// Result of a correction program or the constructive first-level mend.
#[derive(Debug, Clone)]
pub struct MendResult {
    /// Mean of the correction `chi`; the repaired density is
    /// `(phi + chi) / (1 + weight)` and its distance from `phi` is at
    /// most `weight / (1 + weight)`.
    pub weight: f64,
    /// The repaired, exactly k-wise uniform density.
    pub mended: Density,
    /// Point values of the correction before normalization.
    pub correction: Vec<f64>,
}

impl MendResult {
    /// Upper bound `weight / (1 + weight)` on the distance from the
    /// input to `mended`.
    pub fn distance_bound(&self) -> f64 {
        self.weight / (1.0 + self.weight)
    }
}

/// Minimum-mass nonnegative correction `chi` with
/// `chi_hat(S) = -phi_hat(S)` for all `1 <= |S| <= k`: the cheapest way
/// to cancel the low spectrum by adding mass.  Feasible for every
/// density (scaled uniform-complement corrections always work), so a
/// non-optimal status is an internal failure.
pub fn mend_min_weight(phi: &Density, k: usize) -> Result<MendResult, ClosenessError> {
    let n = phi.n();
    if n > MAX_MEND_N {
        return Err(ClosenessError::TooLarge { n, max: MAX_MEND_N });
    }
    if k > n {
        return Err(ClosenessError::DegreeRange { n, k });
    }
    let phi = phi.expand_explicit()?;
    let nn = phi.values().len();
    let spectrum = phi.spectrum()?;
    let mut lp = LinearProgram::new(nn);
    let point = 1.0 / nn as f64;
    for c in lp.minimize.iter_mut() {
        *c = point;
    }
    for mask in 1u64..nn as u64 {
        if mask.count_ones() as usize > k {
            continue;
        }
        let row: Vec<f64> = (0..nn)
            .map(|x| crate::bits::parity_sign(x as u64, mask))
            .collect();
        lp.push_row(row, Sense::Eq, -(nn as f64) * spectrum.coefficient(mask));
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(ClosenessError::Degenerate { status: sol.status });
    }
    let weight = sol.objective;
    let mut mended: Vec<f64> = phi
        .values()
        .iter()
        .zip(&sol.x)
        .map(|(f, c)| (f + c.max(0.0)) / (1.0 + weight))
        .collect();
    let mean: f64 = mended.iter().sum::<f64>() / nn as f64;
    for v in &mut mended {
        *v /= mean;
    }
    Ok(MendResult {
        weight,
        mended: Density::from_values(n, mended)?,
        correction: sol.x,
    })
}

/// Constructive first-level mend, no solver involved: flip coordinates
/// so every first-level coefficient is nonnegative, then cancel them
/// with a staircase mixture of fixed-suffix blocks ordered by
/// increasing coefficient.  The correction mass equals the largest
/// first-level coefficient magnitude, so an `(eps, 1)`-wise density
/// lands within `eps / (1 + eps)` of exact 1-wise uniformity.
pub fn mend_1wise(phi: &Density) -> Result<MendResult, ClosenessError> {
    let n = phi.n();
    let phi = phi.expand_explicit()?;
    let nn = phi.values().len();

    let biases: Vec<f64> = (0..n).map(|i| phi.bias(1u64 << i)).collect();
    let flip: u64 = biases
        .iter()
        .enumerate()
        .filter(|(_, b)| **b < 0.0)
        .map(|(i, _)| 1u64 << i)
        .sum();
    let flipped = phi.shift(flip)?;

    // ascending |bias| with original coordinate indices
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        biases[*a]
            .abs()
            .partial_cmp(&biases[*b].abs())
            .expect("finite biases")
    });

    // staircase: block j fixes the coordinates ranked j.. to all-ones,
    // contributing -1 to exactly their first-level coefficients
    let mut chi = vec![0.0; nn];
    let mut suffix_mask = order.iter().map(|i| 1u64 << i).sum::<u64>();
    let mut prev = 0.0;
    let mut weight = 0.0;
    for rank in 0..n {
        let coord = order[rank];
        let level = biases[coord].abs();
        let c = level - prev;
        prev = level;
        if c > 0.0 {
            weight += c;
            // the block's density value on its support is
            // 2^n / 2^(n - |suffix|) = 2^|suffix|
            let value = (1u64 << suffix_mask.count_ones()) as f64;
            for (x, slot) in chi.iter_mut().enumerate() {
                if x as u64 & suffix_mask == suffix_mask {
                    *slot += c * value;
                }
            }
        }
        suffix_mask &= !(1u64 << coord);
    }

    let mended_flipped: Vec<f64> = flipped
        .values()
        .iter()
        .zip(&chi)
        .map(|(f, c)| (f + c) / (1.0 + weight))
        .collect();
    let mended = Density::from_values(n, mended_flipped)?.shift(flip)?;
    Ok(MendResult {
        weight,
        mended,
        correction: chi,
    })
}

/// Largest low-level coefficient magnitude: the `eps` for which `phi`
/// is `(eps, k)`-wise uniform.
pub fn epsilon_k(phi: &Density, k: usize) -> Result<f64, ClosenessError> {
    if k > phi.n() {
        return Err(ClosenessError::DegreeRange { n: phi.n(), k });
    }
    match phi.mode() {
        Mode::Explicit => Ok(phi.spectrum()?.max_low_level_bias(k)),
        Mode::Symmetric => {
            let biases = phi.level_biases(k)?;
            Ok(biases[1..=k]
                .iter()
                .fold(0.0f64, |acc, b| acc.max(b.abs())))
        }
    }
}

/// Hand-built certificate for the symmetric level-k tilt: `p = phi - 1`
/// (degree exactly k) and `q = min(p, 1)`.  Its value is
/// `mu^2 / 2` whenever `p` stays at most 1 pointwise, placing the tilt
/// at distance at least `mu^2 / 2` while all its low-level coefficients
/// sit at `eps`.
pub fn theorem12_witness(params: &LowerBoundParams) -> Result<DualWitness, ClosenessError> {
    let phi = crate::construct::theorem12_density(params)?.expand_explicit()?;
    let p: Vec<f64> = phi.values().iter().map(|v| v - 1.0).collect();
    let q: Vec<f64> = p.iter().map(|v| v.min(1.0)).collect();
    Ok(DualWitness {
        n: params.n,
        degree: params.k,
        p,
        q,
    })
}

/// Scales a correction vector into a density when its mass is positive;
/// utility for inspecting solver output.
pub fn correction_density(n: usize, correction: &[f64]) -> Result<Density, DensityError> {
    let cleaned: Vec<f64> = correction
        .iter()
        .map(|c| if *c < 0.0 && *c >= -NEG_CLAMP { 0.0 } else { *c })
        .collect();
    Density::normalized_from_weights(n, cleaned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{epsilon_perturbed_family, psi_j_density, random_density, PerturbShape};
    use num_traits::ToPrimitive;

    #[test]
    fn uniform_density_has_distance_zero() {
        let u = Density::uniform_explicit(4).unwrap();
        let r = closeness_exact(&u, 2).unwrap();
        assert!(r.distance.abs() < 1e-9);
        assert!(r.nearest.is_kwise_uniform(2, 1e-7).unwrap());
        let report = r.witness.certify(&u, 1e-7).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn point_mass_distance_to_0wise_is_zero() {
        // k = 0 only pins the mean, and every density has mean 1
        let d = Density::point_mass(3, 5).unwrap();
        let r = closeness_exact(&d, 0).unwrap();
        assert!(r.distance.abs() < 1e-9);
    }

    #[test]
    fn single_parity_tilt_distance() {
        // phi = 1 + eps x_1: nearest 1-wise density is uniform at
        // distance eps/2, and the certificate must agree
        let eps = 0.6;
        let d = epsilon_perturbed_family(4, 1, eps, PerturbShape::SingleSet, 7).unwrap();
        let r = closeness_exact(&d, 1).unwrap();
        assert!((r.distance - eps / 2.0).abs() < 1e-7, "{}", r.distance);
        let report = r.witness.certify(&d, 1e-6).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!((report.value - r.distance).abs() < 1e-6);
        assert!(r.nearest.is_kwise_uniform(1, 1e-6).unwrap());
        // the optimum is within what the mend bound promises
        assert!(r.distance <= eps / (1.0 + eps) + 1e-9);
    }

    #[test]
    fn float_matches_exact_rational() {
        for seed in 0..4 {
            let d = random_density(4, 100 + seed);
            let float = closeness_exact(&d, 2).unwrap();
            let exact = closeness_exact_rational(&d, 2).unwrap();
            let exact_f = exact.to_f64().unwrap();
            assert!(
                (float.distance - exact_f).abs() < 1e-7,
                "seed {seed}: {} vs {exact_f}",
                float.distance
            );
        }
    }

    #[test]
    fn witness_is_a_valid_lower_bound_on_other_densities() {
        // certificate extracted for one density still lower-bounds the
        // distance of any other density through its own value
        let d = random_density(4, 11);
        let r = closeness_exact(&d, 2).unwrap();
        let other = random_density(4, 12);
        let other_dist = closeness_exact(&other, 2).unwrap().distance;
        let bound = r.witness.value(&other).unwrap();
        assert!(bound <= other_dist + 1e-7);
    }

    #[test]
    fn mend_program_cancels_low_levels() {
        let d = random_density(5, 3);
        let r = mend_min_weight(&d, 2).unwrap();
        assert!(r.mended.is_kwise_uniform(2, 1e-6).unwrap());
        assert!(r.weight >= 0.0);
        // the repaired density is within the promised distance
        let tv = d.tv_distance(&r.mended).unwrap();
        assert!(tv <= r.distance_bound() + 1e-7, "{tv} vs {}", r.distance_bound());
        // mending cannot beat the true distance
        let opt = closeness_exact(&d, 2).unwrap().distance;
        assert!(opt <= tv + 1e-7);
    }

    #[test]
    fn constructive_first_level_mend() {
        for seed in [1u64, 2, 3] {
            let d = random_density(5, 40 + seed);
            let eps = epsilon_k(&d, 1).unwrap();
            let r = mend_1wise(&d).unwrap();
            assert!(r.mended.is_kwise_uniform(1, 1e-9).unwrap());
            assert!((r.weight - eps).abs() < 1e-12, "weight {} eps {eps}", r.weight);
            let tv = d.tv_distance(&r.mended).unwrap();
            assert!(tv <= r.distance_bound() + 1e-12);
        }
    }

    #[test]
    fn mend_1wise_mixed_sign_biases() {
        // hand-built density with one positive and one negative bias
        let n = 3;
        let values: Vec<f64> = (0u64..8)
            .map(|x| {
                1.0 + 0.3 * crate::bits::parity_sign(x, 0b001)
                    - 0.2 * crate::bits::parity_sign(x, 0b010)
            })
            .collect();
        let d = Density::from_values(n, values).unwrap();
        let r = mend_1wise(&d).unwrap();
        assert!(r.mended.is_kwise_uniform(1, 1e-9).unwrap());
        assert!((r.weight - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tilt_witness_certifies_mu_squared_over_two() {
        let params = LowerBoundParams::new(8, 2, 1.0).unwrap();
        let phi = crate::construct::theorem12_density(&params).unwrap();
        let w = theorem12_witness(&params).unwrap();
        let report = w.certify(&phi, 1e-9).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        let mu2 = params.mu * params.mu;
        assert!(
            (report.value - mu2 / 2.0).abs() < 1e-9,
            "{} vs {}",
            report.value,
            mu2 / 2.0
        );
        // and the true distance indeed sits at or above the certificate
        let opt = closeness_exact(&phi.expand_explicit().unwrap(), 2).unwrap();
        assert!(opt.distance >= report.value - 1e-7);
    }

    #[test]
    fn witness_violations_are_named() {
        let d = Density::uniform_explicit(3).unwrap();
        let w = DualWitness {
            n: 3,
            degree: 1,
            // p has a pair-level component and dips below q somewhere
            p: (0u64..8)
                .map(|x| 0.5 * crate::bits::parity_sign(x, 0b011))
                .collect(),
            q: vec![1.5; 8],
        };
        let report = w.certify(&d, 1e-9).unwrap();
        let kinds: Vec<_> = report
            .violations
            .iter()
            .map(|v| match v {
                WitnessViolation::QAboveOne { .. } => "hi",
                WitnessViolation::QBelowMinusOne { .. } => "lo",
                WitnessViolation::PBelowQ { .. } => "gap",
                WitnessViolation::PHighDegree { .. } => "deg",
            })
            .collect();
        assert!(kinds.contains(&"hi"));
        assert!(kinds.contains(&"gap"));
        assert!(kinds.contains(&"deg"));
        assert!(!kinds.contains(&"lo"));
    }

    #[test]
    fn size_caps_are_enforced() {
        let d = Density::uniform(20);
        assert!(matches!(
            closeness_exact(&d, 2),
            Err(ClosenessError::TooLarge { .. })
        ));
        assert!(matches!(
            closeness_exact_rational(&Density::uniform(8), 2),
            Err(ClosenessError::TooLarge { .. })
        ));
        assert!(matches!(
            closeness_exact(&Density::uniform_explicit(4).unwrap(), 9),
            Err(ClosenessError::DegreeRange { .. })
        ));
    }

    #[test]
    fn psi_block_is_reachable_from_mend_view() {
        // fixed-suffix blocks are the mend building material; make sure
        // the two modules agree on their shape
        let b = psi_j_density(4, 2).unwrap();
        assert_eq!(b.value_at(0b1110), 8.0);
        assert_eq!(b.value_at(0b0110), 0.0);
    }
}
