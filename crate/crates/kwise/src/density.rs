//! Densities and Fourier spectra on the Boolean cube `{-1,1}^n`.
//!
//! A density is a nonnegative function with mean 1 under the uniform
//! measure; sampling from it means drawing points with probability
//! `phi(x) / 2^n`.  Two storages are supported:
//!
//! * `Explicit`: one value per point, capped at `n <= 24`;
//! * `Symmetric`: one value per Hamming-weight class, usable for `n` in
//!   the tens of thousands.
//!
//! The spectrum of an explicit density holds one coefficient per subset
//! mask (`phihat(S) = E[phi(x) x^S]`); a symmetric density has equal
//! coefficients within each level, so its spectrum holds one value per
//! level, mapped back and forth through Krawtchouk sums.

use crate::poly::{binomial, ln_binomial, KrawtchoukTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `n` for which per-point storage is allowed (`2^n` values).
pub const EXPLICIT_MAX_N: usize = 24;
/// Largest `n` for which a full symmetric spectrum (all `n + 1` levels)
/// is computed; partial level prefixes work far beyond this.
pub const SYMMETRIC_FULL_N: usize = 512;
/// Values below this are treated as exact zeros when cleaning a density.
pub const NEG_CLAMP: f64 = 1e-12;
/// Values below this are refused outright.
pub const NEG_HARD: f64 = -1e-7;
/// Allowed deviation of a density's mean from 1.
pub const MEAN_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("explicit storage refused for n = {n} (cap is {EXPLICIT_MAX_N})")]
    ExplicitTooLarge { n: usize },
    #[error("full symmetric transform refused for n = {n} (cap is {SYMMETRIC_FULL_N})")]
    SymmetricTooLarge { n: usize },
    #[error("value vector has length {got}, expected {want}")]
    WrongLength { got: usize, want: usize },
    #[error("negative value {value} at point index {point}")]
    NegativeValue { point: usize, value: f64 },
    #[error("density mean is {mean}, expected 1")]
    MeanNotOne { mean: f64 },
    #[error("operation `{op}` needs matching modes/sizes (left n={left_n}, right n={right_n})")]
    Mismatch {
        op: &'static str,
        left_n: usize,
        right_n: usize,
    },
    #[error("operation `{op}` is not available in {mode:?} mode")]
    ModeUnsupported { op: &'static str, mode: Mode },
    #[error("spectrum does not invert to a density: value {value} at point index {point}")]
    NotADensity { point: usize, value: f64 },
    #[error("unknown mode string `{0}`")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Explicit,
    Symmetric,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Explicit => "explicit",
            Mode::Symmetric => "symmetric",
        }
    }
}

/// In-place unnormalized Walsh-Hadamard transform.  Applying it twice
/// multiplies by `2^n`; the forward Fourier transform scales by `2^-n`.
pub(crate) fn wht_inplace(v: &mut [f64]) {
    debug_assert!(v.len().is_power_of_two());
    let mut h = 1;
    while h < v.len() {
        for chunk in v.chunks_mut(2 * h) {
            for i in 0..h {
                let a = chunk[i];
                let b = chunk[i + h];
                chunk[i] = a + b;
                chunk[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `ln` of the probability mass of one point at weight class `t`
/// times the class size: `ln(C(n,t)) - n ln 2`.
pub(crate) fn ln_class_weight(n: usize, t: usize) -> f64 {
    ln_binomial(n, t) - n as f64 * std::f64::consts::LN_2
}

fn clean_values(values: &mut [f64]) -> Result<(), DensityError> {
    for (i, v) in values.iter_mut().enumerate() {
        if *v < NEG_HARD {
            return Err(DensityError::NegativeValue { point: i, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// A density function on `{-1,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    n: usize,
    mode: Mode,
    values: Vec<f64>,
}

impl Density {
    /// Explicit density from per-point values (index = packed point).
    /// Slightly negative dust is clamped to zero; values below
    /// [`NEG_HARD`] or a mean off 1 by more than [`MEAN_TOL`] are errors.
    pub fn from_values(n: usize, mut values: Vec<f64>) -> Result<Self, DensityError> {
        if n > EXPLICIT_MAX_N {
            return Err(DensityError::ExplicitTooLarge { n });
        }
        let want = 1usize << n;
        if values.len() != want {
            return Err(DensityError::WrongLength {
                got: values.len(),
                want,
            });
        }
        clean_values(&mut values)?;
        let mean = values.iter().sum::<f64>() / want as f64;
        if (mean - 1.0).abs() > MEAN_TOL {
            return Err(DensityError::MeanNotOne { mean });
        }
        Ok(Density {
            n,
            mode: Mode::Explicit,
            values,
        })
    }

    /// Symmetric density from one value per Hamming-weight class.
    pub fn from_profile(n: usize, mut profile: Vec<f64>) -> Result<Self, DensityError> {
        if profile.len() != n + 1 {
            return Err(DensityError::WrongLength {
                got: profile.len(),
                want: n + 1,
            });
        }
        clean_values(&mut profile)?;
        let mean: f64 = (0..=n)
            .map(|t| profile[t] * ln_class_weight(n, t).exp())
            .sum();
        if (mean - 1.0).abs() > MEAN_TOL {
            return Err(DensityError::MeanNotOne { mean });
        }
        Ok(Density {
            n,
            mode: Mode::Symmetric,
            values: profile,
        })
    }

    /// Rescales arbitrary nonnegative weights to mean 1 and builds an
    /// explicit density.  Handy for randomized test densities.
    pub fn normalized_from_weights(n: usize, weights: Vec<f64>) -> Result<Self, DensityError> {
        if n > EXPLICIT_MAX_N {
            return Err(DensityError::ExplicitTooLarge { n });
        }
        let want = 1usize << n;
        if weights.len() != want {
            return Err(DensityError::WrongLength {
                got: weights.len(),
                want,
            });
        }
        let mean = weights.iter().sum::<f64>() / want as f64;
        if mean <= 0.0 {
            return Err(DensityError::MeanNotOne { mean: 0.0 });
        }
        Self::from_values(n, weights.into_iter().map(|w| w / mean).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Density {
            n,
            mode: Mode::Symmetric,
            values: vec![1.0; n + 1],
        }
    }

    pub fn uniform_explicit(n: usize) -> Result<Self, DensityError> {
        if n > EXPLICIT_MAX_N {
            return Err(DensityError::ExplicitTooLarge { n });
        }
        Ok(Density {
            n,
            mode: Mode::Explicit,
            values: vec![1.0; 1 << n],
        })
    }

    /// Point mass at the packed point `x0`: value `2^n` there, 0 elsewhere.
    pub fn point_mass(n: usize, x0: u64) -> Result<Self, DensityError> {
        if n > EXPLICIT_MAX_N {
            return Err(DensityError::ExplicitTooLarge { n });
        }
        let mut values = vec![0.0; 1 << n];
        values[x0 as usize] = (1u64 << n) as f64;
        Ok(Density {
            n,
            mode: Mode::Explicit,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Raw storage: per-point values (explicit) or per-class profile (symmetric).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Density value at a packed point.
    pub fn value_at(&self, x: u64) -> f64 {
        match self.mode {
            Mode::Explicit => self.values[x as usize],
            Mode::Symmetric => self.values[x.count_ones() as usize],
        }
    }

    pub fn mean(&self) -> f64 {
        match self.mode {
            Mode::Explicit => self.values.iter().sum::<f64>() / self.values.len() as f64,
            Mode::Symmetric => (0..=self.n)
                .map(|t| self.values[t] * ln_class_weight(self.n, t).exp())
                .sum(),
        }
    }

    /// Expands a symmetric density to explicit storage (`n <= 24`).
    pub fn expand_explicit(&self) -> Result<Density, DensityError> {
        match self.mode {
            Mode::Explicit => Ok(self.clone()),
            Mode::Symmetric => {
                if self.n > EXPLICIT_MAX_N {
                    return Err(DensityError::ExplicitTooLarge { n: self.n });
                }
                let values = (0u64..1 << self.n)
                    .map(|x| self.values[x.count_ones() as usize])
                    .collect();
                Ok(Density {
                    n: self.n,
                    mode: Mode::Explicit,
                    values,
                })
            }
        }
    }

    /// Full Fourier transform.  Explicit mode is a scaled Walsh-Hadamard
    /// pass; symmetric mode maps the profile through Krawtchouk sums and
    /// is capped at `n <=` [`SYMMETRIC_FULL_N`].
    pub fn spectrum(&self) -> Result<Spectrum, DensityError> {
        match self.mode {
            Mode::Explicit => {
                let mut coeffs = self.values.clone();
                wht_inplace(&mut coeffs);
                let scale = 1.0 / (1u64 << self.n) as f64;
                for c in &mut coeffs {
                    *c *= scale;
                }
                Ok(Spectrum {
                    n: self.n,
                    mode: Mode::Explicit,
                    values: coeffs,
                })
            }
            Mode::Symmetric => {
                if self.n > SYMMETRIC_FULL_N {
                    return Err(DensityError::SymmetricTooLarge { n: self.n });
                }
                Ok(Spectrum {
                    n: self.n,
                    mode: Mode::Symmetric,
                    values: self.level_biases(self.n).expect("k_max = n is in range"),
                })
            }
        }
    }

    /// Fourier coefficient of a single subset mask, without a full transform.
    pub fn bias(&self, mask: u64) -> f64 {
        match self.mode {
            Mode::Explicit => {
                let mut acc = 0.0;
                for (x, v) in self.values.iter().enumerate() {
                    acc += v * crate::bits::parity_sign(x as u64, mask);
                }
                acc / self.values.len() as f64
            }
            Mode::Symmetric => {
                let k = mask.count_ones() as usize;
                self.level_biases(k).expect("k <= n by mask construction")[k]
            }
        }
    }

    /// Per-level Fourier coefficients `0..=k_max` of a symmetric density:
    /// `c_k = sum_t profile(t) * Pr[weight = t] * K_k(t) / C(n,k)`.
    /// Works at any `n`; cost `O(n * k_max)`.
    pub fn level_biases(&self, k_max: usize) -> Result<Vec<f64>, DensityError> {
        match self.mode {
            Mode::Explicit => Err(DensityError::ModeUnsupported {
                op: "level_biases",
                mode: self.mode,
            }),
            Mode::Symmetric => {
                assert!(k_max <= self.n, "level beyond n");
                let table = KrawtchoukTable::new(self.n, k_max).expect("k_max <= n");
                let class_w: Vec<f64> = (0..=self.n)
                    .map(|t| ln_class_weight(self.n, t).exp())
                    .collect();
                let mut out = vec![0.0; k_max + 1];
                for (k, slot) in out.iter_mut().enumerate() {
                    let cnk = ln_binomial(self.n, k).exp();
                    let mut acc = 0.0;
                    let mut comp = 0.0;
                    for t in 0..=self.n {
                        // K_k(t) / C(n,k) stays in [-1, 1]; divide before
                        // multiplying so nothing overflows at large n.
                        let ratio = table.value(k, t) / cnk;
                        let term = self.values[t] * class_w[t] * ratio;
                        let y = term - comp;
                        let s = acc + y;
                        comp = (s - acc) - y;
                        acc = s;
                    }
                    *slot = acc;
                }
                Ok(out)
            }
        }
    }

    /// Total squared Fourier mass on levels `lo..=hi`.
    pub fn fourier_weight(&self, lo: usize, hi: usize) -> Result<f64, DensityError> {
        let hi = hi.min(self.n);
        match self.mode {
            Mode::Explicit => {
                let spec = self.spectrum()?;
                Ok(spec.weight(lo, hi))
            }
            Mode::Symmetric => {
                let biases = self.level_biases(hi)?;
                Ok((lo..=hi)
                    .map(|k| {
                        let ln_w = 2.0 * biases[k].abs().max(f64::MIN_POSITIVE).ln()
                            + ln_binomial(self.n, k);
                        if biases[k] == 0.0 {
                            0.0
                        } else {
                            ln_w.exp()
                        }
                    })
                    .sum())
            }
        }
    }

    /// Convolution `(f * g)(x) = E_y[f(y) g(x o y)]`, computed spectrally:
    /// coefficients multiply pointwise (or level-wise).
    pub fn convolve(&self, other: &Density) -> Result<Density, DensityError> {
        if self.n != other.n || self.mode != other.mode {
            return Err(DensityError::Mismatch {
                op: "convolve",
                left_n: self.n,
                right_n: other.n,
            });
        }
        let a = self.spectrum()?;
        let b = other.spectrum()?;
        let product = Spectrum {
            n: self.n,
            mode: self.mode,
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| x * y)
                .collect(),
        };
        product.density()
    }

    /// Total variation distance `1/2 E|f - g|` between the distributions
    /// the two densities describe.  Mixed modes are reconciled by
    /// expansion when `n` permits.
    pub fn tv_distance(&self, other: &Density) -> Result<f64, DensityError> {
        if self.n != other.n {
            return Err(DensityError::Mismatch {
                op: "tv_distance",
                left_n: self.n,
                right_n: other.n,
            });
        }
        match (self.mode, other.mode) {
            (Mode::Explicit, Mode::Explicit) => {
                let m = self.values.len() as f64;
                Ok(self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / (2.0 * m))
            }
            (Mode::Symmetric, Mode::Symmetric) => Ok((0..=self.n)
                .map(|t| {
                    ln_class_weight(self.n, t).exp() * (self.values[t] - other.values[t]).abs()
                })
                .sum::<f64>()
                / 2.0),
            _ => {
                let a = self.expand_explicit()?;
                let b = other.expand_explicit()?;
                a.tv_distance(&b)
            }
        }
    }

    /// Shift by a point `t` (coordinatewise product): `phi^{+t}(x) = phi(x o t)`.
    /// Explicit mode only; the packed representation makes this an XOR.
    pub fn shift(&self, t: u64) -> Result<Density, DensityError> {
        match self.mode {
            Mode::Symmetric => Err(DensityError::ModeUnsupported {
                op: "shift",
                mode: self.mode,
            }),
            Mode::Explicit => {
                let size = self.values.len() as u64;
                let values = (0..size).map(|x| self.values[(x ^ t) as usize]).collect();
                Ok(Density {
                    n: self.n,
                    mode: Mode::Explicit,
                    values,
                })
            }
        }
    }

    /// True when every Fourier coefficient on levels `1..=k` is within
    /// `tol` of zero.
    pub fn is_kwise_uniform(&self, k: usize, tol: f64) -> Result<bool, DensityError> {
        let k = k.min(self.n);
        match self.mode {
            Mode::Explicit => {
                let spec = self.spectrum()?;
                for (mask, c) in spec.values.iter().enumerate() {
                    let lvl = (mask as u64).count_ones() as usize;
                    if (1..=k).contains(&lvl) && c.abs() > tol {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Mode::Symmetric => {
                let biases = self.level_biases(k)?;
                Ok(biases[1..].iter().all(|b| b.abs() <= tol))
            }
        }
    }

    /// `<f, g> = E[f g]` under the uniform measure.
    pub fn inner_product(&self, other: &Density) -> Result<f64, DensityError> {
        if self.n != other.n {
            return Err(DensityError::Mismatch {
                op: "inner_product",
                left_n: self.n,
                right_n: other.n,
            });
        }
        match (self.mode, other.mode) {
            (Mode::Explicit, Mode::Explicit) => {
                let m = self.values.len() as f64;
                Ok(self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / m)
            }
            (Mode::Symmetric, Mode::Symmetric) => Ok((0..=self.n)
                .map(|t| ln_class_weight(self.n, t).exp() * self.values[t] * other.values[t])
                .sum()),
            _ => {
                let a = self.expand_explicit()?;
                let b = other.expand_explicit()?;
                a.inner_product(&b)
            }
        }
    }
}

/// A Fourier spectrum; `values` is mask-indexed (explicit) or
/// level-indexed (symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    mode: Mode,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn from_coefficients(n: usize, values: Vec<f64>) -> Result<Self, DensityError> {
        if n > EXPLICIT_MAX_N {
            return Err(DensityError::ExplicitTooLarge { n });
        }
        let want = 1usize << n;
        if values.len() != want {
            return Err(DensityError::WrongLength {
                got: values.len(),
                want,
            });
        }
        Ok(Spectrum {
            n,
            mode: Mode::Explicit,
            values,
        })
    }

    pub fn from_level_coefficients(n: usize, values: Vec<f64>) -> Result<Self, DensityError> {
        if values.len() != n + 1 {
            return Err(DensityError::WrongLength {
                got: values.len(),
                want: n + 1,
            });
        }
        Ok(Spectrum {
            n,
            mode: Mode::Symmetric,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coefficient of a subset mask.
    pub fn coefficient(&self, mask: u64) -> f64 {
        match self.mode {
            Mode::Explicit => self.values[mask as usize],
            Mode::Symmetric => self.values[mask.count_ones() as usize],
        }
    }

    /// Squared Fourier mass on levels `lo..=hi`.
    pub fn weight(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.n);
        match self.mode {
            Mode::Explicit => self
                .values
                .iter()
                .enumerate()
                .filter(|(mask, _)| {
                    let lvl = (*mask as u64).count_ones() as usize;
                    lvl >= lo && lvl <= hi
                })
                .map(|(_, c)| c * c)
                .sum(),
            Mode::Symmetric => (lo..=hi)
                .map(|k| self.values[k] * self.values[k] * binomial(self.n, k))
                .sum(),
        }
    }

    /// Largest absolute coefficient on levels `1..=k`.
    pub fn max_low_level_bias(&self, k: usize) -> f64 {
        let k = k.min(self.n);
        match self.mode {
            Mode::Explicit => self
                .values
                .iter()
                .enumerate()
                .filter(|(mask, _)| {
                    let lvl = (*mask as u64).count_ones() as usize;
                    lvl >= 1 && lvl <= k
                })
                .map(|(_, c)| c.abs())
                .fold(0.0, f64::max),
            Mode::Symmetric => self.values[1..=k]
                .iter()
                .map(|c| c.abs())
                .fold(0.0, f64::max),
        }
    }

    /// Inverse transform back to a density.  Fails with the most negative
    /// point when the coefficients do not describe a nonnegative function.
    pub fn density(&self) -> Result<Density, DensityError> {
        match self.mode {
            Mode::Explicit => {
                let mut values = self.values.clone();
                wht_inplace(&mut values);
                if let Some((point, &value)) = values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                {
                    if value < NEG_HARD {
                        return Err(DensityError::NotADensity { point, value });
                    }
                }
                Density::from_values(self.n, values)
            }
            Mode::Symmetric => {
                if self.n > SYMMETRIC_FULL_N {
                    return Err(DensityError::SymmetricTooLarge { n: self.n });
                }
                let table = KrawtchoukTable::new(self.n, self.n).expect("k_max = n");
                let mut profile = vec![0.0; self.n + 1];
                for (t, slot) in profile.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, c) in self.values.iter().enumerate() {
                        acc += c * table.value(k, t);
                    }
                    *slot = acc;
                }
                if let Some((point, &value)) = profile
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                {
                    if value < NEG_HARD {
                        return Err(DensityError::NotADensity { point, value });
                    }
                }
                Density::from_profile(self.n, profile)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    n: usize,
    mode: String,
    values: Vec<f64>,
}

impl Serialize for Density {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            n: self.n,
            mode: self.mode.as_str().to_string(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Density {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = Repr::deserialize(d)?;
        let built = match repr.mode.as_str() {
            "explicit" => Density::from_values(repr.n, repr.values),
            "symmetric" => Density::from_profile(repr.n, repr.values),
            other => Err(DensityError::UnknownMode(other.to_string())),
        };
        built.map_err(serde::de::Error::custom)
    }
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            n: self.n,
            mode: self.mode.as_str().to_string(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = Repr::deserialize(d)?;
        let built = match repr.mode.as_str() {
            "explicit" => Spectrum::from_coefficients(repr.n, repr.values),
            "symmetric" => Spectrum::from_level_coefficients(repr.n, repr.values),
            other => Err(DensityError::UnknownMode(other.to_string())),
        };
        built.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chacha_density(n: usize, seed: u64) -> Density {
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..1usize << n)
            .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 + 1e-3)
            .collect();
        Density::normalized_from_weights(n, weights).unwrap()
    }

    #[test]
    fn transform_roundtrip() {
        for n in [1, 4, 9] {
            let d = chacha_density(n, 7 + n as u64);
            let back = d.spectrum().unwrap().density().unwrap();
            for (a, b) in d.values().iter().zip(back.values()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parseval() {
        let d = chacha_density(8, 3);
        let e2: f64 = d.values().iter().map(|v| v * v).sum::<f64>() / 256.0;
        let full_weight = d.fourier_weight(0, 8).unwrap();
        assert!((e2 - full_weight).abs() < 1e-10);
    }

    #[test]
    fn empty_set_coefficient_is_mean() {
        let d = chacha_density(6, 11);
        let spec = d.spectrum().unwrap();
        assert!((spec.coefficient(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_multiplies_spectra() {
        let f = chacha_density(6, 1);
        let g = chacha_density(6, 2);
        let conv = f.convolve(&g).unwrap();
        let sf = f.spectrum().unwrap();
        let sg = g.spectrum().unwrap();
        let sc = conv.spectrum().unwrap();
        for mask in 0..64u64 {
            assert!(
                (sc.coefficient(mask) - sf.coefficient(mask) * sg.coefficient(mask)).abs() < 1e-10
            );
        }
    }

    #[test]
    fn shift_flips_spectrum_signs() {
        let d = chacha_density(5, 9);
        let t = 0b10110u64;
        let shifted = d.shift(t).unwrap();
        let s0 = d.spectrum().unwrap();
        let s1 = shifted.spectrum().unwrap();
        for mask in 0..32u64 {
            let sign = crate::bits::parity_sign(t, mask);
            assert!((s1.coefficient(mask) - sign * s0.coefficient(mask)).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_simple_cases() {
        // 1 + eps*x_1 on one coordinate vs uniform: distance eps/2
        let eps = 0.3;
        let d = Density::from_values(1, vec![1.0 + eps, 1.0 - eps]).unwrap();
        let u = Density::uniform_explicit(1).unwrap();
        assert!((d.tv_distance(&u).unwrap() - eps / 2.0).abs() < 1e-15);

        let p = Density::point_mass(1, 0).unwrap();
        assert!((p.tv_distance(&u).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parity_density_is_nearly_fully_uniform() {
        // uniform on even-parity strings of n = 4: (n-1)-wise uniform,
        // with a single top-level coefficient equal to 1
        let n = 4;
        let values: Vec<f64> = (0u64..16)
            .map(|x| if x.count_ones() % 2 == 0 { 2.0 } else { 0.0 })
            .collect();
        let d = Density::from_values(n, values).unwrap();
        assert!(d.is_kwise_uniform(3, 1e-12).unwrap());
        assert!(!d.is_kwise_uniform(4, 1e-12).unwrap());
        let spec = d.spectrum().unwrap();
        assert!((spec.coefficient(0b1111) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_explicit_agree() {
        let n = 10;
        // a mildly tilted symmetric profile, normalized by hand
        let raw: Vec<f64> = (0..=n).map(|t| 1.0 + 0.04 * (t as f64 - 5.0)).collect();
        let mean: f64 = (0..=n)
            .map(|t| raw[t] * ln_class_weight(n, t).exp())
            .sum();
        let profile: Vec<f64> = raw.iter().map(|v| v / mean).collect();
        let sym = Density::from_profile(n, profile).unwrap();
        let exp = sym.expand_explicit().unwrap();

        let sym_spec = sym.spectrum().unwrap();
        let exp_spec = exp.spectrum().unwrap();
        for mask in [0b1u64, 0b11, 0b10100, 0b1110011] {
            assert!(
                (sym_spec.coefficient(mask) - exp_spec.coefficient(mask)).abs() < 1e-10,
                "mask {mask:b}"
            );
        }
        for (lo, hi) in [(1, 3), (0, 10), (2, 2)] {
            assert!(
                (sym.fourier_weight(lo, hi).unwrap() - exp.fourier_weight(lo, hi).unwrap()).abs()
                    < 1e-10
            );
        }
        assert!(
            (sym.tv_distance(&Density::uniform(n)).unwrap()
                - exp.tv_distance(&Density::uniform_explicit(n).unwrap()).unwrap())
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn large_n_level_biases() {
        // pairwise tilt at n = 2000: level-2 coefficient should come out
        // as delta / n without building anything quadratic
        let n = 2000;
        let delta = 0.4;
        let table = KrawtchoukTable::new(n, 2).unwrap();
        let profile: Vec<f64> = (0..=n)
            .map(|t| 1.0 + delta / n as f64 * table.value(2, t))
            .collect();
        let d = Density::from_profile(n, profile).unwrap();
        let biases = d.level_biases(2).unwrap();
        assert!(biases[1].abs() < 1e-12);
        assert!((biases[2] - delta / n as f64).abs() < 1e-14);
    }

    #[test]
    fn negative_value_policy() {
        let err = Density::from_values(1, vec![2.0 + 1e-6, -1e-6]);
        assert!(matches!(err, Err(DensityError::NegativeValue { .. })));
        // dust within tolerance is clamped and the mean re-checked
        let ok = Density::from_values(1, vec![2.0, -1e-10]).unwrap();
        assert_eq!(ok.values()[1], 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let d = chacha_density(4, 5);
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"mode\":\"explicit\""));
        let back: Density = serde_json::from_str(&text).unwrap();
        assert_eq!(d, back);

        let s = d.spectrum().unwrap();
        let stext = serde_json::to_string(&s).unwrap();
        let sback: Spectrum = serde_json::from_str(&stext).unwrap();
        assert_eq!(s, sback);
    }
}
