//! Krawtchouk polynomials, normalized Hermite polynomials, and the
//! binomial helpers they lean on.
//!
//! `K_k(t)` on parameters `(n, k)` is the level-`k` character sum
//! `sum_{|S|=k} x^S` evaluated on any point of Hamming weight `t`:
//!
//! ```text
//! K_k(t) = sum_j (-1)^j C(t, j) C(n - t, k - j)
//! ```
//!
//! Tables are built by the Pascal-style recurrence
//! `K_k(t) = K_k(t-1) - K_{k-1}(t-1) - K_{k-1}(t)` seeded from the
//! binomial column `K_k(0) = C(n, k)`, in 128-bit integers while `n <= 64`
//! and in floats beyond.  The alternating defining sum is avoided in float
//! because its terms cancel catastrophically near `t = n/2`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("degree {k} out of range for n = {n}")]
    DegreeRange { n: usize, k: usize },
    #[error("argument {t} out of range for n = {n}")]
    ArgumentRange { n: usize, t: usize },
    #[error("scaled argument z = {z} maps outside the weight range [0, {n}]")]
    ScaledArgument { n: usize, z: f64 },
}

/// Exact `C(n, k)` while it fits in `i128`.
pub fn binomial_exact(n: usize, k: usize) -> Option<i128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as i128)?;
        acc /= (i + 1) as i128;
    }
    Some(acc)
}

/// `C(n, k)` as a float; exact whenever the integer value fits `i128`,
/// otherwise via the log-gamma route.
pub fn binomial(n: usize, k: usize) -> f64 {
    match binomial_exact(n, k) {
        Some(v) => v as f64,
        None => {
            if k > n {
                0.0
            } else {
                ln_binomial(n, k).exp()
            }
        }
    }
}

/// `ln n!` with absolute error below 1e-12: direct product for small `n`,
/// Stirling's series with three correction terms beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 20 {
        let mut acc = 0.0;
        for i in 2..=n {
            acc += (i as f64).ln();
        }
        return acc;
    }
    let x = n as f64;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    (x + 0.5) * x.ln() - x + 0.5 * ln_2pi + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Krawtchouk values `K_k(t)` for `k <= k_max`, `0 <= t <= n`, stored
/// row-major by `k`.  Entries are exact integers for `n <= 64`.
#[derive(Debug, Clone)]
pub struct KrawtchoukTable {
    n: usize,
    k_max: usize,
    float: Vec<f64>,
    exact: Option<Vec<i128>>,
}

impl KrawtchoukTable {
    pub fn new(n: usize, k_max: usize) -> Result<Self, PolyError> {
        if k_max > n {
            return Err(PolyError::DegreeRange { n, k: k_max });
        }
        let cols = n + 1;
        if n <= 64 {
            let mut exact = vec![0i128; (k_max + 1) * cols];
            for k in 0..=k_max {
                exact[k * cols] = binomial_exact(n, k).expect("n <= 64 fits i128");
            }
            for t in 1..=n {
                for k in 0..=k_max {
                    exact[k * cols + t] = if k == 0 {
                        1
                    } else {
                        exact[k * cols + t - 1]
                            - exact[(k - 1) * cols + t - 1]
                            - exact[(k - 1) * cols + t]
                    };
                }
            }
            let float = exact.iter().map(|&v| v as f64).collect();
            Ok(KrawtchoukTable {
                n,
                k_max,
                float,
                exact: Some(exact),
            })
        } else {
            let mut float = vec![0f64; (k_max + 1) * cols];
            for k in 0..=k_max {
                float[k * cols] = binomial(n, k);
            }
            for t in 1..=n {
                for k in 0..=k_max {
                    float[k * cols + t] = if k == 0 {
                        1.0
                    } else {
                        float[k * cols + t - 1]
                            - float[(k - 1) * cols + t - 1]
                            - float[(k - 1) * cols + t]
                    };
                }
            }
            Ok(KrawtchoukTable {
                n,
                k_max,
                float,
                exact: None,
            })
        }
    }

    /// Builds a table from raw float values.  Intended for serialization
    /// and fault-injection fixtures; the integrity selftest is the
    /// intended consumer of corrupted instances.
    pub fn from_raw(n: usize, k_max: usize, values: Vec<f64>) -> Result<Self, PolyError> {
        if k_max > n {
            return Err(PolyError::DegreeRange { n, k: k_max });
        }
        assert_eq!(values.len(), (k_max + 1) * (n + 1), "table shape mismatch");
        Ok(KrawtchoukTable {
            n,
            k_max,
            float: values,
            exact: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn value(&self, k: usize, t: usize) -> f64 {
        assert!(k <= self.k_max && t <= self.n, "index out of table range");
        self.float[k * (self.n + 1) + t]
    }

    /// Exact integer value; `None` when the table was built in float mode.
    pub fn value_exact(&self, k: usize, t: usize) -> Option<i128> {
        assert!(k <= self.k_max && t <= self.n, "index out of table range");
        self.exact.as_ref().map(|e| e[k * (self.n + 1) + t])
    }

    /// Largest absolute defect of the weighted orthogonality relation
    /// `sum_t C(n,t) K_k(t) K_l(t) = 2^n C(n,k) [k = l]` over all
    /// `k, l <= k_max`, in exact integers.  Zero for an intact table.
    /// Only available in exact mode (`n <= 64`).
    pub fn orthogonality_defect_exact(&self) -> Option<i128> {
        self.exact.as_ref()?;
        let mut worst: i128 = 0;
        for k in 0..=self.k_max {
            for l in k..=self.k_max {
                let mut acc: i128 = 0;
                for t in 0..=self.n {
                    let w = binomial_exact(self.n, t)?;
                    acc = acc.checked_add(
                        w.checked_mul(self.value_exact(k, t)?)?
                            .checked_mul(self.value_exact(l, t)?)?,
                    )?;
                }
                let expect = if k == l {
                    binomial_exact(self.n, k)?.checked_mul(1i128.checked_shl(self.n as u32)?)?
                } else {
                    0
                };
                worst = worst.max((acc - expect).abs());
            }
        }
        Some(worst)
    }

    /// Same defect measured on the float table, for fixtures and large `n`.
    /// Returned relative to the scale `2^n C(n,k)`.
    pub fn orthogonality_defect_float(&self) -> f64 {
        let mut worst = 0f64;
        for k in 0..=self.k_max {
            for l in k..=self.k_max {
                let mut acc = 0f64;
                let mut comp = 0f64;
                for t in 0..=self.n {
                    let term = binomial(self.n, t) * self.value(k, t) * self.value(l, t);
                    let y = term - comp;
                    let s = acc + y;
                    comp = (s - acc) - y;
                    acc = s;
                }
                let scale = (self.n as f64) * std::f64::consts::LN_2 + ln_binomial(self.n, k);
                let expect = if k == l { scale.exp() } else { 0.0 };
                worst = worst.max((acc - expect).abs() / scale.exp());
            }
        }
        worst
    }
}

/// One-off `K_k(t)`: exact defining sum for `n <= 64`, table recurrence beyond.
pub fn krawtchouk(n: usize, k: usize, t: usize) -> Result<f64, PolyError> {
    if k > n {
        return Err(PolyError::DegreeRange { n, k });
    }
    if t > n {
        return Err(PolyError::ArgumentRange { n, t });
    }
    if n <= 64 {
        let mut acc: i128 = 0;
        for j in 0..=k.min(t) {
            let a = binomial_exact(t, j).expect("fits");
            let b = binomial_exact(n - t, k.wrapping_sub(j)).expect("fits");
            let term = a * b;
            acc += if j % 2 == 0 { term } else { -term };
        }
        Ok(acc as f64)
    } else {
        Ok(KrawtchoukTable::new(n, k)?.value(k, t))
    }
}

/// The tester's pair statistic depends on two points only through their
/// Hamming distance `d`; this is that dependence for a single level:
/// `sum_{|S|=k} x^S y^S = K_k(d)`.
pub fn level_kernel(n: usize, k: usize, d: usize) -> Result<f64, PolyError> {
    krawtchouk(n, k, d)
}

/// Normalized Hermite polynomial `h_k` (orthonormal under the standard
/// Gaussian), by the three-term recurrence
/// `h_{k+1}(z) = (z h_k(z) - sqrt(k) h_{k-1}(z)) / sqrt(k+1)`.
pub fn hermite(k: usize, z: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => z,
        _ => {
            let mut prev = 1.0; // h_0
            let mut cur = z; // h_1
            for j in 1..k {
                let next = (z * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `h_k` by the explicit alternating series
/// `sqrt(k!) * sum_i (-1)^i z^(k-2i) / ((2i)!! (k-2i)!)`.
/// Fine for moderate `k`; the recurrence is the stable route.
pub fn hermite_via_series(k: usize, z: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..=(k / 2) {
        let mut denom = 1.0;
        for j in 1..=i {
            denom *= 2.0 * j as f64; // (2i)!! = 2^i i!
        }
        for j in 1..=(k - 2 * i) {
            denom *= j as f64;
        }
        let term = z.powi((k - 2 * i) as i32) / denom;
        acc += if i % 2 == 0 { term } else { -term };
    }
    (0.5 * ln_factorial(k)).exp() * acc
}

/// Distance between the binomially-scaled Krawtchouk value and its
/// Gaussian limit: `|C(n,k)^{-1/2} K_k(round((n - z sqrt n)/2)) - h_k(z)|`.
/// Rounding breaks ties toward `n/2`.
pub fn krawtchouk_hermite_gap(n: usize, k: usize, z: f64) -> Result<f64, PolyError> {
    let raw = (n as f64 - z * (n as f64).sqrt()) / 2.0;
    let lo = raw.floor();
    let frac = raw - lo;
    let t = if (frac - 0.5).abs() <= 1e-12 {
        // tie: step toward the center of the weight range
        if raw < n as f64 / 2.0 {
            lo + 1.0
        } else {
            lo
        }
    } else {
        raw.round()
    };
    if t < 0.0 || t > n as f64 {
        return Err(PolyError::ScaledArgument { n, z });
    }
    let t = t as usize;
    let scale = (-0.5 * ln_binomial(n, k)).exp();
    Ok((scale * krawtchouk(n, k, t)? - hermite(k, z)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials_small() {
        assert_eq!(binomial_exact(8, 2), Some(28));
        assert_eq!(binomial_exact(0, 0), Some(1));
        assert_eq!(binomial_exact(5, 7), Some(0));
        assert_eq!(binomial(64, 32), 1832624140942590534.0);
    }

    #[test]
    fn ln_factorial_matches_exact() {
        // 25! is exactly representable in i128
        let exact: i128 = (1..=25i128).product();
        let got = ln_factorial(25);
        assert!((got - (exact as f64).ln()).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn krawtchouk_known_values() {
        // K_1(t) = n - 2t
        assert_eq!(krawtchouk(5, 1, 2).unwrap(), 1.0);
        // K_k(0) = C(n, k)
        assert_eq!(krawtchouk(9, 3, 0).unwrap(), 84.0);
        // a root: K_2 on n = 4 at t = 1
        assert_eq!(krawtchouk(4, 2, 1).unwrap(), 0.0);
        // full-distance level kernel on n = 3
        assert_eq!(level_kernel(3, 2, 3).unwrap(), 3.0);
    }

    #[test]
    fn table_matches_defining_sum() {
        let table = KrawtchoukTable::new(12, 5).unwrap();
        for k in 0..=5 {
            for t in 0..=12 {
                assert_eq!(table.value(k, t), krawtchouk(12, k, t).unwrap(), "k={k} t={t}");
            }
        }
    }

    #[test]
    fn reflection_symmetry() {
        // K_k(n - t) = (-1)^k K_k(t)
        let table = KrawtchoukTable::new(11, 4).unwrap();
        for k in 0..=4 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for t in 0..=11 {
                assert_eq!(table.value(k, 11 - t), sign * table.value(k, t));
            }
        }
    }

    #[test]
    fn orthogonality_exact_holds() {
        for n in [6, 17, 30] {
            let table = KrawtchoukTable::new(n, 6.min(n)).unwrap();
            assert_eq!(table.orthogonality_defect_exact(), Some(0), "n={n}");
        }
    }

    #[test]
    fn float_table_tracks_exact_at_boundary() {
        // n = 64 is the last exact size; rebuild in forced-float mode and compare.
        let exact = KrawtchoukTable::new(64, 4).unwrap();
        let float = KrawtchoukTable::from_raw(
            64,
            4,
            {
                let mut v = vec![0f64; 5 * 65];
                for k in 0..=4 {
                    v[k * 65] = binomial(64, k);
                }
                for t in 1..=64 {
                    for k in 0..=4usize {
                        v[k * 65 + t] = if k == 0 {
                            1.0
                        } else {
                            v[k * 65 + t - 1] - v[(k - 1) * 65 + t - 1] - v[(k - 1) * 65 + t]
                        };
                    }
                }
                v
            },
        )
        .unwrap();
        for k in 0..=4 {
            for t in 0..=64 {
                let e = exact.value(k, t);
                let f = float.value(k, t);
                assert!((e - f).abs() <= 1e-9 * e.abs().max(1.0), "k={k} t={t}");
            }
        }
    }

    #[test]
    fn hermite_small_cases() {
        assert_eq!(hermite(0, 3.2), 1.0);
        assert_eq!(hermite(1, -0.7), -0.7);
        // h_2(z) = (z^2 - 1) / sqrt(2)
        let z = 1.3;
        assert!((hermite(2, z) - (z * z - 1.0) / 2f64.sqrt()).abs() < 1e-15);
        assert!((hermite(2, 0.0) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermite_series_agrees_with_recurrence() {
        for k in 0..=20 {
            for iz in -20..=20 {
                let z = iz as f64 * 0.25;
                let a = hermite(k, z);
                let b = hermite_via_series(k, z);
                assert!(
                    (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                    "k={k} z={z}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn hermite_derivative_identity() {
        // d/dz h_k = sqrt(k) h_{k-1}, checked by central differences
        let h = 1e-5;
        for k in 1..=8 {
            for iz in -8..=8 {
                let z = iz as f64 * 0.5;
                let num = (hermite(k, z + h) - hermite(k, z - h)) / (2.0 * h);
                let exact = (k as f64).sqrt() * hermite(k - 1, z);
                assert!(
                    (num - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                    "k={k} z={z}"
                );
            }
        }
    }

    #[test]
    fn gap_error_outside_range() {
        assert!(matches!(
            krawtchouk_hermite_gap(16, 2, 40.0),
            Err(PolyError::ScaledArgument { .. })
        ));
    }
}
