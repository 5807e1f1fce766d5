//! Text form for sources and densities, e.g. `uniform(n=16)` or
//! `theorem12(n=8,k=2,c=4)`.  Every subcommand that consumes samples or
//! a distribution takes one of these strings, so runs are fully
//! described by their command line.

use kwise::construct::{
    pairwise_density, pairwise_shifted_source, psi_j_density, random_density, theorem12_density,
    LowerBoundParams,
};
use kwise::density::Density;
use kwise::sampling::{
    ConstantSource, DensitySampler, ParityPlantedSource, SampleSource, UniformSource,
};

use crate::CliError;

/// Largest `n` for which we will tabulate an explicit density
/// (alias-table sampling, closeness programs, mending).
pub const MAX_EXPLICIT_N: usize = 20;

/// A parsed construction string.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    Uniform { n: usize },
    Constant { n: usize },
    Parity { n: usize, mask: u64, coeff: f64 },
    Random { n: usize, seed: u64 },
    Theorem12 { n: usize, k: usize, c: f64 },
    Pairwise { n: usize, delta: f64 },
    ShiftedPairwise { n: usize, delta: f64 },
    PsiJ { n: usize, j: usize },
}

impl Construction {
    pub fn n(&self) -> usize {
        match *self {
            Construction::Uniform { n }
            | Construction::Constant { n }
            | Construction::Parity { n, .. }
            | Construction::Random { n, .. }
            | Construction::Theorem12 { n, .. }
            | Construction::Pairwise { n, .. }
            | Construction::ShiftedPairwise { n, .. }
            | Construction::PsiJ { n, .. } => n,
        }
    }

    /// Canonical text form, used verbatim in output tables.
    pub fn describe(&self) -> String {
        match *self {
            Construction::Uniform { n } => format!("uniform(n={n})"),
            Construction::Constant { n } => format!("constant(n={n})"),
            Construction::Parity { n, mask, coeff } => {
                format!("parity(n={n},mask={mask:#x},coeff={coeff})")
            }
            Construction::Random { n, seed } => format!("random(n={n},seed={seed})"),
            Construction::Theorem12 { n, k, c } => format!("theorem12(n={n},k={k},c={c})"),
            Construction::Pairwise { n, delta } => format!("pairwise(n={n},delta={delta})"),
            Construction::ShiftedPairwise { n, delta } => {
                format!("shifted-pairwise(n={n},delta={delta})")
            }
            Construction::PsiJ { n, j } => format!("psij(n={n},j={j})"),
        }
    }

    /// The density this construction samples from, where one is
    /// tractable to tabulate.  `ShiftedPairwise` mixes a fresh shift
    /// into every trial, so its per-trial density is not a single fixed
    /// table and `None` is returned.
    pub fn density(&self) -> Result<Option<Density>, CliError> {
        let n = self.n();
        let explicit_cap = |what: &str| -> Result<(), CliError> {
            if n > MAX_EXPLICIT_N {
                Err(CliError::Usage(format!(
                    "{what} needs an explicit table of 2^{n} values; the cap is n <= {MAX_EXPLICIT_N}"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            Construction::Uniform { n } => Ok(Some(Density::uniform(n))),
            Construction::Constant { n } => {
                explicit_cap("constant")?;
                let x0 = (1u64 << n) - 1; // every coordinate -1
                Ok(Some(Density::point_mass(n, x0).map_err(internal)?))
            }
            Construction::Parity { n, mask, coeff } => {
                explicit_cap("parity")?;
                if mask == 0 || mask >> n != 0 {
                    return Err(CliError::Usage(format!(
                        "parity mask {mask:#x} must be nonzero and fit in n={n} bits"
                    )));
                }
                let values: Vec<f64> = (0u64..1 << n)
                    .map(|x| 1.0 + coeff * kwise::bits::parity_sign(x, mask))
                    .collect();
                Ok(Some(Density::from_values(n, values).map_err(usage)?))
            }
            Construction::Random { n, seed } => {
                explicit_cap("random")?;
                Ok(Some(random_density(n, seed)))
            }
            Construction::Theorem12 { n, k, c } => {
                let p = LowerBoundParams::new(n, k, c).map_err(usage)?;
                Ok(Some(theorem12_density(&p).map_err(usage)?))
            }
            Construction::Pairwise { n, delta } => {
                Ok(Some(pairwise_density(n, delta).map_err(usage)?))
            }
            Construction::ShiftedPairwise { .. } => Ok(None),
            Construction::PsiJ { n, j } => {
                explicit_cap("psij")?;
                Ok(Some(psi_j_density(n, j).map_err(usage)?))
            }
        }
    }

    /// A fresh sample source.  Sources carry no RNG state of their own;
    /// all randomness comes from the per-trial stream.
    pub fn source(&self) -> Result<Box<dyn SampleSource>, CliError> {
        match *self {
            Construction::Uniform { n } => Ok(Box::new(UniformSource { n })),
            Construction::Constant { n } => Ok(Box::new(ConstantSource::all_minus_one(n))),
            Construction::Parity { n, mask, coeff } => {
                if mask == 0 || n > 64 || (n < 64 && mask >> n != 0) {
                    return Err(CliError::Usage(format!(
                        "parity mask {mask:#x} must be nonzero and fit in n={n} bits (n <= 64)"
                    )));
                }
                if !(-1.0..=1.0).contains(&coeff) {
                    return Err(CliError::Usage(format!(
                        "parity coeff {coeff} must lie in [-1, 1]"
                    )));
                }
                Ok(Box::new(ParityPlantedSource::new(n, mask, coeff)))
            }
            Construction::ShiftedPairwise { n, delta } => {
                Ok(Box::new(pairwise_shifted_source(n, delta).map_err(usage)?))
            }
            _ => {
                // DensitySampler draws from symmetric tables without
                // expanding them, so large-n profile constructions stay
                // cheap here.
                let d = self.density()?.expect("non-shifted constructions have densities");
                Ok(Box::new(DensitySampler::new(&d)))
            }
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

/// Parses `name(key=value,...)`.
pub fn parse(text: &str) -> Result<Construction, CliError> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        Some(open) => {
            if !text.ends_with(')') {
                return Err(CliError::Usage(format!(
                    "construction `{text}` is missing its closing parenthesis"
                )));
            }
            (&text[..open], &text[open + 1..text.len() - 1])
        }
        None => (text, ""),
    };
    let mut map = ArgMap::parse(args)?;
    let built = match name {
        "uniform" => Construction::Uniform { n: map.take_usize("n")? },
        "constant" => Construction::Constant { n: map.take_usize("n")? },
        "parity" => Construction::Parity {
            n: map.take_usize("n")?,
            mask: map.take_u64_or("mask", 1)?,
            coeff: map.take_f64("coeff")?,
        },
        "random" => Construction::Random {
            n: map.take_usize("n")?,
            seed: map.take_u64_or("seed", 0)?,
        },
        "theorem12" => Construction::Theorem12 {
            n: map.take_usize("n")?,
            k: map.take_usize("k")?,
            c: map.take_f64("c")?,
        },
        "pairwise" => Construction::Pairwise {
            n: map.take_usize("n")?,
            delta: map.take_f64("delta")?,
        },
        "shifted-pairwise" => Construction::ShiftedPairwise {
            n: map.take_usize("n")?,
            delta: map.take_f64("delta")?,
        },
        "psij" => Construction::PsiJ {
            n: map.take_usize("n")?,
            j: map.take_usize("j")?,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown construction `{other}`; expected one of uniform, constant, parity, \
                 random, theorem12, pairwise, shifted-pairwise, psij"
            )))
        }
    };
    map.finish()?;
    Ok(built)
}

/// `key=value` argument list with typed accessors.
struct ArgMap {
    pairs: Vec<(String, String)>,
}

impl ArgMap {
    fn parse(args: &str) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for part in args.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("construction argument `{part}` is not key=value"))
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(ArgMap { pairs })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(idx).1)
    }

    fn take_usize(&mut self, key: &str) -> Result<usize, CliError> {
        let raw = self
            .take(key)
            .ok_or_else(|| CliError::Usage(format!("construction is missing `{key}=`")))?;
        raw.parse()
            .map_err(|_| CliError::Usage(format!("`{key}={raw}` is not an unsigned integer")))
    }

    fn take_u64_or(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => {
                let parsed = if let Some(hex) = raw.strip_prefix("0x") {
                    u64::from_str_radix(hex, 16)
                } else {
                    raw.parse()
                };
                parsed.map_err(|_| {
                    CliError::Usage(format!("`{key}={raw}` is not a u64 (decimal or 0x-hex)"))
                })
            }
        }
    }

    fn take_f64(&mut self, key: &str) -> Result<f64, CliError> {
        let raw = self
            .take(key)
            .ok_or_else(|| CliError::Usage(format!("construction is missing `{key}=`")))?;
        raw.parse()
            .map_err(|_| CliError::Usage(format!("`{key}={raw}` is not a number")))
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((key, _)) = self.pairs.first() {
            return Err(CliError::Usage(format!(
                "construction argument `{key}` is not recognized here"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_canonical_forms() {
        for text in [
            "uniform(n=16)",
            "constant(n=9)",
            "parity(n=16,mask=0x1,coeff=0.135)",
            "random(n=8,seed=7)",
            "theorem12(n=8,k=2,c=4)",
            "pairwise(n=100,delta=1)",
            "shifted-pairwise(n=50,delta=0.5)",
            "psij(n=6,j=3)",
        ] {
            let c = parse(text).unwrap();
            let again = parse(&c.describe()).unwrap();
            assert_eq!(c, again, "{text}");
        }
    }

    #[test]
    fn rejects_unknown_names_and_stray_arguments() {
        assert!(matches!(parse("nope(n=4)"), Err(CliError::Usage(_))));
        assert!(matches!(parse("uniform(n=4,j=1)"), Err(CliError::Usage(_))));
        assert!(matches!(parse("uniform()"), Err(CliError::Usage(_))));
        assert!(matches!(parse("uniform(n=four)"), Err(CliError::Usage(_))));
    }

    #[test]
    fn parity_source_and_density_agree_on_bias() {
        let c = parse("parity(n=6,mask=0x3,coeff=0.5)").unwrap();
        let d = c.density().unwrap().unwrap();
        assert!((d.bias(0b11) - 0.5).abs() < 1e-12);
        assert_eq!(c.source().unwrap().n(), 6);
    }
}
