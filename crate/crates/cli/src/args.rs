//! Value syntaxes shared by flags and config files.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use spamm_core::Variant;

/// `n,alpha,seed` for a generated decay Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub dimension: usize,
    pub decay_rate: f64,
    pub seed: u64,
}

impl FromStr for GenSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [n, alpha, seed] = parts[..] else {
            bail!("expected n,alpha,seed, got {s:?}");
        };
        Ok(GenSpec {
            dimension: n.parse().with_context(|| format!("bad dimension {n:?}"))?,
            decay_rate: alpha
                .parse()
                .with_context(|| format!("bad decay rate {alpha:?}"))?,
            seed: seed.parse().with_context(|| format!("bad seed {seed:?}"))?,
        })
    }
}

/// `gen:n,alpha,seed` or a MatrixMarket path.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixArg {
    File(PathBuf),
    Gen(GenSpec),
}

impl FromStr for MatrixArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("gen:") {
            Some(spec) => Ok(MatrixArg::Gen(spec.parse()?)),
            None if s.is_empty() => bail!("empty matrix path"),
            None => Ok(MatrixArg::File(PathBuf::from(s))),
        }
    }
}

/// Comma-separated variant names.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantList(pub Vec<Variant>);

impl FromStr for VariantList {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(VariantList(Variant::ALL.to_vec()));
        }
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let v: Variant = name.parse().map_err(|e| anyhow!("{e}"))?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
        if out.is_empty() {
            bail!("no variants given");
        }
        Ok(VariantList(out))
    }
}

/// Tolerance list: `a,b,c`, or `start:end:log` for one value per decade, or
/// `start:end:log:count` for `count` log-spaced values.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceList(pub Vec<f64>);

impl FromStr for ToleranceList {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .with_context(|| format!("bad tolerance {t:?}"))?;
            if !(v > 0.0) || !v.is_finite() {
                bail!("tolerance must be positive and finite, got {t}");
            }
            Ok(v)
        };
        if !s.contains(':') {
            let values = s.split(',').map(parse).collect::<Result<Vec<_>>>()?;
            return Ok(ToleranceList(values));
        }
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let (start, end, count) = match parts[..] {
            [a, b, "log"] => {
                let (a, b) = (parse(a)?, parse(b)?);
                let decades = (a.log10() - b.log10()).abs().round() as usize;
                (a, b, decades + 1)
            }
            [a, b, "log", n] => {
                let n: usize = n.parse().with_context(|| format!("bad count {n:?}"))?;
                (parse(a)?, parse(b)?, n)
            }
            _ => bail!("expected start:end:log[:count], got {s:?}"),
        };
        if count == 0 {
            bail!("tolerance range has no points");
        }
        if count == 1 {
            return Ok(ToleranceList(vec![start]));
        }
        let (la, lb) = (start.log10(), end.log10());
        let values = (0..count)
            .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (count - 1) as f64))
            .collect();
        Ok(ToleranceList(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_spec() {
        let g: GenSpec = "256, 0.5, 7".parse().unwrap();
        assert_eq!((g.dimension, g.decay_rate, g.seed), (256, 0.5, 7));
        assert!("256,0.5".parse::<GenSpec>().is_err());
        assert!("a,0.5,1".parse::<GenSpec>().is_err());
    }

    #[test]
    fn matrix_arg() {
        assert!(matches!(
            "gen:64,1,2".parse::<MatrixArg>().unwrap(),
            MatrixArg::Gen(_)
        ));
        assert_eq!(
            "x.mtx".parse::<MatrixArg>().unwrap(),
            MatrixArg::File(PathBuf::from("x.mtx"))
        );
    }

    #[test]
    fn variants() {
        let v: VariantList = "spamm, truncmul,spamm".parse().unwrap();
        assert_eq!(v.0, vec![Variant::Spamm, Variant::Truncmul]);
        assert_eq!("all".parse::<VariantList>().unwrap().0.len(), 3);
        assert!("fast".parse::<VariantList>().is_err());
        assert!("".parse::<VariantList>().is_err());
    }

    #[test]
    fn tolerance_ranges() {
        let t: ToleranceList = "1e-2:1e-8:log".parse().unwrap();
        assert_eq!(t.0.len(), 7);
        for (got, want) in t.0.iter().zip([1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8]) {
            assert!((got / want - 1.0).abs() < 1e-12);
        }
        let t: ToleranceList = "1e-2:1e-8:log:4".parse().unwrap();
        assert_eq!(t.0.len(), 4);
        assert!((t.0[1] / 1e-4 - 1.0).abs() < 1e-12);
        let t: ToleranceList = "1e-3,5e-4".parse().unwrap();
        assert_eq!(t.0, vec![1e-3, 5e-4]);
        assert!("0".parse::<ToleranceList>().is_err());
        assert!("1:2:lin".parse::<ToleranceList>().is_err());
    }
}
