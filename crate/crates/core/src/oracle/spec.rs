use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RandomPsd,
    Correlation,
    NegativeType,
    MwBlocks,
    RobustMu,
    RobustNu,
    RidgeHard,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::RandomPsd,
        Family::Correlation,
        Family::NegativeType,
        Family::MwBlocks,
        Family::RobustMu,
        Family::RobustNu,
        Family::RidgeHard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomPsd => "random_psd",
            Family::Correlation => "correlation",
            Family::NegativeType => "negative_type",
            Family::MwBlocks => "mw_blocks",
            Family::RobustMu => "robust_mu",
            Family::RobustNu => "robust_nu",
            Family::RidgeHard => "ridge_hard",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown family `{s}`")))
    }
}

/// How the corrupted robust-lower-bound instance splits into `A + N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobustSplit {
    /// Clean block diagonal chosen so that `‖N‖_F² = η‖A‖_F²` exactly.
    NormMatched,
    /// Clean block is the all-`h` rank-one block; the corruption only resets
    /// its diagonal to 1.
    RankOneBlock,
}

impl RobustSplit {
    pub fn name(self) -> &'static str {
        match self {
            RobustSplit::NormMatched => "norm_matched",
            RobustSplit::RankOneBlock => "rank_one_block",
        }
    }
}

impl FromStr for RobustSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm_matched" => Ok(RobustSplit::NormMatched),
            "rank_one_block" => Ok(RobustSplit::RankOneBlock),
            _ => Err(Error::Parse(format!("unknown split `{s}`"))),
        }
    }
}

/// Corruption added to correlation instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corruption {
    None,
    /// Random positive values added to the diagonal only.
    Diagonal,
    /// Symmetric Gaussian off-diagonal noise with `‖N‖_F² = η‖A‖_F²`.
    Dense,
}

impl Corruption {
    pub fn name(self) -> &'static str {
        match self {
            Corruption::None => "none",
            Corruption::Diagonal => "diagonal",
            Corruption::Dense => "dense",
        }
    }
}

impl FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Corruption::None),
            "diagonal" => Ok(Corruption::Diagonal),
            "dense" => Ok(Corruption::Dense),
            _ => Err(Error::Parse(format!("unknown corruption `{s}`"))),
        }
    }
}

/// Parameters that fully determine a generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub eta: f64,
    /// random_psd / correlation: target ratio of tail to head energy.
    pub tail: f64,
    /// negative_type: ambient dimension of the points.
    pub dim: usize,
    /// negative_type: off-subspace noise level.
    pub noise: f64,
    /// ridge_hard: statistical-dimension target.
    pub s_lambda: f64,
    pub split: RobustSplit,
    pub corruption: Corruption,
    pub seed: u64,
}

impl InstanceSpec {
    fn base(family: Family, n: usize, k: usize, seed: u64) -> Self {
        InstanceSpec {
            family,
            n,
            k,
            eps: 0.25,
            eta: 0.0,
            tail: 0.2,
            dim: 16,
            noise: 0.0,
            s_lambda: 1.0,
            split: RobustSplit::NormMatched,
            corruption: Corruption::None,
            seed,
        }
    }

    pub fn random_psd(n: usize, k: usize, tail: f64, seed: u64) -> Self {
        InstanceSpec {
            tail,
            ..Self::base(Family::RandomPsd, n, k, seed)
        }
    }

    pub fn correlation(n: usize, k: usize, tail: f64, eta: f64, corruption: Corruption, seed: u64) -> Self {
        InstanceSpec {
            tail,
            eta,
            corruption,
            ..Self::base(Family::Correlation, n, k, seed)
        }
    }

    pub fn negative_type(n: usize, dim: usize, k: usize, noise: f64, seed: u64) -> Self {
        InstanceSpec {
            dim,
            noise,
            ..Self::base(Family::NegativeType, n, k, seed)
        }
    }

    pub fn mw_blocks(n: usize, k: usize, eps: f64, seed: u64) -> Self {
        InstanceSpec {
            eps,
            ..Self::base(Family::MwBlocks, n, k, seed)
        }
    }

    pub fn robust_mu(n: usize, eps: f64, eta: f64, k: usize, split: RobustSplit, seed: u64) -> Self {
        InstanceSpec {
            eps,
            eta,
            split,
            ..Self::base(Family::RobustMu, n, k, seed)
        }
    }

    pub fn robust_nu(n: usize, eps: f64, eta: f64, k: usize, seed: u64) -> Self {
        InstanceSpec {
            eps,
            eta,
            ..Self::base(Family::RobustNu, n, k, seed)
        }
    }

    pub fn ridge_hard(n: usize, s_lambda: f64, eps: f64, seed: u64) -> Self {
        InstanceSpec {
            eps,
            s_lambda,
            k: 1,
            ..Self::base(Family::RidgeHard, n, 1, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        InstanceSpec {
            seed,
            ..self.clone()
        }
    }

    /// Checks the family-specific parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        match self.family {
            Family::RandomPsd | Family::Correlation => {
                if self.k == 0 || self.k > self.n {
                    return bad(format!("k = {} must lie in 1..=n", self.k));
                }
                if !(self.tail >= 0.0) {
                    return bad("tail must be nonnegative".into());
                }
                if !(0.0..1.0).contains(&self.eta) {
                    return bad("eta must lie in [0, 1)".into());
                }
            }
            Family::NegativeType => {
                if self.dim == 0 {
                    return bad("dim must be at least 1".into());
                }
                if self.k == 0 {
                    return bad("k must be at least 1".into());
                }
                if !(self.noise >= 0.0) {
                    return bad("noise must be nonnegative".into());
                }
            }
            Family::MwBlocks => {
                check_eps(self.eps)?;
                if self.k == 0 {
                    return bad("k must be at least 1".into());
                }
                if 2.0 * self.eps * self.n as f64 / (self.k as f64) < 1.0 {
                    return bad("2 eps n / k must be at least 1".into());
                }
            }
            Family::RobustMu | Family::RobustNu => {
                check_eps(self.eps)?;
                if !(self.eta > 0.0 && self.eta < self.eps) {
                    return bad("robust families need eps > eta > 0".into());
                }
                if self.k == 0 {
                    return bad("k must be at least 1".into());
                }
                if 5.0 * self.eps / self.eta > self.n as f64 {
                    return bad("5 eps / eta exceeds n".into());
                }
            }
            Family::RidgeHard => {
                check_eps(self.eps)?;
                if !(self.s_lambda > 0.0) {
                    return bad("s_lambda must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Flat `key=value` lines, one per field.
    pub fn to_kv(&self) -> String {
        format!(
            "family={}\nn={}\nk={}\neps={}\neta={}\ntail={}\ndim={}\nnoise={}\ns_lambda={}\nsplit={}\ncorruption={}\nseed={}\n",
            self.family,
            self.n,
            self.k,
            self.eps,
            self.eta,
            self.tail,
            self.dim,
            self.noise,
            self.s_lambda,
            self.split.name(),
            self.corruption.name(),
            self.seed
        )
    }

    /// Parses the output of [`to_kv`](Self::to_kv). Missing keys other than
    /// `family` and `n` take the family defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
            pairs.push((k.trim(), v.trim()));
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let family: Family = get("family")
            .ok_or_else(|| Error::Parse("missing family".into()))?
            .parse()?;
        let n = parse_num(get("n").ok_or_else(|| Error::Parse("missing n".into()))?, "n")?;
        let mut spec = Self::base(family, n, 1, 0);
        for (key, value) in &pairs {
            match *key {
                "family" | "n" => {}
                "k" => spec.k = parse_num(value, key)?,
                "eps" => spec.eps = parse_num(value, key)?,
                "eta" => spec.eta = parse_num(value, key)?,
                "tail" => spec.tail = parse_num(value, key)?,
                "dim" => spec.dim = parse_num(value, key)?,
                "noise" => spec.noise = parse_num(value, key)?,
                "s_lambda" => spec.s_lambda = parse_num(value, key)?,
                "split" => spec.split = value.parse()?,
                "corruption" => spec.corruption = value.parse()?,
                "seed" => spec.seed = parse_num(value, key)?,
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps = {eps} must lie in (0, 1)")))
    }
}

fn parse_num<T: FromStr>(value: &str, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("bad value for {key}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let s = InstanceSpec::robust_mu(1000, 0.2, 0.04, 2, RobustSplit::RankOneBlock, 99);
        assert_eq!(InstanceSpec::from_kv(&s.to_kv()).unwrap(), s);
        let c = InstanceSpec::correlation(64, 3, 0.1, 0.01, Corruption::Dense, 5);
        assert_eq!(InstanceSpec::from_kv(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_families() {
        assert!(InstanceSpec::from_kv("family=nope\nn=3").is_err());
        assert!(InstanceSpec::from_kv("family=mw_blocks\nn=3\nbogus=1").is_err());
    }

    #[test]
    fn robust_requires_eta_below_eps() {
        assert!(InstanceSpec::robust_nu(1000, 0.2, 0.3, 1, 0).validate().is_err());
        assert!(InstanceSpec::robust_nu(1000, 0.2, 0.04, 1, 0).validate().is_ok());
        assert!(InstanceSpec::robust_nu(10, 0.2, 0.04, 1, 0).validate().is_err());
    }
}
