//! Scan configuration, readable from JSON with spec strings for the kernel,
//! the entry law and the spectral parameters.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::entries::EntryDistribution;
use crate::ensemble::DEFAULT_MEMORY_CAP;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::resolvent::{in_lambda_eta, lambda_eta, parse_z};
use crate::scalar::C;

/// Default `n / b`.
pub const DEFAULT_ASPECT: f64 = 16.0;

/// Serializes through `Display` / `FromStr`.
mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod z_list {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::scalar::C;

    pub fn serialize<S: Serializer>(v: &[C<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| format!("{},{}", z.re, z.im)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C<f64>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| super::parse_z(s).map_err(de::Error::custom))
            .collect()
    }
}

fn default_aspect() -> f64 {
    DEFAULT_ASPECT
}

fn default_replicas() -> u64 {
    200
}

fn default_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(with = "as_string")]
    pub kernel: Kernel,
    /// Entry law; its variance is `v^2`.
    #[serde(with = "as_string")]
    pub dist: EntryDistribution,
    /// Spectral parameters; empty means the default `(2v + 1) i`.
    #[serde(default, with = "z_list")]
    pub z: Vec<C<f64>>,
    pub b_ladder: Vec<f64>,
    /// `n = ceil(aspect * b)` unless `n` is fixed.
    #[serde(default = "default_aspect")]
    pub aspect: f64,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub allow_outside_lambda: bool,
    /// Dense Wigner reference (`psi = 1`, scale `N^{-1/2}`) instead of the
    /// percolation ensemble; reported with `b = N`.
    #[serde(default)]
    pub wigner: bool,
    /// Every replica reuses the cell's first stream (a determinism probe).
    #[serde(default)]
    pub identical_replicas: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_cap")]
    pub memory_cap: u64,
}

impl ScanConfig {
    pub fn new(kernel: Kernel, dist: EntryDistribution, b_ladder: Vec<f64>) -> Self {
        ScanConfig {
            kernel,
            dist,
            z: vec![],
            b_ladder,
            aspect: DEFAULT_ASPECT,
            n: None,
            replicas: default_replicas(),
            seed: 0,
            output: None,
            allow_outside_lambda: false,
            wigner: false,
            identical_replicas: false,
            threads: None,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ScanConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn v2(&self) -> f64 {
        self.dist.variance()
    }

    /// The configured spectral parameters, or `(2v + 1) i`.
    pub fn z_values(&self) -> Vec<C<f64>> {
        if self.z.is_empty() {
            vec![C::new(0.0, lambda_eta(self.v2()))]
        } else {
            self.z.clone()
        }
    }

    /// `(b, n)` per cell.
    pub fn cells(&self) -> Vec<(f64, u64)> {
        self.b_ladder
            .iter()
            .map(|&b| {
                let n = self.n.unwrap_or_else(|| (self.aspect * b).ceil() as u64);
                if self.wigner {
                    ((2 * n + 1) as f64, n)
                } else {
                    (b, n)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_ladder.is_empty() {
            return Err(Error::invalid("b_ladder", "empty"));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::invalid("aspect", format!("need aspect > 0, got {}", self.aspect)));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas", "need at least one"));
        }
        if self.replicas > u32::MAX as u64 || self.b_ladder.len() > u32::MAX as usize {
            return Err(Error::invalid("replicas", "at most 2^32 replicas and cells"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "need at least one"));
        }
        for (b, n) in self.cells() {
            if !(b > 0.0 && b.is_finite() && b <= (2 * n + 1) as f64) {
                return Err(Error::invalid("b_ladder", format!("cell (b = {b}, n = {n}) violates 0 < b <= 2n + 1")));
            }
        }
        let v2 = self.v2();
        for z in self.z_values() {
            if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
                return Err(Error::invalid("z", format!("need finite z off the real axis, got {z}")));
            }
            if !self.allow_outside_lambda && !in_lambda_eta(z, v2) {
                return Err(Error::OutsideLambda {
                    re: z.re,
                    im: z.im,
                    eta: lambda_eta(v2),
                });
            }
        }
        Ok(())
    }
}
