//! Edge-probability profiles `psi(t)` and their lattice discretization defects.
//!
//! Every kernel is even, takes values in `[0, 1]`, is nonincreasing on
//! `[0, inf)` and integrates to one. Normalization always rescales the
//! argument, `psi(t) = f(c t)`, so `psi(0) = f(0) = 1` is untouched.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lattice sums stop once `psi(t / b)` falls below this value.
pub const LATTICE_CUTOFF: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// Indicator of `(-1/2, 1/2)`.
    Band,
    /// `exp(-|c t|^s)` with `c = 2 Gamma(1 + 1/s)`.
    Exponential { s: f64 },
    /// `exp(-pi t^2)`.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelFamily", into = "KernelFamily")]
pub struct Kernel {
    family: KernelFamily,
    scale: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily) -> Result<Self> {
        let scale = match family {
            KernelFamily::Band => 1.0,
            KernelFamily::Exponential { s } => {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::invalid(
                        "s",
                        format!("exponential kernel shape must be positive, got {s}"),
                    ));
                }
                2.0 * gamma(1.0 + 1.0 / s)
            }
            KernelFamily::Gaussian => std::f64::consts::PI.sqrt(),
        };
        Ok(Kernel { family, scale })
    }

    pub fn band() -> Self {
        Kernel {
            family: KernelFamily::Band,
            scale: 1.0,
        }
    }

    pub fn exponential(s: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential { s })
    }

    pub fn gaussian() -> Self {
        Kernel {
            family: KernelFamily::Gaussian,
            scale: std::f64::consts::PI.sqrt(),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Argument rescale factor `c` in `psi(t) = f(c t)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval<T: Real>(&self, t: T) -> T {
        let x = t.abs();
        match self.family {
            KernelFamily::Band => {
                if x < T::lit(0.5) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            KernelFamily::Exponential { s } => (-(T::lit(self.scale) * x).powf(T::lit(s))).exp(),
            KernelFamily::Gaussian => {
                let y = T::lit(self.scale) * x;
                (-(y * y)).exp()
            }
        }
    }

    /// Right end of the support, or the point beyond which `psi < cutoff`.
    pub fn effective_radius(&self, cutoff: f64) -> f64 {
        match self.family {
            KernelFamily::Band => 0.5,
            KernelFamily::Exponential { s } => (-cutoff.ln()).powf(1.0 / s) / self.scale,
            KernelFamily::Gaussian => (-cutoff.ln()).sqrt() / self.scale,
        }
    }

    /// `int_R sqrt(psi(t)) dt` in closed form.
    pub fn sqrt_integral(&self) -> f64 {
        match self.family {
            KernelFamily::Band => 1.0,
            // sqrt(exp(-|ct|^s)) = exp(-|c' t|^s) with c' = c / 2^{1/s}
            KernelFamily::Exponential { s } => 2.0_f64.powf(1.0 / s),
            KernelFamily::Gaussian => std::f64::consts::SQRT_2,
        }
    }

    /// `int_L^inf psi(t) dt` for `L >= 0`.
    pub fn tail_integral(&self, from: f64) -> f64 {
        let from = from.max(0.0);
        match self.family {
            KernelFamily::Band => (0.5 - from).max(0.0),
            KernelFamily::Exponential { s } => {
                // int_L^inf exp(-(c t)^s) dt = Gamma(1/s, (cL)^s) / (s c)
                let x = (self.scale * from).powf(s);
                if x == 0.0 {
                    return 0.5;
                }
                statrs::function::gamma::gamma_ur(1.0 / s, x) * gamma(1.0 / s) / (s * self.scale)
            }
            KernelFamily::Gaussian => {
                0.5 * statrs::function::erf::erfc(self.scale * from)
            }
        }
    }

    /// Lattice-sum defect `(1/b) sum_{t in Z} psi(t/b) - int psi`.
    ///
    /// The sum runs outward from `t = 0` and stops at the first `t` with
    /// `psi(t/b) < LATTICE_CUTOFF`; monotone decay makes every skipped term
    /// smaller still.
    pub fn riemann_defect(&self, b: f64) -> Result<f64> {
        if !(b >= 1.0) {
            return Err(Error::invalid("b", format!("need b >= 1, got {b}")));
        }
        Ok(self.lattice_mass(b) - 1.0)
    }

    /// `(1/b) sum_{t in Z} psi(t/b)`, truncated as in [`Kernel::riemann_defect`].
    pub fn lattice_mass(&self, b: f64) -> f64 {
        let mut tail = 0.0;
        let mut t = 1u64;
        loop {
            let v: f64 = self.eval(t as f64 / b);
            if v < LATTICE_CUTOFF {
                break;
            }
            tail += v;
            t += 1;
        }
        (self.eval(0.0) + 2.0 * tail) / b
    }

    /// Finite-window defect
    /// `(1/b) sum_{|t| <= n} psi((t - i)/b) - (1/b) sum_{t in Z} psi(t/b)`.
    pub fn edge_defect(&self, b: f64, n: u64, i: i64) -> Result<f64> {
        let n_i = n as i64;
        if i.unsigned_abs() > n {
            return Err(Error::invalid("i", format!("|i| = {} exceeds n = {n}", i.abs())));
        }
        if !(b > 0.0) || b > (2 * n + 1) as f64 {
            return Err(Error::invalid("b", format!("need 0 < b <= 2n+1, got {b}")));
        }
        // Missing terms: lattice points outside [-n, n]; their lags from i
        // start at n - i + 1 on the right and n + i + 1 on the left.
        let outside = |first_lag: i64| -> f64 {
            let mut acc = 0.0;
            let mut lag = first_lag;
            loop {
                let v: f64 = self.eval(lag as f64 / b);
                if v < LATTICE_CUTOFF {
                    break;
                }
                acc += v;
                lag += 1;
            }
            acc
        };
        let missing = outside(n_i - i + 1) + outside(n_i + i + 1);
        Ok(-missing / b)
    }

    /// Weights `psi(k / b)` for lags `k = 0, 1, ...` up to the truncation point
    /// (or `max_lag`, whichever comes first).
    pub fn lag_profile<T: Real>(&self, b: f64, max_lag: usize) -> Vec<T> {
        let mut w = Vec::new();
        for k in 0..=max_lag {
            let v: f64 = self.eval(k as f64 / b);
            if v < LATTICE_CUTOFF && k > 0 {
                break;
            }
            w.push(T::lit(v));
        }
        w
    }
}

impl TryFrom<KernelFamily> for Kernel {
    type Error = Error;
    fn try_from(f: KernelFamily) -> Result<Self> {
        Kernel::new(f)
    }
}

impl From<Kernel> for KernelFamily {
    fn from(k: Kernel) -> Self {
        k.family
    }
}

/// Spec strings: `band`, `exp:<s>`, `gauss`.
impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "band" => Ok(Kernel::band()),
            "gauss" => Ok(Kernel::gaussian()),
            _ => {
                let Some(shape) = s.strip_prefix("exp:") else {
                    return Err(Error::parse("kernel", s, "expected band, exp:<s> or gauss"));
                };
                let shape: f64 = shape
                    .parse()
                    .map_err(|_| Error::parse("kernel", s, "shape is not a number"))?;
                Kernel::exponential(shape)
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Band => write!(f, "band"),
            KernelFamily::Exponential { s } => write!(f, "exp:{s}"),
            KernelFamily::Gaussian => write!(f, "gauss"),
        }
    }
}
