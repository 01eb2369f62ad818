//! Laws of the matrix entries `a(i, j)`: sampling, moment tables, cumulants
//! and the moment-hypothesis classification.

use std::fmt;
use std::str::FromStr;

use num_traits::Num;
use rand::distr::Distribution;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng::{unit_open_closed_low, unit_positive};

/// Number of tabulated raw moments, `mu_1 ..= mu_10`.
pub const MOMENT_ORDERS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum EntryFamily {
    Gaussian,
    /// `+-v` with equal probability.
    Rademacher,
    /// Uniform on `[-sqrt(3) v, sqrt(3) v]`.
    Uniform,
    /// Centered two-point law: `v sqrt((1-p)/p)` with probability `p`,
    /// `-v sqrt(p/(1-p))` otherwise.
    #[serde(rename = "twopoint")]
    TwoPoint { p: f64 },
}

/// A zero-mean entry law with variance `v^2` and its moment tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct EntryDistribution {
    family: EntryFamily,
    variance: f64,
    moments: [f64; MOMENT_ORDERS],
    abs_moments: [f64; MOMENT_ORDERS],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct DistributionSpec {
    #[serde(flatten)]
    family: EntryFamily,
    variance: f64,
}

impl TryFrom<DistributionSpec> for EntryDistribution {
    type Error = Error;
    fn try_from(s: DistributionSpec) -> Result<Self> {
        EntryDistribution::new(s.family, s.variance)
    }
}

impl From<EntryDistribution> for DistributionSpec {
    fn from(d: EntryDistribution) -> Self {
        DistributionSpec {
            family: d.family,
            variance: d.variance,
        }
    }
}

impl EntryDistribution {
    pub fn new(family: EntryFamily, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid(
                "v2",
                format!("variance must be positive and finite, got {variance}"),
            ));
        }
        let v = variance.sqrt();
        let mut moments = [0.0; MOMENT_ORDERS];
        let mut abs_moments = [0.0; MOMENT_ORDERS];
        for k in 1..=MOMENT_ORDERS {
            let kf = k as f64;
            let (m, am) = match family {
                EntryFamily::Gaussian => {
                    let am = v.powi(k as i32) * 2f64.powf(kf / 2.0) * gamma((kf + 1.0) / 2.0)
                        / std::f64::consts::PI.sqrt();
                    (if k % 2 == 0 { am } else { 0.0 }, am)
                }
                EntryFamily::Rademacher => {
                    let am = v.powi(k as i32);
                    (if k % 2 == 0 { am } else { 0.0 }, am)
                }
                EntryFamily::Uniform => {
                    let am = (3f64.sqrt() * v).powi(k as i32) / (kf + 1.0);
                    (if k % 2 == 0 { am } else { 0.0 }, am)
                }
                EntryFamily::TwoPoint { p } => {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::invalid(
                            "p",
                            format!("two-point mass must lie in (0, 1), got {p}"),
                        ));
                    }
                    let (hi, lo) = two_point_atoms(p, v);
                    (
                        p * hi.powi(k as i32) + (1.0 - p) * lo.powi(k as i32),
                        p * hi.abs().powi(k as i32) + (1.0 - p) * lo.abs().powi(k as i32),
                    )
                }
            };
            moments[k - 1] = m;
            abs_moments[k - 1] = am;
        }
        // Closed forms give mu_1 = 0 only up to rounding for the two-point law.
        moments[0] = 0.0;
        moments[1] = variance;
        let d = EntryDistribution {
            family,
            variance,
            moments,
            abs_moments,
        };
        d.check_invariants()?;
        Ok(d)
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(EntryFamily::Gaussian, variance)
    }

    pub fn rademacher(variance: f64) -> Result<Self> {
        Self::new(EntryFamily::Rademacher, variance)
    }

    pub fn uniform(variance: f64) -> Result<Self> {
        Self::new(EntryFamily::Uniform, variance)
    }

    pub fn two_point(p: f64, variance: f64) -> Result<Self> {
        Self::new(EntryFamily::TwoPoint { p }, variance)
    }

    fn check_invariants(&self) -> Result<()> {
        let m = &self.moments;
        let bad = |why: &str| Err(Error::invalid("dist", why.to_string()));
        if m.iter().any(|x| !x.is_finite()) {
            return bad("moment table must be finite");
        }
        if (2..=MOMENT_ORDERS).step_by(2).any(|k| m[k - 1] <= 0.0) {
            return bad("even moments must be positive");
        }
        if m[2].abs() > (m[1] * m[3]).sqrt() * (1.0 + 1e-12) {
            return bad("moment table violates |mu_3| <= sqrt(mu_2 mu_4)");
        }
        Ok(())
    }

    pub fn family(&self) -> EntryFamily {
        self.family
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Raw moment `E a^k`, `1 <= k <= 10`.
    pub fn moment(&self, k: usize) -> f64 {
        assert!((1..=MOMENT_ORDERS).contains(&k), "moment order {k} out of range");
        self.moments[k - 1]
    }

    /// Absolute moment `E |a|^k`, `1 <= k <= 10`.
    pub fn abs_moment(&self, k: usize) -> f64 {
        assert!((1..=MOMENT_ORDERS).contains(&k), "moment order {k} out of range");
        self.abs_moments[k - 1]
    }

    pub fn moments(&self) -> &[f64; MOMENT_ORDERS] {
        &self.moments
    }

    /// Support points and probabilities when the law is finitely supported.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let v = self.variance.sqrt();
        match self.family {
            EntryFamily::Rademacher => Some(vec![(v, 0.5), (-v, 0.5)]),
            EntryFamily::TwoPoint { p } => {
                let (hi, lo) = two_point_atoms(p, v);
                Some(vec![(hi, p), (lo, 1.0 - p)])
            }
            _ => None,
        }
    }

    /// Maps the two raw words of an entry slot to a draw. Consumes the same
    /// number of words for every family, so slot layouts never shift.
    #[inline]
    pub fn from_words(&self, words: [u64; 2]) -> f64 {
        let v = self.variance.sqrt();
        match self.family {
            EntryFamily::Gaussian => {
                let r = (-2.0 * unit_positive(words[0]).ln()).sqrt();
                let theta = std::f64::consts::TAU * unit_open_closed_low(words[1]);
                v * r * theta.cos()
            }
            EntryFamily::Rademacher => {
                if words[0] >> 63 == 0 {
                    v
                } else {
                    -v
                }
            }
            EntryFamily::Uniform => 3f64.sqrt() * v * (2.0 * unit_open_closed_low(words[0]) - 1.0),
            EntryFamily::TwoPoint { p } => {
                let (hi, lo) = two_point_atoms(p, v);
                if unit_open_closed_low(words[0]) < p {
                    hi
                } else {
                    lo
                }
            }
        }
    }

    /// One draw from `rng` (two `u64` words).
    pub fn sample_entry<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.from_words([rng.next_u64(), rng.next_u64()])
    }
}

impl Distribution<f64> for EntryDistribution {
    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_entry(rng)
    }
}

fn two_point_atoms(p: f64, v: f64) -> (f64, f64) {
    (v * ((1.0 - p) / p).sqrt(), -v * (p / (1.0 - p)).sqrt())
}

/// Spec strings: `gauss:<v2>`, `rademacher:<v2>`, `uniform:<v2>`,
/// `twopoint:<p>:<v2>`.
impl FromStr for EntryDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| -> Result<f64> {
            x.parse()
                .map_err(|_| Error::parse("distribution", s, format!("`{x}` is not a number")))
        };
        match parts.as_slice() {
            ["gauss", v2] => Self::gaussian(num(v2)?),
            ["rademacher", v2] => Self::rademacher(num(v2)?),
            ["uniform", v2] => Self::uniform(num(v2)?),
            ["twopoint", p, v2] => Self::two_point(num(p)?, num(v2)?),
            _ => Err(Error::parse(
                "distribution",
                s,
                "expected gauss:<v2>, rademacher:<v2>, uniform:<v2> or twopoint:<p>:<v2>",
            )),
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            EntryFamily::Gaussian => write!(f, "gauss:{}", self.variance),
            EntryFamily::Rademacher => write!(f, "rademacher:{}", self.variance),
            EntryFamily::Uniform => write!(f, "uniform:{}", self.variance),
            EntryFamily::TwoPoint { p } => write!(f, "twopoint:{p}:{}", self.variance),
        }
    }
}

/// Cumulants `K_1 ..= K_6` of a zero-mean law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector<T> {
    pub k: [T; 6],
}

impl<T> CumulantVector<T> {
    /// `K_r`, `1 <= r <= 6`.
    pub fn get(&self, r: usize) -> &T {
        &self.k[r - 1]
    }
}

/// Cumulants from raw moments `mu_1 ..= mu_6`; requires `mu_1 = 0`.
///
/// With `mu_1 = 0`: `K_2 = mu_2`, `K_3 = mu_3`, `K_4 = mu_4 - 3 mu_2^2`,
/// `K_5 = mu_5 - 10 mu_3 mu_2`,
/// `K_6 = mu_6 - 15 mu_4 mu_2 - 10 mu_3^2 + 30 mu_2^3`.
pub fn cumulants_from_moments<T>(mu: &[T; 6]) -> Result<CumulantVector<T>>
where
    T: Num + Clone,
{
    if !mu[0].is_zero() {
        return Err(Error::invalid("mu_1", "moments must be centered (mu_1 = 0)"));
    }
    let int = |n: u32| -> T { (0..n).fold(T::zero(), |acc, _| acc + T::one()) };
    let [_, m2, m3, m4, m5, m6] = mu.clone();
    let k4 = m4.clone() - int(3) * m2.clone() * m2.clone();
    let k5 = m5 - int(10) * m3.clone() * m2.clone();
    let k6 = m6 - int(15) * m4 * m2.clone() - int(10) * m3.clone() * m3.clone()
        + int(30) * m2.clone() * m2.clone() * m2.clone();
    Ok(CumulantVector {
        k: [T::zero(), m2, m3, k4, k5, k6],
    })
}

/// Raw moments from cumulants of a zero-mean law (inverse of
/// [`cumulants_from_moments`]).
pub fn moments_from_cumulants<T>(c: &CumulantVector<T>) -> [T; 6]
where
    T: Num + Clone,
{
    let int = |n: u32| -> T { (0..n).fold(T::zero(), |acc, _| acc + T::one()) };
    let [_, k2, k3, k4, k5, k6] = c.k.clone();
    let m4 = k4.clone() + int(3) * k2.clone() * k2.clone();
    let m5 = k5 + int(10) * k3.clone() * k2.clone();
    let m6 = k6
        + int(15) * k4 * k2.clone()
        + int(10) * k3.clone() * k3.clone()
        + int(15) * k2.clone() * k2.clone() * k2.clone();
    [T::zero(), k2, k3, m4, m5, m6]
}

/// Strongest variance-rate theorem whose moment hypotheses hold exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremClass {
    /// Finite third absolute moment only: `Var g_n = O(b^{-1/2})`.
    #[serde(rename = "thm-2.1-only")]
    Thm21Only,
    /// Gaussian-like moments to order 6 and finite `mu_7`: `O(1/b)`.
    #[serde(rename = "thm-5.1")]
    Thm51,
    /// Additionally finite `mu_10` and `int sqrt(psi) < inf`: `O(1/b^2)`.
    #[serde(rename = "thm-5.2")]
    Thm52,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for TheoremClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremClass::Thm21Only => "thm-2.1-only",
            TheoremClass::Thm51 => "thm-5.1",
            TheoremClass::Thm52 => "thm-5.2",
            TheoremClass::None => "none",
        })
    }
}

pub fn classify_theorem(dist: &EntryDistribution, kernel: &Kernel) -> TheoremClass {
    let v2 = dist.variance();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    if !dist.abs_moment(3).is_finite() {
        return TheoremClass::None;
    }
    let odd_vanish = [1, 3, 5].iter().all(|&k| dist.moment(k).abs() <= 1e-12 * v2.powf(k as f64 / 2.0));
    let gaussian_like = odd_vanish
        && close(dist.moment(2), v2)
        && close(dist.moment(4), 3.0 * v2 * v2)
        && close(dist.moment(6), 15.0 * v2 * v2 * v2);
    if !gaussian_like || !dist.abs_moment(7).is_finite() {
        return TheoremClass::Thm21Only;
    }
    if dist.abs_moment(10).is_finite() && kernel.sqrt_integral().is_finite() {
        TheoremClass::Thm52
    } else {
        TheoremClass::Thm51
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, StreamKey};
    use num_rational::Rational64;

    fn families() -> Vec<EntryDistribution> {
        vec![
            EntryDistribution::gaussian(1.3).unwrap(),
            EntryDistribution::rademacher(0.7).unwrap(),
            EntryDistribution::uniform(2.0).unwrap(),
            EntryDistribution::two_point(0.2, 1.0).unwrap(),
        ]
    }

    #[test]
    fn closed_form_tables() {
        let g = EntryDistribution::gaussian(1.0).unwrap();
        let expect = [0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0, 945.0];
        for k in 1..=10 {
            assert!((g.moment(k) - expect[k - 1]).abs() < 1e-10, "k={k}");
        }
        assert!((g.abs_moment(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        let u = EntryDistribution::uniform(1.0).unwrap();
        assert!((u.moment(4) - 9.0 / 5.0).abs() < 1e-14);
        // Two-point: atoms 2 (p = 0.2) and -1/2; mu_3 = 0.2*8 - 0.8/8 = 1.5.
        let t = EntryDistribution::two_point(0.2, 1.0).unwrap();
        assert!((t.moment(3) - 1.5).abs() < 1e-14);
        assert!((t.moment(4) - (0.2 * 16.0 + 0.8 / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(EntryDistribution::gaussian(0.0).is_err());
        assert!(EntryDistribution::gaussian(-1.0).is_err());
        assert!(EntryDistribution::two_point(0.0, 1.0).is_err());
        assert!(EntryDistribution::two_point(1.0, 1.0).is_err());
        assert!("gauss".parse::<EntryDistribution>().is_err());
        assert!("twopoint:0.3".parse::<EntryDistribution>().is_err());
        assert!("cauchy:1".parse::<EntryDistribution>().is_err());
    }

    #[test]
    fn spec_strings() {
        for s in ["gauss:1", "rademacher:0.5", "uniform:2", "twopoint:0.2:1"] {
            let d: EntryDistribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
            let json = serde_json::to_string(&d).unwrap();
            assert_eq!(serde_json::from_str::<EntryDistribution>(&json).unwrap(), d);
        }
    }

    #[test]
    fn rademacher_values_are_signs() {
        let d = EntryDistribution::rademacher(1.0).unwrap();
        let mut rng = StreamKey::new(9, 0, Domain::Auxiliary).stream(0);
        for _ in 0..1000 {
            let x = d.sample_entry(&mut rng);
            assert!(x == 1.0 || x == -1.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = EntryDistribution::gaussian(1.0).unwrap();
        let key = StreamKey::new(5, 1, Domain::Auxiliary);
        let a: Vec<f64> = (0..5).map({
            let mut r = key.stream(2);
            let d = &d;
            move |_| d.sample_entry(&mut r)
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut r = key.stream(2);
            let d = &d;
            move |_| d.sample_entry(&mut r)
        }).collect();
        assert_eq!(a, b);
    }

    /// Empirical raw moments of 10^6 draws against the table, within 5
    /// standard errors (stderr from the table itself: Var a^k = mu_2k - mu_k^2).
    #[test]
    fn empirical_moments_match_tables() {
        const M: usize = 1_000_000;
        for d in families() {
            let mut rng = StreamKey::new(2024, 0, Domain::Auxiliary).stream(7);
            let mut sums = [0.0f64; 5];
            for _ in 0..M {
                let x = d.sample_entry(&mut rng);
                let mut p = 1.0;
                for s in sums.iter_mut() {
                    p *= x;
                    *s += p;
                }
            }
            for k in 1..=5 {
                let emp = sums[k - 1] / M as f64;
                let var = d.moment(2 * k) - d.moment(k).powi(2);
                let se = (var / M as f64).sqrt();
                assert!(
                    (emp - d.moment(k)).abs() <= 5.0 * se + 1e-10 * d.abs_moment(k),
                    "{d} k={k}: {emp} vs {} (se {se})",
                    d.moment(k)
                );
            }
        }
    }

    #[test]
    fn cumulant_examples() {
        let g = cumulants_from_moments(&[0.0, 1.0, 0.0, 3.0, 0.0, 15.0]).unwrap();
        assert_eq!(g.k, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = cumulants_from_moments(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.k, [0.0, 1.0, 0.0, -2.0, 0.0, 16.0]);
        assert!(cumulants_from_moments(&[0.1, 1.0, 0.0, 3.0, 0.0, 15.0]).is_err());
    }

    #[test]
    fn matrix_entry_fourth_cumulant() {
        // X = b^{-1/2} a d, a ~ N(0,1), d ~ Bernoulli(1/2), b = 4:
        // E X^{2k} = mu_{2k} psi / b^k.
        let (b, psi) = (4.0, 0.5);
        let g = EntryDistribution::gaussian(1.0).unwrap();
        let mu: [f64; 6] = std::array::from_fn(|i| {
            let k = i + 1;
            g.moment(k) * psi / (b as f64).powf(k as f64 / 2.0)
        });
        let c = cumulants_from_moments(&mu).unwrap();
        assert!((c.get(4) - 3.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn exact_rational_cumulants() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        // Two-point law with p = 1/5, v = 1: atoms 2 and -1/2.
        let p = r(1, 5);
        let mu: [Rational64; 6] = std::array::from_fn(|i| {
            let k = (i + 1) as i32;
            p * r(2, 1).pow(k) + (r(1, 1) - p) * r(-1, 2).pow(k)
        });
        assert_eq!(mu[0], r(0, 1));
        let c = cumulants_from_moments(&mu).unwrap();
        assert_eq!(moments_from_cumulants(&c), mu);
        assert_eq!(*c.get(3), r(3, 2));
        assert_eq!(*c.get(4), mu[3] - r(3, 1));
    }

    #[test]
    fn round_trip_on_builtin_families() {
        for d in families() {
            let mu: [f64; 6] = std::array::from_fn(|i| d.moment(i + 1));
            let back = moments_from_cumulants(&cumulants_from_moments(&mu).unwrap());
            for (a, b) in mu.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gaussian_higher_cumulants_vanish() {
        let d = EntryDistribution::gaussian(2.5).unwrap();
        let mu: [f64; 6] = std::array::from_fn(|i| d.moment(i + 1));
        let c = cumulants_from_moments(&mu).unwrap();
        for r in 3..=6 {
            assert!(c.get(r).abs() < 1e-13 * d.moment(6), "K_{r} = {}", c.get(r));
        }
    }

    #[test]
    fn theorem_classes() {
        let e = Kernel::exponential(1.0).unwrap();
        let b = Kernel::band();
        assert_eq!(
            classify_theorem(&EntryDistribution::gaussian(1.0).unwrap(), &e),
            TheoremClass::Thm52
        );
        assert_eq!(
            classify_theorem(&EntryDistribution::gaussian(3.0).unwrap(), &b),
            TheoremClass::Thm52
        );
        for d in ["rademacher:1", "uniform:1", "twopoint:0.2:1", "twopoint:0.5:1"] {
            let d: EntryDistribution = d.parse().unwrap();
            assert_eq!(classify_theorem(&d, &e), TheoremClass::Thm21Only, "{d}");
        }
        assert_eq!(TheoremClass::Thm52.to_string(), "thm-5.2");
    }

    proptest::proptest! {
        #[test]
        fn cumulant_moment_round_trip(k2 in 0.01f64..5.0, k3 in -3.0f64..3.0, k4 in -3.0f64..3.0,
                                      k5 in -3.0f64..3.0, k6 in -3.0f64..3.0) {
            let c = CumulantVector { k: [0.0, k2, k3, k4, k5, k6] };
            let back = cumulants_from_moments(&moments_from_cumulants(&c)).unwrap();
            for (a, b) in c.k.iter().zip(&back.k) {
                proptest::prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
