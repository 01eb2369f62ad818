//! The single-coordinate cumulant expansion
//!
//! ```text
//! E[X f(X)] = sum_{r=0}^{q} K_{r+1}/r! E[f^(r)(X)] + eps_q
//! ```
//!
//! for scalar laws (entry laws and the percolation matrix-entry law
//! `b^{-1/2} a d`), with Monte Carlo or exact estimates of every term and a
//! sup-norm bound on `eps_q`.
//!
//! Remainder bounds. Expanding every expectation in Taylor series around 0
//! to order `q` and using `mu_{s+1} = sum_r C(s, r) K_{r+1} mu_{s-r}` leaves
//! only the order-`(q+1)` remainders:
//!
//! ```text
//! eps_1 = E[X^3 f''(Y0)]/2 - K2 E[X f''(Y1)]
//! eps_3 = E[X^5 f''''(Y0)]/24 - K2 E[X^3 f''''(Y1)]/6
//!         - K3 E[X^2 f''''(Y2)]/4 - K4 E[X f''''(Y3)]/6
//! ```
//!
//! with `|Y_v| <= |X|`, so `|eps_1| <= sup|f''| (E|X|^3/2 + K2 E|X|)` and
//! `|eps_3| <= sup|f''''| (E|X|^5/24 + K2 E|X|^3/6 + |K3| mu_2/4 + |K4| E|X|/6)`.
//! The `K3` term vanishes for symmetric laws.
//!
//! Variance reduction. Write `f = P + g` with `P` the degree-`q+3` Taylor
//! polynomial of `f` at 0. Every expectation involving `P` is a finite
//! combination of moments and is computed exactly; only the `g` part is
//! sampled. The estimator stays unbiased and its noise scales with the small
//! `g`.

use std::fmt;
use std::str::FromStr;

use num_traits::Num;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entries::{cumulants_from_moments, CumulantVector, EntryDistribution, MOMENT_ORDERS};
use crate::error::{Error, Result};
use crate::rng::{unit_open_closed_low, Domain, StreamKey};
use crate::scalar::C;

/// Highest polynomial degree accepted by [`TestFunction::polynomial`].
pub const MAX_POLY_DEGREE: usize = 6;

const BATCH: usize = 8192;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Falling factorial `m (m-1) ... (m-r+1)`.
fn falling(m: usize, r: usize) -> f64 {
    (m + 1 - r..=m).map(|k| k as f64).product()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TestFunction {
    /// `1/(t - z)`.
    Resolvent { z: C<f64> },
    /// `sum_m coeffs[m] t^m`.
    Polynomial { coeffs: Vec<f64> },
    /// `1/(1 + (t/s)^2)`.
    Rational { s: f64 },
}

impl TestFunction {
    pub fn resolvent(z: C<f64>) -> Result<Self> {
        if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
            return Err(Error::invalid("z", format!("need Im z != 0, got {z}")));
        }
        Ok(TestFunction::Resolvent { z })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::invalid(
                "coeffs",
                format!("need 1..={} coefficients, got {}", MAX_POLY_DEGREE + 1, coeffs.len()),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "not finite"));
        }
        Ok(TestFunction::Polynomial { coeffs })
    }

    pub fn rational(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("s", format!("need s > 0, got {s}")));
        }
        Ok(TestFunction::Rational { s })
    }

    /// `f^(r)(t)`, closed form.
    pub fn derivative(&self, r: usize, t: f64) -> C<f64> {
        match self {
            TestFunction::Resolvent { z } => {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                (C::new(t, 0.0) - z).powi(-(r as i32 + 1)) * (sign * factorial(r))
            }
            TestFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for m in (r..coeffs.len()).rev() {
                    acc = acc * t + coeffs[m] * falling(m, r);
                }
                C::new(acc, 0.0)
            }
            TestFunction::Rational { s } => {
                // f(t) = s Im(1/(t - i s))
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                let w = C::new(t, -s).powi(-(r as i32 + 1)) * (sign * factorial(r));
                C::new(s * w.im, 0.0)
            }
        }
    }

    pub fn eval(&self, t: f64) -> C<f64> {
        self.derivative(0, t)
    }

    /// `sup_t |f^(r)(t)|` (an upper bound for the rational family); infinite
    /// for polynomials of degree above `r`.
    pub fn derivative_sup(&self, r: usize) -> f64 {
        match self {
            TestFunction::Resolvent { z } => factorial(r) / z.im.abs().powi(r as i32 + 1),
            TestFunction::Polynomial { coeffs } => {
                let deg = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
                if deg < r {
                    0.0
                } else if deg == r {
                    coeffs[r].abs() * factorial(r)
                } else {
                    f64::INFINITY
                }
            }
            TestFunction::Rational { s } => factorial(r) / s.powi(r as i32),
        }
    }

    /// Taylor coefficients `f^(m)(0)/m!`, `m = 0..=degree`.
    pub fn taylor_at_zero(&self, degree: usize) -> Vec<C<f64>> {
        (0..=degree)
            .map(|m| self.derivative(m, 0.0) / factorial(m))
            .collect()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Resolvent { z } => write!(f, "resolvent:{},{}", z.re, z.im),
            TestFunction::Polynomial { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", c.join(","))
            }
            TestFunction::Rational { s } => write!(f, "rational:{s}"),
        }
    }
}

/// `resolvent:<re>,<im>`, `poly:<c0>,<c1>,...`, `rational:<s>`.
impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::parse("test function", s, why);
        let (head, rest) = s.split_once(':').ok_or_else(|| bad("expected `<family>:<args>`"))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad number"))?;
        match head {
            "resolvent" if nums.len() == 2 => TestFunction::resolvent(C::new(nums[0], nums[1])),
            "poly" => TestFunction::polynomial(nums),
            "rational" if nums.len() == 1 => TestFunction::rational(nums[0]),
            _ => Err(bad("unknown family or wrong argument count")),
        }
    }
}

/// The scalar law of `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ExpansionLaw {
    Entry { dist: EntryDistribution },
    /// `b^{-1/2} a d` with `a` from `dist` and `d ~ Bernoulli(psi)`.
    MatrixEntry { dist: EntryDistribution, b: f64, psi: f64 },
}

impl ExpansionLaw {
    pub fn entry(dist: EntryDistribution) -> Self {
        ExpansionLaw::Entry { dist }
    }

    pub fn matrix_entry(dist: EntryDistribution, b: f64, psi: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("need b > 0, got {b}")));
        }
        if !(psi > 0.0 && psi <= 1.0) {
            return Err(Error::invalid("psi", format!("need 0 < psi <= 1, got {psi}")));
        }
        Ok(ExpansionLaw::MatrixEntry { dist, b, psi })
    }

    fn scale(&self, k: usize) -> f64 {
        match self {
            ExpansionLaw::Entry { .. } => 1.0,
            ExpansionLaw::MatrixEntry { b, psi, .. } => psi / b.powf(k as f64 / 2.0),
        }
    }

    fn dist(&self) -> &EntryDistribution {
        match self {
            ExpansionLaw::Entry { dist } | ExpansionLaw::MatrixEntry { dist, .. } => dist,
        }
    }

    /// `E X^k`, `k <= 10` (`k = 0` gives 1).
    pub fn moment(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.dist().moment(k) * self.scale(k)
    }

    pub fn abs_moment(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.dist().abs_moment(k) * self.scale(k)
    }

    pub fn cumulants(&self) -> Result<CumulantVector<f64>> {
        let mu: [f64; 6] = std::array::from_fn(|i| self.moment(i + 1));
        cumulants_from_moments(&mu)
    }

    /// Support points and probabilities for finitely supported laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let base = self.dist().atoms()?;
        Some(match self {
            ExpansionLaw::Entry { .. } => base,
            ExpansionLaw::MatrixEntry { b, psi, .. } => {
                let s = 1.0 / b.sqrt();
                let mut a: Vec<(f64, f64)> = base.into_iter().map(|(x, p)| (x * s, p * psi)).collect();
                if *psi < 1.0 {
                    a.push((0.0, 1.0 - psi));
                }
                a
            }
        })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ExpansionLaw::Entry { dist } => dist.sample_entry(rng),
            ExpansionLaw::MatrixEntry { dist, b, psi } => {
                let mask = rng.next_u64();
                let words = [rng.next_u64(), rng.next_u64()];
                if unit_open_closed_low(mask) < *psi {
                    dist.from_words(words) / b.sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for ExpansionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionLaw::Entry { dist } => write!(f, "{dist}"),
            ExpansionLaw::MatrixEntry { dist, b, psi } => write!(f, "entry({dist}; b={b}, psi={psi})"),
        }
    }
}

/// Complex mean with its standard error (0 for exact values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C<f64>,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub order: usize,
    pub cumulant: f64,
    /// `K_{r+1}/r! E[f^(r)(X)]`.
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub law: ExpansionLaw,
    pub function: TestFunction,
    pub q: usize,
    /// 0 when evaluated by exact enumeration.
    pub samples: u64,
    pub exact: bool,
    pub lhs: Estimate,
    pub terms: Vec<ExpansionTerm>,
    /// `lhs - sum(terms)`, with the standard error of the per-sample
    /// difference.
    pub remainder: Estimate,
    /// Sup-norm remainder bound; absent for `q = 5`.
    pub bound: Option<f64>,
}

impl ExpansionReport {
    /// `|remainder| <= bound + k * stderr + rounding`; vacuously true without
    /// a bound.
    pub fn bound_holds(&self, k: f64) -> bool {
        match self.bound {
            Some(b) => self.remainder.value.norm() <= b + k * self.remainder.stderr + self.rounding(),
            None => true,
        }
    }

    /// Floating-point slack of `lhs - sum(terms)`: a few ulps of the largest
    /// magnitude that entered the difference.
    pub fn rounding(&self) -> f64 {
        let scale = self
            .terms
            .iter()
            .map(|t| t.estimate.value.norm())
            .fold(self.lhs.value.norm(), f64::max);
        64.0 * f64::EPSILON * scale
    }
}

fn check_q(q: usize) -> Result<()> {
    if ![1, 3, 5].contains(&q) {
        return Err(Error::invalid("q", format!("need q in {{1, 3, 5}}, got {q}")));
    }
    Ok(())
}

/// Bound on `|eps_q|` for `q = 1` or `q = 3` (see the module docs).
pub fn remainder_bound(law: &ExpansionLaw, f: &TestFunction, q: usize) -> Result<f64> {
    let k = law.cumulants()?;
    let m = |k: usize| law.abs_moment(k);
    let weight = match q {
        1 => m(3) / 2.0 + k.get(2) * m(1),
        3 => m(5) / 24.0 + k.get(2) * m(3) / 6.0 + k.get(3).abs() * law.moment(2) / 4.0 + k.get(4).abs() * m(1) / 6.0,
        _ => return Err(Error::invalid("q", format!("bound available for q = 1 or 3, got {q}"))),
    };
    let sup = f.derivative_sup(q + 1);
    Ok(if sup == 0.0 { 0.0 } else { sup * weight })
}

/// Running complex mean and sum of squared deviations.
#[derive(Clone, Copy, Default)]
struct Acc {
    n: f64,
    mean: C<f64>,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: C<f64>) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d.norm_sqr() * (1.0 - 1.0 / self.n);
    }

    fn merge(&mut self, o: &Acc) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * (o.n / n);
        self.m2 += o.m2 + d.norm_sqr() * self.n * o.n / n;
        self.n = n;
    }

    fn estimate(&self, offset: C<f64>) -> Estimate {
        let stderr = if self.n >= 2.0 {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        } else {
            f64::NAN
        };
        Estimate {
            value: self.mean + offset,
            stderr,
        }
    }
}

/// Split `f = P + g` with `P` the Taylor polynomial of the given degree (or
/// none): the `P` parts are exact moment sums, only `g` is sampled.
struct Control<'a> {
    f: &'a TestFunction,
    coef: &'a [f64],
    taylor: Vec<C<f64>>,
    exact_lhs: C<f64>,
    exact_terms: Vec<C<f64>>,
}

impl<'a> Control<'a> {
    fn new(law: &ExpansionLaw, f: &'a TestFunction, coef: &'a [f64], degree: Option<usize>) -> Self {
        let taylor = match degree {
            Some(d) => {
                debug_assert!(d < MOMENT_ORDERS);
                f.taylor_at_zero(d)
            }
            None => vec![],
        };
        let exact_lhs = taylor.iter().enumerate().map(|(m, &p)| p * law.moment(m + 1)).sum();
        let exact_terms = (0..coef.len())
            .map(|r| {
                let e: C<f64> = (r..taylor.len())
                    .map(|m| taylor[m] * (falling(m, r) * law.moment(m - r)))
                    .sum();
                e * coef[r]
            })
            .collect();
        Control {
            f,
            coef,
            taylor,
            exact_lhs,
            exact_terms,
        }
    }

    /// `g^(r)(x)`.
    fn g(&self, r: usize, x: f64) -> C<f64> {
        let mut poly = C::new(0.0, 0.0);
        for m in (r..self.taylor.len()).rev() {
            poly = poly * x + self.taylor[m] * falling(m, r);
        }
        self.f.derivative(r, x) - poly
    }

    /// Accumulators for lhs, each term and the remainder over `count` draws.
    fn batch<R: RngCore + ?Sized>(&self, law: &ExpansionLaw, rng: &mut R, count: u64) -> Vec<Acc> {
        let q = self.coef.len() - 1;
        let mut acc = vec![Acc::default(); q + 3];
        for _ in 0..count {
            let x = law.sample(rng);
            let l = self.g(0, x) * x;
            acc[0].push(l);
            let mut rem = l;
            for (r, &c) in self.coef.iter().enumerate() {
                let t = self.g(r, x) * c;
                acc[r + 1].push(t);
                rem -= t;
            }
            acc[q + 2].push(rem);
        }
        acc
    }
}

/// Evaluates both sides of the expansion. Finitely supported laws are summed
/// exactly (`samples` is ignored); otherwise `samples` draws keyed by `seed`.
pub fn expansion_estimate(
    law: &ExpansionLaw,
    f: &TestFunction,
    q: usize,
    samples: u64,
    seed: u64,
) -> Result<ExpansionReport> {
    check_q(q)?;
    if !law.abs_moment(q + 2).is_finite() {
        return Err(Error::invalid("law", format!("E|X|^{} is not finite", q + 2)));
    }
    let kc = law.cumulants()?;
    let coef: Vec<f64> = (0..=q).map(|r| kc.get(r + 1) / factorial(r)).collect();
    let bound = if q == 5 { None } else { Some(remainder_bound(law, f, q)?) };

    let (lhs, terms, remainder, samples, exact) = if let Some(atoms) = law.atoms() {
        let mut lhs = C::new(0.0, 0.0);
        let mut t = vec![C::new(0.0, 0.0); q + 1];
        for &(x, p) in &atoms {
            lhs += f.eval(x) * (x * p);
            for r in 0..=q {
                t[r] += f.derivative(r, x) * (coef[r] * p);
            }
        }
        let rem = lhs - t.iter().sum::<C<f64>>();
        let exact = |v| Estimate { value: v, stderr: 0.0 };
        (exact(lhs), t.into_iter().map(exact).collect::<Vec<_>>(), exact(rem), 0, true)
    } else {
        if samples < 2 {
            return Err(Error::invalid("samples", "need at least 2"));
        }
        let key = StreamKey::new(seed, 0, Domain::Expansion);
        // Pick the control polynomial that minimizes the sampled remainder
        // variance on a pilot batch drawn from a separate stream.
        let deg = [None, Some(q + 1), Some(q + 3)]
            .into_iter()
            .min_by(|&a, &b| {
                let va = Control::new(law, f, &coef, a).batch(law, &mut key.stream(u64::MAX), BATCH as u64)[q + 2].m2;
                let vb = Control::new(law, f, &coef, b).batch(law, &mut key.stream(u64::MAX), BATCH as u64)[q + 2].m2;
                va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .flatten();
        let control = Control::new(law, f, &coef, deg);
        let batches = samples.div_ceil(BATCH as u64);
        let parts: Vec<Vec<Acc>> = (0..batches)
            .into_par_iter()
            .map(|bi| {
                let count = (samples - bi * BATCH as u64).min(BATCH as u64);
                control.batch(law, &mut key.stream(bi), count)
            })
            .collect();
        let mut acc = vec![Acc::default(); q + 3];
        for part in &parts {
            for (a, b) in acc.iter_mut().zip(part) {
                a.merge(b);
            }
        }
        let (exact_lhs, exact_terms) = (control.exact_lhs, &control.exact_terms);
        let exact_rem = exact_lhs - exact_terms.iter().sum::<C<f64>>();
        let terms = (0..=q).map(|r| acc[r + 1].estimate(exact_terms[r])).collect();
        (acc[0].estimate(exact_lhs), terms, acc[q + 2].estimate(exact_rem), samples, false)
    };

    Ok(ExpansionReport {
        law: law.clone(),
        function: f.clone(),
        q,
        samples,
        exact,
        lhs,
        terms: terms
            .into_iter()
            .enumerate()
            .map(|(r, estimate)| ExpansionTerm {
                order: r,
                cumulant: *kc.get(r + 1),
                estimate,
            })
            .collect(),
        remainder,
        bound,
    })
}

/// Exact expansion of a polynomial `f` under a finitely supported law in any
/// exact field (e.g. rationals): returns `(lhs, terms, remainder)`.
pub fn exact_polynomial_expansion<T: Num + Clone>(
    atoms: &[(T, T)],
    coeffs: &[T],
    q: usize,
) -> Result<(T, Vec<T>, T)> {
    check_q(q)?;
    let from_usize = |n: usize| (0..n).fold(T::zero(), |a, _| a + T::one());
    let pow = |x: &T, k: usize| (0..k).fold(T::one(), |a, _| a * x.clone());
    let expect = |h: &dyn Fn(&T) -> T| {
        atoms
            .iter()
            .fold(T::zero(), |a, (x, p)| a + p.clone() * h(x))
    };
    let deriv = |r: usize, x: &T| {
        (r..coeffs.len()).fold(T::zero(), |a, m| {
            let ff = (m + 1 - r..=m).fold(T::one(), |f, k| f * from_usize(k));
            a + coeffs[m].clone() * ff * pow(x, m - r)
        })
    };
    let mu: [T; 6] = std::array::from_fn(|i| expect(&|x: &T| pow(x, i + 1)));
    let k = cumulants_from_moments(&mu)?;
    let lhs = expect(&|x: &T| x.clone() * deriv(0, x));
    let terms: Vec<T> = (0..=q)
        .map(|r| {
            let fact = (1..=r).fold(T::one(), |f, k| f * from_usize(k));
            k.get(r + 1).clone() * expect(&|x: &T| deriv(r, x)) / fact
        })
        .collect();
    let rem = terms.iter().fold(lhs.clone(), |a, t| a - t.clone());
    Ok((lhs, terms, rem))
}
