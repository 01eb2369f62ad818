//! Stieltjes transforms, resolvent entries `G = (H - zI)^{-1}`, the finite
//! self-consistent system for the averaged diagonal, and finite-difference
//! validation of the first-derivative identities of `G`.

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_replica, EnsembleParams, SampledMatrix};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::BandLdlt;
use crate::scalar::{Real, C};
use crate::spectra::Spectrum;

/// Parses `re,im`.
pub fn parse_z(s: &str) -> Result<C<f64>> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| Error::parse("z", s, "expected `re,im`"))?;
    let re: f64 = re.trim().parse().map_err(|_| Error::parse("z", s, "bad real part"))?;
    let im: f64 = im.trim().parse().map_err(|_| Error::parse("z", s, "bad imaginary part"))?;
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::parse("z", s, "not finite"));
    }
    Ok(C::new(re, im))
}

fn require_off_axis<T: Real>(z: C<T>) -> Result<()> {
    if z.im == T::zero() || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::invalid("z", format!("need finite z with Im z != 0, got {z}")));
    }
    Ok(())
}

/// `eta = 2v + 1`.
pub fn lambda_eta(v2: f64) -> f64 {
    2.0 * v2.sqrt() + 1.0
}

/// Whether `|Im z| >= 2v + 1`.
pub fn in_lambda_eta(z: C<f64>, v2: f64) -> bool {
    z.im.abs() >= lambda_eta(v2)
}

/// A spectral parameter and the transform value there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint<T> {
    pub z: C<T>,
    pub value: C<T>,
}

/// Stieltjes transform of the semicircle law: the root of
/// `v^2 w^2 + z w + 1 = 0` lying in the same half plane as `z`.
pub fn semicircle_stieltjes<T: Real>(z: C<T>, v2: T) -> Result<C<T>> {
    require_off_axis(z)?;
    if v2 == T::zero() {
        return Ok(-z.inv());
    }
    let two = T::lit(2.0);
    let disc = (z * z - C::new(T::lit(4.0) * v2, T::zero())).sqrt();
    let w1 = (-z + disc) / (v2 * two);
    let w2 = (-z - disc) / (v2 * two);
    // The roots multiply to 1/v^2 > 0, so exactly one has Im w of the sign of Im z.
    Ok(if w1.im * z.im > T::zero() { w1 } else { w2 })
}

/// `(1/N) sum_j 1/(lambda_j - z)`.
pub fn empirical_stieltjes<T: Real>(s: &Spectrum<T>, z: C<T>) -> Result<C<T>> {
    require_off_axis(z)?;
    if s.is_empty() {
        return Err(Error::invalid("spectrum", "empty"));
    }
    let sum: C<T> = s
        .values()
        .iter()
        .map(|&l| (C::new(l, T::zero()) - z).inv())
        .fold(C::zero(), |a, b| a + b);
    Ok(sum / T::from_usize_lossy(s.len()))
}

/// `LDL^T` factorization of `H - zI`, banded to the matrix's actual bandwidth.
pub struct ResolventFactor<T> {
    ldlt: BandLdlt<T>,
    first: i64,
}

impl<T: Real> ResolventFactor<T> {
    pub fn new(m: &SampledMatrix<T>, z: C<T>) -> Result<Self> {
        require_off_axis(z)?;
        let ldlt = BandLdlt::factor_shifted(m.as_slice(), m.dim(), m.half_bandwidth(), z)?;
        Ok(ResolventFactor {
            ldlt,
            first: m.first_index(),
        })
    }

    pub fn dim(&self) -> usize {
        self.ldlt.dim()
    }

    /// `G(i, i)` for all rows, in physical order.
    pub fn diagonal(&self) -> Vec<C<T>> {
        self.ldlt.inverse_diagonal()
    }

    /// Column `G(., i)` for logical index `i`.
    pub fn column(&self, i: i64) -> Vec<C<T>> {
        self.ldlt.inverse_column((i - self.first) as usize)
    }
}

/// `G(i, i)` for every row (physical order).
pub fn resolvent_diagonal<T: Real>(m: &SampledMatrix<T>, z: C<T>) -> Result<Vec<C<T>>> {
    Ok(ResolventFactor::new(m, z)?.diagonal())
}

/// `(1/N) tr G(z)` without an eigendecomposition.
pub fn resolvent_trace<T: Real>(m: &SampledMatrix<T>, z: C<T>) -> Result<C<T>> {
    let d = resolvent_diagonal(m, z)?;
    let sum = d.iter().fold(C::zero(), |a, &b| a + b);
    Ok(sum / T::from_usize_lossy(d.len().max(1)))
}

/// `sum_p |G(i, p)|^2 = ||G e_i||^2` for logical row `i`.
pub fn row_energy<T: Real>(f: &ResolventFactor<T>, i: i64) -> T {
    f.column(i).iter().map(|c| c.norm_sqr()).sum()
}

/// Result of [`derivative_identity_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCheck<T> {
    /// `max |analytic - finite difference|` over the compared entries.
    pub discrepancy: T,
    /// `max |analytic|`, for scale.
    pub magnitude: T,
}

/// Compares `dG(s, t)/dH_jk` (symmetric perturbation of the site `(j, k)`,
/// logical indices) against central differences with the given step, over
/// all `s` and `t in {j, k}`. Analytically
/// `dG_st = -(G_sj G_kt + G_sk G_jt)` for `j != k` and `-G_sj G_jt` for `j = k`.
pub fn derivative_identity_check<T: Real>(
    m: &SampledMatrix<T>,
    z: C<T>,
    site: (i64, i64),
    step: T,
) -> Result<DerivativeCheck<T>> {
    if !(step >= T::lit(1e-7) && step <= T::lit(1e-4)) {
        return Err(Error::invalid("step", format!("need 1e-7 <= step <= 1e-4, got {step}")));
    }
    let (j, k) = site;
    let range = m.logical_indices();
    if !range.contains(&j) || !range.contains(&k) {
        return Err(Error::invalid("site", format!("({j}, {k}) outside {range:?}")));
    }
    let (pj, pk) = ((j - m.first_index()) as usize, (k - m.first_index()) as usize);
    let base = ResolventFactor::new(m, z)?;
    let gj = base.column(j);
    let gk = base.column(k);
    let plus = ResolventFactor::new(&m.perturbed(pj, pk, step), z)?;
    let minus = ResolventFactor::new(&m.perturbed(pj, pk, -step), z)?;
    let two_h = step + step;
    let mut discrepancy = T::zero();
    let mut magnitude = T::zero();
    for (t, gt) in [(j, &gj), (k, &gk)] {
        let (tj, tk) = (gt[pj], gt[pk]);
        let fd: Vec<C<T>> = plus
            .column(t)
            .iter()
            .zip(minus.column(t))
            .map(|(a, b)| (*a - b) / two_h)
            .collect();
        for s in 0..m.dim() {
            let analytic = if j == k {
                -(gj[s] * tj)
            } else {
                -(gj[s] * tk + gk[s] * tj)
            };
            discrepancy = discrepancy.max((analytic - fd[s]).norm());
            magnitude = magnitude.max(analytic.norm());
        }
    }
    Ok(DerivativeCheck {
        discrepancy,
        magnitude,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
    pub allow_outside_lambda: bool,
    /// Starting point (logical order); `r = -1/z` everywhere when absent.
    pub initial: Option<Vec<C<T>>>,
}

impl<T: Real> Default for FixedPointOptions<T> {
    fn default() -> Self {
        FixedPointOptions {
            tolerance: T::lit(1e-12),
            max_iterations: 10_000,
            allow_outside_lambda: false,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution<T> {
    pub z: C<T>,
    /// `r(i)` for `i = -n..=n`.
    pub r: Vec<C<T>>,
    /// Sup-norm defect of `r = xi + xi v^2 r U_r`.
    pub residual: T,
    pub iterations: usize,
    /// Sup-norm of `r_{k+1} - r_k` for each iteration.
    pub increments: Vec<T>,
    /// False when `z` lies outside `|Im z| >= 2v + 1` (solved on override; no
    /// uniqueness guarantee).
    pub inside_lambda: bool,
}

impl<T: Real> FixedPointSolution<T> {
    pub fn half_range(&self) -> u64 {
        (self.r.len() / 2) as u64
    }
}

/// `U_r(i) = (1/b) sum_p r(p) psi((i - p)/b)`.
fn smooth<T: Real>(r: &[C<T>], profile: &[T], inv_b: T, out: &mut [C<T>]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C::zero();
        for (p, &rp) in r.iter().enumerate() {
            let w = profile[i.abs_diff(p)];
            if w != T::zero() {
                acc += rp * w;
            }
        }
        *o = acc * inv_b;
    }
}

/// Solves `r(i) = xi + xi v^2 r(i) U_r(i)`, `|i| <= n`, `xi = -1/z`, by the
/// iteration `r <- xi / (1 - xi v^2 U_r)` started from `r = xi`.
pub fn solve_finite_system<T: Real>(
    n: u64,
    b: f64,
    v2: f64,
    kernel: &Kernel,
    z: C<T>,
    opts: &FixedPointOptions<T>,
) -> Result<FixedPointSolution<T>> {
    require_off_axis(z)?;
    let dim = 2 * n as usize + 1;
    if !(b > 0.0 && b <= dim as f64) {
        return Err(Error::invalid("b", format!("need 0 < b <= {dim}, got {b}")));
    }
    if !(v2 >= 0.0 && v2.is_finite()) {
        return Err(Error::invalid("v2", format!("need v2 >= 0, got {v2}")));
    }
    let zf = C::new(z.re.to_f64_lossy(), z.im.to_f64_lossy());
    let inside = in_lambda_eta(zf, v2);
    if !inside && !opts.allow_outside_lambda {
        return Err(Error::OutsideLambda {
            re: zf.re,
            im: zf.im,
            eta: lambda_eta(v2),
        });
    }
    let xi = -z.inv();
    let v2t = T::lit(v2);
    let profile: Vec<T> = (0..dim).map(|k| T::lit(kernel.eval(k as f64 / b))).collect();
    let inv_b = T::lit(1.0 / b);
    let mut r = match &opts.initial {
        Some(init) if init.len() == dim => init.clone(),
        Some(init) => {
            return Err(Error::invalid(
                "initial",
                format!("expected {dim} values, got {}", init.len()),
            ))
        }
        None => vec![xi; dim],
    };
    let mut u = vec![C::zero(); dim];
    let mut increments = Vec::new();
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        smooth(&r, &profile, inv_b, &mut u);
        let mut inc = T::zero();
        for (ri, &ui) in r.iter_mut().zip(&u) {
            let next = xi / (C::new(T::one(), T::zero()) - xi * v2t * ui);
            inc = inc.max((next - *ri).norm());
            *ri = next;
        }
        increments.push(inc);
        iterations += 1;
        smooth(&r, &profile, inv_b, &mut u);
        residual = r
            .iter()
            .zip(&u)
            .map(|(&ri, &ui)| (ri - xi - xi * v2t * ri * ui).norm())
            .fold(T::zero(), T::max);
        if residual <= opts.tolerance {
            break;
        }
    }
    if !(residual <= opts.tolerance) {
        return Err(Error::NoConvergence {
            what: "finite self-consistent system",
            iterations,
            residual: residual.to_f64_lossy(),
        });
    }
    if inside {
        let ball = T::lit(2.0) / z.im.abs();
        let sup = r.iter().map(|c| c.norm()).fold(T::zero(), T::max);
        if sup > ball {
            return Err(Error::CheckFailed {
                what: "sup |r(i)| against 2/|Im z|",
                value: sup.to_f64_lossy(),
                bound: ball.to_f64_lossy(),
            });
        }
    }
    Ok(FixedPointSolution {
        z,
        r,
        residual,
        iterations,
        increments,
        inside_lambda: inside,
    })
}

/// `sup_{|i| <= n - bL} |values(i) - reference|` for `values` indexed `-n..=n`.
pub fn interior_deviation<T: Real>(values: &[C<T>], reference: C<T>, b: f64, l: f64) -> Result<T> {
    if values.len() % 2 == 0 {
        return Err(Error::invalid("values", "need an odd length 2n + 1"));
    }
    let n = (values.len() / 2) as f64;
    let reach = b * l;
    if !(reach >= 0.0) || reach > n {
        return Err(Error::invalid("L", format!("interior is empty: bL = {reach} > n = {n}")));
    }
    let limit = n - reach;
    Ok(values
        .iter()
        .enumerate()
        .filter(|(p, _)| (*p as f64 - n).abs() <= limit)
        .map(|(_, &v)| (v - reference).norm())
        .fold(T::zero(), T::max))
}

/// Replica mean of the resolvent diagonal with per-site standard errors of
/// the complex mean (`sqrt(E|G - EG|^2 / M)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalAverage {
    pub mean: Vec<C<f64>>,
    pub stderr: Vec<f64>,
    pub replicas: u64,
}

pub fn mean_resolvent_diagonal(p: &EnsembleParams, z: C<f64>, replicas: u64) -> Result<DiagonalAverage> {
    if replicas == 0 {
        return Err(Error::invalid("replicas", "need at least one"));
    }
    let diags: Vec<Vec<C<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let m: SampledMatrix<f64> = sample_replica(p, rep)?;
            resolvent_diagonal(&m, z)
        })
        .collect::<Result<_>>()?;
    let dim = p.dim();
    let mf = replicas as f64;
    let mut mean = vec![C::zero(); dim];
    for d in &diags {
        for (a, &x) in mean.iter_mut().zip(d) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= mf);
    let stderr = (0..dim)
        .map(|i| {
            if replicas < 2 {
                return f64::NAN;
            }
            let ss: f64 = diags.iter().map(|d| (d[i] - mean[i]).norm_sqr()).sum();
            (ss / (mf - 1.0) / mf).sqrt()
        })
        .collect();
    Ok(DiagonalAverage {
        mean,
        stderr,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_matrix, Origin};
    use crate::rng::{Domain, StreamKey};
    use crate::spectra::eigenvalues;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    /// Dense complex Gauss-Jordan inverse with partial pivoting.
    fn dense_inverse(h: &[f64], n: usize, z: C<f64>) -> Vec<C<f64>> {
        let mut a: Vec<C<f64>> = h.iter().map(|&x| c(x, 0.0)).collect();
        for i in 0..n {
            a[i * n + i] -= z;
        }
        let mut inv = vec![C::zero(); n * n];
        for i in 0..n {
            inv[i * n + i] = c(1.0, 0.0);
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[x * n + col].norm().partial_cmp(&a[y * n + col].norm()).unwrap()).unwrap();
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
                inv.swap(col * n + j, piv * n + j);
            }
            let d = a[col * n + col].inv();
            for j in 0..n {
                a[col * n + j] *= d;
                inv[col * n + j] *= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    for j in 0..n {
                        let (x, y) = (a[col * n + j], inv[col * n + j]);
                        a[r * n + j] -= f * x;
                        inv[r * n + j] -= f * y;
                    }
                }
            }
        }
        inv
    }

    fn random_symmetric(n: usize, seed: u64) -> SampledMatrix<f64> {
        let mut rng = StreamKey::new(seed, 0, Domain::Auxiliary).stream(3);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        SampledMatrix::from_dense(n, a).unwrap()
    }

    #[test]
    fn parses_z() {
        assert_eq!(parse_z("0,3").unwrap(), c(0.0, 3.0));
        assert_eq!(parse_z(" -1.5 , 2e0 ").unwrap(), c(-1.5, 2.0));
        assert!(parse_z("3").is_err());
        assert!(parse_z("a,b").is_err());
    }

    #[test]
    fn semicircle_transform_examples() {
        let w = semicircle_stieltjes(c(0.0, 3.0), 1.0).unwrap();
        assert!((w - c(0.0, (13f64.sqrt() - 3.0) / 2.0)).norm() < 1e-15);
        assert!((w.im - 0.302776).abs() < 1e-6);
        assert!(semicircle_stieltjes(c(1.0, 0.0), 1.0).is_err());
        for z in [c(0.3, -3.5), c(-2.0, 3.0), c(5.0, 0.1)] {
            let w = semicircle_stieltjes(z, 1.0).unwrap();
            let wc = semicircle_stieltjes(z.conj(), 1.0).unwrap();
            assert!((wc - w.conj()).norm() < 1e-15);
            assert!(w.im * z.im > 0.0);
            assert!(w.norm() <= 1.0 / z.im.abs() + 1e-15);
            assert!((w - (-z - w).inv()).norm() < 1e-12);
        }
        assert_eq!(semicircle_stieltjes(c(0.0, 2.0), 0.0).unwrap(), c(0.0, 0.5));
    }

    #[test]
    fn empirical_transform_examples() {
        let s = Spectrum::new(vec![0.0], Origin::External).unwrap();
        assert!((empirical_stieltjes(&s, c(0.0, 3.0)).unwrap() - c(0.0, 1.0 / 3.0)).norm() < 1e-15);
        let s = Spectrum::new(vec![-1.0, 1.0], Origin::External).unwrap();
        assert!((empirical_stieltjes(&s, c(0.0, 1.0)).unwrap() - c(0.0, 0.5)).norm() < 1e-15);
        assert!(empirical_stieltjes(&s, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn transforms_match_dense_resolvent_oracle() {
        for (trial, n) in [1usize, 5, 17, 64].iter().enumerate() {
            let m = random_symmetric(*n, trial as u64);
            let z = c(0.2, 0.7);
            let inv = dense_inverse(m.as_slice(), *n, z);
            let tr: C<f64> = (0..*n).map(|i| inv[i * n + i]).sum::<C<f64>>() / *n as f64;
            let g = empirical_stieltjes(&eigenvalues(&m).unwrap(), z).unwrap();
            assert!((g - tr).norm() < 1e-8);
            let d = resolvent_diagonal(&m, z).unwrap();
            for i in 0..*n {
                assert!((d[i] - inv[i * n + i]).norm() < 1e-8);
            }
            let f = ResolventFactor::new(&m, z).unwrap();
            let k = *n.min(&3) - 1;
            let col = f.column(k as i64);
            for i in 0..*n {
                assert!((col[i] - inv[i * n + k]).norm() < 1e-8);
            }
            assert!((resolvent_trace(&m, z).unwrap() - tr).norm() < 1e-8);
        }
    }

    #[test]
    fn diagonal_matrix_resolvent_is_exact() {
        let d = [-1.0, 0.5, 2.0];
        let m = SampledMatrix::diagonal(&d);
        let z = c(0.1, 3.0);
        let g = resolvent_diagonal(&m, z).unwrap();
        for (gi, &di) in g.iter().zip(&d) {
            assert_eq!(*gi, (c(di, 0.0) - z).inv());
        }
    }

    #[test]
    fn bounds_on_sampled_matrices() {
        let p = EnsembleParams::new(60, 6.0, "exp:1".parse().unwrap(), "gauss:1".parse().unwrap(), 3).unwrap();
        let m: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        let z = c(0.0, 3.0);
        let f = ResolventFactor::new(&m, z).unwrap();
        assert!(f.diagonal().iter().all(|g| g.norm() <= 1.0 / 3.0 + 1e-14));
        for i in [-60i64, -7, 0, 33, 60] {
            assert!(row_energy(&f, i) <= 1.0 / 9.0 + 1e-14);
        }
    }

    #[test]
    fn derivative_check_examples() {
        let m = SampledMatrix::diagonal(&[0.5, -1.0, 2.0]);
        let z = c(0.0, 1.0);
        let h = 1e-4;
        let r = derivative_identity_check(&m, z, (1, 1), h).unwrap();
        assert!(r.discrepancy <= 10.0 * h * h, "{}", r.discrepancy);
        assert!(derivative_identity_check(&m, z, (1, 1), 1e-3).is_err());
        assert!(derivative_identity_check(&m, z, (1, 5), h).is_err());

        let m = random_symmetric(50, 8);
        let r = derivative_identity_check(&m, c(0.0, 1.0), (3, 20), 1e-5).unwrap();
        assert!(r.discrepancy <= 1e-7, "{}", r.discrepancy);
    }

    #[test]
    fn fixed_point_trivial_and_gate() {
        let k = Kernel::band();
        let z = c(0.0, 3.0);
        let s = solve_finite_system(10, 4.0, 0.0, &k, z, &FixedPointOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.r.iter().all(|&r| r == -z.inv()));
        assert!(matches!(
            solve_finite_system(10, 4.0, 1.0, &k, c(0.0, 2.0), &FixedPointOptions::default()),
            Err(Error::OutsideLambda { .. })
        ));
        let opts = FixedPointOptions {
            allow_outside_lambda: true,
            ..Default::default()
        };
        let s = solve_finite_system(10, 4.0, 1.0, &k, c(0.0, 2.0), &opts).unwrap();
        assert!(!s.inside_lambda);
    }

    #[test]
    fn fixed_point_contracts_and_approaches_semicircle() {
        let z = c(0.0, 3.0);
        let w = semicircle_stieltjes(z, 1.0).unwrap();
        for k in [Kernel::band(), Kernel::exponential(1.0).unwrap()] {
            let s = solve_finite_system(1024, 16.0, 1.0, &k, z, &FixedPointOptions::default()).unwrap();
            assert!(s.residual <= 1e-12);
            for win in s.increments.windows(2) {
                if win[0] > 1e-13 {
                    assert!(win[1] / win[0] <= 0.26, "{k}: {:?}", s.increments);
                }
            }
            assert!(interior_deviation(&s.r, w, 16.0, 8.0).unwrap() <= 0.01);
        }
    }

    #[test]
    fn interior_deviation_examples() {
        let w = c(0.1, 0.2);
        assert_eq!(interior_deviation(&[w; 9], w, 1.0, 2.0).unwrap(), 0.0);
        let v = [c(0.0, 0.0), w, w, w, c(1.0, 0.0)];
        assert_eq!(interior_deviation(&v, w, 1.0, 1.0).unwrap(), 0.0);
        let full = interior_deviation(&v, w, 1.0, 0.0).unwrap();
        assert!((full - (c(1.0, 0.0) - w).norm()).abs() < 1e-15);
        assert!(interior_deviation(&v, w, 1.0, 3.0).is_err());
    }

    #[test]
    fn single_precision_paths() {
        let z = C::new(0.0f32, 3.0);
        let w = semicircle_stieltjes(z, 1.0f32).unwrap();
        assert!((w.im - 0.302776).abs() < 1e-6);
        let s = solve_finite_system(64, 4.0, 1.0, &Kernel::band(), z, &FixedPointOptions {
            tolerance: 1e-6,
            ..Default::default()
        })
        .unwrap();
        assert!(s.residual <= 1e-6);
    }
}
