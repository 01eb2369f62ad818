//! Dense symmetric linear algebra used by the spectral and resolvent code.

mod band_ldlt;
mod ql;
pub mod sturm;
mod tri_solve;
mod tridiag;

pub use band_ldlt::{half_bandwidth, BandLdlt};
pub use ql::{tridiagonal_eigenvalues, MAX_SWEEPS_PER_EIGENVALUE};
pub use tri_solve::TriLu;
pub use tridiag::{tridiagonalize, tridiagonalize_with_q, HouseholderQ, Tridiagonal};

use crate::error::Result;
use crate::scalar::Real;

/// Sorted eigenvalues of the dense symmetric row-major `n x n` matrix `a`
/// (only the lower triangle is read): Householder tridiagonalization followed
/// by implicit QL.
pub fn symmetric_eigenvalues<T: Real>(a: &[T], n: usize) -> Result<Vec<T>> {
    let mut work = a.to_vec();
    let t = tridiagonalize(&mut work, n);
    drop(work);
    tridiagonal_eigenvalues(&t)
}

/// Eigenvalues plus eigenpair residuals `||A x - lambda_k x||` for the
/// requested indices `k`. `a` must hold the full symmetric matrix. Each
/// vector comes from inverse iteration on the tridiagonal form, mapped back
/// through the stored reflectors, so a check costs `O(n^2)`.
pub fn symmetric_eigenvalues_checked<T: Real>(
    a: &[T],
    n: usize,
    check: &[usize],
) -> Result<(Vec<T>, Vec<T>)> {
    let (t, q) = tridiagonalize_with_q(a.to_vec(), n);
    let values = tridiagonal_eigenvalues(&t)?;
    let mut residuals = Vec::with_capacity(check.len());
    for &k in check {
        let lambda = values[k];
        let lu = TriLu::factor(&t, lambda);
        // Fixed, non-degenerate start vector.
        let mut y: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(((i * 7919) % 101) as f64 / 101.0))
            .collect();
        for _ in 0..3 {
            lu.solve(&mut y);
            let norm = y.iter().map(|v| *v * *v).sum::<T>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
        }
        q.apply(&mut y);
        let mut res = T::zero();
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            let ax: T = row.iter().zip(&y).map(|(&p, &x)| p * x).sum();
            let r = ax - lambda * y[i];
            res += r * r;
        }
        residuals.push(res.sqrt());
    }
    Ok((values, residuals))
}
