//! Independent small-matrix eigenvalue oracle.
//!
//! The leading principal minors of `A - xI` form a Sturm sequence for a real
//! symmetric `A`: the number of sign changes between consecutive minors (the
//! number of negative pivots of symmetric Gaussian elimination) equals the
//! number of eigenvalues below `x`. Bisection on that count isolates every
//! eigenvalue without any orthogonal transformation, which keeps this oracle
//! independent of the Householder/QL path it is used to check.
//!
//! Cost is `O(n^3)` per count, so it is meant for `n` up to a few dozen.

use crate::scalar::Real;

/// Number of eigenvalues of the dense symmetric `a` (row-major `n x n`)
/// strictly below `x`, as the count of negative pivots of `A - xI`.
/// Bunch-Parlett pivoting (1x1 or 2x2 pivots) bounds element growth, so the
/// signs stay reliable next to near-singular shifts.
pub fn count_below<T: Real>(a: &[T], n: usize, x: T) -> usize {
    let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
    let mut w: Vec<T> = a.to_vec();
    for i in 0..n {
        w[i * n + i] -= x;
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut negatives = 0;
    while !active.is_empty() {
        let (mut p0, mut mu0) = (active[0], -T::one());
        for &i in &active {
            if w[i * n + i].abs() > mu0 {
                mu0 = w[i * n + i].abs();
                p0 = i;
            }
        }
        let (mut pq, mut mu1) = ((p0, p0), T::zero());
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                if w[i * n + j].abs() > mu1 {
                    mu1 = w[i * n + j].abs();
                    pq = (i, j);
                }
            }
        }
        if mu0 >= alpha * mu1 {
            let d = w[p0 * n + p0];
            // Exact zero pivot with zero coupling: eigenvalue at x, not below it.
            if d < T::zero() {
                negatives += 1;
            }
            active.retain(|&i| i != p0);
            if d != T::zero() {
                for &i in &active {
                    let f = w[i * n + p0] / d;
                    for &j in &active {
                        let t = f * w[p0 * n + j];
                        w[i * n + j] -= t;
                    }
                }
            }
        } else {
            let (p, q) = pq;
            let (app, apq, aqq) = (w[p * n + p], w[p * n + q], w[q * n + q]);
            // |apq| dominates both diagonals, so det < 0: one pivot of each sign.
            let det = app * aqq - apq * apq;
            negatives += 1;
            active.retain(|&i| i != p && i != q);
            for &i in &active {
                let (ip, iq) = (w[i * n + p], w[i * n + q]);
                // [ip iq] * inv([[app apq][apq aqq]])
                let fp = (ip * aqq - iq * apq) / det;
                let fq = (iq * app - ip * apq) / det;
                for &j in &active {
                    let t = fp * w[p * n + j] + fq * w[q * n + j];
                    w[i * n + j] -= t;
                }
            }
        }
    }
    negatives
}

/// All eigenvalues of a small dense symmetric matrix, sorted, by bisection on
/// [`count_below`] down to an interval of width `tol` (absolute).
pub fn bisection_eigenvalues<T: Real>(a: &[T], n: usize, tol: T) -> Vec<T> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return vec![];
    }
    // Gershgorin enclosure.
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let radius: T = (0..n)
            .filter(|&j| j != i)
            .map(|j| a[i * n + j].abs())
            .sum();
        lo = lo.min(a[i * n + i] - radius);
        hi = hi.max(a[i * n + i] + radius);
    }
    lo -= T::one();
    hi += T::one();
    (0..n)
        .map(|k| {
            // k-th smallest: largest x with count_below(x) <= k.
            let (mut a_lo, mut a_hi) = (lo, hi);
            while a_hi - a_lo > tol {
                let mid = (a_lo + a_hi) * T::lit(0.5);
                if mid <= a_lo || mid >= a_hi {
                    break;
                }
                if count_below(a, n, mid) <= k {
                    a_lo = mid;
                } else {
                    a_hi = mid;
                }
            }
            (a_lo + a_hi) * T::lit(0.5)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_diagonal_matrix() {
        let a = [1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 5.0];
        assert_eq!(count_below(&a, 3, -3.0), 0);
        assert_eq!(count_below(&a, 3, 0.0), 1);
        assert_eq!(count_below(&a, 3, 1.5), 2);
        assert_eq!(count_below(&a, 3, 9.0), 3);
    }

    #[test]
    fn two_by_two_swap() {
        let ev: Vec<f64> = bisection_eigenvalues(&[0.0, 1.0, 1.0, 0.0], 2, 1e-14);
        assert!((ev[0] + 1.0).abs() < 1e-13 && (ev[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn repeated_eigenvalue() {
        let a: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 3.0];
        let ev = bisection_eigenvalues(&a, 3, 1e-14);
        assert!((ev[0] - 1.0).abs() < 1e-13);
        assert!((ev[1] - 1.0).abs() < 1e-13);
        assert!((ev[2] - 3.0).abs() < 1e-13);
    }
}
