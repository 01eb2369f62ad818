//! Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method
//! with Wilkinson-type shifts (eigenvalues only, no vector accumulation).

use super::tridiag::Tridiagonal;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-eigenvalue sweep cap. Typical convergence needs 1-3 sweeps.
pub const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Returns all eigenvalues in nondecreasing order.
pub fn tridiagonal_eigenvalues<T: Real>(t: &Tridiagonal<T>) -> Result<Vec<T>> {
    let n = t.len();
    let mut d = t.diag.clone();
    // e[i] couples i and i+1; the trailing slot is a zero sentinel.
    let mut e = t.off.clone();
    e.push(T::zero());
    let eps = T::epsilon();
    let two = T::lit(2.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if sweeps == MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::NoConvergence {
                    what: "implicit QL",
                    iterations: sweeps,
                    residual: e[l].abs().to_f64_lossy(),
                });
            }
            sweeps += 1;

            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs().copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence {
            what: "implicit QL",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let t = Tridiagonal {
            diag: vec![0.0, 0.0],
            off: vec![1.0],
        };
        let ev: Vec<f64> = tridiagonal_eigenvalues(&t).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_chain_matches_cosines() {
        // Path graph adjacency: eigenvalues 2 cos(k pi / (n + 1)).
        let n = 50;
        let t = Tridiagonal {
            diag: vec![0.0; n],
            off: vec![1.0; n - 1],
        };
        let ev = tridiagonal_eigenvalues(&t).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn decoupled_blocks_and_f32() {
        let t = Tridiagonal {
            diag: vec![3.0f32, -1.0, 2.0],
            off: vec![0.0, 0.0],
        };
        assert_eq!(tridiagonal_eigenvalues(&t).unwrap(), vec![-1.0, 2.0, 3.0]);
    }
}
