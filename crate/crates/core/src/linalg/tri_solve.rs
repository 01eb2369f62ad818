//! Partial-pivoting LU of a shifted symmetric tridiagonal matrix, used for
//! inverse iteration.

use super::Tridiagonal;
use crate::scalar::Real;

pub struct TriLu<T> {
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    dl: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: Real> TriLu<T> {
    /// Factors `T - shift I`. Exactly zero pivots are replaced by a tiny value
    /// so the factor stays usable for inverse iteration.
    pub fn factor(t: &Tridiagonal<T>, shift: T) -> Self {
        let n = t.len();
        let mut d: Vec<T> = t.diag.iter().map(|&x| x - shift).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = t
            .diag
            .iter()
            .chain(&t.off)
            .fold(T::zero(), |m, x| m.max(x.abs()))
            .max(T::min_positive_value());
        let tiny = T::epsilon() * scale;
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == T::zero() {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == T::zero() {
            d[n - 1] = tiny;
        }
        TriLu {
            d,
            du,
            du2,
            dl,
            swapped,
        }
    }

    pub fn solve(&self, b: &mut [T]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            let bi = b[i];
            b[i + 1] -= self.dl[i] * bi;
        }
        for i in (0..n).rev() {
            let mut x = b[i];
            if i + 1 < n {
                x -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                x -= self.du2[i] * b[i + 2];
            }
            b[i] = x / self.d[i];
        }
    }
}
