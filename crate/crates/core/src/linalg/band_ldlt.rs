//! `A = L D L^T` for complex *symmetric* (not Hermitian) banded matrices.
//!
//! Used for `H - zI` with real symmetric `H` and `Im z != 0`. The imaginary
//! part of such a matrix is a nonzero multiple of the identity, so every
//! leading principal submatrix is nonsingular and no pivoting is needed.
//! The band is kept exactly: LDL^T of a band matrix produces no fill outside
//! the band, so the sampled matrix's actual bandwidth bounds the cost at
//! `O(n w^2)`.

use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use num_traits::Zero;

/// Lower band in column storage: column `j` holds rows `j..=j + w`.
#[derive(Clone, Debug)]
pub struct BandLdlt<T> {
    n: usize,
    w: usize,
    /// After factorization: slot 0 of each column is `D[j]`, slots `1..=w`
    /// are the multipliers `L[j + k][j]`.
    band: Vec<C<T>>,
}

impl<T: Real> BandLdlt<T> {
    /// Factors `H - zI` where `h` is a dense symmetric row-major `n x n`
    /// matrix with half-bandwidth `w` (entries beyond lag `w` are ignored).
    pub fn factor_shifted(h: &[T], n: usize, w: usize, z: C<T>) -> Result<Self> {
        assert_eq!(h.len(), n * n);
        let w = w.min(n.saturating_sub(1));
        let stride = w + 1;
        let mut band = vec![C::zero(); n * stride];
        for j in 0..n {
            let kmax = w.min(n - 1 - j);
            for k in 0..=kmax {
                band[j * stride + k] = C::new(h[(j + k) * n + j], T::zero());
            }
            band[j * stride] -= z;
        }
        let mut f = BandLdlt { n, w, band };
        f.factor_in_place()?;
        Ok(f)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let (n, w) = (self.n, self.w);
        let stride = w + 1;
        let mut l = vec![C::<T>::zero(); stride];
        for j in 0..n {
            let d = self.band[j * stride];
            if d.is_zero() || !d.re.is_finite() || !d.im.is_finite() {
                return Err(Error::Singular {
                    what: "complex symmetric LDL^T",
                    row: j,
                });
            }
            let kmax = w.min(n - 1 - j);
            let inv_d = d.inv();
            for k in 1..=kmax {
                l[k] = self.band[j * stride + k] * inv_d;
            }
            for r in 1..=kmax {
                let t = l[r] * d;
                let col = (j + r) * stride;
                for s in r..=kmax {
                    let upd = l[s] * t;
                    self.band[col + s - r] -= upd;
                }
            }
            self.band[j * stride + 1..j * stride + 1 + kmax].copy_from_slice(&l[1..=kmax]);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [C<T>]) {
        let (n, w) = (self.n, self.w);
        let stride = w + 1;
        assert_eq!(x.len(), n);
        for j in 0..n {
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            let kmax = w.min(n - 1 - j);
            for k in 1..=kmax {
                x[j + k] -= self.band[j * stride + k] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.band[j * stride];
        }
        for j in (0..n).rev() {
            let kmax = w.min(n - 1 - j);
            let mut acc = x[j];
            for k in 1..=kmax {
                acc -= self.band[j * stride + k] * x[j + k];
            }
            x[j] = acc;
        }
    }

    /// Column `i` of `A^{-1}`.
    pub fn inverse_column(&self, i: usize) -> Vec<C<T>> {
        let mut x = vec![C::zero(); self.n];
        x[i] = C::new(T::one(), T::zero());
        self.solve_in_place(&mut x);
        x
    }

    /// Diagonal of `A^{-1}` by selected inversion restricted to the band,
    /// `O(n w^2)`.
    pub fn inverse_diagonal(&self) -> Vec<C<T>> {
        let (n, w) = (self.n, self.w);
        let stride = w + 1;
        // g[j * stride + k] = G(j + k, j)
        let mut g = vec![C::<T>::zero(); n * stride];
        let at = |g: &[C<T>], r: usize, c: usize| -> C<T> {
            let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
            g[lo * stride + (hi - lo)]
        };
        let mut col = vec![C::<T>::zero(); stride];
        for i in (0..n).rev() {
            let kmax = w.min(n - 1 - i);
            let lcol = &self.band[i * stride..i * stride + kmax + 1];
            for s in 1..=kmax {
                let mut acc = C::zero();
                for k in 1..=kmax {
                    acc -= lcol[k] * at(&g, i + s, i + k);
                }
                col[s] = acc;
            }
            let mut diag = lcol[0].inv();
            for k in 1..=kmax {
                diag -= lcol[k] * col[k];
            }
            col[0] = diag;
            g[i * stride..i * stride + kmax + 1].copy_from_slice(&col[..=kmax]);
        }
        (0..n).map(|i| g[i * stride]).collect()
    }
}

/// Largest `|i - j|` with a nonzero entry of the dense symmetric `h`.
pub fn half_bandwidth<T: Real>(h: &[T], n: usize) -> usize {
    let mut w = 0;
    for i in 0..n {
        // Scan row i left to right over the lower triangle; the first nonzero
        // gives the widest lag in this row.
        if let Some(j) = (0..i.saturating_sub(w)).find(|&j| h[i * n + j] != T::zero()) {
            w = i - j;
        }
    }
    w
}
