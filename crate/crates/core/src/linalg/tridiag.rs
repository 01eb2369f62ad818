//! Householder reduction of a dense symmetric matrix to tridiagonal form.
//!
//! The working buffer is a row-major `n x n` array of which only the lower
//! triangle (`j <= i`) is read or written. Each elimination step applies the
//! rank-2 update of the trailing block and, in the same sweep over its rows,
//! accumulates the symmetric matrix-vector product needed by the next step,
//! so the trailing block is streamed through memory once per column.

use crate::scalar::Real;

/// Diagonal and off-diagonal of a symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal<T> {
    pub diag: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`; length `n - 1` (0 for `n <= 1`).
    pub off: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

struct Reflector<T> {
    v: Vec<T>,
    beta: T,
    alpha: T,
}

/// Householder vector `v` with `(I - beta v v^T) x = alpha e_1`.
fn reflector<T: Real>(x: Vec<T>) -> Reflector<T> {
    let x0 = x[0];
    let tail: T = x[1..].iter().map(|&t| t * t).sum();
    if tail == T::zero() {
        return Reflector {
            v: x,
            beta: T::zero(),
            alpha: x0,
        };
    }
    let norm = (x0 * x0 + tail).sqrt();
    let alpha = if x0 >= T::zero() { -norm } else { norm };
    let mut v = x;
    v[0] = x0 - alpha;
    let vv = v[0] * v[0] + tail;
    Reflector {
        v,
        beta: T::lit(2.0) / vv,
        alpha,
    }
}

/// The orthogonal factor `Q = H_0 H_1 ... H_{n-3}` of a reduction
/// `A = Q T Q^T`, kept as Householder vectors in the strict lower triangle of
/// the consumed work buffer (vector `k` occupies column `k`, rows `k+1..n`).
pub struct HouseholderQ<T> {
    n: usize,
    store: Vec<T>,
    betas: Vec<T>,
}

impl<T: Real> HouseholderQ<T> {
    /// `x <- Q x`.
    pub fn apply(&self, x: &mut [T]) {
        let n = self.n;
        for k in (0..self.betas.len()).rev() {
            let beta = self.betas[k];
            if beta == T::zero() {
                continue;
            }
            let mut dot = T::zero();
            for r in k + 1..n {
                dot += self.store[r * n + k] * x[r];
            }
            let f = beta * dot;
            for r in k + 1..n {
                x[r] -= f * self.store[r * n + k];
            }
        }
    }
}

/// Reduces the symmetric matrix held in the lower triangle of `a` (row-major,
/// `n x n`) to tridiagonal form. `a` is overwritten.
pub fn tridiagonalize<T: Real>(a: &mut [T], n: usize) -> Tridiagonal<T> {
    reduce(a, n).0
}

/// Like [`tridiagonalize`], additionally returning `Q`.
pub fn tridiagonalize_with_q<T: Real>(mut a: Vec<T>, n: usize) -> (Tridiagonal<T>, HouseholderQ<T>) {
    let (t, betas) = reduce(&mut a, n);
    (t, HouseholderQ { n, store: a, betas })
}

fn reduce<T: Real>(a: &mut [T], n: usize) -> (Tridiagonal<T>, Vec<T>) {
    assert_eq!(a.len(), n * n, "buffer is not n x n");
    if n == 0 {
        let t = Tridiagonal {
            diag: vec![],
            off: vec![],
        };
        return (t, vec![]);
    }
    let mut diag = vec![T::zero(); n];
    let mut off = vec![T::zero(); n.saturating_sub(1)];
    if n == 1 {
        diag[0] = a[0];
        return (Tridiagonal { diag, off }, vec![]);
    }
    let mut betas = Vec::with_capacity(n - 1);

    // Reflector and product p = beta * S v for the first column.
    let mut refl = reflector((1..n).map(|i| a[i * n]).collect());
    let mut p = vec![T::zero(); n - 1];
    sym_matvec(a, n, 1, &refl.v, &mut p);
    p.iter_mut().for_each(|x| *x *= refl.beta);

    for k in 0..n - 2 {
        diag[k] = a[k * n + k];
        off[k] = refl.alpha;
        let m = n - k - 1; // trailing block rows k+1..n
        let base = k + 1;
        let v = std::mem::take(&mut refl.v);
        let beta = refl.beta;
        betas.push(beta);
        for (r, &vr) in v.iter().enumerate() {
            a[(base + r) * n + k] = vr;
        }

        // w = p - (beta v.p / 2) v
        let vp: T = v.iter().zip(&p).map(|(&x, &y)| x * y).sum();
        let half_k = beta * vp * T::lit(0.5);
        let w: Vec<T> = p.iter().zip(&v).map(|(&pi, &vi)| pi - half_k * vi).collect();

        // Update column 0 of the trailing block first; it seeds the next reflector.
        for r in 0..m {
            let idx = (base + r) * n + base;
            a[idx] -= v[r] * w[0] + w[r] * v[0];
        }
        let next = reflector((1..m).map(|r| a[(base + r) * n + base]).collect());
        let vn = &next.v;
        let mut pn = vec![T::zero(); m - 1];

        // Fused sweep: rank-2 update of rows 1..m, then accumulate S' vn where
        // S' is the block without its first row/column.
        for r in 1..m {
            let row = &mut a[(base + r) * n + base + 1..(base + r) * n + base + r + 1];
            let (vr, wr) = (v[r], w[r]);
            let vnr = vn[r - 1];
            let (strict, d) = row.split_at_mut(r - 1);
            let dot = fused_row(
                strict,
                &v[1..r],
                &w[1..r],
                &vn[..r - 1],
                &mut pn[..r - 1],
                vr,
                wr,
                vnr,
            );
            d[0] -= vr * wr + wr * vr;
            pn[r - 1] += dot + d[0] * vnr;
        }
        pn.iter_mut().for_each(|x| *x *= next.beta);
        refl = next;
        p = pn;
    }

    diag[n - 2] = a[(n - 2) * n + n - 2];
    off[n - 2] = refl.alpha;
    diag[n - 1] = a[(n - 1) * n + n - 1];
    betas.push(refl.beta);
    a[(n - 1) * n + n - 2] = refl.v[0];
    (Tridiagonal { diag, off }, betas)
}

/// Updates `s[c] -= vr w[c] + wr v[c]`, adds `s[c] * vnr` into `pn[c]`, and
/// returns `sum_c s[c] vn[c]` over the updated values.
#[allow(clippy::too_many_arguments)]
#[inline]
fn fused_row<T: Real>(
    s: &mut [T],
    v: &[T],
    w: &[T],
    vn: &[T],
    pn: &mut [T],
    vr: T,
    wr: T,
    vnr: T,
) -> T {
    const L: usize = 8;
    let len = s.len();
    let split = len - len % L;
    let mut acc = [T::zero(); L];
    let (s_main, s_rest) = s.split_at_mut(split);
    let (pn_main, pn_rest) = pn.split_at_mut(split);
    for ((((sc, vc), wc), vnc), pc) in s_main
        .chunks_exact_mut(L)
        .zip(v.chunks_exact(L))
        .zip(w.chunks_exact(L))
        .zip(vn.chunks_exact(L))
        .zip(pn_main.chunks_exact_mut(L))
    {
        for l in 0..L {
            let x = sc[l] - (vr * wc[l] + wr * vc[l]);
            sc[l] = x;
            acc[l] += x * vnc[l];
            pc[l] += x * vnr;
        }
    }
    let mut dot = acc.iter().copied().sum::<T>();
    for (c, sc) in s_rest.iter_mut().enumerate() {
        let j = split + c;
        let x = *sc - (vr * w[j] + wr * v[j]);
        *sc = x;
        dot += x * vn[j];
        pn_rest[c] += x * vnr;
    }
    dot
}

/// `p += S v` where `S` is the symmetric block of `a` starting at (`off`, `off`).
fn sym_matvec<T: Real>(a: &[T], n: usize, off: usize, v: &[T], p: &mut [T]) {
    let m = n - off;
    for r in 0..m {
        let row = &a[(off + r) * n + off..(off + r) * n + off + r + 1];
        let vr = v[r];
        let mut dot = T::zero();
        for c in 0..r {
            dot += row[c] * v[c];
            p[c] += row[c] * vr;
        }
        p[r] += dot + row[r] * vr;
    }
}
