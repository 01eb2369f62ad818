//! Sampling of the percolation matrix `H(i, j) = b^{-1/2} a(i, j) d(i, j)` and
//! of the dense Wigner reference `A(i, j) = N^{-1/2} a(i, j)`.
//!
//! Logical indices run over `-n..=n` (`N = 2n + 1`) and are stored at
//! `i + n`. Each entry `(i, j)`, `i <= j`, is drawn from its own addressable
//! stream slot (see [`crate::rng`]): the mask word decides `d(i, j)` with
//! probability `psi((i - j)/b)` (the diagonal uses `psi(0)`), the two value
//! words give `a(i, j)`. The two draws never share words.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::entries::EntryDistribution;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng::{unit_open_closed_low, Domain, StreamKey};
use crate::scalar::Real;

/// Default storage cap for one dense matrix: 1.5 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 3 << 29;

fn default_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    /// Half-range: indices run over `-n..=n`.
    pub n: u64,
    pub b: f64,
    pub kernel: Kernel,
    pub dist: EntryDistribution,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub memory_cap: u64,
}

impl EnsembleParams {
    pub fn new(n: u64, b: f64, kernel: Kernel, dist: EntryDistribution, seed: u64) -> Result<Self> {
        let p = EnsembleParams {
            n,
            b,
            kernel,
            dist,
            seed,
            memory_cap: DEFAULT_MEMORY_CAP,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        2 * self.n as usize + 1
    }

    pub fn v2(&self) -> f64 {
        self.dist.variance()
    }

    pub fn validate(&self) -> Result<()> {
        let big_n = self.dim() as f64;
        if !(self.b > 0.0) || self.b > big_n || !self.b.is_finite() {
            return Err(Error::invalid(
                "b",
                format!("need 0 < b <= N = {big_n}, got {}", self.b),
            ));
        }
        Ok(())
    }
}

/// Where a matrix came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Percolation { params: EnsembleParams, replica: u64 },
    Wigner { n: u64, dist: EntryDistribution, seed: u64, replica: u64 },
    External,
}

/// Dense symmetric matrix with logical indices `first..first + dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMatrix<T> {
    dim: usize,
    first: i64,
    values: Vec<T>,
    origin: Origin,
}

fn check_cap<T>(dim: usize, cap: u64) -> Result<()> {
    let bytes = (dim as u128) * (dim as u128) * std::mem::size_of::<T>() as u128;
    if bytes > cap as u128 {
        return Err(Error::MemoryCap {
            dim,
            bytes,
            cap: cap as u128,
        });
    }
    Ok(())
}

impl<T: Real> SampledMatrix<T> {
    /// Wraps a dense row-major matrix; requires exact symmetry. Logical
    /// indices start at 0.
    pub fn from_dense(dim: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::invalid(
                "values",
                format!("expected {} entries, got {}", dim * dim, values.len()),
            ));
        }
        for i in 0..dim {
            for j in 0..i {
                if values[i * dim + j] != values[j * dim + i] {
                    return Err(Error::invalid(
                        "values",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(SampledMatrix {
            dim,
            first: 0,
            values,
            origin: Origin::External,
        })
    }

    pub fn diagonal(d: &[T]) -> Self {
        let dim = d.len();
        let mut values = vec![T::zero(); dim * dim];
        for (i, &x) in d.iter().enumerate() {
            values[i * dim + i] = x;
        }
        SampledMatrix {
            dim,
            first: 0,
            values,
            origin: Origin::External,
        }
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Logical index of the first row.
    pub fn first_index(&self) -> i64 {
        self.first
    }

    pub fn logical_indices(&self) -> std::ops::Range<i64> {
        self.first..self.first + self.dim as i64
    }

    /// Row-major dense values.
    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Entry at logical indices.
    pub fn get(&self, i: i64, j: i64) -> T {
        let (r, c) = ((i - self.first) as usize, (j - self.first) as usize);
        self.values[r * self.dim + c]
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.values[i * self.dim + i]).sum()
    }

    /// `sum_{i,j} H(i,j)^2`.
    pub fn frobenius_sq(&self) -> T {
        self.values.iter().map(|&x| x * x).sum()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Largest `|i - j|` carrying a nonzero entry.
    pub fn half_bandwidth(&self) -> usize {
        crate::linalg::half_bandwidth(&self.values, self.dim)
    }

    /// Symmetric perturbation `H + h (E_jk + E_kj)` (or `H + h E_jj`), physical indices.
    pub fn perturbed(&self, j: usize, k: usize, h: T) -> Self {
        let mut m = self.clone();
        m.origin = Origin::External;
        m.values[j * self.dim + k] += h;
        if j != k {
            m.values[k * self.dim + j] += h;
        }
        m
    }

    /// Writes `i j value` lines (logical indices, `i <= j`, nonzero entries
    /// only) with 17 significant digits.
    pub fn write_triples<W: Write>(&self, mut out: W) -> Result<()> {
        for r in 0..self.dim {
            for c in r..self.dim {
                let v = self.values[r * self.dim + c];
                if v != T::zero() {
                    writeln!(
                        out,
                        "{} {} {:.16e}",
                        r as i64 + self.first,
                        c as i64 + self.first,
                        v.to_f64_lossy()
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Reads triples written by [`SampledMatrix::write_triples`] into a matrix
    /// with logical range `-n..=n`.
    pub fn read_triples<R: BufRead>(input: R, n: u64) -> Result<Self> {
        let dim = 2 * n as usize + 1;
        let first = -(n as i64);
        let mut values = vec![T::zero(); dim * dim];
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::parse("matrix triple", line, format!("line {}: {why}", lineno + 1));
            let mut it = line.split_whitespace();
            let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(bad("expected `i j value`"));
            };
            let i: i64 = i.parse().map_err(|_| bad("bad row index"))?;
            let j: i64 = j.parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = v.parse().map_err(|_| bad("bad value"))?;
            if i.unsigned_abs() > n || j.unsigned_abs() > n {
                return Err(bad("index outside -n..=n"));
            }
            let (r, c) = ((i - first) as usize, (j - first) as usize);
            values[r * dim + c] = T::lit(v);
            values[c * dim + r] = T::lit(v);
        }
        Ok(SampledMatrix {
            dim,
            first,
            values,
            origin: Origin::External,
        })
    }
}

/// Replica 0 of the percolation ensemble.
pub fn sample_matrix<T: Real>(p: &EnsembleParams) -> Result<SampledMatrix<T>> {
    sample_replica(p, 0)
}

/// Replica `replica` of the percolation ensemble; entries are keyed by
/// `(p.seed, replica, i, j)`.
pub fn sample_replica<T: Real>(p: &EnsembleParams, replica: u64) -> Result<SampledMatrix<T>> {
    p.validate()?;
    let dim = p.dim();
    check_cap::<T>(dim, p.memory_cap)?;
    let n = p.n as i64;
    let key = StreamKey::new(p.seed, replica, Domain::Percolation);
    let scale = 1.0 / p.b.sqrt();
    let profile: Vec<f64> = (0..dim).map(|k| p.kernel.eval(k as f64 / p.b)).collect();
    // psi is nonincreasing in the lag, so the first exact zero ends every row.
    let max_lag = profile.iter().position(|&x| x == 0.0).unwrap_or(dim);
    let mut values = vec![T::zero(); dim * dim];
    for i in -n..=n {
        let mut cursor = key.entry_cursor(i, i);
        let r = (i + n) as usize;
        let last = (i + max_lag as i64 - 1).min(n);
        for j in i..=last {
            let words = cursor.next_entry();
            let psi = profile[(j - i) as usize];
            if unit_open_closed_low(words.mask) < psi {
                let x = T::lit(scale * p.dist.from_words(words.value));
                let c = (j + n) as usize;
                values[r * dim + c] = x;
                values[c * dim + r] = x;
            }
        }
    }
    Ok(SampledMatrix {
        dim,
        first: -n,
        values,
        origin: Origin::Percolation {
            params: p.clone(),
            replica,
        },
    })
}

/// Dense Wigner matrix `N^{-1/2} a(i, j)` on `-n..=n`, no mask.
pub fn wigner_reference<T: Real>(
    n: u64,
    dist: &EntryDistribution,
    seed: u64,
    replica: u64,
    memory_cap: u64,
) -> Result<SampledMatrix<T>> {
    let dim = 2 * n as usize + 1;
    check_cap::<T>(dim, memory_cap)?;
    let ni = n as i64;
    let key = StreamKey::new(seed, replica, Domain::Wigner);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut values = vec![T::zero(); dim * dim];
    for i in -ni..=ni {
        let mut cursor = key.entry_cursor(i, i);
        let r = (i + ni) as usize;
        for j in i..=ni {
            let words = cursor.next_entry();
            let x = T::lit(scale * dist.from_words(words.value));
            let c = (j + ni) as usize;
            values[r * dim + c] = x;
            values[c * dim + r] = x;
        }
    }
    Ok(SampledMatrix {
        dim,
        first: -ni,
        values,
        origin: Origin::Wigner {
            n,
            dist: dist.clone(),
            seed,
            replica,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, b: f64, kernel: &str, dist: &str, seed: u64) -> EnsembleParams {
        EnsembleParams::new(n, b, kernel.parse().unwrap(), dist.parse().unwrap(), seed).unwrap()
    }

    #[test]
    fn rejects_bad_b() {
        let k = Kernel::band();
        let d = EntryDistribution::gaussian(1.0).unwrap();
        assert!(EnsembleParams::new(10, 0.0, k, d.clone(), 1).is_err());
        assert!(EnsembleParams::new(10, 22.0, k, d.clone(), 1).is_err());
        assert!(EnsembleParams::new(10, 21.0, k, d, 1).is_ok());
    }

    #[test]
    fn memory_cap_is_enforced() {
        let mut p = params(100, 4.0, "band", "gauss:1", 1);
        p.memory_cap = 1000;
        assert!(matches!(
            sample_matrix::<f64>(&p),
            Err(Error::MemoryCap { dim: 201, .. })
        ));
    }

    #[test]
    fn exact_symmetry_and_band_support() {
        let p = params(150, 16.0, "band", "gauss:1", 3);
        let m: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        for i in m.logical_indices() {
            for j in m.logical_indices() {
                assert_eq!(m.get(i, j), m.get(j, i));
                if (i - j).abs() >= 8 {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        assert_eq!(m.get(-100, 0), 0.0);
        assert!(m.half_bandwidth() <= 7);
    }

    #[test]
    fn nonzeros_are_scaled_draws() {
        // Rademacher entries: every nonzero is exactly +-b^{-1/2}.
        let p = params(40, 9.0, "exp:1", "rademacher:1", 11);
        let m: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        let s = 1.0 / 3.0;
        assert!(m.as_slice().iter().all(|&x| x == 0.0 || (x.abs() - s).abs() < 1e-16));
    }

    #[test]
    fn entries_reproduce_from_their_own_slot() {
        let p = params(30, 5.0, "exp:1", "gauss:2", 77);
        let m: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        let key = StreamKey::new(77, 0, Domain::Percolation);
        for (i, j) in [(-30i64, -30i64), (-3, 4), (0, 25), (29, 30)] {
            let w = key.entry(i, j);
            let psi: f64 = p.kernel.eval((j - i) as f64 / p.b);
            let expect = if unit_open_closed_low(w.mask) < psi {
                p.dist.from_words(w.value) / p.b.sqrt()
            } else {
                0.0
            };
            assert_eq!(m.get(i, j), expect);
        }
    }

    #[test]
    fn replicas_and_seeds_differ_and_repeat() {
        let p = params(20, 4.0, "exp:1", "gauss:1", 1);
        let a: SampledMatrix<f64> = sample_replica(&p, 0).unwrap();
        let b: SampledMatrix<f64> = sample_replica(&p, 0).unwrap();
        let c: SampledMatrix<f64> = sample_replica(&p, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wigner_small_cases() {
        let d = EntryDistribution::gaussian(1.0).unwrap();
        let m: SampledMatrix<f64> = wigner_reference(0, &d, 5, 0, DEFAULT_MEMORY_CAP).unwrap();
        assert_eq!(m.dim(), 1);
        let w = StreamKey::new(5, 0, Domain::Wigner).entry(0, 0);
        assert_eq!(m.get(0, 0), d.from_words(w.value));

        let m: SampledMatrix<f64> = wigner_reference(3, &d, 5, 0, DEFAULT_MEMORY_CAP).unwrap();
        let key = StreamKey::new(5, 0, Domain::Wigner);
        let diag_sum: f64 = (-3..=3).map(|i| d.from_words(key.entry(i, i).value)).sum();
        assert!((m.trace() - diag_sum / 7f64.sqrt()).abs() < 1e-15);
        assert!(m.as_slice().iter().all(|&x| x != 0.0));
    }

    #[test]
    fn triples_round_trip() {
        let p = params(6, 3.0, "exp:1", "gauss:1", 2);
        let m: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        let mut buf = Vec::new();
        m.write_triples(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for line in text.lines() {
            let f: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(f.len(), 3);
            assert!(f[0].parse::<i64>().unwrap() <= f[1].parse::<i64>().unwrap());
        }
        let back: SampledMatrix<f64> = SampledMatrix::read_triples(&buf[..], 6).unwrap();
        assert_eq!(back.as_slice(), m.as_slice());
        assert_eq!(back.first_index(), -6);
        assert!(SampledMatrix::<f64>::read_triples(&b"0 9 1.0\n"[..], 6).is_err());
        assert!(SampledMatrix::<f64>::read_triples(&b"0 1\n"[..], 6).is_err());
    }

    #[test]
    fn single_precision_sampling_matches_double() {
        let p = params(10, 3.0, "exp:1", "gauss:1", 8);
        let a: SampledMatrix<f64> = sample_matrix(&p).unwrap();
        let b: SampledMatrix<f32> = sample_matrix(&p).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_eq!(*x as f32, *y);
        }
    }
}
