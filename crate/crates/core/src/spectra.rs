//! Eigenvalues of sampled matrices and empirical-spectral-distribution
//! statistics against the semicircle law of variance `v^2`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Origin, SampledMatrix};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues_checked;
use crate::rng::{Domain, StreamKey};
use crate::scalar::Real;

/// Eigenpairs spot-checked per decomposition.
pub const SPOT_CHECKS: usize = 5;

/// Largest supported order in [`esd_moment`].
pub const MAX_MOMENT: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    eigenvalues: Vec<T>,
    source: Origin,
}

impl<T: Real> Spectrum<T> {
    /// Sorts `values` (input order is irrelevant). NaNs are rejected.
    pub fn new(mut values: Vec<T>, source: Origin) -> Result<Self> {
        if values.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid("eigenvalues", "NaN in spectrum"));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Spectrum {
            eigenvalues: values,
            source,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn source(&self) -> &Origin {
        &self.source
    }
}

/// Relative tolerance `base` in double precision, loosened in proportion to
/// machine epsilon for narrower types.
fn tolerance<T: Real>(base: f64) -> f64 {
    base.max(base * T::epsilon().to_f64_lossy() / f64::EPSILON * 1e-3)
}

/// All eigenvalues of `m`, sorted, with the trace identities and
/// [`SPOT_CHECKS`] eigenpair residuals verified.
pub fn eigenvalues<T: Real>(m: &SampledMatrix<T>) -> Result<Spectrum<T>> {
    let n = m.dim();
    let picks: Vec<usize> = if n == 0 {
        vec![]
    } else {
        let mut rng = StreamKey::new(n as u64, 0, Domain::Auxiliary).stream(0);
        (0..SPOT_CHECKS.min(n))
            .map(|_| (rand::RngCore::next_u64(&mut rng) % n as u64) as usize)
            .collect()
    };
    let (values, residuals) = symmetric_eigenvalues_checked(m.as_slice(), n, &picks)?;

    let max_abs = m.max_abs().to_f64_lossy();
    let scale = tolerance::<T>(1e-9) * n as f64 * max_abs;
    let sum: f64 = values.iter().map(|x| x.to_f64_lossy()).sum();
    let tr = m.trace().to_f64_lossy();
    if (sum - tr).abs() > scale {
        return Err(Error::CheckFailed {
            what: "|sum(lambda) - tr H|",
            value: (sum - tr).abs(),
            bound: scale,
        });
    }
    let sum2: f64 = values.iter().map(|x| x.to_f64_lossy().powi(2)).sum();
    let fro = m.frobenius_sq().to_f64_lossy();
    if (sum2 - fro).abs() > scale {
        return Err(Error::CheckFailed {
            what: "|sum(lambda^2) - sum H^2|",
            value: (sum2 - fro).abs(),
            bound: scale,
        });
    }
    let norm = values
        .iter()
        .fold(0.0f64, |a, x| a.max(x.to_f64_lossy().abs()));
    let bound = tolerance::<T>(1e-8) * norm.max(f64::MIN_POSITIVE);
    for r in residuals {
        let r = r.to_f64_lossy();
        if !(r <= bound) {
            return Err(Error::CheckFailed {
                what: "eigenpair residual",
                value: r,
                bound,
            });
        }
    }
    Spectrum::new(values, m.origin().clone())
}

/// `#{lambda_j <= lambda} / N`.
pub fn counting_function<T: Real>(s: &Spectrum<T>, lambda: T) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let k = s.values().partition_point(|&x| x <= lambda);
    k as f64 / s.len() as f64
}

/// Semicircle density with variance `v2` (support `[-2v, 2v]`).
pub fn semicircle_density<T: Real>(lambda: T, v2: T) -> T {
    let r = T::lit(4.0) * v2 - lambda * lambda;
    if r <= T::zero() {
        return T::zero();
    }
    r.sqrt() / (T::lit(2.0) * T::PI() * v2)
}

/// Distribution function of [`semicircle_density`].
pub fn semicircle_cdf<T: Real>(lambda: T, v2: T) -> T {
    let v = v2.sqrt();
    let two_v = T::lit(2.0) * v;
    if lambda <= -two_v {
        return T::zero();
    }
    if lambda >= two_v {
        return T::one();
    }
    let root = (T::lit(4.0) * v2 - lambda * lambda).max(T::zero()).sqrt();
    let f = T::lit(0.5)
        + lambda * root / (T::lit(4.0) * T::PI() * v2)
        + (lambda / two_v).asin() / T::PI();
    f.max(T::zero()).min(T::one())
}

/// `(1/N) sum lambda_j^k`, `1 <= k <= 8`.
pub fn esd_moment<T: Real>(s: &Spectrum<T>, k: u32) -> Result<T> {
    if k == 0 || k > MAX_MOMENT {
        return Err(Error::invalid("k", format!("need 1 <= k <= {MAX_MOMENT}, got {k}")));
    }
    if s.is_empty() {
        return Err(Error::invalid("spectrum", "empty"));
    }
    let sum: T = s.values().iter().map(|&x| x.powi(k as i32)).sum();
    Ok(sum / T::from_usize_lossy(s.len()))
}

/// Kolmogorov-Smirnov distance between the ESD and the semicircle law,
/// evaluated at every jump from both sides.
pub fn ks_distance<T: Real>(s: &Spectrum<T>, v2: T) -> f64 {
    let xs = s.values();
    let n = xs.len() as f64;
    let v2 = v2.to_f64_lossy();
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = semicircle_cdf(xs[i].to_f64_lossy(), v2);
        d = d.max((f - i as f64 / n).abs()).max((f - j as f64 / n).abs());
        i = j;
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub esd_mass: f64,
    pub semicircle_mass: f64,
}

pub const DEFAULT_BINS: usize = 101;

/// Histogram over `[lo, hi]` with half-open bins (the last bin is closed).
pub fn histogram<T: Real>(s: &Spectrum<T>, v2: f64, bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid("histogram", format!("need bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in s.values() {
        let x = x.to_f64_lossy();
        if x < lo || x > hi {
            continue;
        }
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = s.len().max(1) as f64;
    Ok((0..bins)
        .map(|k| {
            let l = lo + k as f64 * width;
            let r = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
            HistogramBin {
                bin_left: l,
                bin_right: r,
                esd_mass: counts[k] as f64 / n,
                semicircle_mass: semicircle_cdf(r, v2) - semicircle_cdf(l, v2),
            }
        })
        .collect())
}

/// [`DEFAULT_BINS`] bins over `[-2.5v, 2.5v]`.
pub fn default_histogram<T: Real>(s: &Spectrum<T>, v2: f64) -> Result<Vec<HistogramBin>> {
    let h = 2.5 * v2.sqrt();
    histogram(s, v2, DEFAULT_BINS, -h, h)
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut out: W) -> Result<()> {
    writeln!(out, "bin_left,bin_right,esd_mass,semicircle_mass")?;
    for b in bins {
        writeln!(out, "{},{},{},{}", b.bin_left, b.bin_right, b.esd_mass, b.semicircle_mass)?;
    }
    Ok(())
}
