//! Small estimators used by the scans.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::scalar::C;

/// Least-squares fit of `log2 value = slope * log2 b + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope from the Student t distribution with
    /// `points - 2` degrees of freedom.
    pub interval: (f64, f64),
    pub points: usize,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::invalid("points", format!("need at least 3, got {}", points.len())));
    }
    if let Some(&(b, v)) = points.iter().find(|(b, v)| !(*b > 0.0 && *v > 0.0) || !b.is_finite() || !v.is_finite()) {
        return Err(Error::invalid("points", format!("need positive finite (b, value), got ({b}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all b values coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::invalid("points", e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        interval: (slope - t * se, slope + t * se),
        points: points.len(),
    })
}

/// `(1/(M-1)) sum |g - mean|^2` with its jackknife standard error.
pub fn variance_with_jackknife(g: &[C<f64>]) -> Result<(f64, f64)> {
    let m = g.len();
    if m < 2 {
        return Err(Error::invalid("replicas", "need at least 2 for a variance"));
    }
    let mf = m as f64;
    // Shifted by g[0] so identical samples give exactly zero.
    let mean = g[0] + g.iter().map(|x| x - g[0]).sum::<C<f64>>() / mf;
    let dev: Vec<f64> = g.iter().map(|x| (x - mean).norm_sqr()).collect();
    let total: f64 = dev.iter().sum();
    let var = total / (mf - 1.0);
    if m == 2 {
        // Leave-one-out variances are undefined; use the normal-theory scale.
        return Ok((var, var * (2.0f64 / (mf - 1.0)).sqrt()));
    }
    // Leave-one-out: sum_{j != i} |g_j - mean_(i)|^2 = total - |d_i|^2 M/(M-1).
    let loo: Vec<f64> = dev
        .iter()
        .map(|d| (total - d * mf / (mf - 1.0)) / (mf - 2.0))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / mf;
    let ss: f64 = loo.iter().map(|v| (v - loo_mean).powi(2)).sum();
    Ok((var, ((mf - 1.0) / mf * ss).sqrt()))
}

/// Sample median and its large-sample standard error `1.2533 s / sqrt(M)`.
pub fn median_with_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("values", "empty"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len();
    let median = if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    };
    if m < 2 {
        return Ok((median, f64::NAN));
    }
    let mean = v.iter().sum::<f64>() / m as f64;
    let s = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)).sqrt();
    Ok((median, 1.2533 * s / (m as f64).sqrt()))
}
