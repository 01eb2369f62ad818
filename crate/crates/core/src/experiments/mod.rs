//! Monte Carlo scans over a ladder of bandwidths: variance of `g_n(z)` and
//! convergence of the ESD to the semicircle.
//!
//! Each replica draws its matrix from key `(cell << 32) | replica`, jobs run
//! on rayon, and results are aggregated in canonical (cell, replica) order, so
//! output does not depend on the worker count.

mod config;
mod report;
mod stats;

pub use config::{ScanConfig, DEFAULT_ASPECT};
pub use report::{CellFailure, ScanReport, ScanRow, SlopeEntry, CSV_HEADER};
pub use stats::{fit_slope, median_with_stderr, variance_with_jackknife, SlopeFit};

use rayon::prelude::*;

use crate::ensemble::{sample_replica, wigner_reference, EnsembleParams, SampledMatrix};
use crate::entries::classify_theorem;
use crate::error::{Error, Result};
use crate::resolvent::{empirical_stieltjes, in_lambda_eta, lambda_eta, resolvent_trace, semicircle_stieltjes};
use crate::scalar::C;
use crate::spectra::{eigenvalues, ks_distance, Spectrum};

/// Statistic label for a spectral parameter, free of commas.
pub fn z_label(z: C<f64>) -> String {
    format!("{}{:+}i", z.re, z.im)
}

struct ReplicaOut {
    g: Vec<C<f64>>,
    ks: Option<f64>,
}

fn replica_matrix(c: &ScanConfig, cell: usize, b: f64, n: u64, replica: u64) -> Result<SampledMatrix<f64>> {
    let r = if c.identical_replicas { 0 } else { replica };
    let key = ((cell as u64) << 32) | r;
    if c.wigner {
        wigner_reference(n, &c.dist, c.seed, key, c.memory_cap)
    } else {
        let mut p = EnsembleParams::new(n, b, c.kernel, c.dist.clone(), c.seed)?;
        p.memory_cap = c.memory_cap;
        sample_replica(&p, key)
    }
}

/// Banded trace solves cost about `N w^2` per `z`; one eigensolve about `N^3`.
fn prefer_resolvent(m: &SampledMatrix<f64>, nz: usize) -> bool {
    let n = m.dim() as f64;
    let w = m.half_bandwidth() as f64 + 1.0;
    4.0 * nz as f64 * w * w < n * n
}

fn run_replica(c: &ScanConfig, zs: &[C<f64>], cell: usize, b: f64, n: u64, replica: u64, need_ks: bool) -> Result<ReplicaOut> {
    let m = replica_matrix(c, cell, b, n, replica)?;
    if !need_ks && prefer_resolvent(&m, zs.len()) {
        let g = zs.iter().map(|&z| resolvent_trace(&m, z)).collect::<Result<_>>()?;
        return Ok(ReplicaOut { g, ks: None });
    }
    let s: Spectrum<f64> = eigenvalues(&m)?;
    let g = zs.iter().map(|&z| empirical_stieltjes(&s, z)).collect::<Result<_>>()?;
    let ks = need_ks.then(|| ks_distance(&s, c.v2()));
    Ok(ReplicaOut { g, ks })
}

/// Runs every (cell, replica) job and groups outcomes per cell in order.
fn run_cells(c: &ScanConfig, zs: &[C<f64>], need_ks: bool) -> Result<Vec<Result<Vec<ReplicaOut>>>> {
    let cells = c.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|i| (0..c.replicas).map(move |r| (i, r)))
        .collect();
    let work = || -> Vec<Result<ReplicaOut>> {
        jobs.par_iter()
            .map(|&(i, r)| run_replica(c, zs, i, cells[i].0, cells[i].1, r, need_ks))
            .collect()
    };
    let outs = match c.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut it = outs.into_iter();
    Ok(cells
        .iter()
        .map(|_| it.by_ref().take(c.replicas as usize).collect::<Result<Vec<_>>>())
        .collect())
}

fn base_report(c: &ScanConfig, kind: &str, zs: &[C<f64>]) -> ScanReport {
    let mut notes = vec![];
    if c.wigner {
        notes.push("dense Wigner reference: cells report b = N".to_string());
    } else if let Some(n) = c.n {
        notes.push(format!("n fixed at {n} for every cell"));
    } else {
        notes.push(format!("n = ceil({} * b) per cell", c.aspect));
    }
    let v2 = c.v2();
    for &z in zs {
        if !in_lambda_eta(z, v2) {
            notes.push(format!(
                "z = {} lies outside |Im z| >= {}: no guarantee",
                z_label(z),
                lambda_eta(v2)
            ));
        }
    }
    if c.identical_replicas {
        notes.push("identical replicas: every replica reuses the cell's first stream".to_string());
    }
    ScanReport {
        kind: kind.to_string(),
        config: c.clone(),
        theorem_class: classify_theorem(&c.dist, &c.kernel),
        rows: vec![],
        slopes: vec![],
        failures: vec![],
        notes,
    }
}

/// `Var g_n(z) = E|g - Eg|^2` per cell and `z`, with jackknife stderr and a
/// log-log slope per `z`.
pub fn run_variance_scan(c: &ScanConfig) -> Result<ScanReport> {
    c.validate()?;
    if c.replicas < 2 {
        return Err(Error::invalid("replicas", "a variance needs at least 2"));
    }
    let zs = c.z_values();
    let mut report = base_report(c, "variance", &zs);
    let cells = c.cells();
    for ((b, n), outcome) in cells.iter().zip(run_cells(c, &zs, false)?) {
        let outs = match outcome {
            Ok(o) => o,
            Err(e) => {
                report.failures.push(CellFailure { b: *b, n: *n, error: e.to_string() });
                continue;
            }
        };
        for (k, &z) in zs.iter().enumerate() {
            let g: Vec<C<f64>> = outs.iter().map(|o| o.g[k]).collect();
            let (var, se) = variance_with_jackknife(&g)?;
            report.rows.push(ScanRow {
                b: *b,
                n: *n,
                m: c.replicas,
                statistic: format!("var_g[z={}]", z_label(z)),
                estimate: var,
                stderr: se,
            });
        }
    }
    report.slopes = report::fit_all(&report.rows);
    Ok(report)
}

/// Median KS distance to the semicircle and median `|g_n(z) - w_sc(z)|` per cell.
pub fn run_convergence_scan(c: &ScanConfig) -> Result<ScanReport> {
    c.validate()?;
    let zs = c.z_values();
    let v2 = c.v2();
    let w: Vec<C<f64>> = zs.iter().map(|&z| semicircle_stieltjes(z, v2)).collect::<Result<_>>()?;
    let mut report = base_report(c, "convergence", &zs);
    let cells = c.cells();
    for ((b, n), outcome) in cells.iter().zip(run_cells(c, &zs, true)?) {
        let outs = match outcome {
            Ok(o) => o,
            Err(e) => {
                report.failures.push(CellFailure { b: *b, n: *n, error: e.to_string() });
                continue;
            }
        };
        let mut push = |statistic: String, values: Vec<f64>| -> Result<()> {
            let (est, se) = median_with_stderr(&values)?;
            report.rows.push(ScanRow {
                b: *b,
                n: *n,
                m: c.replicas,
                statistic,
                estimate: est,
                stderr: se,
            });
            Ok(())
        };
        push("median_ks".into(), outs.iter().map(|o| o.ks.unwrap_or(f64::NAN)).collect())?;
        for (k, &z) in zs.iter().enumerate() {
            let dev = outs.iter().map(|o| (o.g[k] - w[k]).norm()).collect();
            push(format!("median_abs_g_minus_wsc[z={}]", z_label(z)), dev)?;
        }
    }
    report.slopes = report::fit_all(&report.rows);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entries::EntryDistribution;
    use crate::kernels::Kernel;

    fn small(dist: EntryDistribution) -> ScanConfig {
        let mut c = ScanConfig::new("band".parse::<Kernel>().unwrap(), dist, vec![2.0, 4.0, 8.0]);
        c.aspect = 4.0;
        c.replicas = 24;
        c.seed = 7;
        c
    }

    #[test]
    fn labels_have_no_commas() {
        assert_eq!(z_label(C::new(0.0, 3.0)), "0+3i");
        assert_eq!(z_label(C::new(1.5, -2.0)), "1.5-2i");
    }

    #[test]
    fn banded_and_spectral_paths_agree() {
        let c = small(EntryDistribution::gaussian(1.0).unwrap());
        let zs = [C::new(0.0, 3.0), C::new(1.0, 3.5)];
        let m = replica_matrix(&c, 2, 8.0, 32, 5).unwrap();
        assert!(prefer_resolvent(&m, zs.len()));
        let banded = run_replica(&c, &zs, 2, 8.0, 32, 5, false).unwrap();
        let spectral = run_replica(&c, &zs, 2, 8.0, 32, 5, true).unwrap();
        assert!(banded.ks.is_none() && spectral.ks.is_some());
        for (a, b) in banded.g.iter().zip(&spectral.g) {
            assert!((a - b).norm() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn identical_replicas_give_zero_variance_and_no_slope() {
        let mut c = small(EntryDistribution::gaussian(1.0).unwrap());
        c.identical_replicas = true;
        let r = run_variance_scan(&c).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.iter().all(|row| row.estimate == 0.0 && row.stderr == 0.0));
        assert!(r.slopes[0].fit.is_none());
        assert!(r.slopes[0].note.as_deref().unwrap().contains("nonpositive"));
    }

    #[test]
    fn variance_scan_rows_and_stderr() {
        let c = small(EntryDistribution::gaussian(1.0).unwrap());
        let r = run_variance_scan(&c).unwrap();
        assert!(r.failures.is_empty());
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert!(row.estimate > 0.0 && row.stderr > 0.0, "{row:?}");
            assert!(row.estimate <= 1.0 / 9.0 * 4.0);
        }
        assert!(r.slope("var_g[z=0+3i]").is_some());
        let csv = r.to_csv_string();
        assert!(csv.starts_with("b,n,M,statistic,estimate,stderr\n2,8,24,var_g[z=0+3i],"));
    }

    #[test]
    fn output_independent_of_threads() {
        let mut c = small(EntryDistribution::rademacher(1.0).unwrap());
        c.replicas = 6;
        c.z = vec![C::new(0.5, 3.0), C::new(0.0, 4.0)];
        c.threads = Some(1);
        let a = run_variance_scan(&c).unwrap().to_csv_string();
        c.threads = Some(3);
        let b = run_variance_scan(&c).unwrap().to_csv_string();
        assert_eq!(a, b);
        let conv_a = run_convergence_scan(&c).unwrap().to_csv_string();
        c.threads = Some(1);
        assert_eq!(conv_a, run_convergence_scan(&c).unwrap().to_csv_string());
    }

    #[test]
    fn convergence_scan_statistics() {
        let mut c = small(EntryDistribution::gaussian(1.0).unwrap());
        c.replicas = 5;
        let r = run_convergence_scan(&c).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.series("median_ks").len(), 3);
        for row in &r.rows {
            assert!(row.estimate >= 0.0 && row.estimate <= 1.0);
        }
    }

    #[test]
    fn wigner_cells_report_full_width() {
        let mut c = small(EntryDistribution::gaussian(1.0).unwrap());
        c.wigner = true;
        c.replicas = 3;
        c.b_ladder = vec![1.0];
        c.n = Some(100);
        let r = run_convergence_scan(&c).unwrap();
        assert_eq!(r.rows[0].b, 201.0);
        assert!(r.rows[0].estimate < 0.1);
    }

    #[test]
    fn validation() {
        let mut c = small(EntryDistribution::gaussian(1.0).unwrap());
        c.z = vec![C::new(0.0, 1.0)];
        assert!(run_variance_scan(&c).is_err());
        c.allow_outside_lambda = true;
        let r = run_variance_scan(&c).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("no guarantee")));
        c.replicas = 1;
        assert!(run_variance_scan(&c).is_err());
        c.replicas = 4;
        c.b_ladder = vec![100.0];
        assert!(run_variance_scan(&c).is_ok());
        c.n = Some(3);
        assert!(run_variance_scan(&c).is_err());
    }

    #[test]
    fn stderr_shrinks_with_more_replicas() {
        let mut c = small(EntryDistribution::gaussian(1.0).unwrap());
        c.b_ladder = vec![4.0];
        c.replicas = 100;
        let a = run_variance_scan(&c).unwrap().rows[0].stderr;
        c.replicas = 400;
        let b = run_variance_scan(&c).unwrap().rows[0].stderr;
        let ratio = b / a;
        assert!((ratio - 0.5).abs() < 0.15, "ratio {ratio}");
    }
}
