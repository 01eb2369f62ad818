//! Scan reports: one row per (cell, statistic), slope fits, CSV/JSON output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ScanConfig;
use super::stats::{fit_slope, SlopeFit};
use crate::entries::TheoremClass;
use crate::error::Result;

pub const CSV_HEADER: &str = "b,n,M,statistic,estimate,stderr";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub b: f64,
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub statistic: String,
    pub fit: Option<SlopeFit>,
    /// Why `fit` is absent.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub b: f64,
    pub n: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub kind: String,
    pub config: ScanConfig,
    pub theorem_class: TheoremClass,
    pub rows: Vec<ScanRow>,
    pub slopes: Vec<SlopeEntry>,
    pub failures: Vec<CellFailure>,
    pub notes: Vec<String>,
}

impl ScanReport {
    pub fn slope(&self, statistic: &str) -> Option<&SlopeFit> {
        self.slopes
            .iter()
            .find(|s| s.statistic == statistic)
            .and_then(|s| s.fit.as_ref())
    }

    /// Rows for one statistic in ladder order.
    pub fn series(&self, statistic: &str) -> Vec<&ScanRow> {
        self.rows.iter().filter(|r| r.statistic == statistic).collect()
    }

    /// Rows only, columns exactly as in [`ScanRow`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{:e},{:e}", r.b, r.n, r.m, r.statistic, r.estimate, r.stderr)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Fits every statistic present in `rows` (in first-appearance order).
pub(crate) fn fit_all(rows: &[ScanRow]) -> Vec<SlopeEntry> {
    let mut names: Vec<&str> = vec![];
    for r in rows {
        if !names.contains(&r.statistic.as_str()) {
            names.push(&r.statistic);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.statistic == name)
                .map(|r| (r.b, r.estimate))
                .collect();
            let (fit, note) = if pts.len() < 3 {
                (None, Some(format!("{} ladder points; a slope needs at least 3", pts.len())))
            } else if pts.iter().any(|p| !(p.1 > 0.0)) {
                (None, Some("nonpositive estimate in the ladder; slope undefined".to_string()))
            } else {
                match fit_slope(&pts) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            SlopeEntry {
                statistic: name.to_string(),
                fit,
                note,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(b: f64, stat: &str, est: f64) -> ScanRow {
        ScanRow {
            b,
            n: (16.0 * b) as u64,
            m: 10,
            statistic: stat.into(),
            estimate: est,
            stderr: 0.1,
        }
    }

    #[test]
    fn fits_per_statistic() {
        let rows: Vec<ScanRow> = [8.0, 16.0, 32.0]
            .iter()
            .flat_map(|&b| vec![row(b, "a", 1.0 / b), row(b, "z", 0.0)])
            .collect();
        let s = fit_all(&rows);
        assert_eq!(s.len(), 2);
        assert!((s[0].fit.as_ref().unwrap().slope + 1.0).abs() < 1e-12);
        assert!(s[1].fit.is_none() && s[1].note.is_some());
        let s = fit_all(&rows[..4]);
        assert!(s[0].fit.is_none());
    }
}
