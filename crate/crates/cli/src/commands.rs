use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use lrp_core::cumulant_expansion::{expansion_estimate, ExpansionLaw, TestFunction};
use lrp_core::ensemble::{sample_replica, wigner_reference, EnsembleParams, DEFAULT_MEMORY_CAP};
use lrp_core::entries::EntryDistribution;
use lrp_core::experiments::{run_convergence_scan, run_variance_scan, z_label, ScanConfig};
use lrp_core::kernels::Kernel;
use lrp_core::resolvent::{
    derivative_identity_check, interior_deviation, lambda_eta, parse_z, resolvent_diagonal, row_energy,
    semicircle_stieltjes, solve_finite_system, FixedPointOptions, ResolventFactor,
};
use lrp_core::spectra::{eigenvalues, esd_moment, histogram, ks_distance, write_histogram_csv, MAX_MOMENT};
use lrp_core::{Complex64, Error, Matrix64};
use serde::Serialize;

use crate::{Common, CumulantArgs, EsdArgs, FixedPointArgs, Format, ResolventArgs, ScanArgs, SpectrumArgs};

type Res = Result<(), Box<dyn std::error::Error>>;

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Res {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn dist(c: &Common) -> lrp_core::Result<EntryDistribution> {
    let d: EntryDistribution = c.dist.as_deref().unwrap_or("gauss:1").parse()?;
    match c.v2 {
        Some(v2) => EntryDistribution::new(d.family(), v2),
        None => Ok(d),
    }
}

fn kernel(c: &Common) -> lrp_core::Result<Kernel> {
    c.kernel.as_deref().unwrap_or("exp:1").parse()
}

fn z_values(c: &Common, v2: f64) -> lrp_core::Result<Vec<Complex64>> {
    if c.z.is_empty() {
        return Ok(vec![Complex64::new(0.0, lambda_eta(v2))]);
    }
    c.z.iter().map(|s| parse_z(s)).collect()
}

fn require<T>(v: Option<T>, flag: &'static str) -> lrp_core::Result<T> {
    v.ok_or_else(|| Error::InvalidParameter {
        name: flag,
        reason: "required for this subcommand".to_string(),
    })
}

fn matrix(a: &SpectrumArgs) -> lrp_core::Result<Matrix64> {
    let c = &a.common;
    let n = require(c.n, "--n")?;
    let m = if let Some(path) = &a.matrix {
        Matrix64::read_triples(BufReader::new(File::open(path)?), n)?
    } else if a.wigner {
        wigner_reference(n, &dist(c)?, c.seed.unwrap_or(0), a.replica, DEFAULT_MEMORY_CAP)?
    } else {
        let p = EnsembleParams::new(n, require(c.b, "--b")?, kernel(c)?, dist(c)?, c.seed.unwrap_or(0))?;
        sample_replica(&p, a.replica)?
    };
    if let Some(path) = &a.dump_matrix {
        let mut w = BufWriter::new(File::create(path)?);
        m.write_triples(&mut w)?;
        w.flush()?;
    }
    Ok(m)
}

pub fn sample_spectrum(a: SpectrumArgs) -> Res {
    let s = eigenvalues(&matrix(&a)?)?;
    let mut out = output(a.common.out.as_deref())?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(out, "index,eigenvalue")?;
            for (i, l) in s.values().iter().enumerate() {
                writeln!(out, "{i},{l}")?;
            }
        }
        Format::Json => write_json(&mut out, &s)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MomentRow {
    k: u32,
    esd: f64,
    semicircle: f64,
}

fn catalan(m: u32) -> f64 {
    (0..m).fold(1.0, |c, i| c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64)
}

pub fn esd_report(a: EsdArgs) -> Res {
    let c = &a.spectrum.common;
    let v2 = dist(c)?.variance();
    let s = eigenvalues(&matrix(&a.spectrum)?)?;
    let range = a.range.unwrap_or(2.5 * v2.sqrt());
    let bins = histogram(&s, v2, a.bins, -range, range)?;
    let mut out = output(c.out.as_deref())?;
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => write_histogram_csv(&bins, &mut out)?,
        Format::Json => {
            let moments = (1..=MAX_MOMENT)
                .map(|k| {
                    let sc = if k % 2 == 0 { catalan(k / 2) * v2.powi(k as i32 / 2) } else { 0.0 };
                    Ok(MomentRow {
                        k,
                        esd: esd_moment(&s, k)?,
                        semicircle: sc,
                    })
                })
                .collect::<lrp_core::Result<Vec<_>>>()?;
            write_json(
                &mut out,
                &serde_json::json!({
                    "dim": s.len(),
                    "v2": v2,
                    "source": s.source(),
                    "ks": ks_distance(&s, v2),
                    "moments": moments,
                    "histogram": bins,
                }),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn scan_config(a: &ScanArgs) -> Result<ScanConfig, Box<dyn std::error::Error>> {
    let c = &a.common;
    let mut cfg = match &a.config {
        Some(path) => serde_json::from_str::<ScanConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let ladder = if a.b_ladder.is_empty() {
                vec![require(c.b, "--b-ladder")?]
            } else {
                a.b_ladder.clone()
            };
            ScanConfig::new(kernel(c)?, dist(c)?, ladder)
        }
    };
    if a.config.is_some() {
        if c.kernel.is_some() {
            cfg.kernel = kernel(c)?;
        }
        if let Some(d) = &c.dist {
            cfg.dist = d.parse()?;
        }
        if !a.b_ladder.is_empty() {
            cfg.b_ladder = a.b_ladder.clone();
        } else if let Some(b) = c.b {
            cfg.b_ladder = vec![b];
        }
    }
    if let Some(v2) = c.v2 {
        cfg.dist = EntryDistribution::new(cfg.dist.family(), v2)?;
    }
    if !c.z.is_empty() {
        cfg.z = c.z.iter().map(|s| parse_z(s)).collect::<lrp_core::Result<_>>()?;
    }
    if c.n.is_some() {
        cfg.n = c.n;
    }
    if let Some(r) = c.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(x) = c.aspect {
        cfg.aspect = x;
    }
    if c.out.is_some() {
        cfg.output = c.out.clone();
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.allow_outside_lambda |= c.allow_outside_lambda;
    cfg.wigner |= a.wigner;
    cfg.identical_replicas |= a.identical_replicas;
    Ok(cfg)
}

pub fn scan(a: ScanArgs, convergence: bool) -> Res {
    let cfg = scan_config(&a)?;
    let report = if convergence {
        run_convergence_scan(&cfg)?
    } else {
        run_variance_scan(&cfg)?
    };
    for f in &report.failures {
        eprintln!("cell b = {}, n = {} failed: {}", f.b, f.n, f.error);
    }
    let mut out = output(cfg.output.as_deref())?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => report.write_csv(&mut out)?,
        Format::Json => write_json(&mut out, &report)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FixedPointSummary {
    n: u64,
    b: f64,
    v2: f64,
    kernel: String,
    z: String,
    inside_lambda: bool,
    residual: f64,
    iterations: usize,
    sup_abs_r: f64,
    ball_bound: f64,
    w_sc: [f64; 2],
    interior_l: f64,
    /// Absent when the interior `|i| <= n - bL` is empty.
    interior_deviation: Option<f64>,
}

pub fn fixedpoint(a: FixedPointArgs) -> Res {
    let c = &a.common;
    let v2 = dist(c)?.variance();
    let (n, b) = (require(c.n, "--n")?, require(c.b, "--b")?);
    let k = kernel(c)?;
    let z = z_values(c, v2)?[0];
    let opts = FixedPointOptions {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        allow_outside_lambda: c.allow_outside_lambda,
        initial: None,
    };
    let sol = solve_finite_system(n, b, v2, &k, z, &opts)?;
    let w = semicircle_stieltjes(z, v2)?;
    let summary = FixedPointSummary {
        n,
        b,
        v2,
        kernel: k.to_string(),
        z: z_label(z),
        inside_lambda: sol.inside_lambda,
        residual: sol.residual,
        iterations: sol.iterations,
        sup_abs_r: sol.r.iter().map(|r| r.norm()).fold(0.0, f64::max),
        ball_bound: 2.0 / z.im.abs(),
        w_sc: [w.re, w.im],
        interior_l: a.interior,
        interior_deviation: interior_deviation(&sol.r, w, b, a.interior).ok(),
    };
    let mut out = output(c.out.as_deref())?;
    let first = -(n as i64);
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(out, "i,re_r,im_r")?;
            for (p, r) in sol.r.iter().enumerate() {
                writeln!(out, "{},{},{}", first + p as i64, r.re, r.im)?;
            }
            match &a.summary {
                Some(path) => write_json(&mut BufWriter::new(File::create(path)?), &summary)?,
                None => write_json(&mut io::stderr().lock(), &summary)?,
            }
        }
        Format::Json => {
            let r: Vec<(i64, f64, f64)> = sol
                .r
                .iter()
                .enumerate()
                .map(|(p, r)| (first + p as i64, r.re, r.im))
                .collect();
            write_json(&mut out, &serde_json::json!({ "summary": summary, "r": r }))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn cumulant_check(a: CumulantArgs) -> Res {
    let c = &a.common;
    let d = dist(c)?;
    let law = match a.psi {
        Some(psi) => ExpansionLaw::matrix_entry(d, require(c.b, "--b")?, psi)?,
        None => ExpansionLaw::entry(d),
    };
    let f: TestFunction = a.function.parse()?;
    let report = expansion_estimate(&law, &f, a.q, a.samples, c.seed.unwrap_or(0))?;
    let mut out = output(c.out.as_deref())?;
    match c.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            writeln!(out, "term,order,cumulant,re,im,stderr")?;
            writeln!(out, "lhs,,,{},{},{}", report.lhs.value.re, report.lhs.value.im, report.lhs.stderr)?;
            for t in &report.terms {
                let e = &t.estimate;
                writeln!(out, "term,{},{},{},{},{}", t.order, t.cumulant, e.value.re, e.value.im, e.stderr)?;
            }
            let r = &report.remainder;
            writeln!(out, "remainder,,,{},{},{}", r.value.re, r.value.im, r.stderr)?;
            if let Some(b) = report.bound {
                writeln!(out, "bound,,,{b},0,0")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ResolventRow {
    z: String,
    quantity: &'static str,
    value: f64,
    bound: f64,
}

pub fn resolvent_check(a: ResolventArgs) -> Res {
    let c = &a.spectrum.common;
    let m = matrix(&a.spectrum)?;
    let v2 = dist(c)?.variance();
    let site = parse_z(&a.site).map_err(|_| Error::InvalidParameter {
        name: "--site",
        reason: format!("expected j,k, got {}", a.site),
    })?;
    let site = (site.re as i64, site.im as i64);
    let mut rows = vec![];
    for z in z_values(c, v2)? {
        if !c.allow_outside_lambda && z.im.abs() < lambda_eta(v2) {
            return Err(Error::OutsideLambda {
                re: z.re,
                im: z.im,
                eta: lambda_eta(v2),
            }
            .into());
        }
        let inv = 1.0 / z.im.abs();
        let diag = resolvent_diagonal(&m, z)?;
        let g = diag.iter().sum::<Complex64>() / m.dim() as f64;
        let f = ResolventFactor::new(&m, z)?;
        let energy = m.logical_indices().map(|i| row_energy(&f, i)).fold(0.0, f64::max);
        let check = derivative_identity_check(&m, z, site, a.step)?;
        let label = z_label(z);
        let mut push = |quantity, value, bound| {
            rows.push(ResolventRow {
                z: label.clone(),
                quantity,
                value,
                bound,
            })
        };
        push("abs_g", g.norm(), inv);
        push("max_abs_diag", diag.iter().map(|x| x.norm()).fold(0.0, f64::max), inv);
        push("max_row_energy", energy, inv * inv);
        push("derivative_discrepancy", check.discrepancy, check.magnitude);
    }
    let mut out = output(c.out.as_deref())?;
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(out, "z,quantity,value,bound")?;
            for r in &rows {
                writeln!(out, "{},{},{},{}", r.z, r.quantity, r.value, r.bound)?;
            }
        }
        Format::Json => write_json(&mut out, &rows)?,
    }
    out.flush()?;
    Ok(())
}
