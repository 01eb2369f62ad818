use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "lrp", version, about = "Band and long-range percolation random matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Unset flags fall back to the config file
/// (scans only) and then to the built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Half-size: indices run over -n..=n.
    #[arg(long)]
    pub n: Option<u64>,
    /// Bandwidth.
    #[arg(long)]
    pub b: Option<f64>,
    /// Entry variance; overrides the variance in --dist.
    #[arg(long)]
    pub v2: Option<f64>,
    /// band | exp:<s> | gauss
    #[arg(long)]
    pub kernel: Option<String>,
    /// gauss:<v2> | rademacher:<v2> | uniform:<v2> | twopoint:<p>:<v2>
    #[arg(long)]
    pub dist: Option<String>,
    /// Spectral parameter "re,im"; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Vec<String>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// n = ceil(aspect * b) in scans.
    #[arg(long)]
    pub aspect: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Accept z with |Im z| < 2v + 1 (reported as carrying no guarantee).
    #[arg(long)]
    pub allow_outside_lambda: bool,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Replica index within the seed.
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Sample the dense Wigner reference instead.
    #[arg(long)]
    pub wigner: bool,
    /// Write the sampled matrix as "i j value" triples.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
    /// Read the matrix from a triples file (needs --n) instead of sampling.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EsdArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    #[arg(long, default_value_t = lrp_core::spectra::DEFAULT_BINS)]
    pub bins: usize,
    /// Histogram range [-range, range]; default 2.5 v.
    #[arg(long)]
    pub range: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON file with ScanConfig fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated bandwidths, e.g. 8,16,32,64.
    #[arg(long, value_delimiter = ',')]
    pub b_ladder: Vec<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub wigner: bool,
    /// Reuse one stream for every replica of a cell.
    #[arg(long)]
    pub identical_replicas: bool,
}

#[derive(Args, Debug)]
pub struct FixedPointArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Interior cut L for the deviation from w_sc.
    #[arg(long, default_value_t = 8.0)]
    pub interior: f64,
    /// Where the JSON summary goes when the format is csv; stderr otherwise.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CumulantArgs {
    #[command(flatten)]
    pub common: Common,
    /// resolvent:<re>,<im> | poly:<c0>,<c1>,... | rational:<s>
    #[arg(long, default_value = "resolvent:0,3")]
    pub function: String,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 200_000)]
    pub samples: u64,
    /// Use the matrix-entry law a * Bernoulli(psi) / sqrt(b) with this psi
    /// (needs --b).
    #[arg(long)]
    pub psi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ResolventArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    /// Site "j,k" (logical indices) for the derivative identity.
    #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
    pub site: String,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one matrix and print its eigenvalues.
    SampleSpectrum(SpectrumArgs),
    /// ESD histogram against the semicircle, with KS distance and moments.
    EsdReport(EsdArgs),
    /// Var g_n(z) along a bandwidth ladder, with slope fits.
    VarianceScan(ScanArgs),
    /// Median KS and |g_n - w_sc| along a bandwidth ladder.
    ConvergenceScan(ScanArgs),
    /// Solve the finite self-consistent system for r(i).
    Fixedpoint(FixedPointArgs),
    /// Cumulant expansion of E[X f(X)] with remainder and bound.
    CumulantCheck(CumulantArgs),
    /// Resolvent bounds and the derivative identity on one sampled matrix.
    ResolventCheck(ResolventArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SampleSpectrum(a) => commands::sample_spectrum(a),
        Command::EsdReport(a) => commands::esd_report(a),
        Command::VarianceScan(a) => commands::scan(a, false),
        Command::ConvergenceScan(a) => commands::scan(a, true),
        Command::Fixedpoint(a) => commands::fixedpoint(a),
        Command::CumulantCheck(a) => commands::cumulant_check(a),
        Command::ResolventCheck(a) => commands::resolvent_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
