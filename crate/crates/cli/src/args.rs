use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use sparsect::phantom::PhantomKind;
use sparsect::sparsity::DEFAULT_PROBE_ITERS;
use sparsect::{Method, SparsityGrid};

use crate::experiment::ExperimentName;

#[derive(Debug, Parser)]
#[command(name = "sparsect", version, about = "Sparse-view CT reconstruction toolkit")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a test phantom.
    Phantom(PhantomArgs),
    /// Forward-project an image into a sinogram.
    Project(ProjectArgs),
    /// Reconstruct an image from a sinogram.
    Reconstruct(ReconstructArgs),
    /// Print `d,r,psnr` of a test image against a reference.
    Metrics(MetricsArgs),
    /// Estimate the gradient sparsity from projection data.
    EstimateSparsity(EstimateArgs),
    /// Export an image as a 16-bit PGM with a display window.
    ExportPgm(ExportArgs),
    /// Reproduce a full four-method comparison.
    Experiment(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom(_) => "phantom",
            Command::Project(_) => "project",
            Command::Reconstruct(_) => "reconstruct",
            Command::Metrics(_) => "metrics",
            Command::EstimateSparsity(_) => "estimate-sparsity",
            Command::ExportPgm(_) => "export-pgm",
            Command::Experiment(_) => "experiment",
        }
    }
}

/// Image size written `N` (square) or `IxJ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad size {s:?} (expected N or IxJ)"));
        let (rows, cols) = match s.split_once(['x', 'X']) {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let n = num(s)?;
                (n, n)
            }
        };
        if rows == 0 || cols == 0 {
            return Err(format!("size {s:?} has a zero dimension"));
        }
        Ok(Size { rows, cols })
    }
}

/// `pow2` or a comma-separated list of sparsity levels.
pub fn parse_grid(s: &str) -> Result<SparsityGrid, String> {
    if s == "pow2" {
        return Ok(SparsityGrid::PowersOfTwo);
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad grid entry {t:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(SparsityGrid::Explicit)
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// shepp-logan or forbild
    #[arg(long)]
    pub name: PhantomKind,
    #[arg(long)]
    pub size: Size,
    #[arg(long)]
    pub out: PathBuf,
}

/// Scan description shared by the commands that build a projector.
#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub views: usize,
    /// Detector bins (default: ceil(sqrt(2) * max(I, J))).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Projection angles in radians, comma- or newline-separated.
    #[arg(long, value_name = "CSV")]
    pub angles_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub sino: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Image size; taken from --ref or inferred from the bin count if omitted.
    #[arg(long)]
    pub size: Option<Size>,
    #[arg(long)]
    pub method: Method,
    #[arg(long, default_value_t = 800)]
    pub iters: usize,
    /// Gradient sparsity S (iht-pocs, ist-tv).
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// Constant ART relaxation.
    #[arg(long, conflicts_with = "lambda_decay")]
    pub lambda: Option<f64>,
    /// Relaxation `rate^k`, starting from 1.
    #[arg(long, value_name = "RATE")]
    pub lambda_decay: Option<f64>,
    /// Stop once the image changes by less than this between iterations.
    #[arg(long, default_value_t = 0.0)]
    pub eps0: f64,
    /// Reference image for per-iteration metrics.
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write `<out>_iterK.rcf` every K iterations.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<usize>,
    /// Print one line per iteration to stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub sino: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[arg(long)]
    pub size: Option<Size>,
    #[arg(long, default_value_t = DEFAULT_PROBE_ITERS)]
    pub probe_iters: usize,
    #[arg(long, default_value = "pow2", value_parser = parse_grid)]
    pub grid: SparsityGrid,
    #[arg(long, default_value_t = 3.0)]
    pub knee_factor: f64,
    /// Relative bracket width at which bisection stops.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[arg(long)]
    pub out_curve: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// shepp-logan-21 or forbild-41
    pub name: ExperimentName,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the iteration count (snapshots past it are skipped).
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub progress: bool,
}
