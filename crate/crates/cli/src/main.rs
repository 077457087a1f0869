//! `pcqa`: batch front end for point cloud quality assessment.

mod commands;
mod config;
mod objective;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(pcqa::Error),
}

impl From<pcqa::Error> for CliError {
    fn from(e: pcqa::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(pcqa::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pcqa", version, about = "Point cloud quality assessment toolkit")]
pub struct Cli {
    /// key = value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quantize to integer voxels, merge duplicates and optionally fit into a box.
    Preprocess(PreprocessArgs),
    /// Point-to-point, point-to-plane and colour PSNR metrics for one pair.
    PointMetrics(PointMetricsArgs),
    /// Projection-based image metrics pooled over six views for one pair.
    ProjectionMetrics(ProjectionMetricsArgs),
    /// Render the six views of a cloud as PPM images and PGM masks.
    Project(ProjectArgs),
    /// Turn a ratings CSV into per-sample DMOS.
    Dmos(DmosArgs),
    /// Two-way ANOVA of DMOS over geometry and texture QP levels.
    Anova(AnovaArgs),
    /// Spatial information and colourfulness of a cloud.
    Content(ContentArgs),
    /// Correlate objective scores with DMOS and write report tables.
    Benchmark(BenchmarkArgs),
    /// Run point and projection metrics over a manifest of pairs.
    Batch(BatchArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct SampleArgs {
    /// Sequence name written to the output rows.
    #[arg(long)]
    pub sequence: Option<String>,
    #[arg(long)]
    pub gqp: Option<i32>,
    #[arg(long)]
    pub tqp: Option<i32>,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Fit into a box with this extent, e.g. 600,1000,400.
    #[arg(long)]
    pub target_box: Option<String>,
    /// Write ASCII instead of binary little-endian.
    #[arg(long)]
    pub ascii: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PointOptions {
    /// Neighbours used to estimate normals when a cloud has none.
    #[arg(long)]
    pub normals_k: Option<usize>,
    /// forward, backward or symmetric.
    #[arg(long)]
    pub direction: Option<String>,
    /// Geometry PSNR peak; defaults to 2^bit_depth - 1.
    #[arg(long)]
    pub peak: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PointMetricsArgs {
    pub reference: PathBuf,
    pub distorted: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub opts: PointOptions,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProjectionOptionsArgs {
    /// Image metrics, comma separated: psnr, uqi, ssim, ms_ssim, gmsd.
    #[arg(long)]
    pub metric: Vec<String>,
    /// mean or weighted.
    #[arg(long)]
    pub pooling: Option<String>,
    /// Top/bottom view weight for weighted pooling.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub splat_radius: Option<usize>,
    /// Pixels per voxel unit.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Pool image metrics only over occupied pixels.
    #[arg(long)]
    pub masked: bool,
}

#[derive(Args, Debug)]
pub struct ProjectionMetricsArgs {
    pub reference: PathBuf,
    pub distorted: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub opts: ProjectionOptionsArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub dump_dir: PathBuf,
    #[arg(long)]
    pub splat_radius: Option<usize>,
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DmosArgs {
    pub ratings: PathBuf,
    /// Grubbs significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub range_thresh: Option<f64>,
    #[arg(long)]
    pub std_thresh: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnovaArgs {
    pub dmos: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ContentArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub sequence: Option<String>,
    #[arg(long)]
    pub splat_radius: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    pub objective: PathBuf,
    pub dmos: PathBuf,
    /// all, human or object (comma separated for several).
    #[arg(long)]
    pub session: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Report file stem.
    #[arg(long, default_value = "report")]
    pub stem: String,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    /// CSV with columns ref,dist,sequence,gqp,tqp; paths relative to the manifest.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub point: PointOptions,
    #[command(flatten)]
    pub projection: ProjectionOptionsArgs,
    /// Skip point-based metrics.
    #[arg(long)]
    pub no_point: bool,
    /// Skip projection-based metrics.
    #[arg(long)]
    pub no_projection: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcqa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
