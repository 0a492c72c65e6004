//! Command-line front end. [`run`] parses an argument vector, executes one
//! subcommand and returns the process exit code: 0 on success, 1 on a domain
//! error (bad file, shape mismatch), 2 on a usage error.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use vessel_metrics::io::{LabelScheme, ReadOptions};
use vessel_metrics::Error;

#[derive(Debug, Parser)]
#[command(
    name = "vessel-metrics",
    version,
    about = "Evaluate volumetric vessel segmentations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Binary evaluation of one case or of a directory of cases.
    Evaluate(EvaluateArgs),
    /// Per-class (hepatic / portal) evaluation.
    EvaluateMulticlass(EvaluateArgs),
    /// Area and Length at each dilation radius.
    Sweep(SweepArgs),
    /// Rank teams from per-team aggregates.
    Rank(RankArgs),
    /// Liver gating, largest-component filtering and resampling, applied in flag order.
    Postprocess(PostprocessArgs),
    /// Generate a synthetic tube or tree phantom.
    Phantom(PhantomArgs),
    /// Convert between .nii, .nii.gz and the raw container.
    Convert(ConvertArgs),
    /// Print dims, spacing, label counts and header fields.
    Info(InfoArgs),
}

/// Parses exactly `N` comma-separated values.
fn fixed<T: std::str::FromStr, const N: usize>(s: &str) -> Result<[T; N], String>
where
    T::Err: std::fmt::Display,
{
    let values = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<T>, _>>()?;
    let n = values.len();
    values
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated values, got {n}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    /// Voxel units, spacing ignored.
    Voxel,
    /// Millimetres from the voxel spacing.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CldiceArg {
    /// Skeleton of one mask against the full other mask.
    SkeletonMask,
    /// Skeleton against skeleton.
    SkeletonSkeleton,
}

#[derive(Debug, Args)]
pub struct ReadArgs {
    /// Map stored values outside the label set to hepatic (1) instead of failing.
    #[arg(long)]
    pub permissive: bool,
    /// Stored values of the hepatic and portal labels.
    #[arg(long, value_name = "HEPATIC,PORTAL", default_value = "1,2", value_parser = fixed::<i64, 2>)]
    pub label_values: [i64; 2],
}

impl ReadArgs {
    pub fn options(&self) -> ReadOptions {
        ReadOptions {
            labels: LabelScheme {
                hepatic: self.label_values[0],
                portal: self.label_values[1],
            },
            permissive: self.permissive,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (standard output when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// NSD surface tolerance in mm.
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    /// Area dilation radius.
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
    /// Length dilation radius.
    #[arg(long, default_value_t = 5.0)]
    pub beta: f64,
    /// Comma-separated, strictly increasing dilation radii.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,10")]
    pub deltas: Vec<f64>,
    /// Units of the Area / Length dilation radii.
    #[arg(long, value_enum, default_value_t = DistanceArg::Voxel)]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value_t = CldiceArg::SkeletonMask)]
    pub cldice_mode: CldiceArg,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("inputs").required(true).args(["pred", "pred_dir"])))]
pub struct EvaluateArgs {
    /// Predicted volume.
    #[arg(long, requires = "reference", conflicts_with_all = ["pred_dir", "ref_dir"])]
    pub pred: Option<PathBuf>,
    /// Reference volume.
    #[arg(long = "ref", id = "reference", requires = "pred")]
    pub reference: Option<PathBuf>,
    /// Directory of predictions, matched to --ref-dir by case id (file name without extension).
    #[arg(long, requires = "ref_dir")]
    pub pred_dir: Option<PathBuf>,
    /// Directory of references; every volume here is one case.
    #[arg(long, requires = "pred_dir")]
    pub ref_dir: Option<PathBuf>,
    /// Case id for single-pair evaluation (default: reference file stem).
    #[arg(long)]
    pub case_id: Option<String>,
    /// Concurrent case evaluations.
    #[arg(long, env = "VESSEL_METRICS_JOBS")]
    pub jobs: Option<usize>,
    /// Also write per-metric mean/std over the cases to this JSON file.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
    /// Summary standard deviation divides by n - 1 instead of n.
    #[arg(long)]
    pub sample_std: bool,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub read: ReadArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Comma-separated, strictly increasing dilation radii.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,10")]
    pub deltas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = DistanceArg::Voxel)]
    pub distance: DistanceArg,
    /// Sweep a single class (1 hepatic, 2 portal) instead of all vessels.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub class: Option<u8>,
    #[command(flatten)]
    pub read: ReadArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("teams_in").required(true).args(["scores", "team"])))]
pub struct RankArgs {
    /// 1: binary vessels; 2: hepatic / portal.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub task: u8,
    /// JSON object mapping team id to aggregates (task 2: {"hepatic": .., "portal": ..}).
    #[arg(long, value_name = "PATH")]
    pub scores: Option<PathBuf>,
    /// A team's evaluation summary file, as NAME=PATH; repeatable.
    #[arg(long, value_name = "NAME=PATH")]
    pub team: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output volume; the format follows the extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Zero vessel voxels outside this mask.
    #[arg(long, value_name = "PATH", action = clap::ArgAction::Append)]
    pub liver_mask: Vec<PathBuf>,
    /// Keep only the largest connected component of each class.
    #[arg(long, action = clap::ArgAction::Count)]
    pub largest_component: u8,
    /// Connectivity for --largest-component.
    #[arg(long, default_value = "26", value_parser = ["6", "26"])]
    pub connectivity: String,
    /// Nearest-neighbour resampling to DX,DY,DZ mm.
    #[arg(long, value_name = "DX,DY,DZ", action = clap::ArgAction::Append, value_parser = fixed::<f64, 3>)]
    pub resample: Vec<[f64; 3]>,
    #[command(flatten)]
    pub read: ReadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhantomKind {
    Tube,
    Tree,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum, default_value_t = PhantomKind::Tree)]
    pub kind: PhantomKind,
    /// Output mask; a `<stem>.centerline.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_name = "NX,NY,NZ", default_value = "64,64,64", value_parser = fixed::<usize, 3>)]
    pub dims: [usize; 3],
    #[arg(long, value_name = "DX,DY,DZ", default_value = "1,1,1", value_parser = fixed::<f64, 3>)]
    pub spacing: [f64; 3],
    /// Tube radius or tree root radius, voxels.
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    /// Tube distance from the z faces, voxels.
    #[arg(long, default_value_t = 4)]
    pub margin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Tree generations.
    #[arg(long, default_value_t = 3)]
    pub depth: u32,
    /// Tree radius multiplier per generation.
    #[arg(long, default_value_t = 0.7)]
    pub decay: f64,
    /// Tree branch deflection range, radians.
    #[arg(long, value_name = "MIN,MAX", default_value = "0.35,0.8", value_parser = fixed::<f64, 2>)]
    pub branch_angle: [f64; 2],
    /// Tree segment length range, voxels.
    #[arg(long, value_name = "MIN,MAX", default_value = "12,20", value_parser = fixed::<f64, 2>)]
    pub segment_length: [f64; 2],
    /// Degradation applied after generation, e.g. break:z:32:4, thicken:2, thin:1, shift:1:0:-1; repeatable.
    #[arg(long, value_name = "OP")]
    pub degrade: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub read: ReadArgs,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub read: ReadArgs,
}

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Evaluate(a) => commands::evaluate(a, false),
        Command::EvaluateMulticlass(a) => commands::evaluate(a, true),
        Command::Sweep(a) => commands::sweep(a),
        Command::Rank(a) => commands::rank(a),
        Command::Postprocess(a) => {
            let sub = matches
                .subcommand_matches("postprocess")
                .expect("dispatched on postprocess");
            commands::postprocess(a, sub)
        }
        Command::Phantom(a) => commands::phantom(a),
        Command::Convert(a) => commands::convert(a),
        Command::Info(a) => commands::info(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vessel-metrics: error: {e}");
            match e {
                CliError::Usage(_) => 2,
                CliError::Domain(_) => 1,
            }
        }
    }
}
