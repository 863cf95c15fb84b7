//! `gridfuse`: batch pipeline over the gridfuse library.
//!
//! Exit status: 0 on success, 2 on usage errors, 3 on data errors, 4 on
//! internal errors.

mod config;
mod eval_cmds;
mod failure;
mod fusion_cmds;
mod io;
mod manifest;
mod plan_cmd;
mod scene_cmds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::PipelineConfig;
use failure::{Failure, Outcome};

#[derive(Debug, Parser)]
#[command(name = "gridfuse", version, about = "LiDAR and aerial image label transfer, fusion and evaluation")]
struct Cli {
    /// Worker threads [default: available cores]. Results do not depend on it.
    #[arg(long, global = true, env = "GRIDFUSE_THREADS")]
    threads: Option<usize>,

    /// Pipeline configuration file (JSON) supplying defaults for shared parameters.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project a point cloud into every camera and list in-frame pixels.
    Project(ProjectArgs),
    /// Render buffered minimum-depth maps, one per camera.
    Depthmap(DepthmapArgs),
    /// Transfer per-pixel class scores from the images onto the points.
    Transfer(TransferArgs),
    /// Train the late-fusion network on paired image and point scores.
    FuseTrain(FuseTrainArgs),
    /// Apply a trained fusion network.
    FusePredict(FusePredictArgs),
    /// Score predictions against ground truth (per-class IoU and mIoU).
    Eval(EvalArgs),
    /// Per-class point counts and percentages for each split subset.
    Stats(StatsArgs),
    /// Package per-zone predictions into a submission archive.
    Submit(SubmitArgs),
    /// Nearest-neighbour distances from one cloud to another.
    C2c(C2cArgs),
    /// Two-pass corridor flight plan over a pylon sequence.
    Plan(PlanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Uniform,
    InverseDistance,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingArg {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeightingArg {
    None,
    InverseFrequency,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    /// Camera list (JSON).
    #[arg(long)]
    pub cameras: PathBuf,
    /// Point cloud (.ply, or (N, 3) float .npy).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Output CSV with columns point,camera,u,v,depth.
    #[arg(long)]
    pub out: PathBuf,
    /// Also list projections that fall outside the frame.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthmapArgs {
    /// Camera list (JSON).
    #[arg(long)]
    pub cameras: PathBuf,
    /// Point cloud (.ply, or (N, 3) float .npy).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Splat half-width in pixels [default: 2].
    #[arg(long)]
    pub buffer: Option<u32>,
    /// Output directory; receives `<camera id>.npy` (H, W) float32 maps.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TransferArgs {
    /// Camera list (JSON).
    #[arg(long)]
    pub cameras: PathBuf,
    /// Point cloud (.ply, or (N, 3) float .npy).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Directory of `<camera id>.npy` (H, W, K) float32 score images.
    #[arg(long)]
    pub logits: PathBuf,
    /// Depth tolerance in metres [default: 0.15].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Splat half-width in pixels [default: 2].
    #[arg(long)]
    pub buffer: Option<u32>,
    /// View weighting [default: uniform].
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Per-view weights for `--weighting custom`: JSON object of camera id to weight.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Pixel sampling [default: nearest].
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    /// Also write the aggregated scores as `scores.npy` (N, K) float64.
    #[arg(long)]
    pub scores: bool,
    /// Output directory; receives `labels.npy` (N,) uint8 and `view_counts.npy`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FuseTrainArgs {
    /// Image-branch scores, (N, K) float.
    #[arg(long)]
    pub image_logits: PathBuf,
    /// Point-branch scores, (N, K) float.
    #[arg(long)]
    pub point_logits: PathBuf,
    /// Training labels, (N,) integer; 255 is skipped.
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of classes [default: score width].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    pub hidden: Vec<usize>,
    /// SGD learning rate.
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    /// Passes over the training data.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// SGD momentum coefficient.
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Seed for initialization and shuffling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Loss weighting across classes.
    #[arg(long, value_enum, default_value_t = ClassWeightingArg::None)]
    pub class_weighting: ClassWeightingArg,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FusePredictArgs {
    /// Checkpoint written by fuse-train.
    #[arg(long)]
    pub model: PathBuf,
    /// Image-branch scores, (N, K) float.
    #[arg(long)]
    pub image_logits: PathBuf,
    /// Point-branch scores, (N, K) float.
    #[arg(long)]
    pub point_logits: PathBuf,
    /// Output labels, (N,) uint8.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write class probabilities, (N, K) float64.
    #[arg(long)]
    pub probabilities: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Predictions: a submission .zip, a directory of `<zone>.npy`, or one .npy.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth: a directory of `<zone>.npy`, or one .npy.
    #[arg(long)]
    pub gt: PathBuf,
    /// Number of classes [default: 11].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Remap ground-truth ids with this table before scoring.
    #[arg(long)]
    pub gt_mapping: Option<PathBuf>,
    /// Apply the bundled 22-to-11 class grouping to the ground truth.
    #[arg(long, conflicts_with = "gt_mapping")]
    pub grouped_gt: bool,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["labels", "counts"])))]
pub struct StatsArgs {
    /// Zone-to-subset table [default: bundled train/val/test assignment].
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Directory of `<zone>.npy` label arrays.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Precomputed count table (CSV: class column, then one column per subset).
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Number of classes [default: 11].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Count validation zones as training zones.
    #[arg(long)]
    pub merge_val: bool,
    /// Remap label ids with this table before counting.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Also write the count table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SubmitArgs {
    /// Directory of `<zone>.npy` predicted labels.
    #[arg(long)]
    pub pred: PathBuf,
    /// Output archive.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of classes [default: 11].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Zone-to-subset table [default: bundled assignment].
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Subset whose zones must all be present.
    #[arg(long, default_value = "test")]
    pub subset: String,
}

#[derive(Debug, Args, Serialize)]
pub struct C2cArgs {
    /// Query cloud.
    #[arg(long)]
    pub a: PathBuf,
    /// Reference cloud.
    #[arg(long)]
    pub b: PathBuf,
    /// Write per-point distances, (N,) float64.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlanArgs {
    /// Pylon CSV with columns id,x,y,z_top, in flight order.
    #[arg(long)]
    pub pylons: PathBuf,
    /// Height above the conductor line in metres.
    #[arg(long, default_value_t = 25.0)]
    pub height: f64,
    /// Camera depression angle in degrees.
    #[arg(long, default_value_t = 50.0)]
    pub angle: f64,
    /// Lateral offset from the line in metres.
    #[arg(long, default_value_t = 5.0)]
    pub offset: f64,
    /// Speed near pylons and on the U-turn, m/s.
    #[arg(long, default_value_t = 2.0)]
    pub v_min: f64,
    /// Cruise speed between pylons, m/s.
    #[arg(long, default_value_t = 10.0)]
    pub v_max: f64,
    /// Maximum along-track waypoint spacing in metres.
    #[arg(long, default_value_t = 10.0)]
    pub spacing: f64,
    /// Maximum speed change per metre flown.
    #[arg(long, default_value_t = 0.5)]
    pub max_gradient: f64,
    /// Output CSV with columns x,y,z,speed,heading,pass.
    #[arg(long)]
    pub out: PathBuf,
}

/// Shared parameters after applying flags over the configuration file.
#[derive(Debug, Clone)]
pub struct Shared {
    pub config: PipelineConfig,
}

impl Shared {
    pub fn tau(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.tau).unwrap_or(gridfuse::depth::DEFAULT_TAU_Z)
    }

    pub fn buffer(&self, flag: Option<u32>) -> u32 {
        flag.or(self.config.buffer).unwrap_or(gridfuse::depth::DEFAULT_BUFFER_RADIUS)
    }

    pub fn classes(&self, flag: Option<usize>) -> usize {
        flag.or(self.config.classes).unwrap_or(gridfuse::NUM_CLASSES)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.config.seed).unwrap_or(0)
    }

    pub fn mapping(&self, flag: Option<&PathBuf>) -> Option<PathBuf> {
        flag.cloned().or_else(|| self.config.mapping.clone())
    }

    fn parse_enum<T: ValueEnum>(key: &str, value: &Option<String>) -> Outcome<Option<T>> {
        value
            .as_deref()
            .map(|v| T::from_str(v, true).map_err(|_| Failure::usage(format!("configuration key '{key}': unknown value '{v}'"))))
            .transpose()
    }

    pub fn weighting(&self, flag: Option<WeightingArg>) -> Outcome<WeightingArg> {
        Ok(flag
            .or(Self::parse_enum("weighting", &self.config.weighting)?)
            .unwrap_or(WeightingArg::Uniform))
    }

    pub fn sampling(&self, flag: Option<SamplingArg>) -> Outcome<SamplingArg> {
        Ok(flag
            .or(Self::parse_enum("sampling", &self.config.sampling)?)
            .unwrap_or(SamplingArg::Nearest))
    }
}

fn run(cli: Cli) -> Outcome {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let threads = cli.threads.or(config.threads);
    if threads == Some(0) {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Internal(e.to_string()))?;
    let shared = Shared { config };
    pool.install(|| match &cli.command {
        Command::Project(a) => scene_cmds::project(a, &shared),
        Command::Depthmap(a) => scene_cmds::depthmap(a, &shared),
        Command::Transfer(a) => scene_cmds::transfer(a, &shared),
        Command::FuseTrain(a) => fusion_cmds::train(a, &shared),
        Command::FusePredict(a) => fusion_cmds::predict(a, &shared),
        Command::Eval(a) => eval_cmds::eval(a, &shared),
        Command::Stats(a) => eval_cmds::stats(a, &shared),
        Command::Submit(a) => eval_cmds::submit(a, &shared),
        Command::C2c(a) => eval_cmds::c2c(a, &shared),
        Command::Plan(a) => plan_cmd::plan(a, &shared),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("gridfuse: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("gridfuse: internal error: unexpected panic");
            ExitCode::from(4)
        }
    }
}
