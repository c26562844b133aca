use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod colormap;
mod commands;

#[derive(Parser)]
#[command(name = "fdist", version, about = "Fisheye distance-estimation geometry and loss toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the six-channel camera geometry tensor.
    Cgt(CgtArgs),
    /// Reconstruct a target frame from a source frame, distance map and pose.
    Warp(WarpArgs),
    /// Evaluate the training objective and print a loss report.
    Loss(LossArgs),
    /// Fuse per-camera distance maps into a top-view height grid.
    Heightmap(HeightmapArgs),
    /// Run the built-in oracle suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
pub struct CgtArgs {
    #[arg(long)]
    pub calib: PathBuf,
    /// Camera to process; all cameras when omitted (then --out is a directory).
    #[arg(long)]
    pub camera: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-channel colormap PNGs.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub calib: PathBuf,
    /// Target camera.
    #[arg(long)]
    pub camera: String,
    /// Source camera; defaults to the target camera.
    #[arg(long)]
    pub source_camera: Option<String>,
    /// Target distance map (16-bit PNG or raw tensor).
    #[arg(long)]
    pub dist: PathBuf,
    /// Pose document; the first pose (or --pose-name) maps target into source.
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long)]
    pub pose_name: Option<String>,
    /// Source image.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Ego-mask PNG; defaults to `<out>.mask.png`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Args)]
pub struct LossArgs {
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub camera: String,
    #[arg(long)]
    pub target: PathBuf,
    /// Source frames, matched in order with the poses of --pose.
    #[arg(long = "source", required = true)]
    pub sources: Vec<PathBuf>,
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long)]
    pub pose: PathBuf,
    /// Target label map (PNG with class-table sidecar).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Source label maps, one per source.
    #[arg(long = "source-labels")]
    pub source_labels: Vec<PathBuf>,
    /// Source distance maps for the consistency term, one per source.
    #[arg(long = "source-dist")]
    pub source_dists: Vec<PathBuf>,
    /// Segmentation posteriors (tensor file, one channel per class).
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct HeightmapArgs {
    #[arg(long)]
    pub calib: PathBuf,
    /// `camera=path` pairs; extrinsics come from the calibration.
    #[arg(long = "dist", value_name = "CAMERA=PATH")]
    pub dists: Vec<String>,
    #[arg(long, default_value_t = fdist_core::heightmap::DEFAULT_CELL_SIZE)]
    pub cell: f64,
    #[arg(long, default_value_t = fdist_core::heightmap::DEFAULT_RANGE)]
    pub range: f64,
    /// Apply the 3x3 median filter.
    #[arg(long)]
    pub smooth: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Args)]
pub struct SelfcheckArgs {
    /// Perturb the fixture of the named check.
    #[arg(long)]
    pub perturb: Option<String>,
    /// Only run checks whose name contains this text.
    #[arg(long)]
    pub filter: Option<String>,
    /// List check names and exit.
    #[arg(long)]
    pub list: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cgt(a) => commands::cgt(&a),
        Command::Warp(a) => commands::warp(&a),
        Command::Loss(a) => commands::loss(&a),
        Command::Heightmap(a) => commands::heightmap(&a),
        Command::Selfcheck(a) => commands::selfcheck(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
