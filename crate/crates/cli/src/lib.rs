//! Command-line pipeline around `ldi-core`: build LDIs from sequences,
//! diminish foreground objects, render perturbed views, evaluate, and serve
//! renders over HTTP.
//!
//! Exit status is 0 on success, 1 when processing fails and 2 for
//! configuration problems (bad flags, missing inputs).

pub mod commands;
pub mod service;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use ldi_core::builder::{RangeKind, DEFAULT_EPS_OCC, DEFAULT_WINDOW};
use ldi_core::inpaint::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use ldi_core::mask::{DEFAULT_DEPTH_MAX, DEFAULT_DILATE_SIZE, DEFAULT_THRESHOLD};
use ldi_core::render::DEFAULT_CLOSE_KERNEL;
use ldi_core::sequence::PoseConvention;
use ldi_core::Error;

pub const EXIT_PROCESSING: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_PROCESSING
    }
}

#[derive(Debug, Parser)]
#[command(name = "ldi", version, about = "Two-layer LDI toolkit")]
pub struct Cli {
    /// Relative input and output paths resolve against this directory.
    #[arg(long, global = true, env = "LDI_DATA_ROOT")]
    pub data_root: Option<PathBuf>,

    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if path.is_relative() => root.join(path),
            _ => path.to_path_buf(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a ground-truth LDI from a posed RGB-D + instance sequence.
    Build(BuildArgs),
    /// Remove masked objects and inpaint the background behind them.
    #[command(alias = "inpaint")]
    Diminish(DiminishArgs),
    /// Render perturbed views of an LDI.
    Render(RenderArgs),
    /// Compare a predicted LDI with a ground-truth one.
    Eval(EvalArgs),
    /// Serve renders of an LDI over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic planar test sequence.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RangeArg {
    Depth,
    RayLength,
}

impl From<RangeArg> for RangeKind {
    fn from(r: RangeArg) -> Self {
        match r {
            RangeArg::Depth => RangeKind::Depth,
            RangeArg::RayLength => RangeKind::RayLength,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PoseArg {
    C2w,
    W2c,
}

impl From<PoseArg> for PoseConvention {
    fn from(p: PoseArg) -> Self {
        match p {
            PoseArg::C2w => PoseConvention::CameraToWorld,
            PoseArg::W2c => PoseConvention::WorldToCamera,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Sequence directory holding sequence.txt and color/, range/, instance/.
    #[arg(long)]
    pub sequence: PathBuf,
    /// Output container.
    #[arg(long)]
    pub out: PathBuf,
    /// Foreground mask PNG; defaults to `<out>_fgmask.png`.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    /// Build statistics JSON; defaults to `<out>_stats.json`.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// First frame of the window.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Reference frame within the window; defaults to the middle one.
    #[arg(long)]
    pub ref_index: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPS_OCC)]
    pub eps_occ: f64,
    /// Overrides `range_kind` in sequence.txt.
    #[arg(long, value_enum)]
    pub range_kind: Option<RangeArg>,
    /// Overrides `pose_convention` in sequence.txt.
    #[arg(long, value_enum)]
    pub pose_convention: Option<PoseArg>,
}

#[derive(Debug, Args)]
pub struct DiminishArgs {
    /// Take color, depth and (unless --scores or --mask is given) the mask
    /// from this LDI's foreground.
    #[arg(long, conflicts_with_all = ["color", "depth"])]
    pub ldi: Option<PathBuf>,
    /// RGB image to diminish.
    #[arg(long, requires = "depth")]
    pub color: Option<PathBuf>,
    /// 16-bit millimeter depth image.
    #[arg(long, requires = "color")]
    pub depth: Option<PathBuf>,
    /// Camera metadata for --out-ldi when not using --ldi.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Foreground score map (8- or 16-bit gray).
    #[arg(long, conflicts_with = "mask")]
    pub scores: Option<PathBuf>,
    /// Scores are background probabilities; use 1 - score.
    #[arg(long, requires = "scores")]
    pub invert_scores: bool,
    /// Binary foreground mask, nonzero = foreground.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, alias = "dilate-size", default_value_t = DEFAULT_DILATE_SIZE)]
    pub dilate: usize,
    /// Depth mapped to the top of the normalized range, meters.
    #[arg(long, default_value_t = DEFAULT_DEPTH_MAX)]
    pub depth_max: f64,
    #[arg(long, default_value = "diffusion")]
    pub backend: String,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Completed background color PNG.
    #[arg(long)]
    pub out_color: Option<PathBuf>,
    /// Completed background depth PNG (16-bit mm).
    #[arg(long)]
    pub out_depth: Option<PathBuf>,
    /// The dilated hole mask that was filled.
    #[arg(long)]
    pub out_hole: Option<PathBuf>,
    /// LDI with the input as foreground and the completion as background.
    #[arg(long)]
    pub out_ldi: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub ldi: PathBuf,
    /// Translation along x in meters. Without any of --dx/--dy/--dz the
    /// four-direction sweep is rendered instead.
    #[arg(long, allow_hyphen_values = true)]
    pub dx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dz: Option<f64>,
    /// Output image for a single view.
    #[arg(long, default_value = "view.png")]
    pub out: PathBuf,
    /// Output directory for the sweep.
    #[arg(long, default_value = "renders")]
    pub out_dir: PathBuf,
    /// Sweep magnitudes in meters.
    #[arg(long, value_delimiter = ',', default_values_t = ldi_core::render::DEFAULT_SWEEP_MAGNITUDES)]
    pub magnitudes: Vec<f64>,
    /// Also write the foreground-only baseline next to each LDI render.
    #[arg(long)]
    pub single_layer: bool,
    /// Also write each render's void mask.
    #[arg(long)]
    pub emit_void: bool,
    #[arg(long, default_value_t = DEFAULT_CLOSE_KERNEL)]
    pub close_kernel: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, alias = "report", default_value = "report.json")]
    pub out: PathBuf,
    /// Define the inpainted area by the ground-truth mask.
    #[arg(long)]
    pub use_gt_mask: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub ldi: PathBuf,
    #[arg(long, env = "LDI_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
    #[arg(long, default_value_t = DEFAULT_CLOSE_KERNEL)]
    pub close_kernel: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Fixture name; `list` prints the available ones.
    #[arg(long, default_value = "two_boxes_stacked")]
    pub fixture: String,
}

pub fn run(cli: &Cli) -> ldi_core::Result<()> {
    match &cli.command {
        Command::Build(a) => commands::build(cli, a),
        Command::Diminish(a) => commands::diminish(cli, a),
        Command::Render(a) => commands::render(cli, a),
        Command::Eval(a) => commands::eval(cli, a),
        Command::Serve(a) => commands::serve(cli, a),
        Command::Synth(a) => commands::synth(cli, a),
    }
}
