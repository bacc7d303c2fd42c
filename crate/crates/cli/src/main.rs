//! `splatrig`: preprocess a splat scan into an animatable avatar bundle, pose
//! it, and benchmark the per-frame runtime.

mod commands;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splatrig_core::SortMode;

use crate::error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "splatrig", version, about = "Rig Gaussian-splat scans onto a skinned humanoid and animate them")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SPLATRIG_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print statistics of a splat PLY file.
    Info {
        input: PathBuf,
    },
    /// Filter, fit and bind a scan, writing an avatar bundle and a JSON report.
    Bind(BindArgs),
    /// Evaluate one animation frame and write the splats in draw order.
    Pose(PoseArgs),
    /// Time update and sort over an orbiting camera.
    Bench(BenchArgs),
    /// Write a synthetic scan, template rig and walk clip for demos.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct BindArgs {
    input: PathBuf,
    rig: PathBuf,
    /// Output bundle path.
    #[arg(long)]
    out: PathBuf,
    /// Report path; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Subject height after normalization, meters; defaults to the rig height.
    #[arg(long)]
    target_height: Option<f64>,
    /// Direction the subject faces, degrees about +Y (0 faces +Z).
    #[arg(long, allow_hyphen_values = true)]
    manual_yaw: Option<f64>,
    #[arg(long)]
    skip_limb_fit: bool,
    /// Keep the best placement even when the fit objective is over threshold.
    #[arg(long)]
    accept_poor_fit: bool,
    #[arg(long)]
    cylinder_radius: Option<f32>,
    #[arg(long)]
    opacity_min: Option<f32>,
    /// TOML file with filter parameters; individual flags take precedence.
    #[arg(long)]
    filter_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Group,
    Full,
}

impl From<ModeArg> for SortMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Group => SortMode::Group,
            ModeArg::Full => SortMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchModeArg {
    Group,
    Full,
    All,
}

#[derive(Debug, Args)]
struct CameraArgs {
    /// Camera azimuth around the avatar, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    azimuth: f64,
    /// Horizontal camera distance from the avatar center, meters.
    #[arg(long, default_value_t = 3.0)]
    distance: f32,
    /// Camera height above the avatar center, meters.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    elevation: f32,
}

#[derive(Debug, Args)]
struct PoseArgs {
    bundle: PathBuf,
    rig: PathBuf,
    /// Animation clip; omitted means the fitted pose stored in the bundle.
    anim: Option<PathBuf>,
    /// Clip time, seconds.
    #[arg(short, long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Group)]
    mode: ModeArg,
    #[command(flatten)]
    camera: CameraArgs,
    /// Output PLY; the draw order is written to `<out>.order.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    bundle: PathBuf,
    rig: PathBuf,
    anim: PathBuf,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    frames: u32,
    #[arg(long, value_enum, default_value_t = BenchModeArg::All)]
    mode: BenchModeArg,
    #[arg(long, default_value_t = 3.0)]
    distance: f32,
    /// CSV output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory receiving `scene.ply`, `rig.json` and `anim.json`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    splats: usize,
    /// Floor, wall and floater splats added around the subject.
    #[arg(long, default_value_t = 5_000)]
    background: usize,
    #[arg(long, default_value_t = 1.7)]
    height: f64,
    /// Direction the subject faces, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    yaw: f64,
    /// Arm abduction, degrees.
    #[arg(long, default_value_t = 45.0)]
    shoulder: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Info { input } => commands::info(&input),
        Command::Bind(args) => commands::bind(&args),
        Command::Pose(args) => commands::pose(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::Synth(args) => commands::synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.guidance() {
                eprintln!("{hint}");
            }
            ExitCode::from(e.code() as u8)
        }
    }
}
