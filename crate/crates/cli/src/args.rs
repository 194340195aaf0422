use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msreg_core::{BandPolicy, PipelineConfig, RenderMode};

#[derive(Parser, Debug)]
#[command(name = "msreg", version, about = "Register images from different sensors with an affine model")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the transform between two images and write the aligned outputs.
    Register(RegisterArgs),
    /// Write the final matches of two images as JSON.
    Match(MatchArgs),
    /// Run a synthetic rotation, scale or intensity sweep on one image.
    Sweep(SweepArgs),
    /// Warp a sensed image with a saved model and write a composite.
    Render(RenderArgs),
}

/// Pipeline settings: a config file plus per-key overrides.
#[derive(Args, Debug, Default)]
pub struct PipelineArgs {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum keypoints per image.
    #[arg(long)]
    pub max_points: Option<usize>,
    /// Fix the descriptor reference orientation to 0.
    #[arg(long)]
    pub no_rotation_invariance: bool,
    /// Independent runs of the final consensus filter; the largest wins.
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `sum` or `band(k)`.
    #[arg(long)]
    pub band: Option<BandPolicy>,
    /// Light 3x3 smoothing after loading.
    #[arg(long)]
    pub denoise: bool,
    #[arg(long)]
    pub inlier_threshold: Option<f64>,
    #[arg(long)]
    pub ratio_test: Option<f64>,
}

impl PipelineArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                PipelineConfig::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.max_points {
            cfg.max_points = v;
        }
        if self.no_rotation_invariance {
            cfg.rotation_invariant = false;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.band {
            cfg.band_policy = v;
        }
        if self.denoise {
            cfg.denoise = true;
        }
        if let Some(v) = self.inlier_threshold {
            cfg.inlier_threshold = v;
        }
        if let Some(v) = self.ratio_test {
            cfg.ratio_test = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    pub reference: PathBuf,
    pub sensed: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Keep the given order instead of using the larger image as reference.
    #[arg(long)]
    pub keep_order: bool,
    /// Also write pyramid layers and orientation maps here.
    #[arg(long)]
    pub dump_pyramid: Option<PathBuf>,
    /// Checkerboard tile size in pixels.
    #[arg(long, default_value_t = 64)]
    pub block: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    pub reference: PathBuf,
    pub sensed: PathBuf,
    /// Output JSON file.
    #[arg(short, long, default_value = "matches.json")]
    pub output: PathBuf,
    #[arg(long)]
    pub keep_order: bool,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Rotation,
    Scale,
    Intensity,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub kind: SweepKind,
    pub image: PathBuf,
    /// Output CSV file.
    #[arg(short, long, default_value = "sweep.csv")]
    pub output: PathBuf,
    /// First angle (degrees) or ratio; defaults 0 and 1.
    #[arg(long)]
    pub start: Option<f64>,
    /// Last angle or ratio; defaults 359 and 2.
    #[arg(long)]
    pub end: Option<f64>,
    /// Step; defaults 1 and 0.1.
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    pub reference: PathBuf,
    pub sensed: PathBuf,
    /// Model file written by `register`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long, default_value = "composite.png")]
    pub output: PathBuf,
    #[arg(long, default_value = "fusion")]
    pub mode: RenderMode,
    #[arg(long, default_value_t = 64)]
    pub block: usize,
    #[arg(long)]
    pub band: Option<BandPolicy>,
}
