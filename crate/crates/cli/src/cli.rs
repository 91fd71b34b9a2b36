//! Command-line definitions. Every command option is optional at parse time
//! so it can come from `--config` instead; required fields are checked after
//! merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "histosr", version, about = "Histopathology super-resolution benchmarking toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct GlobalArgs {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize LR images from HR images with a degradation recipe.
    Degrade(DegradeArgs),
    /// Build blur-ladder IQA datasets with score manifests.
    Curate(CurateArgs),
    /// Train a no-reference blur scorer on a curated manifest.
    TrainNoref(TrainNorefArgs),
    /// Score images with a trained no-reference model.
    ScoreNoref(ScoreNorefArgs),
    /// Evaluate SR method outputs against HR references.
    Eval(EvalArgs),
    /// Re-render or merge saved evaluation reports.
    Report(ReportArgs),
    /// Cut an image into overlapping tiles with a grid manifest.
    Tile(TileArgs),
    /// Blend a tile directory back into one image.
    Stitch(StitchArgs),
    /// Print inference geometry for an LR size and scale.
    Geometry(GeometryArgs),
    /// Validate the spaced sampler against an analytic Gaussian target.
    SamplerCheck(SamplerCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Degrade(_) => "degrade",
            Command::Curate(_) => "curate",
            Command::TrainNoref(_) => "train-noref",
            Command::ScoreNoref(_) => "score-noref",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
            Command::Tile(_) => "tile",
            Command::Stitch(_) => "stitch",
            Command::Geometry(_) => "geometry",
            Command::SamplerCheck(_) => "sampler-check",
        }
    }
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradeArgs {
    /// Directory of HR PNG images.
    #[arg(long)]
    pub hr_dir: Option<PathBuf>,
    /// Output directory for LR images, traces and pairs.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Built-in recipe name (realesrgan, codeformer) or a recipe JSON file.
    #[arg(long)]
    pub recipe: Option<String>,
    /// Downscaling factor (default 4).
    #[arg(long)]
    pub scale: Option<usize>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurateArgs {
    #[arg(long)]
    pub hr_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// box, gaussian or both (default both).
    #[arg(long)]
    pub blur: Option<String>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainNorefArgs {
    /// Curated manifest CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output model JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ridge strength (default 1.0).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fraction of source images used for training (default 0.8; 1 trains on all).
    #[arg(long)]
    pub train_frac: Option<f64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreNorefArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// PNG file or directory of PNGs.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output CSV (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalArgs {
    #[arg(long)]
    pub hr_dir: Option<PathBuf>,
    /// Method outputs as `name=dir` or `dir` (named after the directory). Repeatable.
    #[arg(long = "sr-dir")]
    pub sr_dirs: Vec<String>,
    /// 16-bit instance masks named by image stem.
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    /// External metrics CSV `method,image,metric,value`.
    #[arg(long)]
    pub external_csv: Option<PathBuf>,
    /// No-reference scorer models. Repeatable.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Dataset name shown in the report (default: HR directory name).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Output directory for report.json, report.md and report.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Additional external metrics as `name:up|down[:decimals]`. Repeatable.
    #[arg(long = "extra-metric")]
    pub extra_metrics: Vec<String>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportArgs {
    /// Report JSON files. Repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// markdown, json or csv (default markdown).
    #[arg(long)]
    pub format: Option<String>,
    /// External metrics CSV merged into a single input report.
    #[arg(long)]
    pub external_csv: Option<PathBuf>,
    /// Additional external metrics as `name:up|down[:decimals]`. Repeatable.
    #[arg(long = "extra-metric")]
    pub extra_metrics: Vec<String>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Tile side in pixels (default 512).
    #[arg(long)]
    pub tile: Option<usize>,
    /// Overlap in pixels (default 64).
    #[arg(long)]
    pub overlap: Option<usize>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StitchArgs {
    /// Directory holding grid.json and r{row}_c{col}.png tiles.
    #[arg(long)]
    pub tiles_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryArgs {
    /// Square LR side.
    #[arg(long)]
    pub lr: Option<usize>,
    #[arg(long)]
    pub lr_width: Option<usize>,
    #[arg(long)]
    pub lr_height: Option<usize>,
    /// 2, 4 or 8.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub json: Option<bool>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerCheckArgs {
    /// Target mean (default 3).
    #[arg(long)]
    pub target_mean: Option<f64>,
    /// Target standard deviation (default 0.5).
    #[arg(long)]
    pub target_std: Option<f64>,
    /// Independent scalar samples (default 10000).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Full schedule length (default 1000).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Spaced step count (default 50).
    #[arg(long)]
    pub spaced: Option<usize>,
    #[arg(long)]
    pub beta_start: Option<f64>,
    #[arg(long)]
    pub beta_end: Option<f64>,
    /// fixed_large or fixed_small (default fixed_large).
    #[arg(long)]
    pub variance: Option<String>,
    /// Allowed moment error (default 0.05).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also write the schedule dump JSON here.
    #[arg(long)]
    pub dump_schedule: Option<PathBuf>,
}
