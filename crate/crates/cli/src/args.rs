use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "simpaste", version, about = "Paste real object cutouts onto synthetic scenes and evaluate detectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a directory of cutout pairs and write its buffer.json manifest.
    Ingest(IngestArgs),
    /// Render synthetic scenes across the four lighting levels.
    Synth(SynthArgs),
    /// Paste buffer cutouts onto every scene and emit labels and records.
    Compose(ComposeArgs),
    /// Score predictions against ground-truth labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct Common {
    /// Key-value config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (per-scene parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of `<id>.rgb.png` + `<id>.mask.png` pairs.
    #[arg(long)]
    pub buffer: PathBuf,
    #[arg(long)]
    pub min_cutout_area: Option<usize>,
    /// Manifest path (default: `<buffer>/buffer.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 320)]
    pub width: u32,
    #[arg(long, default_value_t = 240)]
    pub height: u32,
    /// Bunches per scene.
    #[arg(long, default_value_t = 6)]
    pub instances: u32,
    #[arg(long, default_value_t = 50.0)]
    pub min_size: f64,
    #[arg(long, default_value_t = 110.0)]
    pub max_size: f64,
    /// Leaf occluders per scene.
    #[arg(long, default_value_t = 2)]
    pub occluders: u32,
    /// Relative weights of low,medium,high,backlight scenes.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [209u64, 707, 559, 416])]
    pub level_ratios: Vec<u64>,
    /// Exact scene counts per level (low,medium,high,backlight); overrides --n and ratios.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub level_counts: Option<Vec<usize>>,
    /// Also write `<scene>.inst_color.png` color-coded instance maps.
    #[arg(long)]
    pub color_maps: bool,
    /// Also write a procedural demo cutout buffer into this directory.
    #[arg(long)]
    pub cutouts: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    pub n_cutouts: usize,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory written by `synth` (or any `<id>.rgb.png` + `<id>.inst.png` pairs).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Cutout buffer directory.
    #[arg(long)]
    pub buffer: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub min_paste_area: Option<usize>,
    #[arg(long)]
    pub min_cutout_area: Option<usize>,
    /// Feather radius in pixels (0 = hard paste).
    #[arg(long)]
    pub feather: Option<u32>,
    /// Instance map encoding: id-indexed or color-coded.
    #[arg(long, default_value = "id-indexed")]
    pub encoding: String,
    /// Skip scenes whose outputs already exist.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ground-truth label directory (`<id>.txt`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction directory (`<id>.txt`, lines `class conf cx cy w h`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Where report.json and report.txt go.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub conf_thresh: Option<f64>,
    #[arg(long)]
    pub iou_thresh: Option<f64>,
    /// Image size `WxH` used to denormalize boxes; by default read from
    /// `<gt>/<id>.rgb.png` when present.
    #[arg(long)]
    pub image_size: Option<String>,
    /// Use 101-point interpolation instead of all points.
    #[arg(long)]
    pub points101: bool,
    /// Row label in the text table.
    #[arg(long, default_value = "eval")]
    pub name: String,
}
