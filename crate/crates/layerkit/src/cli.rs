//! The `layerkit` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error (bad flags or a missing
//! input combination), 2 on a data error (unreadable or invalid files).
//! `LAYERKIT_THREADS` caps the worker pool used by corpus subcommands;
//! 0 or unset means one worker per core.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use layerkit_core::labelproc::preprocess;
use layerkit_core::layerize::{mean_thickness_with_unit, semantic_to_layers};
use layerkit_core::metrics::{
    aggregate, evaluate, layer_count, ClassUniverse, EvalReport, Filters,
};
use layerkit_core::sched::{tabulate, OneCycleParams, Policy, PolyParams, Shape};
use layerkit_core::synth::{config_for_index, generate, SynthConfig};
use layerkit_core::tinyseg::{train, SchedulerKind, TinyNet, TrainConfig};
use layerkit_core::{LabelSchema, Radargram, SemanticMap, DEFAULT_CM_PER_PIXEL};

use crate::dataio::manifest::{self, Entry, Manifest, Split};
use crate::dataio::report::{ImageReport, ReportFile};
use crate::dataio::{layers_csv, pgm, weights, write_atomic};
use crate::plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const THREADS_ENV: &str = "LAYERKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "layerkit",
    version,
    about = "Radar layer labelling, segmentation and evaluation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with complete and degraded annotations.
    Synth(SynthArgs),
    /// Crop consecutive layer sets and write dense class maps.
    Preprocess(PreprocessArgs),
    /// Recover layer curves from class maps.
    Layerize(LayerizeArgs),
    /// Mean per-layer thickness of class maps.
    Thickness(ThicknessArgs),
    /// Score predicted class maps against ground truth.
    Evaluate(EvaluateArgs),
    /// Tabulate a learning-rate schedule as CSV.
    Schedule(ScheduleArgs),
    /// Train the small segmentation network.
    Train(TrainArgs),
    /// Predict class maps with trained weights.
    Predict(PredictArgs),
    /// Write plot-ready CSV and SVG files.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    /// Seed of the first image; image `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of images, taken from the end, tagged `val`.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub undulation: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub perturbation: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            height: self.height.unwrap_or(d.height),
            width: self.width.unwrap_or(d.width),
            num_layers: self.layers.unwrap_or(d.num_layers),
            mean_spacing_px: self.spacing.unwrap_or(d.mean_spacing_px),
            spacing_jitter: self.jitter.unwrap_or(d.spacing_jitter),
            undulation_amplitude_px: self.undulation.unwrap_or(d.undulation_amplitude_px),
            undulation_wavelength_px: self.wavelength.unwrap_or(d.undulation_wavelength_px),
            contrast_decay: self.decay.unwrap_or(d.contrast_decay),
            noise_level: self.noise.unwrap_or(d.noise_level),
            perturbation_rate: self.perturbation.unwrap_or(d.perturbation_rate),
            annotation_dropout: self.dropout.unwrap_or(d.annotation_dropout),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus manifest; every entry is cropped.
    #[arg(long, conflicts_with_all = ["image", "layers"])]
    pub manifest: Option<PathBuf>,
    /// Single radargram (with `--layers`).
    #[arg(long, requires = "layers")]
    pub image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    pub layers: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LayerizeArgs {
    /// Manifest whose `semantic` column is layerized.
    #[arg(long, conflicts_with = "semantic")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    /// Output CSV for `--semantic`, output directory for `--manifest`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Px,
    Cm,
}

#[derive(Debug, Args)]
pub struct ThicknessArgs {
    #[arg(long, conflicts_with = "semantic")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Units::Px)]
    pub units: Units,
    #[arg(long, default_value_t = DEFAULT_CM_PER_PIXEL)]
    pub cm_per_pixel: f64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Manifest whose `semantic` column holds the ground truth.
    #[arg(long, requires = "pred_dir", conflicts_with_all = ["pred", "gt"])]
    pub manifest: Option<PathBuf>,
    /// Predictions named like the ground-truth files.
    #[arg(long)]
    pub pred_dir: Option<PathBuf>,
    /// Restrict a manifest evaluation to one split.
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long, requires = "gt")]
    pub pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    pub gt: Option<PathBuf>,
    /// Keep only images with more than this many ground-truth layers.
    #[arg(long)]
    pub min_layers: Option<usize>,
    /// Score only the shallowest N layers of each image.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub top_n: Option<u64>,
    /// Average over class ids 0..N instead of the classes in each ground truth.
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long, value_enum, default_value_t = Units::Px)]
    pub units: Units,
    #[arg(long, default_value_t = DEFAULT_CM_PER_PIXEL)]
    pub cm_per_pixel: f64,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Poly,
    Onecycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Linear,
    Cosine,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Poly)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub base_lr: f64,
    /// Poly exponent.
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// One-cycle interpolation shape.
    #[arg(long, value_enum, default_value_t = ShapeArg::Linear)]
    pub shape: ShapeArg,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ScheduleArgs {
    fn policy(&self) -> Policy {
        match self.policy {
            PolicyArg::Poly => Policy::Poly(PolyParams {
                base_lr: self.base_lr,
                power: self.power,
                ..PolyParams::default()
            }),
            PolicyArg::Onecycle => Policy::OneCycle(OneCycleParams {
                base_lr: self.base_lr,
                shape: match self.shape {
                    ShapeArg::Linear => Shape::Linear,
                    ShapeArg::Cosine => Shape::Cosine,
                },
                ..OneCycleParams::default()
            }),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest of cropped images with `semantic` targets.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: Split,
    /// Weights output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step mean batch loss as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = LabelSchema::DEFAULT_NUM_CLASSES)]
    pub num_classes: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Poly)]
    pub policy: PolicyArg,
    /// Seeds both initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exclude background pixels from the loss.
    #[arg(long)]
    pub ignore_background: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, conflicts_with = "image")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Output PGM for `--image`, output directory for `--manifest`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Schedule,
    ThicknessPerLayer,
    LayerOverlay,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    /// Writes `<prefix>.csv` and `<prefix>.svg`.
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[command(flatten)]
    pub schedule: PlotScheduleArgs,
    /// Class map for `thickness-per-layer`.
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    /// Layer CSV for `layer-overlay`.
    #[arg(long)]
    pub layers: Option<PathBuf>,
    /// Drawing height for `layer-overlay`; defaults to the deepest row + 1.
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotScheduleArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Poly)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<crate::dataio::Error> for Failure {
    fn from(e: crate::dataio::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<layerkit_core::Error> for Failure {
    fn from(e: layerkit_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Messages go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli.command));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        usage(format!(
            "{THREADS_ENV} must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if n > 0 {
        // A second call in the same process finds the pool already built.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Preprocess(a) => preprocess_cmd(&a),
        Command::Layerize(a) => layerize(&a),
        Command::Thickness(a) => thickness(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Schedule(a) => schedule(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Predict(a) => predict(&a),
        Command::PlotData(a) => plot_data(&a),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn stem(path: &Path) -> anyhow::Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("cannot derive a file name from {}", path.display()))
}

fn file_name(path: &Path) -> anyhow::Result<&std::ffi::OsStr> {
    path.file_name()
        .ok_or_else(|| anyhow!("{} has no file name", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn synth(a: &SynthArgs) -> Outcome {
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&a.val_fraction) {
        return Err(usage("--val-fraction must be in [0, 1]"));
    }
    let base = a.config();
    base.validate().map_err(|e| usage(e.to_string()))?;
    create_dir(&a.out)?;

    let val = (a.count as f64 * a.val_fraction).round() as usize;
    let entries = (0..a.count)
        .into_par_iter()
        .map(|i| -> anyhow::Result<Entry> {
            let sample = generate(&config_for_index(&base, i))?;
            let name = format!("synth_{i:04}");
            pgm::write_radargram(&a.out.join(format!("{name}.pgm")), &sample.image)?;
            layers_csv::write(&a.out.join(format!("{name}_truth.csv")), &sample.truth)?;
            layers_csv::write(
                &a.out.join(format!("{name}_layers.csv")),
                &sample.annotation,
            )?;
            Ok(Entry {
                image: format!("{name}.pgm").into(),
                layers: format!("{name}_layers.csv").into(),
                semantic: None,
                split: if i >= a.count - val {
                    Split::Val
                } else {
                    Split::Train
                },
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    manifest::write(&a.out.join("manifest.csv"), &Manifest { entries })?;
    Ok(())
}

/// Crops one radargram and writes its crops; returns their manifest entries.
fn preprocess_one(
    image: &Path,
    layers: &Path,
    split: Split,
    out: &Path,
) -> anyhow::Result<Vec<Entry>> {
    let radargram = pgm::read_radargram(image)?;
    let map = layers_csv::read(layers)?;
    let crops = preprocess(&radargram, &map)
        .with_context(|| format!("preprocessing {}", image.display()))?;
    let stem = stem(image)?;
    let mut entries = Vec::with_capacity(crops.len());
    for (k, (crop, labels)) in crops.iter().enumerate() {
        let name = format!("{stem}_crop{k}");
        let entry = Entry {
            image: format!("{name}.pgm").into(),
            layers: format!("{name}_layers.csv").into(),
            semantic: Some(format!("{name}_labels.pgm").into()),
            split,
        };
        pgm::write_radargram(&out.join(&entry.image), &crop.image)?;
        layers_csv::write(&out.join(&entry.layers), &crop.layers)?;
        pgm::write_semantic(
            &out.join(entry.semantic.as_ref().expect("set above")),
            labels,
        )?;
        entries.push(entry);
    }
    Ok(entries)
}

fn preprocess_cmd(a: &PreprocessArgs) -> Outcome {
    let inputs: Vec<(PathBuf, PathBuf, Split)> = match (&a.manifest, &a.image, &a.layers) {
        (Some(m), None, None) => read_manifest(m)?
            .entries
            .into_iter()
            .map(|e| (e.image, e.layers, e.split))
            .collect(),
        (None, Some(i), Some(l)) => vec![(i.clone(), l.clone(), Split::Train)],
        _ => return Err(usage("give either --manifest or both --image and --layers")),
    };
    create_dir(&a.out)?;
    let per_image = inputs
        .par_iter()
        .map(|(image, layers, split)| preprocess_one(image, layers, *split, &a.out))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let entries = per_image.into_iter().flatten().collect();
    manifest::write(&a.out.join("manifest.csv"), &Manifest { entries })?;
    Ok(())
}

/// Semantic paths of a manifest, failing on entries without one.
fn semantic_paths(m: &Manifest, split: Option<Split>) -> anyhow::Result<Vec<PathBuf>> {
    m.entries
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .map(|e| {
            e.semantic
                .clone()
                .ok_or_else(|| anyhow!("manifest entry {} has no semantic map", e.image.display()))
        })
        .collect()
}

fn layerize(a: &LayerizeArgs) -> Outcome {
    match (&a.manifest, &a.semantic) {
        (Some(m), None) => {
            let paths = semantic_paths(&read_manifest(m)?, None)?;
            create_dir(&a.out)?;
            paths.par_iter().try_for_each(|p| -> anyhow::Result<()> {
                let map = pgm::read_semantic(p)?;
                let out = a.out.join(format!("{}.csv", stem(p)?));
                layers_csv::write(&out, &semantic_to_layers(&map))?;
                Ok(())
            })?;
        }
        (None, Some(s)) => {
            let map = pgm::read_semantic(s)?;
            layers_csv::write(&a.out, &semantic_to_layers(&map))?;
        }
        _ => return Err(usage("give either --manifest or --semantic")),
    }
    Ok(())
}

fn thickness(a: &ThicknessArgs) -> Outcome {
    if !(a.cm_per_pixel.is_finite() && a.cm_per_pixel > 0.0) {
        return Err(usage("--cm-per-pixel must be positive"));
    }
    let (paths, with_image) = match (&a.manifest, &a.semantic) {
        (Some(m), None) => (semantic_paths(&read_manifest(m)?, None)?, true),
        (None, Some(s)) => (vec![s.clone()], false),
        _ => return Err(usage("give either --manifest or --semantic")),
    };
    let maps = paths
        .par_iter()
        .map(|p| pgm::read_semantic(p))
        .collect::<crate::dataio::Result<Vec<_>>>()?;

    let unit = match a.units {
        Units::Px => "thickness_px",
        Units::Cm => "thickness_cm",
    };
    let mut out = String::new();
    if with_image {
        out.push_str("image,");
    }
    let _ = writeln!(out, "layer_id,{unit}");
    for (path, map) in paths.iter().zip(&maps) {
        let report = mean_thickness_with_unit(map, a.cm_per_pixel);
        for (id, px) in report.per_layer {
            let value = match a.units {
                Units::Px => px,
                Units::Cm => px * a.cm_per_pixel,
            };
            if with_image {
                let _ = write!(out, "{},", file_name(path)?.to_string_lossy());
            }
            let _ = writeln!(out, "{id},{value}");
        }
    }
    emit(a.out.as_deref(), &out)
}

fn evaluate_cmd(a: &EvaluateArgs) -> Outcome {
    if !(a.cm_per_pixel.is_finite() && a.cm_per_pixel > 0.0) {
        return Err(usage("--cm-per-pixel must be positive"));
    }
    let filters = Filters {
        min_layers: a.min_layers,
        top_n: a.top_n.map(|n| n as usize),
        class_universe: match a.num_classes {
            Some(n) if n >= 2 => ClassUniverse::Fixed(n),
            Some(_) => return Err(usage("--num-classes must be at least 2")),
            None => ClassUniverse::GroundTruth,
        },
    };
    let pairs: Vec<(PathBuf, PathBuf)> = match (&a.manifest, &a.pred_dir, &a.pred, &a.gt) {
        (Some(m), Some(dir), None, None) => semantic_paths(&read_manifest(m)?, a.split)?
            .into_iter()
            .map(|gt| Ok((dir.join(file_name(&gt)?), gt)))
            .collect::<anyhow::Result<_>>()?,
        (None, None, Some(p), Some(g)) => vec![(p.clone(), g.clone())],
        _ => {
            return Err(usage(
                "give either --manifest with --pred-dir, or --pred with --gt",
            ))
        }
    };
    let loaded = pairs
        .par_iter()
        .map(|(p, g)| -> anyhow::Result<(SemanticMap, SemanticMap)> {
            Ok((pgm::read_semantic(p)?, pgm::read_semantic(g)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let min_layers = a.min_layers.unwrap_or(0);
    let scored = pairs
        .iter()
        .zip(&loaded)
        .filter(|(_, (_, gt))| layer_count(gt) > min_layers)
        .map(
            |((_, gt_path), (pred, gt))| -> anyhow::Result<(String, EvalReport)> {
                let report = evaluate(pred, gt, filters)
                    .with_context(|| format!("evaluating {}", gt_path.display()))?;
                Ok((file_name(gt_path)?.to_string_lossy().into_owned(), report))
            },
        )
        .collect::<anyhow::Result<Vec<_>>>()?;
    if scored.is_empty() {
        return Err(anyhow!("no image passes the filters").into());
    }

    let file = if a.manifest.is_some() {
        let reports: Vec<EvalReport> = scored.iter().map(|(_, r)| r.clone()).collect();
        let per_image = scored
            .into_iter()
            .map(|(image, report)| ImageReport {
                report,
                image,
                thickness_mae_cm: None,
            })
            .collect();
        ReportFile::corpus(aggregate(&reports)?, per_image)
    } else {
        ReportFile::single(scored.into_iter().next().expect("non-empty").1)
    };
    let file = match a.units {
        Units::Px => file,
        Units::Cm => file.with_cm(a.cm_per_pixel),
    };
    emit(a.out.as_deref(), &crate::dataio::report::encode(&file)?)
}

fn schedule(a: &ScheduleArgs) -> Outcome {
    let points = tabulate(&a.policy(), a.steps).map_err(|e| usage(e.to_string()))?;
    let mut out = String::from("step,fraction,lr,momentum\n");
    for p in &points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.step, p.fraction, p.learning_rate, p.momentum
        );
    }
    emit(a.out.as_deref(), &out)
}

fn train_cmd(a: &TrainArgs) -> Outcome {
    let cfg = TrainConfig {
        base_lr: a.lr,
        weight_decay: a.weight_decay,
        momentum: a.momentum,
        batch_size: a.batch_size,
        epochs: a.epochs,
        scheduler: match a.policy {
            PolicyArg::Poly => SchedulerKind::Poly,
            PolicyArg::Onecycle => SchedulerKind::OneCycle,
        },
        seed: a.seed,
        ignore_background: a.ignore_background,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let net = TinyNet::<f32>::init(a.num_classes, a.seed).map_err(|e| usage(e.to_string()))?;

    let m = read_manifest(&a.manifest)?;
    let entries: Vec<&Entry> = m.split(a.split).collect();
    if entries.is_empty() {
        return Err(anyhow!("manifest has no `{}` entries", a.split).into());
    }
    let corpus = entries
        .par_iter()
        .map(|e| -> anyhow::Result<(Radargram, SemanticMap)> {
            let target = e.semantic.as_ref().ok_or_else(|| {
                anyhow!(
                    "{} has no semantic map; run preprocess first",
                    e.image.display()
                )
            })?;
            let image = pgm::read_radargram(&e.image)?;
            let labels = pgm::read_semantic(target)?;
            if let Some(&c) = labels
                .classes()
                .iter()
                .find(|&&c| c as usize >= a.num_classes)
            {
                bail!(
                    "{} has class {c}, beyond --num-classes {}",
                    target.display(),
                    a.num_classes
                );
            }
            Ok((image, labels))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let (net, history) = train(net, &corpus, &cfg)?;
    weights::write(&a.out, &net)?;
    if let Some(path) = &a.history {
        let mut out = String::from("step,loss\n");
        for (i, l) in history.iter().enumerate() {
            let _ = writeln!(out, "{i},{l}");
        }
        write_atomic(path, out.as_bytes())?;
    }
    Ok(())
}

fn predict(a: &PredictArgs) -> Outcome {
    let net = weights::read(&a.weights)?;
    match (&a.manifest, &a.image) {
        (Some(m), None) => {
            let m = read_manifest(m)?;
            create_dir(&a.out)?;
            m.entries
                .par_iter()
                .filter(|e| a.split.is_none_or(|s| e.split == s))
                .try_for_each(|e| -> anyhow::Result<()> {
                    let image = pgm::read_radargram(&e.image)?;
                    let out = a.out.join(format!("{}_labels.pgm", stem(&e.image)?));
                    pgm::write_semantic(&out, &net.predict(&image))?;
                    Ok(())
                })?;
        }
        (None, Some(i)) => {
            let image = pgm::read_radargram(i)?;
            pgm::write_semantic(&a.out, &net.predict(&image))?;
        }
        _ => return Err(usage("give either --manifest or --image")),
    }
    Ok(())
}

fn plot_data(a: &PlotArgs) -> Outcome {
    let (csv, svg) = match a.kind {
        PlotKind::Schedule => {
            let policy = ScheduleArgs {
                policy: a.schedule.policy,
                steps: a.schedule.steps,
                base_lr: 0.01,
                power: 1.0,
                shape: ShapeArg::Linear,
                out: None,
            }
            .policy();
            let points = tabulate(&policy, a.schedule.steps).map_err(|e| usage(e.to_string()))?;
            (plot::schedule_csv(&points), plot::schedule_svg(&points))
        }
        PlotKind::ThicknessPerLayer => {
            let path = a
                .semantic
                .as_ref()
                .ok_or_else(|| usage("thickness-per-layer needs --semantic"))?;
            let map = pgm::read_semantic(path)?;
            (plot::thickness_csv(&map), plot::thickness_svg(&map))
        }
        PlotKind::LayerOverlay => {
            let path = a
                .layers
                .as_ref()
                .ok_or_else(|| usage("layer-overlay needs --layers"))?;
            let map = layers_csv::read(path)?;
            let deepest = map
                .iter()
                .flat_map(|(_, rows)| rows.iter().flatten())
                .max()
                .map_or(1, |&r| r as usize + 1);
            let height = a.height.unwrap_or(deepest);
            (plot::overlay_csv(&map), plot::overlay_svg(&map, height))
        }
    };
    let with_ext = |ext: &str| {
        let mut p = a.out_prefix.clone().into_os_string();
        p.push(ext);
        PathBuf::from(p)
    };
    if let Some(dir) = a.out_prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_atomic(&with_ext(".csv"), csv.as_bytes())?;
    write_atomic(&with_ext(".svg"), svg.as_bytes())?;
    Ok(())
}
