//! Command-line entry point wiring the library into reproducible workflows.
//!
//! Subcommands: `synth`, `train-head`, `refine`, `eval`, `stats`, `report`.
//! Numeric configuration is accepted via flags or a TOML config file
//! (`--config`), with flags taking precedence; every run writes a manifest
//! next to its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::grid_io::{load_grid, save_grid};
use crate::data::image_io::write_image;
use crate::data::predictions::{load_predictions, save_predictions};
use crate::data::synth::{generate_synthetic, Split, SynthConfig};
use crate::data::via::{export_via, parse_via_file, ViaConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_report_table, relative_improvement, APReport, EvalConfig, EvalMode};
use crate::grid::{bilinear_sample_one, nearest_cell, Grid2D};
use crate::mask::{instance_from_dense, mask_iou, rle_decode, MaskInstance};
use crate::point_head::{
    load_params, loss_and_grad, save_params, train, PointFeature, PointHeadParams, TrainConfig,
};
use crate::renderer::{binarize, refine_with_stats, upsample_baseline, RenderConfig};
use crate::sampling::{sample_training_points, TrainSamplerConfig};
use crate::stats::{area_statistics, boxplot_series, format_stats_table};

#[derive(Parser)]
#[command(name = "rendseg", version, about = "Point-based rendering segmentation refinement")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic line-space defect dataset.
    Synth(SynthArgs),
    /// Train the point head on a generated dataset.
    TrainHead(TrainArgs),
    /// Refine coarse masks with a trained head and emit predictions.
    Refine(RefineArgs),
    /// Evaluate predictions against ground truth (COCO-style AP).
    Eval(EvalArgs),
    /// Per-class mask-area statistics of a prediction file.
    Stats(StatsArgs),
    /// Compare two evaluation reports with relative improvements.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "RENDSEG_SEED")]
    seed: Option<u64>,
    /// Total image count across all splits.
    #[arg(long)]
    total: Option<usize>,
    /// Square image size in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    pitch: Option<usize>,
    #[arg(long)]
    line_width: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Coarse grids are the ground truth downsampled by 2^steps.
    #[arg(long)]
    coarse_steps: Option<usize>,
    #[arg(long)]
    logit_noise_sigma: Option<f64>,
    /// Overwrite an existing non-empty output directory.
    #[arg(long)]
    force: bool,
    /// TOML config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory produced by `synth`.
    #[arg(long)]
    data: PathBuf,
    /// Output parameter file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, env = "RENDSEG_SEED")]
    seed: Option<u64>,
    /// Training points sampled per image.
    #[arg(long)]
    points_per_image: Option<usize>,
    #[arg(long)]
    oversample: Option<f64>,
    #[arg(long)]
    importance: Option<f64>,
    /// Loss-curve CSV output path (default: alongside --out).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    data: PathBuf,
    /// Trained point-head parameter file.
    #[arg(long)]
    head: PathBuf,
    /// Output prediction JSON.
    #[arg(long)]
    out: PathBuf,
    /// Subdivision steps (defaults to the dataset's coarse factor).
    #[arg(long)]
    steps: Option<usize>,
    /// Points re-labeled per step; 0 yields the bilinear baseline.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Which split to refine.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction JSON.
    #[arg(long)]
    preds: PathBuf,
    /// Ground truth: a dataset directory, a VIA project JSON, or a
    /// prediction-format JSON.
    #[arg(long)]
    gt: PathBuf,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// Error on prediction classes absent from the ground truth.
    #[arg(long)]
    strict: bool,
    /// Restrict ground truth to one split (requires a dataset-dir --gt).
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Minimum prediction score to include.
    #[arg(long, default_value_t = 0.5)]
    min_score: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Baseline APReport JSON.
    #[arg(long)]
    baseline: PathBuf,
    /// Improved APReport JSON.
    #[arg(long)]
    improved: PathBuf,
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_secs: f64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// TOML config file sections mirroring the subcommand flags.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    #[serde(default)]
    synth: SynthSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    refine: RefineSection,
}

#[derive(Debug, Default, Deserialize)]
struct SynthSection {
    seed: Option<u64>,
    total: Option<usize>,
    size: Option<usize>,
    pitch: Option<usize>,
    line_width: Option<usize>,
    noise_sigma: Option<f64>,
    coarse_steps: Option<usize>,
    logit_noise_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct TrainSection {
    lr: Option<f64>,
    batch: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
    points_per_image: Option<usize>,
    oversample: Option<f64>,
    importance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RefineSection {
    steps: Option<usize>,
    points: Option<usize>,
    threshold: Option<f64>,
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        }
    }
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::TrainHead(args) => cmd_train_head(args),
        Command::Refine(args) => cmd_refine(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Report(args) => cmd_report(args),
    }
}

// ---------------------------------------------------------------------------
// synth

/// On-disk dataset layout:
/// `manifest.json`, `annotations.json` (VIA project), `splits.json`,
/// `images/<id>.pgm`, `features/<id>.grid`, `coarse/<id>.grid`,
/// `synth_config.json`.
fn cmd_synth(args: SynthArgs) -> Result<()> {
    let start = Instant::now();
    let file_cfg = load_file_config(args.config.as_ref())?.synth;
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        image_size: args.size.or(file_cfg.size).unwrap_or(defaults.image_size),
        line_pitch: args.pitch.or(file_cfg.pitch).unwrap_or(defaults.line_pitch),
        line_width: args
            .line_width
            .or(file_cfg.line_width)
            .unwrap_or(defaults.line_width),
        noise_sigma: args
            .noise_sigma
            .or(file_cfg.noise_sigma)
            .unwrap_or(defaults.noise_sigma),
        total_images: args.total.or(file_cfg.total).unwrap_or(defaults.total_images),
        class_counts: None,
        rng_seed: args.seed.or(file_cfg.seed).unwrap_or(0),
        coarse_steps: args
            .coarse_steps
            .or(file_cfg.coarse_steps)
            .unwrap_or(defaults.coarse_steps),
        label_smoothing: defaults.label_smoothing,
        logit_noise_sigma: args
            .logit_noise_sigma
            .or(file_cfg.logit_noise_sigma)
            .unwrap_or(defaults.logit_noise_sigma),
    };

    let out = &args.out;
    if out.exists() {
        let non_empty = std::fs::read_dir(out)
            .map_err(|e| Error::io(out, e))?
            .next()
            .is_some();
        if non_empty && !args.force {
            return Err(Error::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
        if non_empty {
            std::fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
        }
    }

    let result = (|| -> Result<RunManifest> {
        let dataset = generate_synthetic(&cfg)?;
        for sub in ["images", "features", "coarse"] {
            std::fs::create_dir_all(out.join(sub)).map_err(|e| Error::io(out, e))?;
        }

        let mut splits: BTreeMap<&str, Vec<String>> =
            Split::ALL.iter().map(|s| (s.name(), Vec::new())).collect();
        let mut regions = Vec::with_capacity(dataset.samples.len());
        let mut output_hashes = BTreeMap::new();
        for sample in &dataset.samples {
            let image_path = out.join("images").join(&sample.image_id);
            write_image(&sample.image, &image_path)?;
            save_grid(
                &sample.features,
                &out.join("features").join(format!("{}.grid", sample.image_id)),
            )?;
            save_grid(
                &sample.coarse_logits,
                &out.join("coarse").join(format!("{}.grid", sample.image_id)),
            )?;
            splits
                .get_mut(sample.split.name())
                .expect("all splits present")
                .push(sample.image_id.clone());
            regions.push(sample.polygon.clone());
            output_hashes.insert(
                format!("images/{}", sample.image_id),
                sha256_file(&image_path)?,
            );
        }

        let via_doc = export_via(&dataset.annotations.images, &regions, "class");
        write_json(&via_doc, &out.join("annotations.json"))?;
        write_json(&splits, &out.join("splits.json"))?;
        write_json(
            &serde_json::json!({
                "image_size": cfg.image_size,
                "line_pitch": cfg.line_pitch,
                "line_width": cfg.line_width,
                "noise_sigma": cfg.noise_sigma,
                "total_images": cfg.total_images,
                "rng_seed": cfg.rng_seed,
                "coarse_steps": cfg.coarse_steps,
                "label_smoothing": cfg.label_smoothing,
                "logit_noise_sigma": cfg.logit_noise_sigma,
            }),
            &out.join("synth_config.json"),
        )?;
        output_hashes.insert(
            "annotations.json".into(),
            sha256_file(&out.join("annotations.json"))?,
        );
        output_hashes.insert("splits.json".into(), sha256_file(&out.join("splits.json"))?);

        Ok(RunManifest {
            command: "synth".into(),
            config: serde_json::json!({
                "image_size": cfg.image_size,
                "line_pitch": cfg.line_pitch,
                "line_width": cfg.line_width,
                "noise_sigma": cfg.noise_sigma,
                "total_images": cfg.total_images,
                "coarse_steps": cfg.coarse_steps,
                "logit_noise_sigma": cfg.logit_noise_sigma,
            }),
            input_hashes: BTreeMap::new(),
            output_hashes,
            seed: cfg.rng_seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        })
    })();

    match result {
        Ok(manifest) => {
            write_json(&manifest, &out.join("manifest.json"))?;
            println!(
                "wrote {} images to {} in {:.2}s",
                manifest.output_hashes.len().saturating_sub(2),
                out.display(),
                manifest.wall_time_secs
            );
            Ok(())
        }
        Err(e) => {
            // Remove partial outputs.
            let _ = std::fs::remove_dir_all(out);
            Err(e)
        }
    }
}

// ---------------------------------------------------------------------------
// dataset loading shared by train-head and refine

struct LoadedSample {
    image_id: String,
    coarse: Grid2D,
    features: Grid2D,
    gt: MaskInstance,
}

struct LoadedDataset {
    samples_by_split: BTreeMap<String, Vec<LoadedSample>>,
    coarse_steps: usize,
}

fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let annotations = parse_via_file(&dir.join("annotations.json"), &ViaConfig::default())?;
    let splits_text = std::fs::read_to_string(dir.join("splits.json"))
        .map_err(|e| Error::io(dir.join("splits.json"), e))?;
    let splits: BTreeMap<String, Vec<String>> = serde_json::from_str(&splits_text)?;
    let synth_cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("synth_config.json"))
            .map_err(|e| Error::io(dir.join("synth_config.json"), e))?,
    )?;
    let coarse_steps = synth_cfg
        .get("coarse_steps")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config("synth_config.json missing coarse_steps".into()))?
        as usize;

    let mut by_image: BTreeMap<&str, &MaskInstance> = BTreeMap::new();
    for inst in &annotations.instances {
        by_image.insert(&inst.image_id, inst);
    }

    let mut samples_by_split = BTreeMap::new();
    for (split, ids) in &splits {
        let mut samples = Vec::with_capacity(ids.len());
        for id in ids {
            let gt = by_image
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("image {id} has no annotation")))?;
            samples.push(LoadedSample {
                image_id: id.clone(),
                coarse: load_grid(&dir.join("coarse").join(format!("{id}.grid")))?,
                features: load_grid(&dir.join("features").join(format!("{id}.grid")))?,
                gt: (*gt).clone(),
            });
        }
        samples_by_split.insert(split.clone(), samples);
    }
    Ok(LoadedDataset {
        samples_by_split,
        coarse_steps,
    })
}

/// Builds point-feature/label pairs for one sample: biased sampling around
/// the coarse decision boundary, labels from the ground-truth mask.
fn training_points(
    sample: &LoadedSample,
    points: usize,
    oversample: f64,
    importance: f64,
    seed: u64,
) -> Result<Vec<(PointFeature, f64)>> {
    let coarse = &sample.coarse;
    let u_eval = |x: f64, y: f64| -> f64 {
        -bilinear_sample_one(coarse, x, y).expect("finite point")[0].abs()
    };
    let cfg = TrainSamplerConfig {
        num_points: points,
        oversample_factor: oversample,
        importance_ratio: importance,
        rng_seed: seed,
    };
    let point_set = sample_training_points(u_eval, &cfg)?;

    let dense = rle_decode(&sample.gt.mask)?;
    let mut out = Vec::with_capacity(point_set.len());
    for (x, y) in point_set.iter() {
        let coarse_vec = bilinear_sample_one(coarse, x, y)?;
        let fine_vec = bilinear_sample_one(&sample.features, x, y)?;
        let row = nearest_cell(y, dense.height);
        let col = nearest_cell(x, dense.width);
        // Smoothed labels keep the optimal head logits on the same scale as
        // the coarse grid, so relabeled cells stay in-distribution for the
        // bilinear upsamples of later subdivision steps.
        let eps = 0.05;
        let label = eps + (1.0 - 2.0 * eps) * dense.get(row, col) as u8 as f64;
        out.push((
            PointFeature {
                coarse: coarse_vec,
                fine: fine_vec,
            },
            label,
        ));
    }
    Ok(out)
}

fn cmd_train_head(args: TrainArgs) -> Result<()> {
    let start = Instant::now();
    let file_cfg = load_file_config(args.config.as_ref())?.train;
    let lr = args.lr.or(file_cfg.lr).unwrap_or(0.00025);
    let batch = args.batch.or(file_cfg.batch).unwrap_or(2);
    let steps = args.steps.or(file_cfg.steps).unwrap_or(5000);
    let seed = args.seed.or(file_cfg.seed).unwrap_or(0);
    let points_per_image = args
        .points_per_image
        .or(file_cfg.points_per_image)
        .unwrap_or(64);
    let oversample = args.oversample.or(file_cfg.oversample).unwrap_or(3.0);
    let importance = args.importance.or(file_cfg.importance).unwrap_or(0.75);

    let dataset = load_dataset(&args.data)?;
    let empty = Vec::new();
    let train_samples = dataset.samples_by_split.get("train").unwrap_or(&empty);
    if train_samples.is_empty() {
        return Err(Error::Config("dataset has no train split".into()));
    }
    let mut examples = Vec::new();
    for (i, sample) in train_samples.iter().enumerate() {
        examples.extend(training_points(
            sample,
            points_per_image,
            oversample,
            importance,
            seed ^ (i as u64).wrapping_mul(0x9E3779B97F4A7C15),
        )?);
    }

    // Probe set from the val split (falls back to train data).
    let probe: Vec<(PointFeature, f64)> = match dataset.samples_by_split.get("val") {
        Some(val) if !val.is_empty() => {
            let mut p = Vec::new();
            for (i, sample) in val.iter().enumerate() {
                p.extend(training_points(sample, 32, oversample, importance, 1 + i as u64)?);
            }
            p
        }
        _ => examples.iter().take(256).cloned().collect(),
    };

    let fine_dim = train_samples[0].features.channels();
    let mut params = PointHeadParams::default_arch(1, fine_dim, seed);
    let (initial_probe_loss, _) = loss_and_grad(&params, &probe)?;

    // Train in chunks so the loss curve can be recorded.
    let chunks = 20usize.min(steps.max(1));
    let chunk_len = if steps == 0 { 0 } else { steps / chunks };
    let remainder = if steps == 0 { 0 } else { steps % chunks };
    let mut csv = String::from("step,probe_loss\n");
    csv.push_str(&format!("0,{initial_probe_loss}\n"));
    let mut done = 0usize;
    for chunk in 0..chunks {
        let n = chunk_len + usize::from(chunk < remainder);
        if n == 0 {
            continue;
        }
        let cfg = TrainConfig {
            learning_rate: lr,
            batch_size: batch,
            steps: n,
            rng_seed: seed.wrapping_add(chunk as u64 + 1),
        };
        params = train(&params, &examples, &cfg)?;
        done += n;
        let (probe_loss, _) = loss_and_grad(&params, &probe)?;
        csv.push_str(&format!("{done},{probe_loss}\n"));
    }
    let (final_probe_loss, _) = loss_and_grad(&params, &probe)?;

    save_params(&params, &args.out)?;
    let csv_path = args
        .loss_csv
        .unwrap_or_else(|| args.out.with_extension("loss.csv"));
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let manifest = RunManifest {
        command: "train-head".into(),
        config: serde_json::json!({
            "lr": lr, "batch": batch, "steps": steps,
            "points_per_image": points_per_image,
            "oversample": oversample, "importance": importance,
        }),
        input_hashes: BTreeMap::from([(
            "annotations.json".to_string(),
            sha256_file(&args.data.join("annotations.json"))?,
        )]),
        output_hashes: BTreeMap::from([(
            args.out.display().to_string(),
            sha256_file(&args.out)?,
        )]),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &args.out.with_extension("manifest.json"))?;
    println!(
        "trained {} steps: probe loss {initial_probe_loss:.4} -> {final_probe_loss:.4}",
        steps
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// refine

/// Refines one sample and derives a scored prediction instance.
fn refine_sample(
    sample: &LoadedSample,
    head: &PointHeadParams,
    cfg: &RenderConfig,
) -> Result<MaskInstance> {
    let refined = if cfg.points_per_step == 0 {
        upsample_baseline(&sample.coarse, cfg.subdivision_steps)
    } else {
        refine_with_stats(&sample.coarse, &sample.features, head, cfg)?.0
    };
    let dense = binarize(&refined, cfg.binarize_threshold)?;
    // Score: mean foreground probability over predicted foreground cells.
    let mut prob_sum = 0.0;
    let mut fg = 0usize;
    for r in 0..refined.height() {
        for c in 0..refined.width() {
            if dense.get(r, c) {
                let z = refined.get(r, c, 0);
                prob_sum += 1.0 / (1.0 + (-z).exp());
                fg += 1;
            }
        }
    }
    let score = if fg == 0 { 0.0 } else { (prob_sum / fg as f64).clamp(0.0, 1.0) };
    instance_from_dense(&sample.image_id, sample.gt.class_id, score, &dense)
}

fn cmd_refine(args: RefineArgs) -> Result<()> {
    let start = Instant::now();
    let file_cfg = load_file_config(args.config.as_ref())?.refine;
    let dataset = load_dataset(&args.data)?;
    let steps = args
        .steps
        .or(file_cfg.steps)
        .unwrap_or(dataset.coarse_steps);
    let threshold = args.threshold.or(file_cfg.threshold).unwrap_or(0.5);

    let samples = dataset
        .samples_by_split
        .get(&args.split)
        .ok_or_else(|| Error::Config(format!("dataset has no split {:?}", args.split)))?;

    let head = load_params(&args.head)?;
    let mut predictions = Vec::with_capacity(samples.len());
    let mut baseline_better = 0usize;
    let mut iou_sum = 0.0;
    let mut baseline_iou_sum = 0.0;
    for sample in samples {
        let output_width = sample.coarse.width() << steps;
        let points = args
            .points
            .or(file_cfg.points)
            .unwrap_or_else(|| RenderConfig::default_points_for_width(output_width));
        let cfg = RenderConfig {
            subdivision_steps: steps,
            points_per_step: points,
            binarize_threshold: threshold,
        };
        let pred = refine_sample(sample, &head, &cfg)?;
        let baseline_cfg = RenderConfig {
            points_per_step: 0,
            ..cfg
        };
        let baseline = refine_sample(sample, &head, &baseline_cfg)?;
        let refined_iou = mask_iou(&pred.mask, &sample.gt.mask)?;
        let baseline_iou = mask_iou(&baseline.mask, &sample.gt.mask)?;
        if refined_iou >= baseline_iou {
            baseline_better += 1;
        }
        if std::env::var_os("RENDSEG_DEBUG").is_some() {
            eprintln!(
                "{} {} refined {refined_iou:.4} baseline {baseline_iou:.4}",
                sample.image_id,
                sample.gt.class_id.name()
            );
        }
        iou_sum += refined_iou;
        baseline_iou_sum += baseline_iou;
        predictions.push(pred);
    }
    save_predictions(&predictions, &args.out)?;

    let manifest = RunManifest {
        command: "refine".into(),
        config: serde_json::json!({
            "steps": steps, "points": args.points, "threshold": threshold,
            "split": args.split,
        }),
        input_hashes: BTreeMap::from([(
            args.head.display().to_string(),
            sha256_file(&args.head)?,
        )]),
        output_hashes: BTreeMap::from([(
            args.out.display().to_string(),
            sha256_file(&args.out)?,
        )]),
        seed: 0,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &args.out.with_extension("manifest.json"))?;
    let n = predictions.len().max(1) as f64;
    println!(
        "refined {} instances ({} at or above the bilinear baseline IoU; mean IoU {:.4} vs baseline {:.4})",
        predictions.len(),
        baseline_better,
        iou_sum / n,
        baseline_iou_sum / n
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / stats / report

fn load_ground_truth(path: &Path, split: Option<&str>) -> Result<Vec<MaskInstance>> {
    if path.is_dir() {
        let set = parse_via_file(&path.join("annotations.json"), &ViaConfig::default())?;
        let instances = match split {
            None => set.instances,
            Some(split) => {
                let text = std::fs::read_to_string(path.join("splits.json"))
                    .map_err(|e| Error::io(path.join("splits.json"), e))?;
                let splits: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
                let ids = splits
                    .get(split)
                    .ok_or_else(|| Error::Config(format!("dataset has no split {split:?}")))?;
                set.instances
                    .into_iter()
                    .filter(|inst| ids.contains(&inst.image_id))
                    .collect()
            }
        };
        return Ok(instances);
    }
    if split.is_some() {
        return Err(Error::Config(
            "--split requires --gt to be a dataset directory".into(),
        ));
    }
    // Try VIA project first, then prediction format.
    match parse_via_file(path, &ViaConfig::default()) {
        Ok(set) => Ok(set.instances),
        Err(_) => load_predictions(path),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let preds = load_predictions(&args.preds)?;
    let gts = load_ground_truth(&args.gt, args.split.as_deref())?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut reports = Vec::new();
    for mode in [EvalMode::Bbox, EvalMode::Segmentation] {
        let mut cfg = EvalConfig::new(mode);
        cfg.strict_classes = args.strict;
        let report = evaluate(&preds, &gts, &cfg)?;
        let name = match mode {
            EvalMode::Bbox => "report_bbox.json",
            EvalMode::Segmentation => "report_segm.json",
        };
        write_json(&report, &args.out.join(name))?;
        reports.push(report);
    }
    let table = format_report_table(Some(&reports[0]), Some(&reports[1]));
    let table_path = args.out.join("report.txt");
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    print!("{table}");
    println!(
        "mAP bbox {:.3} | segm {:.3}",
        reports[0].map, reports[1].map
    );

    let manifest = RunManifest {
        command: "eval".into(),
        config: serde_json::json!({ "strict": args.strict, "split": args.split }),
        input_hashes: BTreeMap::from([
            (args.preds.display().to_string(), sha256_file(&args.preds)?),
        ]),
        output_hashes: BTreeMap::from([
            (
                "report_bbox.json".to_string(),
                sha256_file(&args.out.join("report_bbox.json"))?,
            ),
            (
                "report_segm.json".to_string(),
                sha256_file(&args.out.join("report_segm.json"))?,
            ),
        ]),
        seed: 0,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let start = Instant::now();
    let preds = load_predictions(&args.preds)?;
    let kept: Vec<MaskInstance> = preds
        .into_iter()
        .filter(|p| p.score >= args.min_score)
        .collect();
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let stats = area_statistics(&kept);
    let series = boxplot_series(&kept);
    write_json(&stats, &args.out.join("area_stats.json"))?;
    write_json(&series, &args.out.join("boxplot.json"))?;
    let table = format_stats_table(&stats);
    let table_path = args.out.join("area_stats.txt");
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    print!("{table}");

    let manifest = RunManifest {
        command: "stats".into(),
        config: serde_json::json!({ "min_score": args.min_score }),
        input_hashes: BTreeMap::from([(
            args.preds.display().to_string(),
            sha256_file(&args.preds)?,
        )]),
        output_hashes: BTreeMap::from([(
            "area_stats.json".to_string(),
            sha256_file(&args.out.join("area_stats.json"))?,
        )]),
        seed: 0,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;
    Ok(())
}

fn load_report(path: &Path) -> Result<APReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Builds the comparison table printed by `report`.
pub fn format_comparison(baseline: &APReport, improved: &APReport) -> Result<String> {
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let base_classes: Vec<&String> = baseline.per_class.keys().collect();
    let imp_classes: Vec<&String> = improved.per_class.keys().collect();
    if base_classes != imp_classes {
        eprintln!("warning: class sets differ between reports; using the intersection");
    }
    for class in base_classes {
        if let (Some(b), Some(i)) = (baseline.per_class.get(class), improved.per_class.get(class)) {
            rows.push((class.clone(), *b, *i));
        }
    }
    rows.push(("Total (mAP)".to_string(), baseline.map, improved.map));
    if let (Some(b), Some(i)) = (baseline.ap50, improved.ap50) {
        rows.push(("IOU 0.5".to_string(), b, i));
    }
    if let (Some(b), Some(i)) = (baseline.ap75, improved.ap75) {
        rows.push(("IOU 0.75".to_string(), b, i));
    }
    for (name, b) in &baseline.area_map {
        if name == "all" {
            continue;
        }
        if let Some(i) = improved.area_map.get(name) {
            rows.push((format!("{name} area"), *b, *i));
        }
    }

    let name_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(10) + 2;
    let mut out = format!(
        "{:<name_w$}{:>10}{:>10}{:>14}\n",
        "Row", "Baseline", "Improved", "Improvement"
    );
    for (name, b, i) in rows {
        let imp = if b > 0.0 {
            format!("{:+.1}%", relative_improvement(b, i)?)
        } else {
            "n/a".to_string()
        };
        out.push_str(&format!("{name:<name_w$}{b:>10.3}{i:>10.3}{imp:>14}\n"));
    }
    Ok(out)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let baseline = load_report(&args.baseline)?;
    let improved = load_report(&args.improved)?;
    print!("{}", format_comparison(&baseline, &improved)?);
    Ok(())
}
