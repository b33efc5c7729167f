//! `feye`: command-line front end for the fisheye distortion-aware
//! contrastive pipeline.
//!
//! Subcommands cover the whole desk-scale workflow: `gen` (synthetic
//! dataset), `extract` (annotation files -> labeled patch pool), `stats`
//! (dataset statistics and naturalness-feature overlap), `pretrain`
//! (contrastive pre-training), `probe` (frozen-representation
//! evaluation), `sweep` (alpha study), and `distortion-curve`.
//!
//! All randomness derives from a single `--seed`; identical argv, config,
//! and seed produce byte-identical artifacts. `FEYE_THREADS` caps worker
//! parallelism. A `--config` file overrides built-in defaults and flags
//! override the config file.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use feye_core::eval::{probe_data_from, probe_split};
use feye_core::model::pool_channel_stats;
use feye_core::{
    alpha_sweep, build_patch_pool, embed_pool, generate_patch_pool, generate_scene_annotations,
    geometry_metrics, knn_probe, linear_probe, load_checkpoint, parse_annotation_file,
    pool_statistics, pretrain, read_pool, save_checkpoint, stream_rng, write_pool,
    AugmentationConfig, CheckpointMeta, DatasetManifest, EncoderModel, FisheyeCalibration,
    LossKind, ModelConfig, ProbeConfig, RegionScheme, SHAPE_CLASS_NAMES,
};

use config::{parse_alphas, parse_dims, FileConfig};
use output::{format_float, write_csv};

#[derive(Parser)]
#[command(
    name = "feye",
    version,
    about = "Distortion-aware contrastive representation learning for fisheye imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fisheye-style dataset (scenes, annotations,
    /// manifest, placement tally, and optionally a patch pool).
    Gen(GenArgs),
    /// Mine a labeled patch pool from a manifest of images + annotations.
    Extract(ExtractArgs),
    /// Dataset statistics: region counts, distance/area, area histogram,
    /// distortion curve, and naturalness-feature overlap when a pool is
    /// given. One CSV per table.
    Stats(StatsArgs),
    /// Contrastive pre-training of the encoder on a patch pool.
    Pretrain(PretrainArgs),
    /// Probe a frozen encoder: linear + kNN accuracy, center/edge gap,
    /// and embedding geometry.
    Probe(ProbeArgs),
    /// Train one model per alpha under identical seeds and report all
    /// probes as a CSV table.
    Sweep(SweepArgs),
    /// Tabulate the radial distortion polynomial d(rho).
    DistortionCurve(DistortionCurveArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory (images/, labels/, manifest.toml, tally.csv).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scene images.
    #[arg(long)]
    images: Option<usize>,
    /// Pixel noise standard deviation.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Region scheme used for the tally and manifest default:
    /// standard | large | small | levels:N.
    #[arg(long)]
    scheme: Option<String>,
    /// Also write a directly rendered patch pool to this path.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    patch_size: Option<usize>,
    /// Calibration file driving the synthetic warp (keys a0, a2, a3, a4).
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's scheme selector.
    #[arg(long)]
    scheme: Option<String>,
    /// Output pool path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Patch pool for naturalness-feature Gaussians (optional).
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    /// Calibration file (keys a0, a2, a3, a4); defaults to the synthetic
    /// calibration.
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Patches per step (each step sees twice as many augmented views).
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Objective: combined | semantic | distortion | infonce.
    #[arg(long)]
    loss: Option<String>,
    /// Write the per-epoch mean loss trace to this CSV.
    #[arg(long)]
    loss_curve: Option<PathBuf>,
    /// Comma-separated encoder hidden widths (default 256,256).
    #[arg(long)]
    hidden_dims: Option<String>,
    #[arg(long)]
    repr_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Trained checkpoint; omit with --random-init for an untrained
    /// baseline encoder.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Probe a randomly initialized encoder instead of a checkpoint.
    #[arg(long, default_value_t = false)]
    random_init: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    probe_epochs: Option<usize>,
    #[arg(long)]
    probe_lr: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Report CSV. Columns: alpha,loss_kind,levels,overall_accuracy,
    /// center_accuracy,edge_accuracy,gap,knn_accuracy,alignment,
    /// uniformity,class_<i>...
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    hidden_dims: Option<String>,
    #[arg(long)]
    repr_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Comma-separated alpha values, e.g. "0,0.25,0.5,0.75,1".
    #[arg(long)]
    alphas: String,
    /// Output directory: sweep.csv plus loss_trace_alpha_<a>.csv per run.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    probe_epochs: Option<usize>,
    #[arg(long)]
    probe_lr: Option<f64>,
    #[arg(long)]
    hidden_dims: Option<String>,
    #[arg(long)]
    repr_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DistortionCurveArgs {
    /// Calibration file; defaults to the synthetic calibration.
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// FEYE_THREADS caps worker parallelism for pool building, feature
/// extraction, and sweep runs.
fn init_thread_pool() -> Result<()> {
    if let Ok(value) = std::env::var("FEYE_THREADS") {
        let threads: usize = value
            .parse()
            .with_context(|| format!("FEYE_THREADS={value:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .context("initializing worker pool")?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::DistortionCurve(args) => cmd_distortion_curve(args),
    }
}

fn resolve_scheme(flag: Option<&str>, file: &FileConfig) -> Result<RegionScheme> {
    let selector = flag
        .map(str::to_string)
        .or_else(|| file.scheme.clone())
        .unwrap_or_else(|| "standard".to_string());
    Ok(RegionScheme::parse(&selector)?)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = file.seed(args.seed);
    let patch_size = file.patch_size(args.patch_size);
    let scheme = resolve_scheme(args.scheme.as_deref(), &file)?;
    let mut cfg = file.generator_config(seed, patch_size, args.images, args.noise_std);
    if let Some(cal_path) = &args.cal {
        cfg.calibration = FisheyeCalibration::load(cal_path)?;
    }
    cfg.validate()?;

    let (manifest, tally) = generate_scene_annotations(&cfg, &scheme, &args.out_dir)?;
    let tally_rows: Vec<String> = (0..tally.counts.len())
        .flat_map(|class_id| {
            let counts = tally.counts[class_id].clone();
            counts.into_iter().enumerate().map(move |(level, count)| {
                format!("{class_id},{},{level},{count}", SHAPE_CLASS_NAMES[class_id])
            })
        })
        .collect();
    write_csv(
        &args.out_dir.join("tally.csv"),
        "class_id,class_name,level,count",
        &tally_rows,
    )?;
    log::info!(
        "generated {} images, {} objects (level-0 fraction {:.4}) under {}",
        manifest.entries.len(),
        tally.total(),
        tally.level0_fraction(),
        args.out_dir.display()
    );

    if let Some(pool_path) = &args.pool {
        let pool = generate_patch_pool(&cfg, &scheme)?;
        write_pool(pool_path, &pool)?;
        log::info!("wrote pool of {} patches to {}", pool.len(), pool_path.display());
    }
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let patch_size = file.patch_size(args.patch_size);
    let manifest = DatasetManifest::load(&args.manifest)?;
    let selector = args
        .scheme
        .clone()
        .unwrap_or_else(|| manifest.scheme.clone());
    let scheme = RegionScheme::parse(&selector)?;
    let pool = build_patch_pool(&manifest, &scheme, (patch_size, patch_size))?;
    write_pool(&args.out, &pool)?;
    log::info!(
        "extracted {} patches ({} classes x {} levels) to {}",
        pool.len(),
        pool.num_classes,
        pool.level_count,
        args.out.display()
    );
    Ok(())
}

fn load_all_annotations(manifest: &DatasetManifest) -> Result<Vec<feye_core::ObjectAnnotation>> {
    let mut annotations = Vec::new();
    for entry in &manifest.entries {
        let path = manifest.resolve(&entry.annotation);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let parsed = parse_annotation_file(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        annotations.extend(parsed);
    }
    Ok(annotations)
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let selector = args
        .scheme
        .clone()
        .unwrap_or_else(|| manifest.scheme.clone());
    let scheme = RegionScheme::parse(&selector)?;
    let cal = match &args.cal {
        Some(path) => FisheyeCalibration::load(path)?,
        None => FisheyeCalibration::synthetic_default(),
    };
    let pool = args.pool.as_deref().map(read_pool).transpose()?;
    let annotations = load_all_annotations(&manifest)?;
    let report = pool_statistics(
        &annotations,
        manifest.num_classes,
        &scheme,
        &cal,
        pool.as_ref(),
    )?;
    let _ = file; // config file currently carries no stats-specific knobs

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let count_rows: Vec<String> = report
        .class_region_counts
        .iter()
        .enumerate()
        .flat_map(|(class_id, counts)| {
            let name = manifest
                .class_names
                .get(class_id)
                .cloned()
                .unwrap_or_else(|| class_id.to_string());
            counts
                .clone()
                .into_iter()
                .enumerate()
                .map(move |(level, count)| format!("{class_id},{name},{level},{count}"))
        })
        .collect();
    write_csv(
        &args.out_dir.join("region_counts.csv"),
        "class_id,class_name,level,count",
        &count_rows,
    )?;

    let da_rows: Vec<String> = report
        .distance_area
        .iter()
        .map(|p| {
            format!(
                "{},{},{}",
                p.class_id,
                format_float(p.distance),
                format_float(p.area)
            )
        })
        .collect();
    write_csv(
        &args.out_dir.join("distance_area.csv"),
        "class_id,distance,area",
        &da_rows,
    )?;

    let hist_rows: Vec<String> = report
        .area_histogram
        .iter()
        .map(|b| format!("{},{},{}", format_float(b.lo), format_float(b.hi), b.count))
        .collect();
    write_csv(
        &args.out_dir.join("area_histogram.csv"),
        "area_lo,area_hi,count",
        &hist_rows,
    )?;

    let curve_rows: Vec<String> = report
        .distortion_curve
        .iter()
        .map(|(rho, d)| format!("{},{}", format_float(*rho), format_float(*d)))
        .collect();
    write_csv(
        &args.out_dir.join("distortion_curve.csv"),
        "rho,distortion",
        &curve_rows,
    )?;

    println!("objects: {}", report.distance_area.len());
    for (class_id, counts) in report.class_region_counts.iter().enumerate() {
        println!(
            "class {class_id} ({}): counts per level {:?}",
            manifest
                .class_names
                .get(class_id)
                .cloned()
                .unwrap_or_default(),
            counts
        );
    }

    if let Some(groups) = &report.brisque_overlap {
        let rows: Vec<String> = groups
            .iter()
            .map(|g| {
                let fmt = |s: &Option<feye_core::GaussianSummary>| match s {
                    Some(s) => format!("{},{}", format_float(s.mean), format_float(s.std)),
                    None => ",".to_string(),
                };
                format!(
                    "{},{},{},{},{},{}",
                    g.class_id,
                    g.center_count,
                    fmt(&g.center),
                    g.edge_count,
                    fmt(&g.edge),
                    g.overlap.map(format_float).unwrap_or_default()
                )
            })
            .collect();
        write_csv(
            &args.out_dir.join("naturalness_overlap.csv"),
            "class_id,center_count,center_mean,center_std,edge_count,edge_mean,edge_std,overlap",
            &rows,
        )?;
        for g in groups {
            if let Some(overlap) = g.overlap {
                println!(
                    "class {}: center/edge naturalness overlap {:.4}",
                    g.class_id, overlap
                );
            }
        }
    }
    log::info!("stats written to {}", args.out_dir.display());
    Ok(())
}

fn model_config_from(
    pool: &feye_core::PatchPool,
    hidden: Option<&str>,
    repr_dim: Option<usize>,
    embed_dim: Option<usize>,
    file: &FileConfig,
) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::for_pool(pool);
    if let Some(dims) = hidden {
        cfg.hidden_dims = parse_dims(dims)?;
    } else if let Some(dims) = &file.model.hidden_dims {
        cfg.hidden_dims = dims.clone();
    }
    if let Some(dim) = repr_dim.or(file.model.representation_dim) {
        cfg.representation_dim = dim;
    }
    if let Some(dim) = embed_dim.or(file.model.embedding_dim) {
        cfg.embedding_dim = dim;
    }
    Ok(cfg)
}

fn write_loss_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let rows: Vec<String> = curve
        .iter()
        .enumerate()
        .map(|(epoch, loss)| format!("{},{}", epoch + 1, format_float(*loss)))
        .collect();
    write_csv(path, "epoch,mean_loss", &rows)
}

fn cmd_pretrain(args: PretrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = file.seed(args.seed);
    let loss_cfg = file.loss_config(args.tau, args.alpha);
    loss_cfg.validate()?;
    let train_cfg = file.train_config(
        seed,
        args.epochs,
        args.batch,
        args.lr,
        args.weight_decay,
        args.momentum,
    );
    let kind = match &args.loss {
        Some(name) => LossKind::parse(name)?,
        None => LossKind::Combined,
    };
    let pool = read_pool(&args.pool)?;
    let model_cfg = model_config_from(
        &pool,
        args.hidden_dims.as_deref(),
        args.repr_dim,
        args.embed_dim,
        &file,
    )?;

    log::info!(
        "pre-training on {} patches: {} loss, alpha {}, tau {}, {} epochs, batch {}",
        pool.len(),
        kind.name(),
        loss_cfg.alpha,
        loss_cfg.temperature,
        train_cfg.epochs,
        train_cfg.batch_size
    );
    let result = pretrain(&pool, &model_cfg, &loss_cfg, &train_cfg, kind)?;
    if result.skipped_batches > 0 {
        log::warn!("{} batches skipped (degenerate label partition)", result.skipped_batches);
    }

    let meta = CheckpointMeta {
        temperature: loss_cfg.temperature,
        alpha: loss_cfg.alpha,
        seed,
        loss_kind: kind.name().to_string(),
        projection_discardable: true,
        augmentation: result.augmentation.clone(),
    };
    save_checkpoint(&args.out, &result.model, &meta)?;
    if let Some(curve_path) = &args.loss_curve {
        write_loss_curve(curve_path, &result.loss_curve)?;
    }
    log::info!(
        "checkpoint written to {} (final epoch loss {:.6})",
        args.out.display(),
        result.loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let pool = read_pool(&args.pool)?;
    let probe_cfg = ProbeConfig {
        train_fraction: args
            .train_frac
            .or(file.probe.train_fraction)
            .unwrap_or(0.8),
        epochs: args.probe_epochs.or(file.probe.epochs).unwrap_or(300),
        learning_rate: args.probe_lr.or(file.probe.learning_rate).unwrap_or(0.5),
        split_seed: file.seed(args.seed),
    };
    let knn_k = args.knn_k.or(file.probe.knn_k).unwrap_or(5);

    let (model, augmentation, alpha, loss_kind): (EncoderModel, AugmentationConfig, String, String) =
        match (&args.checkpoint, args.random_init) {
            (Some(path), false) => {
                let (model, meta) = load_checkpoint(path)?;
                (
                    model,
                    meta.augmentation,
                    format_float(meta.alpha),
                    meta.loss_kind,
                )
            }
            (None, true) => {
                let seed = file.seed(args.seed);
                let model_cfg = model_config_from(
                    &pool,
                    args.hidden_dims.as_deref(),
                    args.repr_dim,
                    args.embed_dim,
                    &file,
                )?;
                let mut rng = stream_rng(seed, "init", 0);
                let model = EncoderModel::init(&model_cfg, &mut rng)?;
                let (mean, std) = pool_channel_stats(&pool);
                let augmentation = AugmentationConfig {
                    normalize_mean: mean,
                    normalize_std: std,
                    ..AugmentationConfig::for_pool(&pool)
                };
                (model, augmentation, String::new(), "random-init".to_string())
            }
            (Some(_), true) => bail!("--checkpoint and --random-init are mutually exclusive"),
            (None, false) => bail!("need either --checkpoint or --random-init"),
        };

    if model.input_dim()
        != usize::from(pool.patch_height) * usize::from(pool.patch_width) * usize::from(pool.channels)
    {
        bail!(
            "model input dim {} does not match pool patches",
            model.input_dim()
        );
    }

    let embedded = embed_pool(&model, &pool, &augmentation)?;
    let (train_idx, test_idx) = probe_split(pool.len(), probe_cfg.train_fraction, probe_cfg.split_seed);
    let train = probe_data_from(&embedded, &train_idx);
    let test = probe_data_from(&embedded, &test_idx);
    let (report, _) = linear_probe(
        &train,
        &test,
        usize::from(pool.num_classes),
        probe_cfg.epochs,
        probe_cfg.learning_rate,
    )?;
    let knn_accuracy = knn_probe(&embedded.representations, &embedded.labels, knn_k)?;
    let geometry = geometry_metrics(&embedded.embeddings, &embedded.labels, &embedded.levels)?;

    println!("loss: {loss_kind}  alpha: {alpha}  levels: {}", pool.level_count);
    println!("linear probe accuracy: {:.4}", report.overall_accuracy);
    println!(
        "center {:.4} / edge {:.4} (gap {:+.4})",
        report.center_accuracy, report.edge_accuracy, report.gap
    );
    for (class_id, acc) in report.per_class_accuracy.iter().enumerate() {
        println!("  class {class_id}: {acc:.4}");
    }
    println!("knn (k={knn_k}) accuracy: {knn_accuracy:.4}");
    println!(
        "alignment {:.4}  uniformity {:.4}",
        geometry.alignment, geometry.uniformity
    );

    if let Some(out) = &args.out {
        let mut header = String::from(
            "alpha,loss_kind,levels,overall_accuracy,center_accuracy,edge_accuracy,gap,knn_accuracy,alignment,uniformity",
        );
        for class_id in 0..report.per_class_accuracy.len() {
            header.push_str(&format!(",class_{class_id}"));
        }
        let mut row = format!(
            "{alpha},{loss_kind},{},{},{},{},{},{},{},{}",
            pool.level_count,
            format_float(report.overall_accuracy),
            format_float(report.center_accuracy),
            format_float(report.edge_accuracy),
            format_float(report.gap),
            format_float(knn_accuracy),
            format_float(geometry.alignment),
            format_float(geometry.uniformity),
        );
        for acc in &report.per_class_accuracy {
            row.push(',');
            row.push_str(&format_float(*acc));
        }
        write_csv(out, &header, &[row])?;
        log::info!("probe report written to {}", out.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let alphas = parse_alphas(&args.alphas)?;
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        bail!("alphas must lie in [0, 1]");
    }
    let seed = file.seed(args.seed);
    let base_loss = file.loss_config(args.tau, None);
    let train_cfg = file.train_config(
        seed,
        args.epochs,
        args.batch,
        args.lr,
        args.weight_decay,
        args.momentum,
    );
    let probe_cfg = ProbeConfig {
        train_fraction: args
            .train_frac
            .or(file.probe.train_fraction)
            .unwrap_or(0.8),
        epochs: args.probe_epochs.or(file.probe.epochs).unwrap_or(300),
        learning_rate: args.probe_lr.or(file.probe.learning_rate).unwrap_or(0.5),
        split_seed: seed,
    };
    let pool = read_pool(&args.pool)?;
    let model_cfg = model_config_from(
        &pool,
        args.hidden_dims.as_deref(),
        args.repr_dim,
        args.embed_dim,
        &file,
    )?;

    log::info!(
        "sweeping alpha over {alphas:?} on {} patches ({} epochs each)",
        pool.len(),
        train_cfg.epochs
    );
    let rows = alpha_sweep(&pool, &alphas, &model_cfg, &base_loss, &train_cfg, &probe_cfg)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                format_float(r.alpha),
                format_float(r.probe_accuracy),
                format_float(r.gap),
                format_float(r.alignment),
                format_float(r.uniformity),
                format_float(r.final_loss)
            )
        })
        .collect();
    write_csv(
        &args.out_dir.join("sweep.csv"),
        "alpha,probe_accuracy,gap,alignment,uniformity,final_loss",
        &csv_rows,
    )?;
    for r in &rows {
        write_loss_curve(
            &args
                .out_dir
                .join(format!("loss_trace_alpha_{}.csv", format_float(r.alpha))),
            &r.loss_curve,
        )?;
        println!(
            "alpha {}: probe {:.4}, gap {:+.4}, alignment {:.4}, uniformity {:.4}",
            r.alpha, r.probe_accuracy, r.gap, r.alignment, r.uniformity
        );
    }
    log::info!("sweep written to {}", args.out_dir.display());
    Ok(())
}

fn cmd_distortion_curve(args: DistortionCurveArgs) -> Result<()> {
    if args.samples < 2 {
        bail!("need at least 2 samples");
    }
    let cal = match &args.cal {
        Some(path) => FisheyeCalibration::load(path)?,
        None => FisheyeCalibration::synthetic_default(),
    };
    let rows: Vec<String> = (0..args.samples)
        .map(|i| {
            let rho = feye_core::MAX_RADIAL_DISTANCE * i as f64 / (args.samples - 1) as f64;
            format!("{},{}", format_float(rho), format_float(cal.distortion_at(rho)))
        })
        .collect();
    match &args.out {
        Some(path) => write_csv(path, "rho,distortion", &rows)?,
        None => {
            println!("rho,distortion");
            for row in &rows {
                println!("{row}");
            }
        }
    }
    Ok(())
}
