use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraudkit::dataset::FeatureConfig;
use fraudkit::forest::{ClassWeighting, FeaturesPerSplit, ImportanceMetric};
use fraudkit::pipeline::{self, CalibrationMethod, ExtractMode, PipelineConfig};
use fraudkit::{Error, Result};
use tracing_subscriber::EnvFilter;

/// Leakage-safe graph features, class-weighted forests and imbalance-aware
/// evaluation for transaction fraud detection.
#[derive(Parser, Debug)]
#[command(name = "fraudkit", version, about)]
struct Cli {
    /// Log filter, e.g. `info` or `fraudkit=debug` (overrides RUST_LOG).
    #[arg(long, global = true)]
    log: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Pipeline configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct Inputs {
    /// Transaction features CSV.
    #[arg(long = "features-csv")]
    features_csv: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Features file is the header-less Elliptic layout.
    #[arg(long)]
    raw: bool,
    /// Cached causal graph-feature matrix written by `extract`.
    #[arg(long)]
    graph_features: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// sqrt, all, or a fraction in (0, 1].
    #[arg(long)]
    features_per_split: Option<FeaturesPerSplit>,
    /// balanced or none.
    #[arg(long)]
    class_weighting: Option<ClassWeighting>,
}

#[derive(Args, Debug, Default)]
struct MetricFlags {
    /// none, sigmoid, isotonic or both.
    #[arg(long)]
    calibration: Option<CalibrationMethod>,
    #[arg(long)]
    bins: Option<usize>,
    /// Comma-separated alert budgets for Precision@K.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    importance_repeats: Option<usize>,
    /// roc_auc or ap.
    #[arg(long)]
    importance_metric: Option<ImportanceMetric>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute graph descriptors (causal and/or full-graph).
    Extract {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long)]
        raw: bool,
        /// causal, full or both.
        #[arg(long, default_value = "causal")]
        mode: ExtractMode,
        /// Skip the log1p companion columns.
        #[arg(long)]
        no_log1p: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare causal descriptors with the full-graph baseline.
    Audit {
        #[arg(long)]
        causal: PathBuf,
        #[arg(long)]
        full: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the forest and fit calibrators and thresholds on validation.
    Train {
        /// Feature configuration: T, G or TG.
        #[arg(long)]
        features: Option<FeatureConfig>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        metrics: MetricFlags,
    },
    /// Score all splits with a trained model and write the report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        metrics: MetricFlags,
    },
}

fn base_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

fn apply_inputs(cfg: &mut PipelineConfig, i: Inputs) {
    let p = &mut cfg.inputs;
    p.features = i.features_csv.or(p.features.take());
    p.edges = i.edges.or(p.edges.take());
    p.classes = i.classes.or(p.classes.take());
    p.raw_elliptic |= i.raw;
    p.graph_features = i.graph_features.or(p.graph_features.take());
}

fn apply_train(cfg: &mut PipelineConfig, t: TrainFlags) {
    let c = &mut cfg.train;
    c.n_trees = t.n_trees.unwrap_or(c.n_trees);
    c.max_depth = t.max_depth.or(c.max_depth);
    c.min_samples_leaf = t.min_samples_leaf.unwrap_or(c.min_samples_leaf);
    c.features_per_split = t.features_per_split.unwrap_or(c.features_per_split);
    c.class_weighting = t.class_weighting.unwrap_or(c.class_weighting);
}

fn apply_metrics(cfg: &mut PipelineConfig, m: MetricFlags) {
    cfg.calibration = m.calibration.unwrap_or(cfg.calibration);
    let o = &mut cfg.metrics;
    o.reliability_bins = m.bins.unwrap_or(o.reliability_bins);
    if let Some(k) = m.k {
        o.precision_at_k = k;
    }
    o.threshold_grid_step = m.grid_step.unwrap_or(o.threshold_grid_step);
    o.importance_repeats = m.importance_repeats.unwrap_or(o.importance_repeats);
    o.importance_metric = m.importance_metric.unwrap_or(o.importance_metric);
}

fn output_dir(cfg: &mut PipelineConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    if out.is_some() {
        cfg.output_dir = out;
    }
    cfg.output_dir
        .clone()
        .ok_or_else(|| Error::invalid("no output directory: pass --out or set output_dir"))
}

fn report(out: &Path, manifest: &pipeline::RunManifest) {
    println!(
        "{}: wrote {} artifacts to {}",
        manifest.command,
        manifest.artifacts.len(),
        out.display()
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            features,
            edges,
            classes,
            raw,
            mode,
            no_log1p,
            out,
            common,
        } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(
                &mut cfg,
                Inputs {
                    features_csv: features,
                    edges,
                    classes,
                    raw,
                    graph_features: None,
                },
            );
            if no_log1p {
                cfg.descriptors.log1p = false;
            }
            cfg.normalize()?;
            let out = output_dir(&mut cfg, out)?;
            let m = pipeline::run_in_pool(cfg.threads, || pipeline::cmd_extract(&cfg, mode, &out))?;
            report(&out, &m);
        }
        Command::Audit {
            causal,
            full,
            tol,
            out,
            common,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.normalize()?;
            let out = output_dir(&mut cfg, out)?;
            let m = pipeline::run_in_pool(cfg.threads, || pipeline::cmd_audit(&cfg, &causal, &full, tol, &out))?;
            report(&out, &m);
        }
        Command::Train {
            features,
            out,
            common,
            inputs,
            train,
            metrics,
        } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, inputs);
            apply_train(&mut cfg, train);
            apply_metrics(&mut cfg, metrics);
            cfg.feature_config = features.unwrap_or(cfg.feature_config);
            cfg.normalize()?;
            let out = output_dir(&mut cfg, out)?;
            let m = pipeline::run_in_pool(cfg.threads, || pipeline::cmd_train(&cfg, &out))?;
            report(&out, &m);
        }
        Command::Evaluate {
            model,
            out,
            common,
            inputs,
            metrics,
        } => {
            let mut cfg = base_config(&common)?;
            apply_inputs(&mut cfg, inputs);
            apply_metrics(&mut cfg, metrics);
            cfg.normalize()?;
            let out = output_dir(&mut cfg, out)?;
            let m = pipeline::run_in_pool(cfg.threads, || pipeline::cmd_evaluate(&cfg, &model, &out))?;
            report(&out, &m);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = match &cli.log {
        Some(f) => EnvFilter::new(f),
        None => EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
    };
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
