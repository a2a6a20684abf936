//! End-to-end orchestration behind the `fraudkit` subcommands.
//!
//! Each command writes its artifacts into an output directory together with
//! a `run_manifest.json` that echoes the configuration, digests the inputs
//! and every emitted file, and records wall-clock timings. Metric files carry
//! no timestamps, so equal configs and inputs give byte-identical outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{brier_score, fit_isotonic, fit_sigmoid, reliability_table, Calibrator};
use crate::dataset::{
    fraud_rate_by_timestep, label_counts, load_elliptic, make_splits, EllipticData, FeatureConfig, Split, SplitBundle,
    SplitPart, SplitSpec,
};
use crate::error::{Error, Result};
use crate::features::{extract_causal, extract_full, leakage_audit, DescriptorSpec};
use crate::forest::{fit, permutation_importance, predict_proba, ForestModel, ImportanceMetric, TrainConfig};
use crate::matrix::{format_float, read_with_manifest, write_with_manifest, FeatureMatrix, Provenance};
use crate::metrics::{
    average_precision, confusion_at, feature_label_correlation, grid_with_step, pr_curve, precision_at_k, roc_auc,
    roc_curve, select_threshold, threshold_sweep, ConfusionMatrix, CurveData, ThresholdChoice, ThresholdObjective,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub features: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    /// Header-less features file as distributed with the Elliptic dataset.
    pub raw_elliptic: bool,
    /// Cached causal graph-feature matrix from `extract`; recomputed when absent.
    pub graph_features: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    None,
    Sigmoid,
    Isotonic,
    #[default]
    Both,
}

impl CalibrationMethod {
    pub fn methods(self) -> &'static [&'static str] {
        match self {
            CalibrationMethod::None => &[],
            CalibrationMethod::Sigmoid => &["sigmoid"],
            CalibrationMethod::Isotonic => &["isotonic"],
            CalibrationMethod::Both => &["sigmoid", "isotonic"],
        }
    }
}

impl FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(CalibrationMethod::None),
            "sigmoid" | "platt" => Ok(CalibrationMethod::Sigmoid),
            "isotonic" => Ok(CalibrationMethod::Isotonic),
            "both" => Ok(CalibrationMethod::Both),
            _ => Err(Error::invalid(format!(
                "calibration `{s}`: expected none, sigmoid, isotonic or both"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }

    fn of(self, bundle: &SplitBundle) -> &Split {
        match self {
            SplitName::Train => &bundle.train,
            SplitName::Validation => &bundle.validation,
            SplitName::Test => &bundle.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub reliability_bins: usize,
    pub precision_at_k: Vec<usize>,
    pub threshold_grid_step: f64,
    pub fixed_thresholds: Vec<f64>,
    pub objectives: Vec<ThresholdObjective>,
    pub importance_repeats: usize,
    pub importance_metric: ImportanceMetric,
    pub importance_splits: Vec<SplitName>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            reliability_bins: 10,
            precision_at_k: vec![50, 100, 200, 400],
            threshold_grid_step: 0.01,
            fixed_thresholds: vec![0.5, 0.8],
            objectives: vec![
                ThresholdObjective::MaxF1,
                ThresholdObjective::MinRecall { value: 0.8 },
                ThresholdObjective::MinPrecision { value: 0.8 },
            ],
            importance_repeats: 5,
            importance_metric: ImportanceMetric::RocAuc,
            importance_splits: vec![SplitName::Test],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    pub split: SplitSpec,
    pub descriptors: DescriptorSpec,
    pub feature_config: FeatureConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationMethod,
    pub metrics: MetricOptions,
    pub output_dir: Option<PathBuf>,
    /// Master seed; copied into `train.seed` by [`PipelineConfig::normalize`].
    pub seed: u64,
    /// Worker threads; `None` uses one per core. Results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: InputPaths::default(),
            split: SplitSpec::default(),
            descriptors: DescriptorSpec::default(),
            feature_config: FeatureConfig::TG,
            train: TrainConfig::default(),
            calibration: CalibrationMethod::default(),
            metrics: MetricOptions::default(),
            output_dir: None,
            seed: 0,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Propagates the master seed and checks every section.
    pub fn normalize(&mut self) -> Result<()> {
        self.train.seed = self.seed;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.descriptors.validate()?;
        self.train.validate()?;
        let m = &self.metrics;
        if m.reliability_bins < 2 {
            return Err(Error::invalid("reliability_bins must be at least 2"));
        }
        if m.precision_at_k.contains(&0) {
            return Err(Error::invalid("precision_at_k entries must be positive"));
        }
        if !(m.threshold_grid_step > 0.0 && m.threshold_grid_step <= 1.0) {
            return Err(Error::invalid("threshold_grid_step must lie in (0, 1]"));
        }
        if m.fixed_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("fixed thresholds must lie in [0, 1]"));
        }
        for o in &m.objectives {
            if let ThresholdObjective::MinRecall { value } | ThresholdObjective::MinPrecision { value } = o {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::invalid(format!("objective {} outside [0, 1]", o.label())));
                }
            }
        }
        if m.importance_repeats == 0 {
            return Err(Error::invalid("importance_repeats must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, label: String) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            path: label,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<FileDigest>,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "run_manifest.json";

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE_NAME);
        let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn artifact(&self, name: &str) -> Option<&FileDigest> {
        self.artifacts.iter().find(|a| a.path == name)
    }
}

/// Collects emitted files and timings for the run manifest.
struct Run {
    dir: PathBuf,
    command: &'static str,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
    timings: Vec<Timing>,
    clock: Instant,
}

impl Run {
    fn start(dir: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            command,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
            clock: Instant::now(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path, path.display().to_string())?);
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file already written under the output directory.
    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.path(name);
        self.artifacts.push(FileDigest::of(&path, name.to_string())?);
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.record(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
        tracing::info!(stage, "done");
    }

    fn finish(self, config: &PipelineConfig) -> Result<RunManifest> {
        let manifest = RunManifest {
            version: crate::VERSION.to_string(),
            command: self.command.to_string(),
            config: config.clone(),
            inputs: self.inputs,
            artifacts: self.artifacts,
            timings: self.timings,
        };
        let path = self.dir.join(RunManifest::FILE_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Runs `f` on a dedicated rayon pool of `threads` workers.
pub fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing input path `{name}`")))
}

fn load_inputs(cfg: &PipelineConfig, run: &mut Run) -> Result<EllipticData> {
    let features = required(&cfg.inputs.features, "features")?;
    let edges = required(&cfg.inputs.edges, "edges")?;
    let classes = required(&cfg.inputs.classes, "classes")?;
    for p in [features, edges, classes] {
        run.input(p)?;
    }
    let data = load_elliptic(features, edges, classes, cfg.inputs.raw_elliptic)?;
    tracing::info!(
        nodes = data.graph.node_count(),
        edges = data.graph.edge_count(),
        "loaded transaction graph"
    );
    Ok(data)
}

fn causal_graph_features(cfg: &PipelineConfig, data: &EllipticData, run: &mut Run) -> Result<FeatureMatrix> {
    match &cfg.inputs.graph_features {
        Some(path) => {
            run.input(path)?;
            let m = read_with_manifest(path, Provenance::Causal)?;
            if m.provenance() != Provenance::Causal {
                return Err(Error::SchemaMismatch(format!(
                    "{} has {:?} provenance; training and evaluation require causal graph features",
                    path.display(),
                    m.provenance()
                )));
            }
            Ok(m)
        }
        None => extract_causal(&data.graph, &cfg.descriptors),
    }
}

fn build_bundle(cfg: &PipelineConfig, config: FeatureConfig, run: &mut Run) -> Result<(EllipticData, SplitBundle)> {
    let data = load_inputs(cfg, run)?;
    let graph = if config.uses_graph() {
        Some(causal_graph_features(cfg, &data, run)?)
    } else {
        None
    };
    let bundle = make_splits(
        &data.records,
        config.uses_attributes().then_some(&data.attributes),
        graph.as_ref(),
        &cfg.split,
        config,
    )?;
    Ok((data, bundle))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    Causal,
    Full,
    Both,
}

impl FromStr for ExtractMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "causal" => Ok(ExtractMode::Causal),
            "full" => Ok(ExtractMode::Full),
            "both" => Ok(ExtractMode::Both),
            _ => Err(Error::invalid(format!("mode `{s}`: expected causal, full or both"))),
        }
    }
}

pub const CAUSAL_FEATURES: &str = "graph_features_causal.csv";
pub const FULL_FEATURES: &str = "graph_features_full.csv";

/// Computes graph descriptors and writes them with sidecar manifests.
pub fn cmd_extract(cfg: &PipelineConfig, mode: ExtractMode, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start(out, "extract")?;
    let data = load_inputs(cfg, &mut run)?;
    run.lap("load");
    let emit = |name: &str, m: &FeatureMatrix, run: &mut Run| -> Result<()> {
        let side = write_with_manifest(m, &run.path(name), Some(&cfg.descriptors))?;
        run.record(name)?;
        run.record(side.file_name().and_then(|s| s.to_str()).expect("utf-8 sidecar name"))
    };
    if matches!(mode, ExtractMode::Causal | ExtractMode::Both) {
        let m = extract_causal(&data.graph, &cfg.descriptors)?;
        emit(CAUSAL_FEATURES, &m, &mut run)?;
        run.lap("extract_causal");
    }
    if matches!(mode, ExtractMode::Full | ExtractMode::Both) {
        let m = extract_full(&data.graph, &cfg.descriptors)?;
        emit(FULL_FEATURES, &m, &mut run)?;
        run.lap("extract_full");
    }
    run.finish(cfg)
}

/// Compares a causal matrix with its full-graph counterpart.
pub fn cmd_audit(cfg: &PipelineConfig, causal: &Path, full: &Path, tol: f64, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start(out, "audit")?;
    run.input(causal)?;
    run.input(full)?;
    let c = read_with_manifest(causal, Provenance::Causal)?;
    let f = read_with_manifest(full, Provenance::Full)?;
    let report = leakage_audit(&c, &f, tol)?;
    report.write_columns_csv(&run.path("leakage_columns.csv"))?;
    run.record("leakage_columns.csv")?;
    report.write_timesteps_csv(&run.path("leakage_timesteps.csv"))?;
    run.record("leakage_timesteps.csv")?;
    run.write_json("leakage_report.json", &report)?;
    run.lap("audit");
    run.finish(cfg)
}

/// Validation-selected threshold for one score variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedThreshold {
    pub variant: String,
    pub objective: ThresholdObjective,
    pub label: String,
    /// Absent when the objective was infeasible on validation.
    pub choice: Option<ThresholdChoice>,
    pub infeasible_best: Option<f64>,
}

/// Everything `evaluate` needs, fitted on train (forest) and validation
/// (calibrators, thresholds) only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: String,
    pub feature_config: FeatureConfig,
    pub split: SplitSpec,
    pub forest: ForestModel,
    pub calibrators: Vec<Calibrator>,
    pub thresholds: Vec<SelectedThreshold>,
}

impl TrainedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedModel = serde_json::from_str(&s)?;
        m.forest.validate()?;
        Ok(m)
    }

    pub fn calibrator(&self, name: &str) -> Option<&Calibrator> {
        self.calibrators.iter().find(|c| c.name() == name)
    }

    fn thresholds_for(&self, variant: &str) -> Vec<(String, f64)> {
        self.thresholds
            .iter()
            .filter(|t| t.variant == variant)
            .filter_map(|t| t.choice.as_ref().map(|c| (t.label.clone(), c.threshold)))
            .collect()
    }

    /// Raw forest scores followed by each requested calibrated variant.
    pub fn variants(&self, raw: &[f64], methods: &[&str]) -> Result<Vec<(String, Vec<f64>)>> {
        let mut out = vec![("raw".to_string(), raw.to_vec())];
        for &m in methods {
            let c = self.calibrator(m).ok_or_else(|| {
                Error::invalid(format!("model has no {m} calibrator; retrain with calibration enabled"))
            })?;
            out.push((m.to_string(), c.apply(raw)));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub k: usize,
    /// Absent when the split has fewer than `k` rows.
    pub precision: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledConfusion {
    pub label: String,
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scalar metrics of one score variant on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub split: String,
    pub variant: String,
    pub rows: usize,
    pub positives: usize,
    /// Absent when the split holds a single class.
    pub roc_auc: Option<f64>,
    pub average_precision: Option<f64>,
    pub brier: f64,
    pub max_reliability_gap: f64,
    pub precision_at_k: Vec<PrecisionAtK>,
    pub confusion: Vec<LabeledConfusion>,
}

struct Evaluated {
    summary: ScoreSummary,
    curves: Vec<CurveData>,
    reliability: String,
}

fn single_class_ok<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass(msg)) => {
            tracing::warn!("{msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn evaluate_scores(
    split: SplitName,
    variant: &str,
    scores: &[f64],
    data: &Split,
    opts: &MetricOptions,
    selected: &[(String, f64)],
) -> Result<Evaluated> {
    let labels = &data.labels;
    let ids = data.matrix.row_ids();
    let roc = single_class_ok(roc_curve(scores, labels))?;
    let pr = single_class_ok(pr_curve(scores, labels))?;
    let sweep = threshold_sweep(scores, labels, &grid_with_step(opts.threshold_grid_step))?;
    let table = reliability_table(scores, labels, opts.reliability_bins)?;
    let precision_at_k = opts
        .precision_at_k
        .iter()
        .map(|&k| {
            Ok(PrecisionAtK {
                k,
                precision: if k <= scores.len() {
                    Some(precision_at_k(scores, labels, ids, k)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<_>>()?;
    let confusion = opts
        .fixed_thresholds
        .iter()
        .map(|&t| (format!("fixed_{t}"), t))
        .chain(selected.iter().cloned())
        .map(|(label, t)| {
            let cm = confusion_at(scores, labels, t);
            LabeledConfusion {
                label,
                precision: cm.precision(),
                recall: cm.recall(),
                f1: cm.f1(),
                confusion: cm,
            }
        })
        .collect();
    let summary = ScoreSummary {
        split: split.as_str().to_string(),
        variant: variant.to_string(),
        rows: scores.len(),
        positives: data.positives(),
        roc_auc: single_class_ok(roc_auc(scores, labels))?,
        average_precision: single_class_ok(average_precision(scores, labels))?,
        brier: brier_score(scores, labels)?,
        max_reliability_gap: table.max_gap(),
        precision_at_k,
        confusion,
    };
    let mut curves = Vec::new();
    curves.extend(roc.map(CurveData::Roc));
    curves.extend(pr.map(CurveData::Pr));
    curves.push(CurveData::ThresholdSweep(sweep));
    Ok(Evaluated {
        summary,
        curves,
        reliability: table.to_csv(),
    })
}

fn write_evaluated(run: &mut Run, e: &Evaluated) -> Result<()> {
    let stem = format!("{}_{}", e.summary.split, e.summary.variant);
    for c in &e.curves {
        run.write(&format!("curves/{stem}_{}.csv", c.kind()), &c.to_csv())?;
    }
    run.write(&format!("reliability/{stem}.csv"), &e.reliability)
}

fn select_thresholds(
    variant: &str,
    scores: &[f64],
    labels: &[bool],
    objectives: &[ThresholdObjective],
) -> Result<Vec<SelectedThreshold>> {
    objectives
        .iter()
        .map(|&objective| {
            let (choice, infeasible_best) = match select_threshold(scores, labels, objective) {
                Ok(c) => (Some(c), None),
                Err(Error::Infeasible { best, .. }) => {
                    tracing::warn!(
                        variant,
                        objective = objective.label(),
                        best,
                        "threshold objective infeasible on validation"
                    );
                    (None, Some(best))
                }
                Err(e) => return Err(e),
            };
            Ok(SelectedThreshold {
                variant: variant.to_string(),
                objective,
                label: objective.label(),
                choice,
                infeasible_best,
            })
        })
        .collect()
}

pub const MODEL_FILE: &str = "model.json";

/// Fits the forest on the train split, then calibrators and operating
/// thresholds on validation scores.
pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start(out, "train")?;
    let (_, bundle) = build_bundle(cfg, cfg.feature_config, &mut run)?;
    tracing::info!(
        config = %cfg.feature_config,
        train = bundle.train.len(),
        validation = bundle.validation.len(),
        test = bundle.test.len(),
        columns = bundle.columns().len(),
        "assembled splits"
    );
    run.lap("prepare");

    let forest = fit(&bundle.train.matrix, &bundle.train.labels, &cfg.train)?;
    run.lap("fit");

    let val = &bundle.validation;
    let raw = predict_proba(&forest, &val.matrix)?;
    let mut calibrators = Vec::new();
    for &m in cfg.calibration.methods() {
        calibrators.push(match m {
            "sigmoid" => Calibrator::Sigmoid(fit_sigmoid(&raw, &val.labels)?),
            _ => Calibrator::Isotonic(fit_isotonic(&raw, &val.labels)?),
        });
    }
    let mut model = TrainedModel {
        version: crate::VERSION.to_string(),
        feature_config: cfg.feature_config,
        split: cfg.split,
        forest,
        calibrators,
        thresholds: Vec::new(),
    };
    let variants = model.variants(&raw, cfg.calibration.methods())?;
    for (name, scores) in &variants {
        let t = select_thresholds(name, scores, &val.labels, &cfg.metrics.objectives)?;
        model.thresholds.extend(t);
    }
    run.lap("calibrate");

    let mut summaries = Vec::new();
    for (name, scores) in &variants {
        let e = evaluate_scores(
            SplitName::Validation,
            name,
            scores,
            val,
            &cfg.metrics,
            &model.thresholds_for(name),
        )?;
        summaries.push(e.summary);
    }
    run.write_json(MODEL_FILE, &model)?;
    run.write_json("validation_metrics.json", &summaries)?;
    run.lap("write");
    run.finish(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FraudRate {
    pub timestep: u32,
    pub split: Option<String>,
    pub licit: usize,
    pub illicit: usize,
    pub fraud_rate: f64,
}

/// Scores every split with the stored model and writes the evaluation
/// report. Test labels are only read here.
pub fn cmd_evaluate(cfg: &PipelineConfig, model_path: &Path, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start(out, "evaluate")?;
    run.input(model_path)?;
    let model = TrainedModel::load(model_path)?;
    if model.split != cfg.split {
        return Err(Error::SchemaMismatch(format!(
            "model was trained with split {:?} but the config specifies {:?}",
            model.split, cfg.split
        )));
    }
    if model.feature_config != cfg.feature_config {
        tracing::warn!(
            model = %model.feature_config,
            config = %cfg.feature_config,
            "using the model's feature configuration"
        );
    }
    let (data, bundle) = build_bundle(cfg, model.feature_config, &mut run)?;
    run.lap("prepare");

    let methods = cfg.calibration.methods();
    let mut summaries = Vec::new();
    let mut pak = String::from("split,variant,k,precision\n");
    let mut conf = String::from("split,variant,label,threshold,tp,fp,tn,fn,precision,recall,f1\n");
    for split in SplitName::ALL {
        let part = split.of(&bundle);
        let raw = predict_proba(&model.forest, &part.matrix)?;
        for (variant, scores) in model.variants(&raw, methods)? {
            let e = evaluate_scores(
                split,
                &variant,
                &scores,
                part,
                &cfg.metrics,
                &model.thresholds_for(&variant),
            )?;
            write_evaluated(&mut run, &e)?;
            for p in &e.summary.precision_at_k {
                let v = p.precision.map(format_float).unwrap_or_default();
                let _ = writeln!(pak, "{},{},{},{}", split.as_str(), variant, p.k, v);
            }
            for c in &e.summary.confusion {
                let m = &c.confusion;
                let _ = writeln!(
                    conf,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    split.as_str(),
                    variant,
                    c.label,
                    format_float(m.threshold),
                    m.tp,
                    m.fp,
                    m.tn,
                    m.fn_,
                    format_float(c.precision),
                    format_float(c.recall),
                    format_float(c.f1)
                );
            }
            summaries.push(e.summary);
        }
    }
    run.write_json("summary.json", &summaries)?;
    run.write("precision_at_k.csv", &pak)?;
    run.write("confusion.csv", &conf)?;
    run.write_json("thresholds.json", &model.thresholds)?;
    run.lap("metrics");

    for &split in &cfg.metrics.importance_splits {
        let part = split.of(&bundle);
        let imp = single_class_ok(permutation_importance(
            &model.forest,
            &part.matrix,
            &part.labels,
            cfg.metrics.importance_metric,
            cfg.metrics.importance_repeats,
            cfg.seed,
        ))?;
        let Some(mut imp) = imp else { continue };
        imp.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop));
        let mut s = String::from("column,mean_drop,std\n");
        for f in &imp {
            let _ = writeln!(s, "{},{},{}", f.column, format_float(f.mean_drop), format_float(f.std));
        }
        run.write(&format!("importance_{}.csv", split.as_str()), &s)?;
    }
    run.lap("importance");

    let supervised = data.supervised();
    let mut rates = Vec::new();
    for (t, rate) in fraud_rate_by_timestep(&supervised) {
        let (licit, illicit) = label_counts(&supervised, |x| x == t);
        rates.push(FraudRate {
            timestep: t.get(),
            split: cfg.split.route(t).map(|p| {
                match p {
                    SplitPart::Train => "train",
                    SplitPart::Validation => "validation",
                    SplitPart::Test => "test",
                }
                .to_string()
            }),
            licit,
            illicit,
            fraud_rate: rate,
        });
    }
    let mut s = String::from("timestep,split,licit,illicit,fraud_rate\n");
    for r in &rates {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.timestep,
            r.split.as_deref().unwrap_or(""),
            r.licit,
            r.illicit,
            format_float(r.fraud_rate)
        );
    }
    run.write("fraud_rate_by_timestep.csv", &s)?;

    let corr = feature_label_correlation(&bundle.train.matrix, &bundle.train.labels)?;
    let mut s = String::from("column,pearson_r\n");
    for c in &corr {
        let _ = writeln!(s, "{},{}", c.column, c.pearson_r.map(format_float).unwrap_or_default());
    }
    run.write("correlations_train.csv", &s)?;
    run.lap("diagnostics");
    run.finish(cfg)
}
