//! Class-weighted random forest with exact split search.
//!
//! Trees are grown on bootstrap samples tracked as per-row multiplicities.
//! Every tree draws from its own ChaCha stream (`seed`, stream = tree index),
//! so the fitted model does not depend on how many threads trained it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::metrics::{average_precision, roc_auc};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    Sqrt,
    Fraction(f64),
    All,
}

impl FeaturesPerSplit {
    /// Number of non-constant candidate features evaluated per node.
    pub fn count(&self, n_features: usize) -> usize {
        let k = match *self {
            FeaturesPerSplit::Sqrt => (n_features as f64).sqrt().floor() as usize,
            FeaturesPerSplit::Fraction(f) => (f * n_features as f64).floor() as usize,
            FeaturesPerSplit::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for FeaturesPerSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeaturesPerSplit::Sqrt => f.write_str("sqrt"),
            FeaturesPerSplit::All => f.write_str("all"),
            FeaturesPerSplit::Fraction(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for FeaturesPerSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqrt" => Ok(FeaturesPerSplit::Sqrt),
            "all" => Ok(FeaturesPerSplit::All),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|f| *f > 0.0 && *f <= 1.0)
                .map(FeaturesPerSplit::Fraction)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "features per split `{s}`: expected sqrt, all or a fraction in (0, 1]"
                    ))
                }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    Balanced,
    None,
}

impl FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "balanced" => Ok(ClassWeighting::Balanced),
            "none" => Ok(ClassWeighting::None),
            _ => Err(Error::invalid(format!(
                "class weighting `{s}`: expected balanced or none"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
    /// Disabling the bootstrap trains every tree on the full set; only
    /// useful for testing.
    pub bootstrap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 400,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeaturesPerSplit::Sqrt,
            class_weighting: ClassWeighting::Balanced,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be positive"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if let FeaturesPerSplit::Fraction(f) = self.features_per_split {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("feature fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ordered column names plus their SHA-256 fingerprint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub fingerprint: String,
    pub columns: Vec<String>,
}

impl Schema {
    pub fn new(columns: Vec<String>) -> Self {
        Schema {
            fingerprint: Self::fingerprint_of(&columns),
            columns,
        }
    }

    pub fn fingerprint_of(columns: &[String]) -> String {
        let mut h = Sha256::new();
        for c in columns {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    /// Position of each schema column in `m`, matched by name.
    pub fn bind(&self, m: &FeatureMatrix) -> Result<Vec<usize>> {
        if Self::fingerprint_of(&self.columns) != self.fingerprint {
            return Err(Error::SchemaMismatch(
                "model fingerprint does not match its column list".into(),
            ));
        }
        let missing: Vec<&str> = self
            .columns
            .iter()
            .filter(|c| m.column_index(c).is_none())
            .map(String::as_str)
            .collect();
        let extra: Vec<&str> = m
            .columns()
            .iter()
            .filter(|c| !self.columns.contains(c))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "missing columns [{}], unexpected columns [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }
        Ok(self.columns.iter().map(|c| m.column_index(c).unwrap()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[column] <= threshold` go left.
    Split {
        column: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Weighted class frequencies `[licit, illicit]`.
    Leaf { p: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(p1: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { p: [1.0 - p1, p1] }],
        }
    }

    /// Illicit probability of the leaf reached by `x`, where `x(c)` returns
    /// the value of schema column `c`.
    pub fn predict(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { p } => return p[1],
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x(*column as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { p } => Some(p[1]),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: String,
    pub schema: Schema,
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_positive: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Checks structural invariants, e.g. after loading from disk.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::SchemaMismatch("model has no trees".into()));
        }
        let p = self.schema.columns.len();
        for (t, tree) in self.trees.iter().enumerate() {
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        column, left, right, ..
                    } => {
                        if *column as usize >= p
                            || *left as usize >= tree.nodes.len()
                            || *right as usize >= tree.nodes.len()
                        {
                            return Err(Error::SchemaMismatch(format!(
                                "tree {t} references a missing column or node"
                            )));
                        }
                    }
                    Node::Leaf { p } => {
                        if !p.iter().all(|v| (0.0..=1.0).contains(v)) || (p[0] + p[1] - 1.0).abs() > 1e-9 {
                            return Err(Error::SchemaMismatch(format!(
                                "tree {t} has an invalid leaf distribution"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Gini impurity `1 - p0^2 - p1^2` of weighted class totals.
pub fn node_gini(w: [f64; 2]) -> f64 {
    let total = w[0] + w[1];
    if total <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (w[0] / total, w[1] / total);
    1.0 - p0 * p0 - p1 * p1
}

/// Weight-averaged child impurity of a candidate split.
pub fn split_gini(left: [f64; 2], right: [f64; 2]) -> f64 {
    let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
    let w = wl + wr;
    (wl / w) * node_gini(left) + (wr / w) * node_gini(right)
}

/// Balanced weights `n / (2 n_c)` for class totals `counts`.
pub fn balanced_weights(counts: [f64; 2]) -> [f64; 2] {
    let n = counts[0] + counts[1];
    counts.map(|c| if c > 0.0 { n / (2.0 * c) } else { 0.0 })
}

struct TrainData<'a> {
    /// Column-major copy of the training matrix.
    cols: Vec<Vec<f64>>,
    labels: &'a [bool],
}

struct Best {
    proxy: f64,
    column: usize,
    threshold: f64,
    n_left: usize,
}

struct Grower<'a> {
    data: &'a TrainData<'a>,
    cfg: &'a TrainConfig,
    mtry: usize,
    weight: Vec<f64>,
    rng: ChaCha8Rng,
    features: Vec<usize>,
    buf: Vec<(f64, u32)>,
}

impl Grower<'_> {
    fn totals(&self, rows: &[u32]) -> [f64; 2] {
        let mut w = [0.0; 2];
        for &r in rows {
            w[self.data.labels[r as usize] as usize] += self.weight[r as usize];
        }
        w
    }

    fn find_split(&mut self, rows: &[u32], total: [f64; 2]) -> Option<Best> {
        let msl = self.cfg.min_samples_leaf;
        let m = rows.len();
        let mut best: Option<Best> = None;
        self.features.shuffle(&mut self.rng);
        let mut visited = 0;
        for fi in 0..self.features.len() {
            if visited >= self.mtry {
                break;
            }
            let f = self.features[fi];
            let col = &self.data.cols[f];
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (col[r as usize], r)));
            self.buf
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.buf[0].0 == self.buf[m - 1].0 {
                continue;
            }
            visited += 1;
            let mut l = [0.0f64; 2];
            for i in 0..m - 1 {
                let (v, r) = self.buf[i];
                l[self.data.labels[r as usize] as usize] += self.weight[r as usize];
                let next = self.buf[i + 1].0;
                if v == next || i + 1 < msl || m - i - 1 < msl {
                    continue;
                }
                let rr = [total[0] - l[0], total[1] - l[1]];
                let (wl, wr) = (l[0] + l[1], rr[0] + rr[1]);
                // maximizing this minimizes the weighted child Gini
                let proxy = (l[0] * l[0] + l[1] * l[1]) / wl + (rr[0] * rr[0] + rr[1] * rr[1]) / wr;
                let mut thr = v + (next - v) / 2.0;
                if thr >= next {
                    thr = v;
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        proxy > b.proxy || (proxy == b.proxy && (f < b.column || (f == b.column && thr < b.threshold)))
                    }
                };
                if better {
                    best = Some(Best {
                        proxy,
                        column: f,
                        threshold: thr,
                        n_left: i + 1,
                    });
                }
            }
        }
        best
    }

    fn grow(mut self, mut rows: Vec<u32>) -> Tree {
        let mut nodes = vec![Node::Leaf { p: [0.0, 0.0] }];
        // (node slot, start, end, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        while let Some((slot, start, end, depth)) = stack.pop() {
            let part = &rows[start..end];
            let total = self.totals(part);
            let sum = total[0] + total[1];
            let leaf = Node::Leaf {
                p: [total[0] / sum, total[1] / sum],
            };
            let stop = self.cfg.max_depth.is_some_and(|d| depth >= d)
                || total[0] == 0.0
                || total[1] == 0.0
                || part.len() < 2 * self.cfg.min_samples_leaf;
            let split = if stop { None } else { self.find_split(part, total) };
            let Some(best) = split else {
                nodes[slot] = leaf;
                continue;
            };
            let col = &self.data.cols[best.column];
            let part = &mut rows[start..end];
            part.sort_unstable_by_key(|&r| (col[r as usize] > best.threshold, r));
            debug_assert_eq!(
                part.iter().filter(|&&r| col[r as usize] <= best.threshold).count(),
                best.n_left
            );
            let left = nodes.len();
            nodes.push(Node::Leaf { p: [0.0, 0.0] });
            nodes.push(Node::Leaf { p: [0.0, 0.0] });
            nodes[slot] = Node::Split {
                column: best.column as u32,
                threshold: best.threshold,
                left: left as u32,
                right: left as u32 + 1,
            };
            let mid = start + best.n_left;
            stack.push((left + 1, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
        Tree { nodes }
    }
}

fn build_tree(data: &TrainData, cfg: &TrainConfig, mtry: usize, index: usize) -> Tree {
    let n = data.labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut counts = vec![0u32; n];
    if cfg.bootstrap {
        for _ in 0..n {
            counts[rng.gen_range(0..n)] += 1;
        }
    } else {
        counts.iter_mut().for_each(|c| *c = 1);
    }
    let mut class_counts = [0.0f64; 2];
    for (c, &y) in counts.iter().zip(data.labels) {
        class_counts[y as usize] += *c as f64;
    }
    let cw = match cfg.class_weighting {
        ClassWeighting::Balanced => balanced_weights(class_counts),
        ClassWeighting::None => [1.0, 1.0],
    };
    let weight: Vec<f64> = counts
        .iter()
        .zip(data.labels)
        .map(|(&c, &y)| c as f64 * cw[y as usize])
        .collect();
    let rows: Vec<u32> = (0..n as u32).filter(|&r| counts[r as usize] > 0).collect();
    Grower {
        data,
        cfg,
        mtry,
        weight,
        rng,
        features: (0..data.cols.len()).collect(),
        buf: Vec::with_capacity(rows.len()),
    }
    .grow(rows)
}

/// Trains a forest on `train`. Trees are built on the current rayon pool and
/// collected in index order.
pub fn fit(train: &FeatureMatrix, labels: &[bool], config: &TrainConfig) -> Result<ForestModel> {
    config.validate()?;
    if labels.len() != train.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            train.n_rows()
        )));
    }
    if train.n_cols() == 0 {
        return Err(Error::invalid("training matrix has no columns"));
    }
    train.validate_finite()?;
    let n_positive = labels.iter().filter(|&&y| y).count();
    if n_positive == 0 || n_positive == labels.len() {
        return Err(Error::SingleClass(format!(
            "training set has {} illicit of {} rows",
            n_positive,
            labels.len()
        )));
    }
    let data = TrainData {
        cols: (0..train.n_cols()).map(|c| train.column(c)).collect(),
        labels,
    };
    let mtry = config.features_per_split.count(train.n_cols());
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| build_tree(&data, config, mtry, i))
        .collect();
    tracing::debug!(trees = trees.len(), mtry, "forest trained");
    Ok(ForestModel {
        version: crate::VERSION.to_string(),
        schema: Schema::new(train.columns().to_vec()),
        config: config.clone(),
        n_train: labels.len(),
        n_positive,
        trees,
    })
}

fn mean_over_trees(model: &ForestModel, x: impl Fn(usize) -> f64 + Copy) -> f64 {
    let sum: f64 = model.trees.iter().map(|t| t.predict(x)).sum();
    sum / model.trees.len() as f64
}

/// Mean per-tree illicit probability for each row of `rows`; columns are
/// matched by name.
pub fn predict_proba(model: &ForestModel, rows: &FeatureMatrix) -> Result<Vec<f64>> {
    let map = model.schema.bind(rows)?;
    rows.validate_finite()?;
    Ok((0..rows.n_rows())
        .into_par_iter()
        .map(|r| {
            let row = rows.row(r);
            mean_over_trees(model, |c| row[map[c]])
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    RocAuc,
    Ap,
}

impl ImportanceMetric {
    pub fn score(&self, scores: &[f64], labels: &[bool]) -> Result<f64> {
        match self {
            ImportanceMetric::RocAuc => roc_auc(scores, labels),
            ImportanceMetric::Ap => average_precision(scores, labels),
        }
    }
}

impl FromStr for ImportanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roc_auc" | "auc" => Ok(ImportanceMetric::RocAuc),
            "ap" | "average_precision" => Ok(ImportanceMetric::Ap),
            _ => Err(Error::invalid(format!(
                "importance metric `{s}`: expected roc_auc or ap"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub column: String,
    /// Intact metric minus the mean metric over shuffles.
    pub mean_drop: f64,
    /// Population standard deviation of the per-shuffle drops.
    pub std: f64,
}

/// Permutation importance of every schema column, in schema order.
/// Shuffle `r` of column `c` draws from stream `c * repeats + r` of `seed`.
pub fn permutation_importance(
    model: &ForestModel,
    rows: &FeatureMatrix,
    labels: &[bool],
    metric: ImportanceMetric,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if labels.len() != rows.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            rows.n_rows()
        )));
    }
    let base_scores = predict_proba(model, rows)?;
    let base = metric.score(&base_scores, labels)?;
    let map = model.schema.bind(rows)?;
    let n = rows.n_rows();
    let jobs: Vec<(usize, usize)> = (0..map.len()).flat_map(|c| (0..repeats).map(move |r| (c, r))).collect();
    let drops: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((c * repeats + r) as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let scores: Vec<f64> = (0..n)
                .map(|i| {
                    let row = rows.row(i);
                    let shuffled = rows.get(perm[i], map[c]);
                    mean_over_trees(model, |k| if k == c { shuffled } else { row[map[k]] })
                })
                .collect();
            metric.score(&scores, labels).map(|m| base - m)
        })
        .collect::<Result<_>>()?;
    Ok(model
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let d = &drops[c * repeats..(c + 1) * repeats];
            let mean = d.iter().sum::<f64>() / repeats as f64;
            let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / repeats as f64;
            FeatureImportance {
                column: name.clone(),
                mean_drop: mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;
    use crate::matrix::Provenance;

    fn matrix(cols: &[&str], rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..rows.len() as u64).map(NodeId).collect(),
            cols.iter().map(|s| s.to_string()).collect(),
            rows.concat(),
            Provenance::Transaction,
        )
        .unwrap()
    }

    fn separable(n: usize) -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, ((i * 7919) % 101) as f64]).collect();
        let labels = (0..n).map(|i| i >= n * 3 / 4).collect();
        (matrix(&["a", "b"], &rows), labels)
    }

    #[test]
    fn mtry_counts() {
        assert_eq!(FeaturesPerSplit::Sqrt.count(166), 12);
        assert_eq!(FeaturesPerSplit::Sqrt.count(1), 1);
        assert_eq!(FeaturesPerSplit::Fraction(0.5).count(5), 2);
        assert_eq!(FeaturesPerSplit::Fraction(0.01).count(5), 1);
        assert_eq!(FeaturesPerSplit::All.count(7), 7);
        assert!("0".parse::<FeaturesPerSplit>().is_err());
        assert_eq!(
            "0.25".parse::<FeaturesPerSplit>().unwrap(),
            FeaturesPerSplit::Fraction(0.25)
        );
    }

    #[test]
    fn separable_training_auc_is_one() {
        let (m, y) = separable(100);
        let cfg = TrainConfig {
            n_trees: 25,
            seed: 3,
            ..Default::default()
        };
        let model = fit(&m, &y, &cfg).unwrap();
        let p = predict_proba(&model, &m).unwrap();
        assert_eq!(roc_auc(&p, &y).unwrap(), 1.0);
    }

    #[test]
    fn stump_predicts_weighted_prior() {
        let (m, y) = separable(40);
        let cfg = TrainConfig {
            n_trees: 1,
            min_samples_leaf: 40,
            class_weighting: ClassWeighting::None,
            bootstrap: false,
            ..Default::default()
        };
        let model = fit(&m, &y, &cfg).unwrap();
        assert!(predict_proba(&model, &m).unwrap().iter().all(|&p| p == 10.0 / 40.0));
        let balanced = fit(
            &m,
            &y,
            &TrainConfig {
                n_trees: 1,
                min_samples_leaf: 40,
                ..Default::default()
            },
        )
        .unwrap();
        for p in predict_proba(&balanced, &m).unwrap() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (m, y) = separable(60);
        let cfg = TrainConfig {
            n_trees: 10,
            seed: 99,
            ..Default::default()
        };
        let a = fit(&m, &y, &cfg).unwrap();
        let b = fit(&m, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit(&m, &y, &TrainConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn identical_leaves_average_to_leaf_value() {
        let (m, _) = separable(10);
        let model = ForestModel {
            version: String::new(),
            schema: Schema::new(vec!["a".into(), "b".into()]),
            config: TrainConfig::default(),
            n_train: 0,
            n_positive: 0,
            trees: vec![Tree::leaf(0.3); 5],
        };
        assert!(predict_proba(&model, &m)
            .unwrap()
            .iter()
            .all(|&p| (p - 0.3).abs() < 1e-15));
    }

    #[test]
    fn schema_is_by_name() {
        let (m, y) = separable(50);
        let model = fit(
            &m,
            &y,
            &TrainConfig {
                n_trees: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let swapped = m.select_columns(&["b".to_string(), "a".to_string()]).unwrap();
        assert_eq!(
            predict_proba(&model, &m).unwrap(),
            predict_proba(&model, &swapped).unwrap()
        );
        let only_a = m.select_columns(&["a".to_string()]).unwrap();
        assert!(matches!(predict_proba(&model, &only_a), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn single_class_and_non_finite_rejected() {
        let (m, _) = separable(10);
        assert!(matches!(
            fit(&m, &[false; 10], &TrainConfig::default()),
            Err(Error::SingleClass(_))
        ));
        let bad = matrix(&["a"], &[vec![1.0], vec![f64::NAN]]);
        match fit(&bad, &[true, false], &TrainConfig::default()) {
            Err(Error::NonFinite { row, column }) => assert_eq!((row, column.as_str()), (1, "a")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let (m, y) = separable(30);
        let model = fit(
            &m,
            &y,
            &TrainConfig {
                n_trees: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn weighted_gini_matches_duplication() {
        // 8 licit, 2 illicit: balanced weights 0.625 and 2.5, i.e. a 1:4 ratio
        let w = balanced_weights([8.0, 2.0]);
        assert_eq!(w, [0.625, 2.5]);
        for (l, r) in [
            ([3.0, 1.0], [5.0, 1.0]),
            ([8.0, 0.0], [0.0, 2.0]),
            ([2.0, 2.0], [6.0, 0.0]),
        ] {
            let weighted = split_gini([l[0] * w[0], l[1] * w[1]], [r[0] * w[0], r[1] * w[1]]);
            let duplicated = split_gini([l[0], l[1] * 4.0], [r[0], r[1] * 4.0]);
            assert_eq!(weighted, duplicated);
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(node_gini([1.0, 1.0]), 0.5);
        assert_eq!(node_gini([3.0, 0.0]), 0.0);
        assert_eq!(split_gini([2.0, 0.0], [0.0, 2.0]), 0.0);
    }
}
