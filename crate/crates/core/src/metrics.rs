//! Ranking, threshold and correlation metrics for binary scores.
//!
//! Conventions used throughout:
//! - a row is predicted positive iff `score >= threshold`;
//! - precision is 0 with no predicted positives, F1 is 0 when `P + R = 0`;
//! - equal scores form one tie group on every curve;
//! - Precision@K breaks score ties by ascending node id.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::matrix::{format_float, FeatureMatrix};

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score at position {i}")));
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (pos, labels.len() - pos)
}

/// Indices sorted by descending score (stable).
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Cumulative `(threshold, tp, fp)` after each descending tie group.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

/// Mann–Whitney U with average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("ROC-AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        let group_pos = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum += avg * group_pos as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Non-interpolated step-sum `Σ (R_n − R_{n−1}) P_n` over tie groups.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in &curve {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(ap)
}

/// Fraction of positives among the `k` highest scores.
pub fn precision_at_k(scores: &[f64], labels: &[bool], ids: &[NodeId], k: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    if ids.len() != scores.len() {
        return Err(Error::invalid("ids and scores differ in length"));
    }
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", scores.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    let hits = order[..k].iter().filter(|&&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        safe_div(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        safe_div(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn safe_div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix {
        threshold,
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    cm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

/// Curve data emitted for plotting.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveData {
    Roc(Vec<RocPoint>),
    Pr(Vec<PrPoint>),
    ThresholdSweep(Vec<SweepPoint>),
}

impl CurveData {
    pub fn kind(&self) -> &'static str {
        match self {
            CurveData::Roc(_) => "roc",
            CurveData::Pr(_) => "pr",
            CurveData::ThresholdSweep(_) => "threshold_sweep",
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self {
            CurveData::Roc(pts) => {
                s.push_str("fpr,tpr,threshold\n");
                for p in pts {
                    let _ = writeln!(
                        s,
                        "{},{},{}",
                        format_float(p.fpr),
                        format_float(p.tpr),
                        format_float(p.threshold)
                    );
                }
            }
            CurveData::Pr(pts) => {
                s.push_str("recall,precision,threshold\n");
                for p in pts {
                    let _ = writeln!(
                        s,
                        "{},{},{}",
                        format_float(p.recall),
                        format_float(p.precision),
                        format_float(p.threshold)
                    );
                }
            }
            CurveData::ThresholdSweep(pts) => {
                s.push_str("threshold,precision,recall,f1,tp,fp,tn,fn\n");
                for p in pts {
                    let c = &p.confusion;
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        format_float(p.threshold),
                        format_float(p.precision),
                        format_float(p.recall),
                        format_float(p.f1),
                        c.tp,
                        c.fp,
                        c.tn,
                        c.fn_
                    );
                }
            }
        }
        s
    }
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_grid() -> Vec<f64> {
    grid_with_step(0.01)
}

pub fn grid_with_step(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

pub fn threshold_sweep(scores: &[f64], labels: &[bool], grid: &[f64]) -> Result<Vec<SweepPoint>> {
    check_inputs(scores, labels)?;
    if grid.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("threshold grid must be ascending"));
    }
    Ok(grid
        .iter()
        .map(|&t| {
            let c = confusion_at(scores, labels, t);
            SweepPoint {
                threshold: t,
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                confusion: c,
            }
        })
        .collect())
}

/// ROC polyline from `(0,0)` (threshold `+inf`) through one point per
/// distinct score to `(1,1)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("ROC curve needs both classes".into()));
    }
    let mut pts = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    pts.extend(tie_groups(scores, labels).into_iter().map(|(t, tp, fp)| RocPoint {
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        threshold: t,
    }));
    Ok(pts)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// One point per distinct score, descending threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check_inputs(scores, labels)?;
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return Err(Error::SingleClass(
            "precision-recall needs at least one positive".into(),
        ));
    }
    Ok(tie_groups(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| PrPoint {
            recall: tp as f64 / pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
            threshold: t,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdObjective {
    /// Maximise F1.
    MaxF1,
    /// Maximise precision subject to recall >= `value`.
    MinRecall { value: f64 },
    /// Maximise recall subject to precision >= `value`.
    MinPrecision { value: f64 },
}

impl ThresholdObjective {
    pub fn label(&self) -> String {
        match self {
            ThresholdObjective::MaxF1 => "max_f1".into(),
            ThresholdObjective::MinRecall { value } => format!("min_recall_{value}"),
            ThresholdObjective::MinPrecision { value } => format!("min_precision_{value}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub objective: ThresholdObjective,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scans the distinct validation scores as candidate thresholds; ties in the
/// objective resolve to the highest threshold (fewest alerts).
pub fn select_threshold(scores: &[f64], labels: &[bool], objective: ThresholdObjective) -> Result<ThresholdChoice> {
    check_inputs(scores, labels)?;
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return Err(Error::SingleClass("threshold selection needs positives".into()));
    }
    let mut best: Option<(f64, ConfusionMatrix)> = None;
    let mut best_infeasible = 0.0f64;
    let n = labels.len();
    // groups come in descending threshold order, so only strict improvements
    // replace the incumbent.
    for (t, tp, fp) in tie_groups(scores, labels) {
        let cm = ConfusionMatrix {
            threshold: t,
            tp,
            fp,
            fn_: pos - tp,
            tn: n - pos - fp,
        };
        let value = match objective {
            ThresholdObjective::MaxF1 => Some(cm.f1()),
            ThresholdObjective::MinRecall { value } => {
                best_infeasible = best_infeasible.max(cm.recall());
                (cm.recall() >= value).then(|| cm.precision())
            }
            ThresholdObjective::MinPrecision { value } => {
                best_infeasible = best_infeasible.max(cm.precision());
                (cm.precision() >= value).then(|| cm.recall())
            }
        };
        if let Some(v) = value {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, cm));
            }
        }
    }
    let (_, cm) = best.ok_or_else(|| Error::Infeasible {
        objective: objective.label(),
        best: best_infeasible,
    })?;
    Ok(ThresholdChoice {
        objective,
        threshold: cm.threshold,
        precision: cm.precision(),
        recall: cm.recall(),
        f1: cm.f1(),
    })
}

/// Pearson correlation of `x` with the 0/1 label; `None` for zero variance.
pub fn pearson_with_label(x: &[f64], labels: &[bool]) -> Option<f64> {
    let n = x.len() as f64;
    if x.is_empty() {
        return None;
    }
    let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(&y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub column: String,
    /// Absent for zero-variance columns.
    pub pearson_r: Option<f64>,
}

pub fn feature_label_correlation(matrix: &FeatureMatrix, labels: &[bool]) -> Result<Vec<Correlation>> {
    if matrix.n_rows() != labels.len() {
        return Err(Error::invalid("matrix rows and labels differ in length"));
    }
    Ok(matrix
        .columns()
        .iter()
        .enumerate()
        .map(|(c, name)| Correlation {
            column: name.clone(),
            pearson_r: pearson_with_label(&matrix.column(c), labels),
        })
        .collect())
}
