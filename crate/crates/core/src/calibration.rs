//! Post hoc probability calibration and reliability measurement.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::format_float;

/// Platt map `s -> 1 / (1 + exp(a*s + b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidCalibrator {
    pub a: f64,
    pub b: f64,
}

impl SigmoidCalibrator {
    pub fn apply_one(&self, s: f64) -> f64 {
        let z = self.a * s + self.b;
        // evaluate on the side that cannot overflow
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Piecewise-constant nondecreasing map. `breakpoints[k]` is the smallest
/// fitted score of block `k`; inputs outside the fitted range clamp to the
/// end values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotonicCalibrator {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicCalibrator {
    pub fn apply_one(&self, s: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= s);
        self.values[k.saturating_sub(1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Calibrator {
    Sigmoid(SigmoidCalibrator),
    Isotonic(IsotonicCalibrator),
}

impl Calibrator {
    pub fn name(&self) -> &'static str {
        match self {
            Calibrator::Sigmoid(_) => "sigmoid",
            Calibrator::Isotonic(_) => "isotonic",
        }
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        match self {
            Calibrator::Sigmoid(c) => scores.iter().map(|&s| c.apply_one(s)).collect(),
            Calibrator::Isotonic(c) => scores.iter().map(|&s| c.apply_one(s)).collect(),
        }
    }
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
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
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("calibration needs both classes".into()));
    }
    Ok((pos, neg))
}

const SIGMOID_MAX_ITER: usize = 100;
const SIGMOID_GRAD_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;

/// Platt scaling fitted by Newton's method with backtracking line search,
/// using smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn fit_sigmoid(scores: &[f64], labels: &[bool]) -> Result<SigmoidCalibrator> {
    let (pos, neg) = check_binary(scores, labels)?;
    let hi = (pos as f64 + 1.0) / (pos as f64 + 2.0);
    let lo = 1.0 / (neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&y| if y { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                let z = s * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..SIGMOID_MAX_ITER {
        let (mut h11, mut h22, mut h21) = (HESSIAN_RIDGE, HESSIAN_RIDGE, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let z = s * a + b;
            // p = P(y=1) = 1/(1+e^z), q = 1 - p
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if (g1 * g1 + g2 * g2).sqrt() < SIGMOID_GRAD_TOL {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut accepted = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if a > 0.0 {
        tracing::warn!(a, "sigmoid calibrator is decreasing in the score; labels look inverted");
    }
    Ok(SigmoidCalibrator { a, b })
}

/// Pool-adjacent-violators on score-sorted labels. Equal scores are pooled
/// before the pass so the fit does not depend on input order.
pub fn fit_isotonic(scores: &[f64], labels: &[bool]) -> Result<IsotonicCalibrator> {
    check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // blocks: (first score, weight, mean)
    let mut blocks: Vec<(f64, f64, f64)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut n = 0.0;
        let mut sum = 0.0;
        while i < order.len() && scores[order[i]] == s {
            n += 1.0;
            sum += labels[order[i]] as u8 as f64;
            i += 1;
        }
        blocks.push((s, n, sum / n));
        while blocks.len() > 1 {
            let k = blocks.len() - 1;
            if blocks[k - 1].2 <= blocks[k].2 {
                break;
            }
            let (s1, w1, m1) = blocks[k - 1];
            let (_, w2, m2) = blocks[k];
            blocks.pop();
            blocks[k - 1] = (s1, w1 + w2, (w1 * m1 + w2 * m2) / (w1 + w2));
        }
    }
    Ok(IsotonicCalibrator {
        breakpoints: blocks.iter().map(|b| b.0).collect(),
        values: blocks.iter().map(|b| b.2.clamp(0.0, 1.0)).collect(),
    })
}

fn check_probabilities(probs: &[f64], labels: &[bool]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!(
            "probability {} at position {i} outside [0, 1]",
            probs[i]
        )));
    }
    Ok(())
}

/// Mean of `(p - y)^2`.
pub fn brier_score(probs: &[f64], labels: &[bool]) -> Result<f64> {
    check_probabilities(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::invalid("brier score of an empty sample"));
    }
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let d = p - y as u8 as f64;
            d * d
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    /// Absent for empty bins.
    pub mean_predicted: Option<f64>,
    pub empirical_frequency: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub bins: Vec<ReliabilityBin>,
}

impl ReliabilityTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        let mut s = String::from("bin_lo,bin_hi,mean_pred,emp_freq,count\n");
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                format_float(b.lower),
                format_float(b.upper),
                opt(b.mean_predicted),
                opt(b.empirical_frequency),
                b.count
            );
        }
        s
    }

    /// Largest `|mean_predicted - empirical_frequency|` over populated bins.
    pub fn max_gap(&self) -> f64 {
        self.bins
            .iter()
            .filter_map(|b| Some((b.mean_predicted? - b.empirical_frequency?).abs()))
            .fold(0.0, f64::max)
    }
}

/// Bin `k` holds `k/n <= p < (k+1)/n`, judged against the same quotients
/// that are reported as bin edges.
fn bin_of(p: f64, n_bins: usize) -> usize {
    let n = n_bins as f64;
    let mut k = ((p * n).floor() as usize).min(n_bins - 1);
    while k > 0 && p < k as f64 / n {
        k -= 1;
    }
    while k + 1 < n_bins && p >= (k + 1) as f64 / n {
        k += 1;
    }
    k
}

/// Equal-width bins on `[0, 1]`, the last bin closed on the right.
pub fn reliability_table(probs: &[f64], labels: &[bool], n_bins: usize) -> Result<ReliabilityTable> {
    check_probabilities(probs, labels)?;
    if n_bins < 2 {
        return Err(Error::invalid("reliability table needs at least 2 bins"));
    }
    let mut sums = vec![(0usize, 0.0f64, 0usize); n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let k = bin_of(p, n_bins);
        sums[k].0 += 1;
        sums[k].1 += p;
        sums[k].2 += y as usize;
    }
    let bins = sums
        .into_iter()
        .enumerate()
        .map(|(k, (count, psum, pos))| ReliabilityBin {
            lower: k as f64 / n_bins as f64,
            upper: (k + 1) as f64 / n_bins as f64,
            mean_predicted: (count > 0)
                .then(|| (psum / count as f64).clamp(k as f64 / n_bins as f64, (k + 1) as f64 / n_bins as f64)),
            empirical_frequency: (count > 0).then(|| pos as f64 / count as f64),
            count,
        })
        .collect();
    Ok(ReliabilityTable { bins })
}
