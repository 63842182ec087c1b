//! Accuracy, F1, ROC AUC and PR AUC.
//!
//! Scores are probabilities of the positive class. A sample is predicted
//! positive when its score is `>=` the threshold. Curves sweep every distinct
//! score as a threshold; tied scores move together, so the trapezoidal ROC
//! area equals the Mann-Whitney statistic with ties counted as one half.
//!
//! The PR curve is listed in descending recall and closed with a recall-0
//! anchor that carries the precision of the highest threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            format!("{} scores", scores.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {s} is not a number")));
    }
    Ok(())
}

pub fn confusion_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(accuracy, f1)`. F1 is 1 when there are no positives at all (tp = fp = fn = 0)
/// and 0 whenever tp = 0 otherwise.
pub fn accuracy_f1(c: &Confusion) -> (f64, f64) {
    let total = c.total().max(1) as f64;
    let accuracy = (c.tp + c.tn) as f64 / total;
    let f1 = if c.tp == 0 {
        if c.fp == 0 && c.fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        let precision = c.tp as f64 / (c.tp + c.fp) as f64;
        let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
        2.0 * precision * recall / (precision + recall)
    };
    (accuracy, f1)
}

/// Cumulative (tp, fp) after each group of tied scores, highest score first.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(k + 1)
            .map_or(true, |&j| scores[j] != scores[i]);
        if last_of_group {
            out.push((tp, fp));
        }
    }
    out
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).abs() * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

fn class_totals(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve and its `(fpr, tpr)` points from (0,0) to (1,1).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<(f64, f64)>)> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_totals(labels);
    if pos == 0 {
        return Err(Error::MissingClass("positive"));
    }
    if neg == 0 {
        return Err(Error::MissingClass("negative"));
    }
    let mut points = vec![(0.0, 0.0)];
    points.extend(
        tie_groups(scores, labels)
            .into_iter()
            .map(|(tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)),
    );
    Ok((trapezoid(&points), points))
}

/// Area under the precision-recall curve and its `(recall, precision)` points.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<(f64, f64)>)> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_totals(labels);
    if pos == 0 {
        return Err(Error::MissingClass("positive"));
    }
    let groups = tie_groups(scores, labels);
    let mut points: Vec<(f64, f64)> = groups
        .iter()
        .rev()
        .map(|&(tp, fp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64))
        .collect();
    let top_precision = points.last().map_or(1.0, |p| p.1);
    points.push((0.0, top_precision));
    Ok((trapezoid(&points), points))
}

/// One row of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub threshold: f64,
    pub confusion: Confusion,
    #[serde(skip)]
    pub roc_points: Vec<(f64, f64)>,
    #[serde(skip)]
    pub pr_points: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn roc_csv(&self) -> String {
        curve_csv("fpr,tpr", &self.roc_points)
    }

    pub fn pr_csv(&self) -> String {
        curve_csv("recall,precision", &self.pr_points)
    }
}

fn curve_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (x, y) in points {
        s.push_str(&format!("{x},{y}\n"));
    }
    s
}

pub fn evaluate(scores: &[f64], labels: &[u8]) -> Result<EvalReport> {
    evaluate_at(scores, labels, DEFAULT_THRESHOLD)
}

pub fn evaluate_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    let confusion = confusion_at(scores, labels, threshold)?;
    let (accuracy, f1) = accuracy_f1(&confusion);
    let (roc, roc_points) = roc_auc(scores, labels)?;
    let (pr, pr_points) = pr_auc(scores, labels)?;
    Ok(EvalReport {
        accuracy,
        f1,
        roc_auc: roc,
        pr_auc: pr,
        threshold,
        confusion,
        roc_points,
        pr_points,
    })
}
