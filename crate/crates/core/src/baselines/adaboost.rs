//! Discrete AdaBoost over depth-1 decision stumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::tensor::Matrix;

/// Weighted errors below this count as a perfect stump; the error is clamped
/// here so the stump's vote stays finite.
pub const MIN_STUMP_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// `+1`: predict flagged when `x > threshold`; `-1`: the reverse.
    pub polarity: i8,
    pub alpha: f64,
    /// Weighted training error at the round the stump was chosen.
    pub error: f64,
}

impl Stump {
    #[inline]
    pub fn vote(&self, row: &[f64]) -> f64 {
        let side = if row[self.feature] > self.threshold { 1.0 } else { -1.0 };
        side * f64::from(self.polarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub n_features: usize,
    pub stumps: Vec<Stump>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostConfig {
    pub n_rounds: usize,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self { n_rounds: 100 }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    polarity: i8,
    error: f64,
}

/// Lowest-error stump; ties go to the earliest (feature, threshold, polarity).
fn best_stump(x: &Matrix, y: &[f64], w: &[f64], order: &[Vec<usize>]) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for (f, idx) in order.iter().enumerate() {
        let (mut total_pos, mut total_neg) = (0.0, 0.0);
        for &i in idx {
            if y[i] > 0.0 {
                total_pos += w[i];
            } else {
                total_neg += w[i];
            }
        }
        let (mut left_pos, mut left_neg) = (0.0, 0.0);
        for k in 0..idx.len().saturating_sub(1) {
            let i = idx[k];
            if y[i] > 0.0 {
                left_pos += w[i];
            } else {
                left_neg += w[i];
            }
            let (a, b) = (x.get(i, f), x.get(idx[k + 1], f));
            if a == b {
                continue;
            }
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            // Polarity +1 errs on left positives and right negatives.
            let plus = left_pos + (total_neg - left_neg);
            let minus = left_neg + (total_pos - left_pos);
            for (polarity, error) in [(1i8, plus), (-1i8, minus)] {
                if best.as_ref().map_or(true, |c| error < c.error) {
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        polarity,
                        error,
                    });
                }
            }
        }
    }
    best
}

impl AdaBoost {
    pub fn fit(x: &Matrix, y: &[u8], config: AdaBoostConfig) -> Result<Self> {
        Self::fit_traced(x, y, config).map(|(m, _)| m)
    }

    /// Also returns the normalized sample weights after every retained round.
    pub fn fit_traced(
        x: &Matrix,
        y: &[u8],
        config: AdaBoostConfig,
    ) -> Result<(Self, Vec<Vec<f64>>)> {
        if config.n_rounds == 0 {
            return Err(Error::invalid("boosting needs at least one round"));
        }
        if y.len() != x.rows() {
            return Err(Error::shape(
                format!("{} rows", x.rows()),
                format!("{} labels", y.len()),
            ));
        }
        if !y.contains(&0) {
            return Err(Error::MissingClass("unflagged"));
        }
        if !y.contains(&1) {
            return Err(Error::MissingClass("flagged"));
        }
        let n = x.rows();
        let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let order: Vec<Vec<usize>> = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut stumps = Vec::new();
        let mut trace = Vec::new();
        for _ in 0..config.n_rounds {
            let Some(c) = best_stump(x, &ys, &w, &order) else {
                break;
            };
            if c.error >= 0.5 {
                break;
            }
            let perfect = c.error < MIN_STUMP_ERROR;
            let error = c.error.max(MIN_STUMP_ERROR);
            let alpha = 0.5 * ((1.0 - error) / error).ln();
            let stump = Stump {
                feature: c.feature,
                threshold: c.threshold,
                polarity: c.polarity,
                alpha,
                error,
            };
            let mut sum = 0.0;
            for i in 0..n {
                w[i] *= (-alpha * ys[i] * stump.vote(x.row(i))).exp();
                sum += w[i];
            }
            for wi in &mut w {
                *wi /= sum;
            }
            stumps.push(stump);
            trace.push(w.clone());
            if perfect {
                break;
            }
        }
        Ok((
            Self {
                n_features: x.cols(),
                stumps,
            },
            trace,
        ))
    }

    /// Aggregated margin `Σ α_t h_t(x)`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.vote(row)).sum()
    }

    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::shape(
                format!("ensemble over {} features", self.n_features),
                format!("{} input columns", x.cols()),
            ));
        }
        Ok((0..x.rows()).map(|r| sigmoid(self.margin(x.row(r)))).collect())
    }
}
