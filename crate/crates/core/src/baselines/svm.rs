//! Linear SVM trained by Pegasos stochastic subgradient descent on the
//! L2-regularized hinge loss.
//!
//! The bias is handled as an extra constant-one feature, so it is regularized
//! together with the weights. The returned model is the average of all
//! iterates, which is what makes the objective trace smooth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::tensor::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Project each iterate onto the ball of radius `1 / sqrt(lambda)`.
    pub project: bool,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 20,
            project: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Regularized hinge objective of the averaged iterate after each epoch.
    pub objective_trace: Vec<f64>,
}

fn signed(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

/// `λ/2 ||w̃||² + mean(max(0, 1 - y w̃·x̃))` over the augmented vector `w̃ = (w, b)`.
pub fn hinge_objective(x: &Matrix, y: &[u8], weights: &[f64], bias: f64, lambda: f64) -> f64 {
    let ys = signed(y);
    let reg = 0.5 * lambda * (weights.iter().map(|w| w * w).sum::<f64>() + bias * bias);
    let loss: f64 = (0..x.rows())
        .map(|r| (1.0 - ys[r] * (dot(weights, x.row(r)) + bias)).max(0.0))
        .sum();
    reg + loss / x.rows() as f64
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvm {
    pub fn fit(x: &Matrix, y: &[u8], config: SvmConfig) -> Result<Self> {
        if !(config.lambda > 0.0) {
            return Err(Error::invalid("SVM regularization must be > 0"));
        }
        if config.epochs == 0 {
            return Err(Error::invalid("SVM needs at least one epoch"));
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
        let (n, f) = (x.rows(), x.cols());
        let ys = signed(y);
        let lambda = config.lambda;
        let radius = 1.0 / lambda.sqrt();
        // Last slot is the bias.
        let mut w = vec![0.0; f + 1];
        let mut avg = vec![0.0; f + 1];
        let mut rng = Rng::new(config.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        let mut trace = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            rng.shuffle(&mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let row = x.row(i);
                let margin = ys[i] * (dot(&w[..f], row) + w[f]);
                let shrink = 1.0 - eta * lambda;
                for v in &mut w {
                    *v *= shrink;
                }
                if margin < 1.0 {
                    let step = eta * ys[i];
                    for (v, &xi) in w[..f].iter_mut().zip(row) {
                        *v += step * xi;
                    }
                    w[f] += step;
                }
                if config.project {
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > radius {
                        let s = radius / norm;
                        for v in &mut w {
                            *v *= s;
                        }
                    }
                }
                let k = 1.0 / t as f64;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += (v - *a) * k;
                }
            }
            trace.push(hinge_objective(x, y, &avg[..f], avg[f], lambda));
        }
        let bias = avg[f];
        avg.truncate(f);
        Ok(Self {
            weights: avg,
            bias,
            objective_trace: trace,
        })
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::shape(
                format!("SVM over {} features", self.weights.len()),
                format!("{} input columns", x.cols()),
            ));
        }
        Ok((0..x.rows()).map(|r| sigmoid(self.margin(x.row(r)))).collect())
    }
}
