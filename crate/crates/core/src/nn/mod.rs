//! Neural network building blocks and the PGN4 model.

pub mod layers;
pub mod pgn4;

pub use layers::{
    dropout_forward, sigmoid, Activation, BatchNorm1d, BnCache, BnGrads, Conv1d, ConvGrads,
    Dense, DenseGrads, Mode,
};
pub use pgn4::{flatten_width, Pgn4Config, Pgn4Model};

use crate::error::Result;
use crate::tensor::{Matrix, Rng};

/// A differentiable binary classifier trained on mean binary cross-entropy.
///
/// Parameter tensors are exposed as flat slices in a fixed order; gradients
/// returned by [`Network::backward`] follow the same order.
pub trait Network {
    fn input_length(&self) -> usize;

    /// Training-mode forward pass over one row per sample. Caches whatever
    /// the following [`Network::backward`] call needs.
    fn forward_train(&mut self, x: &Matrix, rng: &mut Rng) -> Result<Vec<f64>>;

    /// Gradient of the mean binary cross-entropy of the cached forward pass.
    fn backward(&self, labels: &[f64]) -> Result<Vec<Vec<f64>>>;

    /// Inference-mode probabilities; a pure function of the parameters.
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;

    fn param_names(&self) -> Vec<String>;

    fn params(&self) -> Vec<&[f64]>;

    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn set_mode(&mut self, mode: Mode);
}

/// He-normal initialization: N(0, 2 / fan_in).
pub(crate) fn he_normal(rng: &mut Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    rng.normal(n, 0.0, std).expect("positive std")
}
