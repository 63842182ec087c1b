//! Flat one-hidden-layer network: Dense(F → 128) → ReLU → Dense(128 → 1) → sigmoid.

use crate::error::{Error, Result};
use crate::nn::{he_normal, sigmoid, Activation, Dense, Mode, Network};
use crate::tensor::{Matrix, Rng};

pub const MLP_HIDDEN_UNITS: usize = 128;

#[derive(Debug, Clone)]
struct MlpCache {
    x: Matrix,
    pre: Matrix,
    hidden: Matrix,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden: Dense,
    pub head: Dense,
    pub mode: Mode,
    cache: Option<MlpCache>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.hidden == other.hidden && self.head == other.head && self.mode == other.mode
    }
}

impl Mlp {
    pub fn zeroed(input_length: usize) -> Result<Self> {
        if input_length == 0 {
            return Err(Error::invalid("network needs at least one input feature"));
        }
        Ok(Self {
            hidden: Dense::new(input_length, MLP_HIDDEN_UNITS),
            head: Dense::new(MLP_HIDDEN_UNITS, 1),
            mode: Mode::Inference,
            cache: None,
        })
    }

    /// He-normal weights and zero biases.
    pub fn init(input_length: usize, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeroed(input_length)?;
        m.hidden.weight = he_normal(rng, m.hidden.weight.len(), input_length);
        m.head.weight = he_normal(rng, m.head.weight.len(), MLP_HIDDEN_UNITS);
        Ok(m)
    }

    fn hidden_forward(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let pre = self.hidden.forward(x)?;
        let act = Matrix::new(pre.rows(), pre.cols(), Activation::Relu.forward(pre.data()))?;
        Ok((pre, act))
    }
}

impl Network for Mlp {
    fn input_length(&self) -> usize {
        self.hidden.in_features
    }

    fn forward_train(&mut self, x: &Matrix, _rng: &mut Rng) -> Result<Vec<f64>> {
        self.mode = Mode::Training;
        let (pre, hidden) = self.hidden_forward(x)?;
        let probs: Vec<f64> = self.head.forward(&hidden)?.data().iter().map(|&z| sigmoid(z)).collect();
        self.cache = Some(MlpCache {
            x: x.clone(),
            pre,
            hidden,
            probs: probs.clone(),
        });
        Ok(probs)
    }

    fn backward(&self, labels: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let batch = cache.probs.len();
        if labels.len() != batch {
            return Err(Error::shape(
                format!("{batch} cached outputs"),
                format!("{} labels", labels.len()),
            ));
        }
        let dz: Vec<f64> = cache
            .probs
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - y) / batch as f64)
            .collect();
        let head = self.head.backward(&cache.hidden, &Matrix::new(batch, 1, dz)?)?;
        let g_pre = Activation::Relu.backward(cache.pre.data(), head.input.data());
        let hidden = self
            .hidden
            .backward(&cache.x, &Matrix::new(batch, MLP_HIDDEN_UNITS, g_pre)?)?;
        Ok(vec![hidden.weight, hidden.bias, head.weight, head.bias])
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (_, hidden) = self.hidden_forward(x)?;
        Ok(self.head.forward(&hidden)?.data().iter().map(|&z| sigmoid(z)).collect())
    }

    fn param_names(&self) -> Vec<String> {
        ["hidden.weight", "hidden.bias", "head.weight", "head.bias"]
            .map(String::from)
            .to_vec()
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![&self.hidden.weight, &self.hidden.bias, &self.head.weight, &self.head.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Inference {
            self.cache = None;
        }
    }
}
