//! The four-block 1-D convolutional detector.
//!
//! Layout, input `(batch, 1, F)`:
//!
//! | block | filters | kernel | stride | output length |
//! |-------|---------|--------|--------|---------------|
//! | C#1   | 16      | 3      | 1      | F             |
//! | C#2   | 16      | 3      | 2      | ceil(F/2)     |
//! | C#3   | 32      | 3      | 1      | ceil(F/2)     |
//! | C#4   | 32      | 3      | 2      | ceil(ceil(F/2)/2) |
//!
//! Each convolution is followed by batch norm and the activation. The last
//! feature map is flattened into a 128-unit dense layer (activation, optional
//! dropout) and a single sigmoid output unit. Strided convolutions take the
//! place of pooling.

use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_forward, sigmoid, Activation, BatchNorm1d, BnCache, Conv1d, Dense, Mode,
};
use super::{he_normal, Network};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng, Tensor3};

/// (filters, stride) of the four convolution blocks.
pub const CONV_BLOCKS: [(usize, usize); 4] = [(16, 1), (16, 2), (32, 1), (32, 2)];
pub const KERNEL_SIZE: usize = 3;
pub const HIDDEN_UNITS: usize = 128;
pub const MIN_INPUT_LENGTH: usize = 4;

/// Width of the flattened last feature map for `input_length` features.
pub fn flatten_width(input_length: usize) -> usize {
    32 * input_length.div_ceil(2).div_ceil(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pgn4Config {
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl Default for Pgn4Config {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            dropout_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    conv_inputs: Vec<Tensor3>,
    bn_caches: Vec<BnCache>,
    bn_outputs: Vec<Tensor3>,
    flat: Matrix,
    dense_out: Matrix,
    dropout_mask: Vec<f64>,
    hidden: Matrix,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Pgn4Model {
    pub input_length: usize,
    pub convs: Vec<Conv1d>,
    pub norms: Vec<BatchNorm1d>,
    pub dense: Dense,
    pub head: Dense,
    pub config: Pgn4Config,
    pub mode: Mode,
    cache: Option<ForwardCache>,
}

impl PartialEq for Pgn4Model {
    fn eq(&self, other: &Self) -> bool {
        self.input_length == other.input_length
            && self.convs == other.convs
            && self.norms == other.norms
            && self.dense == other.dense
            && self.head == other.head
            && self.config == other.config
            && self.mode == other.mode
    }
}

impl Pgn4Model {
    /// Zero-initialized model with the fixed layer stack.
    pub fn zeroed(input_length: usize, config: Pgn4Config) -> Result<Self> {
        if input_length < MIN_INPUT_LENGTH {
            return Err(Error::invalid(format!(
                "PGN4 needs at least {MIN_INPUT_LENGTH} input features, got {input_length}"
            )));
        }
        if !(0.0..1.0).contains(&config.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in [0, 1), got {}",
                config.dropout_rate
            )));
        }
        let mut convs = Vec::with_capacity(4);
        let mut norms = Vec::with_capacity(4);
        let mut in_ch = 1;
        for (filters, stride) in CONV_BLOCKS {
            convs.push(Conv1d::new(in_ch, filters, KERNEL_SIZE, stride)?);
            norms.push(BatchNorm1d::new(filters));
            in_ch = filters;
        }
        Ok(Self {
            input_length,
            convs,
            norms,
            dense: Dense::new(flatten_width(input_length), HIDDEN_UNITS),
            head: Dense::new(HIDDEN_UNITS, 1),
            config,
            mode: Mode::Inference,
            cache: None,
        })
    }

    /// He-normal weights, zero biases, unit gamma, zero beta.
    pub fn init(input_length: usize, rng: &mut Rng, config: Pgn4Config) -> Result<Self> {
        let mut m = Self::zeroed(input_length, config)?;
        for conv in &mut m.convs {
            let fan_in = conv.in_channels * conv.kernel_size;
            conv.weight = he_normal(rng, conv.weight.len(), fan_in);
        }
        m.dense.weight = he_normal(rng, m.dense.weight.len(), m.dense.in_features);
        m.head.weight = he_normal(rng, m.head.weight.len(), m.head.in_features);
        Ok(m)
    }

    /// Lengths of the four convolution outputs.
    pub fn conv_output_lengths(&self) -> Vec<usize> {
        let mut len = self.input_length;
        self.convs
            .iter()
            .map(|c| {
                len = c.output_length(len);
                len
            })
            .collect()
    }

    pub fn flatten_width(&self) -> usize {
        self.dense.in_features
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != 1 || x.length() != self.input_length {
            return Err(Error::shape(
                format!("PGN4 input 1x{}", self.input_length),
                format!("{}x{}", x.channels(), x.length()),
            ));
        }
        Ok(())
    }

    /// Per-sample probability of the flagged class.
    ///
    /// Training mode uses batch statistics, updates the batch-norm running
    /// statistics, applies dropout, and caches state for [`Pgn4Model::backward`].
    pub fn forward(&mut self, x: &Tensor3, mode: Mode, rng: &mut Rng) -> Result<Vec<f64>> {
        match mode {
            Mode::Inference => {
                self.cache = None;
                self.predict_tensor(x)
            }
            Mode::Training => self.forward_training(x, rng),
        }
    }

    pub fn predict_tensor(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let act = self.config.activation;
        let mut h = x.clone();
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            let mut y = bn.forward_inference(&conv.forward(&h)?)?;
            for v in y.data_mut() {
                *v = act.apply(*v);
            }
            h = y;
        }
        let mut d = self.dense.forward(&h.to_matrix())?;
        for v in d.data_mut() {
            *v = act.apply(*v);
        }
        let z = self.head.forward(&d)?;
        Ok(z.data().iter().map(|&v| sigmoid(v)).collect())
    }

    fn forward_training(&mut self, x: &Tensor3, rng: &mut Rng) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.cache = None;
        let act = self.config.activation;
        let mut conv_inputs = Vec::with_capacity(4);
        let mut bn_caches = Vec::with_capacity(4);
        let mut bn_outputs = Vec::with_capacity(4);
        let mut h = x.clone();
        for i in 0..self.convs.len() {
            let c = self.convs[i].forward(&h)?;
            let (b, cache) = self.norms[i].forward_train(&c)?;
            let mut a = b.clone();
            for v in a.data_mut() {
                *v = act.apply(*v);
            }
            conv_inputs.push(std::mem::replace(&mut h, a));
            bn_caches.push(cache);
            bn_outputs.push(b);
        }
        let flat = h.to_matrix();
        let dense_out = self.dense.forward(&flat)?;
        let activated = act.forward(dense_out.data());
        let (dropped, dropout_mask) =
            dropout_forward(&activated, self.config.dropout_rate, rng, Mode::Training)?;
        let hidden = Matrix::new(dense_out.rows(), dense_out.cols(), dropped)?;
        let z = self.head.forward(&hidden)?;
        let probs: Vec<f64> = z.data().iter().map(|&v| sigmoid(v)).collect();
        self.cache = Some(ForwardCache {
            conv_inputs,
            bn_caches,
            bn_outputs,
            flat,
            dense_out,
            dropout_mask,
            hidden,
            probs: probs.clone(),
        });
        Ok(probs)
    }

    /// Gradients of mean binary cross-entropy for the cached forward pass, in
    /// [`Network::param_names`] order.
    pub fn backward(&self, labels: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let batch = cache.probs.len();
        if labels.len() != batch {
            return Err(Error::shape(
                format!("{batch} cached outputs"),
                format!("{} labels", labels.len()),
            ));
        }
        let act = self.config.activation;
        let dz: Vec<f64> = cache
            .probs
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - y) / batch as f64)
            .collect();
        let head = self.head.backward(&cache.hidden, &Matrix::new(batch, 1, dz)?)?;
        let g_hidden: Vec<f64> = head
            .input
            .data()
            .iter()
            .zip(&cache.dropout_mask)
            .map(|(g, m)| g * m)
            .collect();
        let g_dense_out = act.backward(cache.dense_out.data(), &g_hidden);
        let dense = self.dense.backward(
            &cache.flat,
            &Matrix::new(batch, self.dense.out_features, g_dense_out)?,
        )?;
        let last = cache.conv_inputs.len() - 1;
        let last_out = &cache.bn_outputs[last];
        let mut g = Tensor3::new(
            batch,
            last_out.channels(),
            last_out.length(),
            dense.input.into_data(),
        )?;

        let mut block_grads: Vec<[Vec<f64>; 4]> = Vec::with_capacity(4);
        for i in (0..self.convs.len()).rev() {
            let pre = &cache.bn_outputs[i];
            let g_pre = Tensor3::new(
                pre.batch(),
                pre.channels(),
                pre.length(),
                act.backward(pre.data(), g.data()),
            )?;
            let bn = self.norms[i].backward(&cache.bn_caches[i], &g_pre)?;
            let conv = self.convs[i].backward(&cache.conv_inputs[i], &bn.input)?;
            g = conv.input;
            block_grads.push([conv.weight, conv.bias, bn.gamma, bn.beta]);
        }
        block_grads.reverse();
        let mut out: Vec<Vec<f64>> = block_grads.into_iter().flatten().collect();
        out.extend([dense.weight, dense.bias, head.weight, head.bias]);
        Ok(out)
    }
}

impl Network for Pgn4Model {
    fn input_length(&self) -> usize {
        self.input_length
    }

    fn forward_train(&mut self, x: &Matrix, rng: &mut Rng) -> Result<Vec<f64>> {
        self.mode = Mode::Training;
        self.forward(&Tensor3::from_matrix(x), Mode::Training, rng)
    }

    fn backward(&self, labels: &[f64]) -> Result<Vec<Vec<f64>>> {
        Pgn4Model::backward(self, labels)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_tensor(&Tensor3::from_matrix(x))
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=self.convs.len() {
            for p in ["conv.weight", "conv.bias", "bn.gamma", "bn.beta"] {
                names.push(format!("block{i}.{p}"));
            }
        }
        names.extend(
            ["dense.weight", "dense.bias", "head.weight", "head.bias"].map(String::from),
        );
        names
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (c, b) in self.convs.iter().zip(&self.norms) {
            out.extend([&c.weight[..], &c.bias[..], &b.gamma[..], &b.beta[..]]);
        }
        out.extend([
            &self.dense.weight[..],
            &self.dense.bias[..],
            &self.head.weight[..],
            &self.head.bias[..],
        ]);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for (c, b) in self.convs.iter_mut().zip(self.norms.iter_mut()) {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
            out.push(&mut b.gamma);
            out.push(&mut b.beta);
        }
        out.push(&mut self.dense.weight);
        out.push(&mut self.dense.bias);
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Inference {
            self.cache = None;
        }
    }
}
