//! Forward and backward passes for the layer types the networks are built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Training,
    Inference,
}

/// 1-D convolution with zero "same" padding.
///
/// This is a cross-correlation (the kernel is not flipped). Output length is
/// `ceil(len / stride)`; the total padding needed for that length is split
/// with the smaller half on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    /// `out × in × kernel`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor3,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 {
            return Err(Error::invalid("conv1d dimensions must be positive"));
        }
        if !(1..=2).contains(&stride) {
            return Err(Error::invalid(format!("conv1d stride must be 1 or 2, got {stride}")));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weight: vec![0.0; out_channels * in_channels * kernel_size],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn output_length(&self, len: usize) -> usize {
        len.div_ceil(self.stride)
    }

    fn pad_left(&self, len: usize) -> usize {
        let out = self.output_length(len);
        ((out.saturating_sub(1)) * self.stride + self.kernel_size).saturating_sub(len) / 2
    }

    #[inline]
    fn w(&self, o: usize, i: usize, k: usize) -> f64 {
        self.weight[(o * self.in_channels + i) * self.kernel_size + k]
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::shape(
                format!("conv expecting {} input channels", self.in_channels),
                format!("input with {} channels", x.channels()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_input(x)?;
        let len = x.length();
        let out_len = self.output_length(len);
        let pad = self.pad_left(len) as isize;
        let mut out = Tensor3::zeros(x.batch(), self.out_channels, out_len);
        let data = out.data_mut();
        for b in 0..x.batch() {
            for o in 0..self.out_channels {
                let base = (b * self.out_channels + o) * out_len;
                let row = &mut data[base..base + out_len];
                row.fill(self.bias[o]);
                for i in 0..self.in_channels {
                    let lane = x.lane(b, i);
                    for k in 0..self.kernel_size {
                        let w = self.w(o, i, k);
                        for (t, y) in row.iter_mut().enumerate() {
                            let p = (t * self.stride + k) as isize - pad;
                            if p >= 0 && (p as usize) < len {
                                *y += w * lane[p as usize];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<ConvGrads> {
        self.check_input(x)?;
        let len = x.length();
        let out_len = self.output_length(len);
        if grad_out.batch() != x.batch()
            || grad_out.channels() != self.out_channels
            || grad_out.length() != out_len
        {
            return Err(Error::shape(
                format!("conv output {}x{}x{}", x.batch(), self.out_channels, out_len),
                format!(
                    "gradient {}x{}x{}",
                    grad_out.batch(),
                    grad_out.channels(),
                    grad_out.length()
                ),
            ));
        }
        let pad = self.pad_left(len) as isize;
        let mut gx = Tensor3::zeros(x.batch(), self.in_channels, len);
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.out_channels];
        for b in 0..x.batch() {
            for o in 0..self.out_channels {
                let g = grad_out.lane(b, o);
                gb[o] += g.iter().sum::<f64>();
                for i in 0..self.in_channels {
                    let lane = x.lane(b, i);
                    let gx_start = gx.index(b, i, 0);
                    for k in 0..self.kernel_size {
                        let widx = (o * self.in_channels + i) * self.kernel_size + k;
                        let w = self.weight[widx];
                        let mut acc = 0.0;
                        for (t, &gt) in g.iter().enumerate() {
                            let p = (t * self.stride + k) as isize - pad;
                            if p >= 0 && (p as usize) < len {
                                let p = p as usize;
                                acc += gt * lane[p];
                                gx.data_mut()[gx_start + p] += gt * w;
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
        Ok(ConvGrads {
            input: gx,
            weight: gw,
            bias: gb,
        })
    }
}

/// Per-channel batch normalization over (sample, position).
///
/// Running statistics follow `running = (1 - momentum) * running + momentum * batch`
/// with the population (biased) batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    normalized: Tensor3,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BnGrads {
    pub input: Tensor3,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNorm1d {
    pub const DEFAULT_EPS: f64 = 1e-5;
    pub const DEFAULT_MOMENTUM: f64 = 0.1;

    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: Self::DEFAULT_EPS,
            momentum: Self::DEFAULT_MOMENTUM,
        }
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.channels {
            return Err(Error::shape(
                format!("batch norm over {} channels", self.channels),
                format!("input with {} channels", x.channels()),
            ));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor3, mode: Mode) -> Result<Tensor3> {
        match mode {
            Mode::Training => self.forward_train(x).map(|(y, _)| y),
            Mode::Inference => self.forward_inference(x),
        }
    }

    pub fn forward_inference(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let mut out = x.clone();
        let len = x.length();
        for b in 0..x.batch() {
            for c in 0..self.channels {
                let scale = self.gamma[c] / (self.running_var[c] + self.eps).sqrt();
                let shift = self.beta[c] - self.running_mean[c] * scale;
                let start = x.index(b, c, 0);
                for v in &mut out.data_mut()[start..start + len] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(out)
    }

    /// Normalizes with batch statistics and updates the running statistics.
    pub fn forward_train(&mut self, x: &Tensor3) -> Result<(Tensor3, BnCache)> {
        self.check(x)?;
        let n = x.batch() * x.length();
        if n < 2 {
            return Err(Error::invalid(
                "training-mode batch norm needs at least 2 values per channel",
            ));
        }
        let nf = n as f64;
        let mut normalized = x.clone();
        let mut out = x.clone();
        let mut inv_std = vec![0.0; self.channels];
        for c in 0..self.channels {
            let mut mean = 0.0;
            for b in 0..x.batch() {
                mean += x.lane(b, c).iter().sum::<f64>();
            }
            mean /= nf;
            let mut var = 0.0;
            for b in 0..x.batch() {
                var += x.lane(b, c).iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            }
            var /= nf;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = is;
            for b in 0..x.batch() {
                let start = x.index(b, c, 0);
                for t in 0..x.length() {
                    let h = (x.data()[start + t] - mean) * is;
                    normalized.data_mut()[start + t] = h;
                    out.data_mut()[start + t] = self.gamma[c] * h + self.beta[c];
                }
            }
            self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
            self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * var;
        }
        Ok((out, BnCache { normalized, inv_std }))
    }

    pub fn backward(&self, cache: &BnCache, grad_out: &Tensor3) -> Result<BnGrads> {
        let xh = &cache.normalized;
        if grad_out.data().len() != xh.data().len() || grad_out.channels() != self.channels {
            return Err(Error::shape(
                format!("batch norm output {}x{}x{}", xh.batch(), xh.channels(), xh.length()),
                format!(
                    "gradient {}x{}x{}",
                    grad_out.batch(),
                    grad_out.channels(),
                    grad_out.length()
                ),
            ));
        }
        let nf = (xh.batch() * xh.length()) as f64;
        let mut gx = Tensor3::zeros(xh.batch(), xh.channels(), xh.length());
        let mut gg = vec![0.0; self.channels];
        let mut gbeta = vec![0.0; self.channels];
        for c in 0..self.channels {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for b in 0..xh.batch() {
                for (g, h) in grad_out.lane(b, c).iter().zip(xh.lane(b, c)) {
                    sum_g += g;
                    sum_gx += g * h;
                }
            }
            gg[c] = sum_gx;
            gbeta[c] = sum_g;
            let k = self.gamma[c] * cache.inv_std[c] / nf;
            for b in 0..xh.batch() {
                let start = xh.index(b, c, 0);
                for t in 0..xh.length() {
                    let g = grad_out.data()[start + t];
                    let h = xh.data()[start + t];
                    gx.data_mut()[start + t] = k * (nf * g - sum_g - h * sum_gx);
                }
            }
        }
        Ok(BnGrads {
            input: gx,
            gamma: gg,
            beta: gbeta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Relu
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    /// Derivative with subgradient 0 (or alpha) at exactly 0.
    #[inline]
    pub fn slope(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    pub fn forward(self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn backward(self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(grad_out)
            .map(|(&v, &g)| g * self.slope(v))
            .collect()
    }
}

/// Fully connected layer `y = W x + b` applied to each matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    /// `out × in`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Matrix,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: vec![0.0; in_features * out_features],
            bias: vec![0.0; out_features],
        }
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_features {
            return Err(Error::shape(
                format!("dense layer expecting {} inputs", self.in_features),
                format!("{}x{} input", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = Matrix::zeros(x.rows(), self.out_features);
        for r in 0..x.rows() {
            let xr = x.row(r);
            for o in 0..self.out_features {
                let w = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                let dot: f64 = w.iter().zip(xr).map(|(a, b)| a * b).sum();
                out.set(r, o, dot + self.bias[o]);
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<DenseGrads> {
        self.check(x)?;
        if grad_out.rows() != x.rows() || grad_out.cols() != self.out_features {
            return Err(Error::shape(
                format!("dense output {}x{}", x.rows(), self.out_features),
                format!("gradient {}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }
        let mut gx = Matrix::zeros(x.rows(), self.in_features);
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.out_features];
        for r in 0..x.rows() {
            let xr = x.row(r);
            for o in 0..self.out_features {
                let g = grad_out.get(r, o);
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let w = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                let gwo = &mut gw[o * self.in_features..(o + 1) * self.in_features];
                for (gwi, &xi) in gwo.iter_mut().zip(xr) {
                    *gwi += g * xi;
                }
                let gx_row = &mut gx.data_mut()[r * self.in_features..(r + 1) * self.in_features];
                for (gxi, &wi) in gx_row.iter_mut().zip(w) {
                    *gxi += g * wi;
                }
            }
        }
        Ok(DenseGrads {
            input: gx,
            weight: gw,
            bias: gb,
        })
    }
}

/// Inverted dropout. Returns the output and the multiplicative mask
/// (0 or `1 / (1 - rate)` per unit) needed by the backward pass.
pub fn dropout_forward(
    x: &[f64],
    rate: f64,
    rng: &mut Rng,
    mode: Mode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if mode == Mode::Inference || rate == 0.0 {
        return Ok((x.to_vec(), vec![1.0; x.len()]));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    Ok((x.iter().zip(&mask).map(|(v, m)| v * m).collect(), mask))
}

/// Logistic function, split by sign so neither branch overflows.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(rng: &mut Rng, b: usize, c: usize, l: usize) -> Tensor3 {
        Tensor3::new(b, c, l, rng.normal(b * c * l, 0.0, 1.0).unwrap()).unwrap()
    }

    fn rel_err(a: &[f64], n: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / (na + nn).max(1e-12)
    }

    /// Central differences of `loss` with respect to every entry of `values`.
    fn numeric_grad(values: &mut [f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        (0..values.len())
            .map(|i| {
                let orig = values[i];
                values[i] = orig + h;
                let up = loss(values);
                values[i] = orig - h;
                let down = loss(values);
                values[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Weighted sum with fixed random weights turns a tensor into a scalar loss.
    fn weighted(t: &Tensor3, w: &[f64]) -> f64 {
        t.data().iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_hand_example() {
        let mut c = Conv1d::new(1, 1, 3, 1).unwrap();
        c.weight = vec![1.0, 0.0, -1.0];
        let x = Tensor3::new(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.forward(&x).unwrap().data(), &[-2.0, -2.0, 2.0]);
        c.weight = vec![0.0, 1.0, 0.0];
        assert_eq!(c.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn conv_output_lengths() {
        let c = Conv1d::new(1, 1, 3, 2).unwrap();
        assert_eq!(c.output_length(102), 51);
        assert_eq!(c.output_length(27), 14);
        let x = Tensor3::zeros(2, 1, 27);
        assert_eq!(c.forward(&x).unwrap().length(), 14);
        assert!(c.forward(&Tensor3::zeros(1, 2, 5)).is_err());
        assert!(Conv1d::new(1, 1, 3, 3).is_err());
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = Rng::new(21);
        for stride in [1, 2] {
            let mut conv = Conv1d::new(2, 3, 3, stride).unwrap();
            conv.weight = rng.normal(conv.weight.len(), 0.0, 1.0).unwrap();
            conv.bias = rng.normal(3, 0.0, 1.0).unwrap();
            let x = random_tensor(&mut rng, 2, 2, 7);
            let out_len = conv.output_length(7);
            let w = rng.normal(2 * 3 * out_len, 0.0, 1.0).unwrap();
            let g = Tensor3::new(2, 3, out_len, w.clone()).unwrap();
            let grads = conv.backward(&x, &g).unwrap();

            let h = 1e-5;
            let mut xs = x.data().to_vec();
            let nx = numeric_grad(&mut xs, h, |v| {
                weighted(&conv.forward(&Tensor3::new(2, 2, 7, v.to_vec()).unwrap()).unwrap(), &w)
            });
            assert!(rel_err(grads.input.data(), &nx) < 1e-5);

            let mut ws = conv.weight.clone();
            let nw = numeric_grad(&mut ws, h, |v| {
                let mut c = conv.clone();
                c.weight = v.to_vec();
                weighted(&c.forward(&x).unwrap(), &w)
            });
            assert!(rel_err(&grads.weight, &nw) < 1e-5);

            let mut bs = conv.bias.clone();
            let nb = numeric_grad(&mut bs, h, |v| {
                let mut c = conv.clone();
                c.bias = v.to_vec();
                weighted(&c.forward(&x).unwrap(), &w)
            });
            assert!(rel_err(&grads.bias, &nb) < 1e-5);

            for o in 0..3 {
                let s: f64 = (0..2).map(|b| g.lane(b, o).iter().sum::<f64>()).sum();
                assert!((grads.bias[o] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_zero_gradient() {
        let mut rng = Rng::new(1);
        let mut conv = Conv1d::new(2, 2, 3, 2).unwrap();
        conv.weight = rng.normal(conv.weight.len(), 0.0, 1.0).unwrap();
        let x = random_tensor(&mut rng, 2, 2, 5);
        let g = conv.backward(&x, &Tensor3::zeros(2, 2, 3)).unwrap();
        assert!(g.input.data().iter().chain(&g.weight).chain(&g.bias).all(|v| *v == 0.0));
        assert!(conv.backward(&x, &Tensor3::zeros(2, 2, 4)).is_err());
    }

    #[test]
    fn batchnorm_training_statistics() {
        let mut rng = Rng::new(4);
        let x = random_tensor(&mut rng, 3, 2, 5);
        let mut bn = BatchNorm1d::new(2);
        let (y, _) = bn.forward_train(&x).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..3).flat_map(|b| y.lane(b, c).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10);
            // eps keeps the variance just under 1.
            assert!((var - 1.0).abs() < 1e-4);
        }
        let mut affine = BatchNorm1d::new(2);
        affine.gamma = vec![2.0, 2.0];
        affine.beta = vec![3.0, 3.0];
        let (z, _) = affine.forward_train(&x).unwrap();
        for (a, b) in z.data().iter().zip(y.data()) {
            assert!((a - (2.0 * b + 3.0)).abs() < 1e-12);
        }
        assert!((bn.running_mean[0] - 0.1 * mean_of(&x, 0)).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_unit_variance_without_eps() {
        let mut rng = Rng::new(14);
        let x = random_tensor(&mut rng, 4, 1, 6);
        let mut bn = BatchNorm1d::new(1);
        bn.eps = 0.0;
        let (y, _) = bn.forward_train(&x).unwrap();
        let n = y.data().len() as f64;
        let var = y.data().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 1e-10);
    }

    fn mean_of(x: &Tensor3, c: usize) -> f64 {
        let vals: Vec<f64> = (0..x.batch()).flat_map(|b| x.lane(b, c).to_vec()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn batchnorm_inference_identity() {
        let mut bn = BatchNorm1d::new(1);
        bn.eps = 1e-12;
        let x = Tensor3::new(1, 1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let y = bn.forward(&x, Mode::Inference).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(bn.forward_train(&Tensor3::zeros(1, 1, 1)).is_err());
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = Rng::new(9);
        let x = random_tensor(&mut rng, 3, 2, 4);
        let mut bn = BatchNorm1d::new(2);
        bn.gamma = vec![1.5, 0.7];
        bn.beta = vec![-0.2, 0.4];
        let w = rng.normal(x.data().len(), 0.0, 1.0).unwrap();
        let g = Tensor3::new(3, 2, 4, w.clone()).unwrap();
        let (_, cache) = bn.clone().forward_train(&x).unwrap();
        let grads = bn.backward(&cache, &g).unwrap();
        let h = 1e-5;
        let loss = |bn: &BatchNorm1d, x: &Tensor3| {
            let mut b = bn.clone();
            weighted(&b.forward_train(x).unwrap().0, &w)
        };
        let mut xs = x.data().to_vec();
        let nx = numeric_grad(&mut xs, h, |v| loss(&bn, &Tensor3::new(3, 2, 4, v.to_vec()).unwrap()));
        assert!(rel_err(grads.input.data(), &nx) < 1e-5);
        let mut gs = bn.gamma.clone();
        let ng = numeric_grad(&mut gs, h, |v| {
            let mut b = bn.clone();
            b.gamma = v.to_vec();
            loss(&b, &x)
        });
        assert!(rel_err(&grads.gamma, &ng) < 1e-5);
        for c in 0..2 {
            let s: f64 = (0..3).map(|b| g.lane(b, c).iter().sum::<f64>()).sum();
            assert!((grads.beta[c] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn batchnorm_input_gradient_sums_to_zero() {
        let mut rng = Rng::new(10);
        let x = random_tensor(&mut rng, 4, 3, 5);
        let mut bn = BatchNorm1d::new(3);
        let (_, cache) = bn.forward_train(&x).unwrap();
        let g = random_tensor(&mut rng, 4, 3, 5);
        let grads = bn.backward(&cache, &g).unwrap();
        for c in 0..3 {
            let s: f64 = (0..4).map(|b| grads.input.lane(b, c).iter().sum::<f64>()).sum();
            assert!(s.abs() < 1e-9, "channel {c}: {s}");
        }
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Relu.forward(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert!((Activation::LeakyRelu(0.01).apply(-1.0) + 0.01).abs() < 1e-15);
        assert_eq!(Activation::Relu.backward(&[-1.0, 0.0, 3.0], &[5.0, 5.0, 5.0]), vec![0.0, 0.0, 5.0]);
        assert_eq!(Activation::LeakyRelu(0.1).backward(&[-1.0], &[2.0]), vec![0.2]);
    }

    #[test]
    fn dense_identity_and_gradients() {
        let mut d = Dense::new(3, 3);
        d.weight = Matrix::identity(3).into_data();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.0, 1.0]]).unwrap();
        assert_eq!(d.forward(&x).unwrap(), x);

        let mut rng = Rng::new(31);
        let mut d = Dense::new(4, 3);
        d.weight = rng.normal(12, 0.0, 1.0).unwrap();
        d.bias = rng.normal(3, 0.0, 1.0).unwrap();
        let x = Matrix::new(2, 4, rng.normal(8, 0.0, 1.0).unwrap()).unwrap();
        let w = rng.normal(6, 0.0, 1.0).unwrap();
        let g = Matrix::new(2, 3, w.clone()).unwrap();
        let grads = d.backward(&x, &g).unwrap();
        let loss = |d: &Dense, x: &Matrix| -> f64 {
            d.forward(x).unwrap().data().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let mut ws = d.weight.clone();
        let nw = numeric_grad(&mut ws, h, |v| {
            let mut dd = d.clone();
            dd.weight = v.to_vec();
            loss(&dd, &x)
        });
        assert!(rel_err(&grads.weight, &nw) < 1e-6);
        let mut xs = x.data().to_vec();
        let nx = numeric_grad(&mut xs, h, |v| loss(&d, &Matrix::new(2, 4, v.to_vec()).unwrap()));
        assert!(rel_err(grads.input.data(), &nx) < 1e-6);
        let mut bs = d.bias.clone();
        let nb = numeric_grad(&mut bs, h, |v| {
            let mut dd = d.clone();
            dd.bias = v.to_vec();
            loss(&dd, &x)
        });
        assert!(rel_err(&grads.bias, &nb) < 1e-6);
    }

    #[test]
    fn dropout_modes() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let mut rng = Rng::new(0);
        for mode in [Mode::Training, Mode::Inference] {
            assert_eq!(dropout_forward(&x, 0.0, &mut rng, mode).unwrap().0, x);
        }
        assert_eq!(dropout_forward(&x, 0.5, &mut rng, Mode::Inference).unwrap().0, x);
        let big = vec![1.0; 20_000];
        let (y, _) = dropout_forward(&big, 0.25, &mut rng, Mode::Training).unwrap();
        let zeros = y.iter().filter(|v| **v == 0.0).count() as f64 / 20_000.0;
        assert!((zeros - 0.25).abs() < 0.02);
        assert!(y.iter().all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-12));
        assert!(dropout_forward(&x, 1.0, &mut rng, Mode::Training).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
