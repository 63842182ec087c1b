//! Minibatch Adam training on binary cross-entropy, plus a finite-difference
//! gradient checker.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::metrics;
use crate::nn::{Mode, Network};
use crate::tensor::{derive_seed, Matrix, Rng};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            epochs: 20,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta1 and beta2 must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Mean binary cross-entropy and its gradient with respect to each probability.
pub fn bce_loss(p: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p.len() != y.len() {
        return Err(Error::shape(
            format!("{} probabilities", p.len()),
            format!("{} labels", y.len()),
        ));
    }
    if p.is_empty() {
        return Err(Error::invalid("bce loss of an empty batch"));
    }
    let n = p.len() as f64;
    let mut loss = 0.0;
    let grad = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            (-y / p + (1.0 - y) / (1.0 - p)) / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// First and second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter tensor.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            format!("{} parameter tensors", params.len()),
            format!("{} gradients / {} moment buffers", grads.len(), state.m.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::shape(
                format!("parameter tensor {i} with {} values", p.len()),
                format!("gradient with {} values", g.len()),
            ));
        }
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub valid_loss: Option<f64>,
    pub valid_acc: Option<f64>,
    pub valid_roc_auc: Option<f64>,
    pub valid_pr_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Adam timesteps taken (one per minibatch).
    pub steps: u64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("epoch,train_loss,train_acc,valid_loss,valid_acc,valid_roc_auc,valid_pr_auc\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.6},{:.6},{},{},{},{}\n",
                e.epoch,
                e.train_loss,
                e.train_acc,
                opt(e.valid_loss),
                opt(e.valid_acc),
                opt(e.valid_roc_auc),
                opt(e.valid_pr_auc)
            ));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut body = String::new();
        if let Some(c) = comment {
            body.push_str(&format!("# {c}\n"));
        }
        body.push_str(&self.to_csv());
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Shuffled minibatches; a trailing batch of one sample joins the previous
/// batch because training-mode batch norm needs two.
pub fn minibatches(n: usize, batch_size: usize, rng: Option<&mut Rng>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    batches
}

fn accuracy(probs: &[f64], labels: &[f64]) -> f64 {
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
        .count();
    hits as f64 / probs.len() as f64
}

/// Trains `model` in place; on return the model is in inference mode.
pub fn train<N: Network>(
    model: &mut N,
    train: &DatasetTable,
    valid: &DatasetTable,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    for (what, t) in [("training", train), ("validation", valid)] {
        if t.n_features() != model.input_length() {
            return Err(Error::shape(
                format!("model with {} inputs", model.input_length()),
                format!("{what} table with {} features", t.n_features()),
            ));
        }
    }
    if train.feature_names() != valid.feature_names() {
        return Err(Error::invalid("training and validation column order differ"));
    }

    let mut shuffle_rng = Rng::new(derive_seed(config.seed, 1));
    let mut dropout_rng = Rng::new(derive_seed(config.seed, 2));
    let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(&shapes);
    let labels = train.labels_f64();
    let valid_labels = valid.labels_f64();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        model.set_mode(Mode::Training);
        let batches = minibatches(
            train.n_rows(),
            config.batch_size,
            config.shuffle.then_some(&mut shuffle_rng),
        );
        let (mut loss_sum, mut hits) = (0.0, 0.0);
        for batch in &batches {
            let x: Matrix = train.features().select_rows(batch);
            let y: Vec<f64> = batch.iter().map(|&i| labels[i]).collect();
            let probs = model.forward_train(&x, &mut dropout_rng)?;
            let (loss, _) = bce_loss(&probs, &y)?;
            loss_sum += loss * batch.len() as f64;
            hits += accuracy(&probs, &y) * batch.len() as f64;
            let grads = model.backward(&y)?;
            adam_step(&mut model.params_mut(), &grads, &mut adam, config)?;
        }
        model.set_mode(Mode::Inference);

        let n = train.n_rows() as f64;
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits / n,
            valid_loss: None,
            valid_acc: None,
            valid_roc_auc: None,
            valid_pr_auc: None,
        };
        if !valid.is_empty() {
            let probs = model.predict(valid.features())?;
            record.valid_loss = Some(bce_loss(&probs, &valid_labels)?.0);
            record.valid_acc = Some(accuracy(&probs, &valid_labels));
            record.valid_roc_auc = metrics::roc_auc(&probs, valid.labels()).ok().map(|r| r.0);
            record.valid_pr_auc = metrics::pr_auc(&probs, valid.labels()).ok().map(|r| r.0);
        }
        log::debug!(
            "epoch {epoch}: train loss {:.5}, valid auc {:?}",
            record.train_loss,
            record.valid_roc_auc
        );
        history.epochs.push(record);
    }
    history.steps = adam.t;
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    /// `||analytic - numeric|| / max(||analytic|| + ||numeric||, GRAD_CHECK_FLOOR)`.
    pub rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.rel_error < self.tolerance)
    }
}

/// Denominator floor that keeps tensors whose true gradient is zero (a conv
/// bias followed by batch norm) from reporting rounding noise as error. Central
/// differences at h = 1e-5 carry about 1e-11 of noise per entry, so the floor
/// sits well above that while staying far below any real gradient norm.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Mean BCE of a training-mode forward pass. The dropout stream is re-seeded
/// on every call so perturbed evaluations see the same mask.
fn training_loss<N: Network>(model: &mut N, x: &Matrix, labels: &[f64], seed: u64) -> Result<f64> {
    let probs = model.forward_train(x, &mut Rng::new(seed))?;
    Ok(bce_loss(&probs, labels)?.0)
}

pub fn analytic_gradients<N: Network + Clone>(
    model: &N,
    x: &Matrix,
    labels: &[f64],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut m = model.clone();
    m.forward_train(x, &mut Rng::new(seed))?;
    m.backward(labels)
}

/// Central differences `(L(θ+h) - L(θ-h)) / 2h` for every parameter.
pub fn numeric_gradients<N: Network + Clone>(
    model: &N,
    x: &Matrix,
    labels: &[f64],
    h: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be > 0"));
    }
    let mut work = model.clone();
    let shapes: Vec<usize> = work.params().iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (t, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work.params()[t][i];
            work.params_mut()[t][i] = orig + h;
            let up = training_loss(&mut work, x, labels, seed)?;
            work.params_mut()[t][i] = orig - h;
            let down = training_loss(&mut work, x, labels, seed)?;
            work.params_mut()[t][i] = orig;
            *gi = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

pub fn compare_gradients(
    names: &[String],
    analytic: &[Vec<f64>],
    numeric: &[Vec<f64>],
    tolerance: f64,
) -> Result<GradCheckReport> {
    if analytic.len() != numeric.len() || names.len() != analytic.len() {
        return Err(Error::shape(
            format!("{} analytic tensors", analytic.len()),
            format!("{} numeric tensors", numeric.len()),
        ));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tensors = names
        .iter()
        .zip(analytic.iter().zip(numeric))
        .map(|(name, (a, n))| {
            let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
            TensorCheck {
                name: name.clone(),
                rel_error: norm(&diff) / (norm(a) + norm(n)).max(GRAD_CHECK_FLOOR),
                max_abs_error: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
            }
        })
        .collect();
    Ok(GradCheckReport { tensors, tolerance })
}

/// Compares backprop gradients with central differences on one batch.
/// Batch norm uses batch statistics on both paths.
pub fn gradient_check<N: Network + Clone>(
    model: &N,
    x: &Matrix,
    labels: &[f64],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if x.rows() == 0 {
        return Err(Error::invalid("gradient check needs a non-empty batch"));
    }
    const SEED: u64 = 0x6772_6164;
    let analytic = analytic_gradients(model, x, labels, SEED)?;
    let numeric = numeric_gradients(model, x, labels, h, SEED)?;
    compare_gradients(&model.param_names(), &analytic, &numeric, tolerance)
}
