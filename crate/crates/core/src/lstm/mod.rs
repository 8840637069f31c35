//! Minimal LSTM sequence classifier.
//!
//! One recurrent layer over a univariate sequence, inverted dropout on the
//! final hidden state, dense sigmoid head. Trained with minibatch Adam on
//! binary cross-entropy; early stopping watches the loss on a chronological
//! validation tail and restores the best epoch. All arithmetic is `f64`
//! and every random draw comes from one generator seeded by `cfg.seed`.

mod network;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use network::{batch_loss, batch_loss_grad, logit, run, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden_units: usize,
    pub sequence_length: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Z-score inputs with a scalar mean/std fit on the training head.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_units: 16,
            sequence_length: 12,
            dropout_rate: 0.3,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 50,
            early_stop_patience: 5,
            validation_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            standardize: true,
            seed: 0,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.hidden_units == 0 || self.sequence_length == 0 || self.batch_size == 0 {
            return bad("hidden_units, sequence_length and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must be in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad("validation_fraction must be in (0, 0.5)");
        }
        if !(self.learning_rate > 0.0) || self.max_epochs == 0 {
            return bad("learning_rate and max_epochs must be positive");
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        Layout {
            input: 1,
            hidden: self.hidden_units,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    const IDENTITY: Scaler = Scaler { mean: 0.0, std: 1.0 };
}

/// Named row-major tensor in the model export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LstmExport", try_from = "LstmExport")]
pub struct LstmModel {
    pub config: LstmConfig,
    pub scaler: Scaler,
    params: Vec<f64>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were restored.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LstmExport {
    config: LstmConfig,
    scaler: Scaler,
    gate_order: Vec<String>,
    tensors: Vec<Tensor>,
    history: Vec<EpochRecord>,
    best_epoch: usize,
}

impl From<LstmModel> for LstmExport {
    fn from(m: LstmModel) -> Self {
        let l = m.config.layout();
        let tensor = |name: &str, shape: Vec<usize>, r: std::ops::Range<usize>| Tensor {
            name: name.into(),
            shape,
            data: m.params[r].to_vec(),
        };
        let h = l.hidden;
        let tensors = vec![
            tensor("input_kernel", vec![4 * h, l.input], l.w()),
            tensor("recurrent_kernel", vec![4 * h, h], l.u()),
            tensor("bias", vec![4 * h], l.b()),
            tensor("dense_kernel", vec![h], l.head_w()),
            tensor("dense_bias", vec![1], l.head_b()..l.head_b() + 1),
        ];
        LstmExport {
            config: m.config,
            scaler: m.scaler,
            gate_order: ["input", "forget", "cell", "output"].map(String::from).to_vec(),
            tensors,
            history: m.history,
            best_epoch: m.best_epoch,
        }
    }
}

impl TryFrom<LstmExport> for LstmModel {
    type Error = String;

    fn try_from(e: LstmExport) -> std::result::Result<Self, String> {
        let params: Vec<f64> = e.tensors.iter().flat_map(|t| t.data.iter().copied()).collect();
        let expected = e.config.layout().len();
        if params.len() != expected {
            return Err(format!("{} parameters, expected {expected}", params.len()));
        }
        Ok(LstmModel {
            config: e.config,
            scaler: e.scaler,
            params,
            history: e.history,
            best_epoch: e.best_epoch,
        })
    }
}

impl LstmModel {
    /// Every parameter zero; predicts 0.5 everywhere.
    pub fn zeros(config: LstmConfig) -> Self {
        Self {
            params: vec![0.0; config.layout().len()],
            config,
            scaler: Scaler::IDENTITY,
            history: Vec::new(),
            best_epoch: 0,
        }
    }

    /// Freshly initialized weights for `config.seed`.
    pub fn initialized(config: LstmConfig) -> Self {
        let mut rng = seeded(config.seed);
        Self {
            params: config.layout().init(&mut rng),
            ..Self::zeros(config)
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    fn scaled(&self, seqs: ArrayView2<'_, f64>) -> Result<Vec<Vec<f64>>> {
        check_sequences(seqs, self.config.sequence_length)?;
        let Scaler { mean, std } = self.scaler;
        Ok(seqs
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| (v - mean) / std).collect())
            .collect())
    }

    /// Head logits with dropout disabled.
    pub fn logits(&self, seqs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let l = self.config.layout();
        Ok(self
            .scaled(seqs)?
            .iter()
            .map(|x| logit(&l, &self.params, run(&l, &self.params, x).last_hidden(), None))
            .collect())
    }

    /// Head logit of one sequence with an explicit train-time dropout mask.
    pub fn logit_with_mask(&self, seq: &[f64], mask: &[f64]) -> f64 {
        let l = self.config.layout();
        let x: Vec<f64> = seq.iter().map(|v| (v - self.scaler.mean) / self.scaler.std).collect();
        logit(&l, &self.params, run(&l, &self.params, &x).last_hidden(), Some(mask))
    }

    pub fn predict_proba(&self, seqs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self
            .logits(seqs)?
            .into_iter()
            .map(crate::gbm::probability)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_sequences(seqs: ArrayView2<'_, f64>, len: usize) -> Result<()> {
    if seqs.ncols() != len {
        return Err(Error::ShapeMismatch(format!(
            "sequences have length {}, expected {len}",
            seqs.ncols()
        )));
    }
    if seqs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sequences contain missing or non-finite values".into()));
    }
    Ok(())
}

/// Draws an inverted-dropout mask: each unit kept with probability `1 - rate`
/// and scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(rng: &mut R, units: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..units)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &LstmConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

pub fn fit_lstm(seqs: ArrayView2<'_, f64>, y: &[u8], cfg: &LstmConfig) -> Result<LstmModel> {
    cfg.validate()?;
    check_sequences(seqs, cfg.sequence_length)?;
    if seqs.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} sequences but {} labels", seqs.nrows(), y.len())));
    }
    let pos = y.iter().filter(|l| **l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    let n = y.len();
    if n <= cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{n} sequences, need more than batch_size = {}",
            cfg.batch_size
        )));
    }
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).max(1);
    let n_train = n - n_val;

    let scaler = if cfg.standardize {
        let head = seqs.slice(ndarray::s![..n_train, ..]);
        let count = head.len() as f64;
        let mean = head.sum() / count;
        let var = head.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        match var.sqrt() {
            s if s > 0.0 => Scaler { mean, std: s },
            _ => Scaler { mean, std: 1.0 },
        }
    } else {
        Scaler::IDENTITY
    };
    let data: Vec<Vec<f64>> = seqs
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| (v - scaler.mean) / scaler.std).collect())
        .collect();
    let labels: Vec<f64> = y.iter().map(|l| *l as f64).collect();
    let val_x: Vec<&[f64]> = data[n_train..].iter().map(Vec::as_slice).collect();
    let val_y = &labels[n_train..];

    let layout = cfg.layout();
    let mut rng = seeded(cfg.seed);
    let mut params = layout.init(&mut rng);
    let mut adam = Adam::new(params.len());
    let mut grad = vec![0.0; params.len()];

    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_slice()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let masks: Vec<Vec<f64>> = chunk
                .iter()
                .map(|_| dropout_mask(&mut rng, layout.hidden, cfg.dropout_rate))
                .collect();
            train_loss += batch_loss_grad(&layout, &params, &xs, &ys, Some(&masks), &mut grad);
            adam.step(&mut params, &grad, cfg);
            batches += 1;
        }
        let validation_loss = batch_loss(&layout, &params, &val_x, val_y);
        history.push(EpochRecord {
            epoch,
            train_loss: train_loss / batches as f64,
            validation_loss,
        });
        if validation_loss < best.0 {
            best = (validation_loss, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }

    Ok(LstmModel {
        config: *cfg,
        scaler,
        params: best.1,
        history,
        best_epoch: best.2,
    })
}

pub fn predict_proba_lstm(model: &LstmModel, seqs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    model.predict_proba(seqs)
}

/// Gradient components smaller than this are compared on an absolute scale.
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Maximum relative error between the BPTT gradient of the mean BCE and
/// fourth-order central finite differences with step `epsilon`, over every
/// parameter of a freshly initialized model. Dropout is off; inputs are
/// used unscaled. A step near 1e-3 balances truncation and roundoff.
pub fn gradient_check(cfg: &LstmConfig, seqs: ArrayView2<'_, f64>, y: &[u8], epsilon: f64) -> Result<f64> {
    cfg.validate()?;
    check_sequences(seqs, cfg.sequence_length)?;
    if seqs.nrows() != y.len() || y.is_empty() {
        return Err(Error::ShapeMismatch("batch and labels must be non-empty and equal length".into()));
    }
    let layout = cfg.layout();
    let mut params = layout.init(&mut seeded(cfg.seed));
    let rows: Vec<Vec<f64>> = seqs.rows().into_iter().map(|r| r.to_vec()).collect();
    let xs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let labels: Vec<f64> = y.iter().map(|l| *l as f64).collect();

    let mut analytic = vec![0.0; params.len()];
    batch_loss_grad(&layout, &params, &xs, &labels, None, &mut analytic);

    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let orig = params[k];
        let mut at = |h: f64| {
            params[k] = orig + h;
            let v = batch_loss(&layout, &params, &xs, &labels);
            params[k] = orig;
            v
        };
        // fourth-order central stencil
        let numeric = (8.0 * (at(epsilon) - at(-epsilon)) - (at(2.0 * epsilon) - at(-2.0 * epsilon))) / (12.0 * epsilon);
        let denom = analytic[k].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn zero_model_is_one_half() {
        let m = LstmModel::zeros(LstmConfig::default());
        assert_eq!(m.parameter_count(), 1169);
        let x = Array2::from_shape_fn((5, 12), |(i, j)| (i * j) as f64 - 3.0);
        assert!(m.predict_proba(x.view()).unwrap().iter().all(|p| *p == 0.5));
    }

    #[test]
    fn rejects_wrong_shapes() {
        let m = LstmModel::zeros(LstmConfig::default());
        assert!(m.predict_proba(Array2::zeros((2, 11)).view()).is_err());
        let cfg = LstmConfig::default();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        assert!(fit_lstm(Array2::zeros((40, 10)).view(), &y, &cfg).is_err());
        assert!(matches!(
            fit_lstm(Array2::zeros((40, 12)).view(), &[1; 40], &cfg),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            fit_lstm(Array2::zeros((32, 12)).view(), &y[..32], &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn config_bounds() {
        let ok = LstmConfig::default();
        assert!(ok.validate().is_ok());
        assert!(LstmConfig { dropout_rate: 1.0, ..ok }.validate().is_err());
        assert!(LstmConfig { validation_fraction: 0.5, ..ok }.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = LstmModel::initialized(LstmConfig { seed: 4, ..Default::default() });
        let back = LstmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
