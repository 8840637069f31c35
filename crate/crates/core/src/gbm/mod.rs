//! Histogram gradient-boosted trees for binary classification.
//!
//! Logistic loss, Newton leaf values `-G / (H + λ)` shrunk by the learning
//! rate, best-first growth capped by `max_leaf_nodes`, equal-count bins fit
//! once on the training matrix. No early stopping, no subsampling, no
//! missing-value routing: fitting is a pure function of `(X, y, config)`.

mod binning;
mod importance;
mod tree;

pub use binning::BinMapper;
pub use importance::permutation_importance;
pub use tree::{Node, Tree};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use tree::{grow_tree, GrowParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub l2_regularization: f64,
    pub n_histogram_bins: usize,
    /// Echoed into the model; the fit itself draws no random numbers.
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            max_leaf_nodes: 15,
            min_samples_leaf: 50,
            learning_rate: 0.05,
            max_iter: 200,
            l2_regularization: 1.0,
            n_histogram_bins: 256,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_leaf_nodes < 2 {
            return bad("max_leaf_nodes must be at least 2");
        }
        if self.min_samples_leaf == 0 || self.max_iter == 0 {
            return bad("min_samples_leaf and max_iter must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.l2_regularization > 0.0) {
            return bad("learning_rate and l2_regularization must be positive");
        }
        if self.n_histogram_bins < 2 || self.n_histogram_bins > u16::MAX as usize {
            return bad("n_histogram_bins must be in 2..=65535");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub config: GbmConfig,
    pub n_features: usize,
    /// Logit of the training base rate.
    pub initial_log_odds: f64,
    pub bin_edges: Vec<Vec<f64>>,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first tree.
    pub initial_loss: f64,
    /// Mean training log-loss after each iteration.
    pub loss_trace: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sigmoid with the argument clamped so the result stays strictly in (0, 1).
pub(crate) fn probability(z: f64) -> f64 {
    sigmoid(z.clamp(-30.0, 30.0))
}

fn log_loss(raw: &[f64], y: &[f64]) -> f64 {
    // log(1 + e^z) - y z, written to stay finite for large |z|
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(z, t)| z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z)
        .sum();
    total / raw.len() as f64
}

fn check_inputs(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature matrix contains missing or non-finite values".into()));
    }
    if y.iter().any(|l| *l > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|l| **l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn fit_gbm(x: ArrayView2<'_, f64>, y: &[u8], cfg: &GbmConfig) -> Result<GbmModel> {
    cfg.validate()?;
    check_inputs(x, y)?;
    if y.len() < 2 * cfg.min_samples_leaf {
        return Err(Error::InsufficientData(format!(
            "{} rows, need at least 2 x min_samples_leaf = {}",
            y.len(),
            2 * cfg.min_samples_leaf
        )));
    }

    let mapper = BinMapper::fit(x, cfg.n_histogram_bins);
    let binned = mapper.transform(x);
    let target: Vec<f64> = y.iter().map(|l| *l as f64).collect();
    let rate = target.iter().sum::<f64>() / target.len() as f64;
    let initial = (rate / (1.0 - rate)).ln();
    let params = GrowParams {
        max_leaf_nodes: cfg.max_leaf_nodes,
        min_samples_leaf: cfg.min_samples_leaf,
        l2: cfg.l2_regularization,
        learning_rate: cfg.learning_rate,
    };

    let n = y.len();
    let mut raw = vec![initial; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let initial_loss = log_loss(&raw, &target);
    let mut loss = initial_loss;
    let mut trees = Vec::with_capacity(cfg.max_iter);
    let mut loss_trace = Vec::with_capacity(cfg.max_iter);

    for _ in 0..cfg.max_iter {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - target[i];
            hess[i] = p * (1.0 - p);
        }
        let grown = grow_tree(&binned, &mapper.edges, &grad, &hess, &params);
        let mut next = raw.clone();
        for (value, rows) in &grown.leaf_rows {
            for &r in rows {
                next[r as usize] += value;
            }
        }
        let next_loss = log_loss(&next, &target);
        if next_loss <= loss {
            raw = next;
            loss = next_loss;
            trees.push(grown.tree);
        } else {
            // a step that does not reduce training loss contributes nothing
            trees.push(Tree::constant(0.0, n));
        }
        loss_trace.push(loss);
    }

    Ok(GbmModel {
        config: *cfg,
        n_features: x.ncols(),
        initial_log_odds: initial,
        bin_edges: mapper.edges,
        trees,
        initial_loss,
        loss_trace,
    })
}

impl GbmModel {
    /// A model with no trees that predicts `base_rate` everywhere.
    pub fn prior_only(base_rate: f64, n_features: usize) -> Self {
        Self {
            config: GbmConfig::default(),
            n_features,
            initial_log_odds: (base_rate / (1.0 - base_rate)).ln(),
            bin_edges: vec![Vec::new(); n_features],
            trees: Vec::new(),
            initial_loss: 0.0,
            loss_trace: Vec::new(),
        }
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ShapeMismatch(format!(
                "model has {} features, input has {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                self.trees
                    .iter()
                    .fold(self.initial_log_odds, |acc, t| acc + t.predict_row(row))
            })
            .collect())
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.decision_function(x)?.into_iter().map(probability).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn predict_proba_gbm(model: &GbmModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy() -> (Array2<f64>, Vec<u8>) {
        let x = Array2::from_shape_fn((200, 2), |(i, j)| if j == 0 { i as f64 } else { (i % 7) as f64 });
        let y = (0..200).map(|i| (i >= 100) as u8).collect();
        (x, y)
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, mut y) = toy();
        let cfg = GbmConfig::default();
        assert!(matches!(fit_gbm(x.view(), &y[..10], &cfg), Err(Error::ShapeMismatch(_))));
        let ones = vec![1u8; 200];
        assert!(matches!(fit_gbm(x.view(), &ones, &cfg), Err(Error::SingleClass)));
        let mut xn = x.clone();
        xn[[3, 1]] = f64::NAN;
        assert!(matches!(fit_gbm(xn.view(), &y, &cfg), Err(Error::InvalidInput(_))));
        let small = x.slice(ndarray::s![70..130, ..]).to_owned();
        y = y[70..130].to_vec();
        assert!(matches!(fit_gbm(small.view(), &y, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn prior_only_predicts_base_rate() {
        let m = GbmModel::prior_only(0.518, 3);
        let p = m.predict_proba(Array2::zeros((4, 3)).view()).unwrap();
        assert!(p.iter().all(|v| (v - 0.518).abs() < 1e-12));
        assert!(m.predict_proba(Array2::zeros((4, 2)).view()).is_err());
    }

    #[test]
    fn structural_constraints_and_json() {
        let (x, y) = toy();
        let cfg = GbmConfig {
            max_iter: 20,
            min_samples_leaf: 20,
            max_leaf_nodes: 5,
            ..Default::default()
        };
        let m = fit_gbm(x.view(), &y, &cfg).unwrap();
        for t in &m.trees {
            assert!(t.n_leaves() <= 5);
            assert!(t.leaves().all(|(_, c)| c >= 20));
        }
        let back = GbmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.predict_proba(x.view()).unwrap(), m.predict_proba(x.view()).unwrap());
    }

    #[test]
    fn extreme_scores_stay_inside_unit_interval() {
        assert!(probability(1e6) < 1.0);
        assert!(probability(-1e6) > 0.0);
    }
}
