use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::stats::{mean, sample_std};

/// A fit-then-predict procedure, deterministic given `seed`.
pub trait Trainer: Sync {
    fn fit_predict(&self, x_train: ArrayView2<'_, f64>, y_train: &[u8], x_test: ArrayView2<'_, f64>, seed: u64)
        -> Result<Vec<f64>>;
}

impl<F> Trainer for F
where
    F: Fn(ArrayView2<'_, f64>, &[u8], ArrayView2<'_, f64>, u64) -> Result<Vec<f64>> + Sync,
{
    fn fit_predict(&self, x_train: ArrayView2<'_, f64>, y_train: &[u8], x_test: ArrayView2<'_, f64>, seed: u64)
        -> Result<Vec<f64>> {
        self(x_train, y_train, x_test, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleScope {
    /// One permutation of the concatenated train + test labels.
    Global,
    /// Permute training labels only; evaluate against the real test labels.
    TrainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermConfig {
    pub n_iterations: usize,
    pub seed: u64,
    pub scope: ShuffleScope,
    /// Report `(r + 1) / (n + 1)` instead of `r / n`.
    pub smoothed: bool,
    pub alpha: f64,
    pub threshold: f64,
}

impl Default for PermConfig {
    fn default() -> Self {
        Self {
            n_iterations: 200,
            seed: 0,
            scope: ShuffleScope::Global,
            smoothed: false,
            alpha: 0.05,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS: statistically significant",
            Verdict::Fail => "FAIL: not statistically significant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermResult {
    pub actual_accuracy: f64,
    pub n_iterations: usize,
    pub shuffled: Vec<f64>,
    pub shuffled_mean: f64,
    pub shuffled_std: f64,
    pub shuffled_max: f64,
    /// Shuffled runs with accuracy `>=` the actual accuracy.
    pub n_at_least_actual: usize,
    pub p_value: f64,
    pub smoothed: bool,
    pub alpha: f64,
    pub verdict: Verdict,
}

fn accuracy(probs: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "trainer returned {} predictions for {} test rows",
            probs.len(),
            labels.len()
        )));
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= threshold) == (**y == 1))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Refits `trainer` on label-shuffled data `cfg.n_iterations` times.
///
/// Iteration `i` draws its permutation from `derive_seed(cfg.seed, i)` and
/// passes the same seed to the trainer, so the result is independent of
/// scheduling. The unshuffled fit receives `cfg.seed`.
pub fn permutation_test<T: Trainer + ?Sized>(
    trainer: &T,
    x_train: ArrayView2<'_, f64>,
    y_train: &[u8],
    x_test: ArrayView2<'_, f64>,
    y_test: &[u8],
    cfg: &PermConfig,
) -> Result<PermResult> {
    if cfg.n_iterations == 0 {
        return Err(Error::InvalidConfig("permutation test needs at least one iteration".into()));
    }
    if y_test.is_empty() || x_test.nrows() != y_test.len() || x_train.nrows() != y_train.len() {
        return Err(Error::ShapeMismatch("train/test rows and labels disagree".into()));
    }
    let actual = accuracy(&trainer.fit_predict(x_train, y_train, x_test, cfg.seed)?, y_test, cfg.threshold)?;
    let n_train = y_train.len();
    let pooled: Vec<u8> = y_train.iter().chain(y_test).copied().collect();

    let shuffled = (0..cfg.n_iterations)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, i as u64);
            let mut rng = seeded(seed);
            let mut run = || -> Result<f64> {
                let (tr, te): (Vec<u8>, Vec<u8>) = match cfg.scope {
                    ShuffleScope::Global => {
                        let mut all = pooled.clone();
                        all.shuffle(&mut rng);
                        let te = all.split_off(n_train);
                        (all, te)
                    }
                    ShuffleScope::TrainOnly => {
                        let mut tr = y_train.to_vec();
                        tr.shuffle(&mut rng);
                        (tr, y_test.to_vec())
                    }
                };
                let probs = trainer.fit_predict(x_train, &tr, x_test, seed)?;
                accuracy(&probs, &te, cfg.threshold)
            };
            run().map_err(|e| Error::Permutation {
                iteration: i,
                source: Box::new(e),
            })
        })
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let n = shuffled.len();
    let r = shuffled.iter().filter(|a| **a >= actual).count();
    let p_value = if cfg.smoothed {
        (r + 1) as f64 / (n + 1) as f64
    } else {
        r as f64 / n as f64
    };
    Ok(PermResult {
        actual_accuracy: actual,
        n_iterations: n,
        shuffled_mean: mean(&shuffled),
        shuffled_std: sample_std(&shuffled).unwrap_or(0.0),
        shuffled_max: shuffled.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        shuffled,
        n_at_least_actual: r,
        p_value,
        smoothed: cfg.smoothed,
        alpha: cfg.alpha,
        verdict: if p_value < cfg.alpha { Verdict::Pass } else { Verdict::Fail },
    })
}
