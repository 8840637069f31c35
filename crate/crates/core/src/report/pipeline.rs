use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Combine, ModelKind, RunConfig, TargetName};
use crate::audit::{leak_audit, AuditConfig, AuditReport};
use crate::daily_features::{build_tokenized_matrix, compute_daily_rows, DailyFeature};
use crate::error::{Error, Result, StageExt};
use crate::evaluation::{
    calibration_curve, classification_metrics, importance_rank_matrix, macro_average, make_folds, permutation_test,
    CalibrationBin, Metrics, PermConfig, PermResult, RankMatrix,
};
use crate::gbm::{fit_gbm, permutation_importance, GbmConfig};
use crate::intraday_features::{build_intraday_features, compute_intraday_rows, sequence_names};
use crate::lstm::{fit_lstm, LstmConfig};
use crate::market_data::Session;
use crate::rng::{derive_seed, derived};
use crate::targets::{base_rate, build_labels};

/// Rows surviving one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub rows: usize,
}

/// Model-ready design matrix. `label_dates` decide fold membership.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: ModelKind,
    pub target: TargetName,
    pub names: Vec<String>,
    pub feature_dates: Vec<NaiveDate>,
    pub label_dates: Vec<NaiveDate>,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

fn count(stage: &str, rows: usize) -> StageCount {
    StageCount {
        stage: stage.to_string(),
        rows,
    }
}

/// Builds features and labels for `cfg.run.model`.
///
/// Daily features use the session's own close, so a daily row is paired
/// with the label of the following session. Intraday rows see only the
/// opening window and are paired with the same session's label.
pub fn build_dataset(
    sessions: &[Session],
    regime: Option<&BTreeMap<NaiveDate, i64>>,
    cfg: &RunConfig,
) -> Result<(Dataset, Vec<StageCount>)> {
    let daily = compute_daily_rows(sessions, regime, &cfg.daily).stage("features")?;
    let atr: BTreeMap<NaiveDate, f64> = daily
        .iter()
        .filter_map(|r| Some((r.date, r.get(DailyFeature::AtrRatio)?)))
        .collect();
    let labels = build_labels(sessions, &atr, &cfg.target_spec()).stage("labels")?;
    let label_of = labels.as_map();
    let mut counts = vec![count("sessions", sessions.len()), count("daily_rows", daily.len())];

    let mut feature_dates = Vec::new();
    let mut label_dates = Vec::new();
    let mut y = Vec::new();
    let mut keep = Vec::new();
    let (names, values) = match cfg.run.model {
        ModelKind::GbDaily => {
            let m = build_tokenized_matrix(&daily, &cfg.tokenizer).stage("features")?;
            counts.push(count("feature_rows", m.n_rows()));
            let next: BTreeMap<NaiveDate, NaiveDate> = sessions.windows(2).map(|w| (w[0].date, w[1].date)).collect();
            for (i, d) in m.dates.iter().enumerate() {
                let Some(nd) = next.get(d) else { continue };
                let Some(l) = label_of.get(nd) else { continue };
                keep.push(i);
                feature_dates.push(*d);
                label_dates.push(*nd);
                y.push(*l);
            }
            (m.names, m.values)
        }
        ModelKind::GbIntraday | ModelKind::GbVoladj => {
            let m = build_intraday_features(sessions, &daily, &cfg.intraday).stage("features")?;
            counts.push(count("feature_rows", m.n_rows()));
            for (i, d) in m.dates.iter().enumerate() {
                let Some(l) = label_of.get(d) else { continue };
                keep.push(i);
                feature_dates.push(*d);
                label_dates.push(*d);
                y.push(*l);
            }
            (m.names, m.values)
        }
        ModelKind::Lstm => {
            let rows = compute_intraday_rows(sessions, &daily, &cfg.intraday).stage("features")?;
            let w = cfg.intraday.window_bars;
            let mut flat = Vec::new();
            let mut n = 0;
            for r in &rows {
                let seq: Option<Vec<f64>> = r.values[..w].iter().copied().collect();
                let (Some(seq), Some(l)) = (seq, label_of.get(&r.date)) else { continue };
                flat.extend(seq);
                keep.push(n);
                n += 1;
                feature_dates.push(r.date);
                label_dates.push(r.date);
                y.push(*l);
            }
            counts.push(count("feature_rows", n));
            let values = Array2::from_shape_vec((n, w), flat).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            (sequence_names(&cfg.intraday), values)
        }
    };
    counts.push(count("labels", labels.len()));
    counts.push(count("dataset_rows", keep.len()));
    Ok((
        Dataset {
            model: cfg.run.model,
            target: cfg.target(),
            names,
            feature_dates,
            label_dates,
            x: values.select(Axis(0), &keep),
            y,
        },
        counts,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_start: i32,
    pub train_end: i32,
    pub test_year: i32,
    pub n_train: usize,
    pub n_test: usize,
    pub train_base_rate: f64,
    pub test_base_rate: f64,
    pub metrics: Metrics,
    pub calibration: Vec<CalibrationBin>,
    /// Permutation importance on the training window, in `feature_names` order.
    pub importance: Option<Vec<f64>>,
    /// Restored epoch, LSTM only.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedResult {
    pub method: Combine,
    pub base_rate: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub model: ModelKind,
    pub target: TargetName,
    pub feature_names: Vec<String>,
    pub n_rows: usize,
    pub base_rate: f64,
    pub folds: Vec<FoldResult>,
    pub combined: CombinedResult,
    /// Final-fold permutation test.
    pub permutation: Option<PermResult>,
    pub importance_ranks: Option<RankMatrix>,
}

fn gbm_predict(cfg: GbmConfig, xtr: ArrayView2<'_, f64>, ytr: &[u8], xte: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<f64>> {
    let model = fit_gbm(xtr, ytr, &GbmConfig { seed, ..cfg })?;
    model.predict_proba(xte)
}

fn lstm_predict(cfg: LstmConfig, xtr: ArrayView2<'_, f64>, ytr: &[u8], xte: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<f64>> {
    let model = fit_lstm(xtr, ytr, &LstmConfig { seed, ..cfg })?;
    model.predict_proba(xte)
}

/// Per-fold fit, predict and score, then pooled metrics, the final-fold
/// permutation test and importance stability.
pub fn evaluate(ds: &Dataset, cfg: &RunConfig, timings: &mut Timings) -> Result<RunReport> {
    let folds = make_folds(&ds.label_dates, &cfg.folds).stage("folds")?;
    let is_lstm = ds.model == ModelKind::Lstm;
    let model_seed = if is_lstm { cfg.lstm.seed } else { cfg.gbm.seed };
    let trainer = |xtr: ArrayView2<'_, f64>, ytr: &[u8], xte: ArrayView2<'_, f64>, seed: u64| {
        if is_lstm {
            lstm_predict(cfg.lstm, xtr, ytr, xte, seed)
        } else {
            gbm_predict(cfg.gbm, xtr, ytr, xte, seed)
        }
    };

    let mut results = Vec::with_capacity(folds.len());
    let mut pooled_p = Vec::new();
    let mut pooled_y = Vec::new();
    let mut per_fold_metrics = Vec::new();
    for (k, fold) in folds.iter().enumerate() {
        let xtr = ds.x.select(Axis(0), &fold.train);
        let xte = ds.x.select(Axis(0), &fold.test);
        let ytr: Vec<u8> = fold.train.iter().map(|&i| ds.y[i]).collect();
        let yte: Vec<u8> = fold.test.iter().map(|&i| ds.y[i]).collect();

        let (probs, importance, best_epoch) = if is_lstm {
            let m = fit_lstm(xtr.view(), &ytr, &cfg.lstm).stage("fit")?;
            (m.predict_proba(xte.view()).stage("predict")?, None, Some(m.best_epoch))
        } else {
            let m = fit_gbm(xtr.view(), &ytr, &cfg.gbm).stage("fit")?;
            let imp = permutation_importance(
                &m,
                xtr.view(),
                &ytr,
                cfg.run.importance_repeats,
                derive_seed(cfg.run.seed, k as u64),
            )
            .stage("importance")?;
            (m.predict_proba(xte.view()).stage("predict")?, Some(imp), None)
        };
        let metrics = classification_metrics(&probs, &yte, 0.5).stage("metrics")?;
        per_fold_metrics.push(metrics);
        results.push(FoldResult {
            fold: k + 1,
            train_start: fold.def.train_start,
            train_end: fold.def.train_end,
            test_year: fold.def.test_year,
            n_train: ytr.len(),
            n_test: yte.len(),
            train_base_rate: base_rate(&ytr)?,
            test_base_rate: base_rate(&yte)?,
            metrics,
            calibration: calibration_curve(&probs, &yte, cfg.run.calibration_bins),
            importance,
            best_epoch,
        });
        pooled_p.extend(probs);
        pooled_y.extend(yte);
        timings.mark(&format!("fold_{}", k + 1));
    }

    let combined = CombinedResult {
        method: cfg.run.combine,
        base_rate: base_rate(&pooled_y)?,
        metrics: match cfg.run.combine {
            Combine::Micro => classification_metrics(&pooled_p, &pooled_y, 0.5)?,
            Combine::Macro => macro_average(&per_fold_metrics)?,
        },
    };

    let permutation = if cfg.permutation.n > 0 {
        let last = folds.last().expect("make_folds returns at least one fold");
        let xtr = ds.x.select(Axis(0), &last.train);
        let xte = ds.x.select(Axis(0), &last.test);
        let ytr: Vec<u8> = last.train.iter().map(|&i| ds.y[i]).collect();
        let yte: Vec<u8> = last.test.iter().map(|&i| ds.y[i]).collect();
        let pc = PermConfig {
            n_iterations: cfg.permutation.n,
            seed: model_seed,
            scope: cfg.permutation.scope,
            smoothed: cfg.permutation.smoothed,
            alpha: cfg.permutation.alpha,
            threshold: 0.5,
        };
        let r = permutation_test(&trainer, xtr.view(), &ytr, xte.view(), &yte, &pc).stage("permutation")?;
        timings.mark("permutation");
        Some(r)
    } else {
        None
    };

    let importance_ranks = if results.len() >= 2 && !is_lstm {
        let per_fold: Vec<Vec<f64>> = results.iter().filter_map(|r| r.importance.clone()).collect();
        Some(importance_rank_matrix(&ds.names, &per_fold, cfg.run.top_k).stage("importance")?)
    } else {
        None
    };

    Ok(RunReport {
        version: crate::VERSION.to_string(),
        model: ds.model,
        target: ds.target,
        feature_names: ds.names.clone(),
        n_rows: ds.y.len(),
        base_rate: base_rate(&ds.y)?,
        folds: results,
        combined,
        permutation,
        importance_ranks,
    })
}

/// Stage stopwatch. Inert unless enabled, so default manifests hold no
/// wall-clock values.
#[derive(Debug)]
pub struct Timings {
    enabled: bool,
    last: Instant,
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn mark(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.stages.push((stage.to_string(), (now - self.last).as_secs_f64() * 1e3));
            self.last = now;
        }
    }

    pub fn recorded(&self) -> Option<Vec<(String, f64)>> {
        self.enabled.then(|| self.stages.clone())
    }
}

/// Leak audit at `n` seeded cutoffs spread over the middle of the sample.
pub fn audit_cutoffs(sessions: &[Session], n: usize, seed: u64, cfg: &RunConfig) -> Result<Vec<AuditReport>> {
    if sessions.len() < 4 {
        return Err(Error::InsufficientData("leak audit needs at least 4 sessions".into()));
    }
    let acfg = AuditConfig {
        daily: cfg.daily,
        intraday: cfg.intraday,
        tokenizer: cfg.tokenizer,
    };
    let mut rng = derived(seed, 0xA0D1);
    let lo = (sessions.len() / 10).max(1);
    let hi = sessions.len() - 1;
    (0..n)
        .map(|k| {
            let idx = rng.gen_range(lo..hi);
            let r = leak_audit(sessions, sessions[idx - 1].date, derive_seed(seed, k as u64), &acfg)?;
            if !r.passed() {
                return Err(Error::LeakDetected(format!(
                    "cutoff {}: {}",
                    r.cutoff,
                    r.mismatches.join("; ")
                )));
            }
            Ok(r)
        })
        .collect()
}
