use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the denominator was zero and the rate reported as 0.
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
    /// Mean predicted probability over actual positives; `None` if there are none.
    pub mean_prob_actual_pos: Option<f64>,
    pub mean_prob_actual_neg: Option<f64>,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Predicts positive when `prob >= threshold`.
pub fn classification_metrics(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Metrics> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} probabilities but {} labels", probs.len(), labels.len())));
    }
    if probs.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one prediction".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
    for (&p, &y) in probs.iter().zip(labels) {
        let pred = p >= threshold;
        match (pred, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        if y == 1 {
            pos_sum += p;
        } else {
            neg_sum += p;
        }
    }
    let n = probs.len();
    let (precision, precision_degenerate) = ratio(tp, tp + fp);
    let (recall, recall_degenerate) = ratio(tp, tp + fn_);
    let (f1, f1_degenerate) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    let n_pos = tp + fn_;
    let n_neg = fp + tn;
    Ok(Metrics {
        n,
        tp,
        fp,
        tn,
        fn_,
        accuracy: (tp + tn) as f64 / n as f64,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
        f1_degenerate,
        mean_prob_actual_pos: (n_pos > 0).then(|| pos_sum / n_pos as f64),
        mean_prob_actual_neg: (n_neg > 0).then(|| neg_sum / n_neg as f64),
    })
}

/// Unweighted mean of per-fold rates; counts are summed.
pub fn macro_average(folds: &[Metrics]) -> Result<Metrics> {
    if folds.is_empty() {
        return Err(Error::InvalidInput("no folds to average".into()));
    }
    let k = folds.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / k;
    let avg_opt = |f: fn(&Metrics) -> Option<f64>| {
        let v: Vec<f64> = folds.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(Metrics {
        n: folds.iter().map(|m| m.n).sum(),
        tp: folds.iter().map(|m| m.tp).sum(),
        fp: folds.iter().map(|m| m.fp).sum(),
        tn: folds.iter().map(|m| m.tn).sum(),
        fn_: folds.iter().map(|m| m.fn_).sum(),
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        precision_degenerate: folds.iter().any(|m| m.precision_degenerate),
        recall_degenerate: folds.iter().any(|m| m.recall_degenerate),
        f1_degenerate: folds.iter().any(|m| m.f1_degenerate),
        mean_prob_actual_pos: avg_opt(|m| m.mean_prob_actual_pos),
        mean_prob_actual_neg: avg_opt(|m| m.mean_prob_actual_neg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub center: f64,
    pub mean_prob: f64,
    pub positive_rate: f64,
    pub count: usize,
}

/// Equal-width bins on [0, 1]; a probability of exactly 1 falls in the top bin.
/// Empty bins are omitted.
pub fn calibration_curve(probs: &[f64], labels: &[u8], n_bins: usize) -> Vec<CalibrationBin> {
    let n_bins = n_bins.max(1);
    let mut sums = vec![(0.0, 0usize, 0usize); n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        sums[b].0 += p;
        sums[b].1 += y as usize;
        sums[b].2 += 1;
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, s)| s.2 > 0)
        .map(|(b, (psum, pos, count))| CalibrationBin {
            center: (2 * b + 1) as f64 / (2 * n_bins) as f64,
            mean_prob: psum / count as f64,
            positive_rate: pos as f64 / count as f64,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_pair() {
        let m = classification_metrics(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.mean_prob_actual_pos, Some(0.9));
        assert_eq!(m.mean_prob_actual_neg, Some(0.1));
    }

    #[test]
    fn hand_counted_confusion() {
        // TP=3 FP=1 FN=2 TN=4
        let probs = [0.9, 0.8, 0.7, 0.6, 0.2, 0.3, 0.1, 0.1, 0.2, 0.4];
        let labels = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
        let m = classification_metrics(&probs, &labels, 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (3, 1, 2, 4));
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_predicted_positives() {
        let m = classification_metrics(&[0.1, 0.2, 0.3], &[1, 0, 0], 0.5).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_degenerate && m.f1_degenerate);
        assert!(!m.recall_degenerate);
        assert!(classification_metrics(&[], &[], 0.5).is_err());
        assert!(classification_metrics(&[0.1], &[1, 0], 0.5).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let m = classification_metrics(&[0.5, 0.5], &[1, 0], 0.5).unwrap();
        assert_eq!((m.tp, m.fp), (1, 1));
        assert_eq!(m.mean_prob_actual_neg, Some(0.5));
    }

    #[test]
    fn calibration_shapes() {
        let bins = calibration_curve(&[0.0, 1.0, 1.0, 0.0], &[0, 1, 1, 0], 10);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].positive_rate, 0.0);
        assert_eq!(bins[1].positive_rate, 1.0);
        assert_eq!(bins[1].center, 0.95);

        let labels: Vec<u8> = (0..100).map(|i| (i < 52) as u8).collect();
        let flat = calibration_curve(&[0.5; 100], &labels, 10);
        assert_eq!(flat.len(), 1);
        assert!((flat[0].positive_rate - 0.52).abs() < 1e-12);
    }

    #[test]
    fn macro_average_of_two() {
        let a = classification_metrics(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        let b = classification_metrics(&[0.9, 0.9], &[1, 0], 0.5).unwrap();
        let m = macro_average(&[a, b]).unwrap();
        assert!((m.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(m.n, 4);
    }
}
