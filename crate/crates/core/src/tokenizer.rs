//! Expanding-window quantile tokenization.
//!
//! The token for position `N` is computed from the thresholds of values at
//! positions `0..N` only. Missing inputs stay missing and do not enter the
//! history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub n_bins: usize,
    /// Prior non-missing observations required before a token is emitted.
    pub min_history: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            n_bins: 10,
            min_history: 20,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::InvalidConfig("n_bins must be at least 2".into()));
        }
        if self.min_history < self.n_bins {
            return Err(Error::InvalidConfig(format!(
                "min_history {} must be >= n_bins {}",
                self.min_history, self.n_bins
            )));
        }
        Ok(())
    }
}

/// The `q / n_bins` quantiles (`q = 1..n_bins`) of `history`, linearly
/// interpolated between order statistics.
pub fn expanding_thresholds(history: &[f64], n_bins: usize) -> Result<Vec<f64>> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig("n_bins must be at least 2".into()));
    }
    if history.len() < n_bins {
        return Err(Error::InsufficientData(format!(
            "{} values, need at least {n_bins}",
            history.len()
        )));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(thresholds_of_sorted(&sorted, n_bins))
}

fn thresholds_of_sorted(sorted: &[f64], n_bins: usize) -> Vec<f64> {
    (1..n_bins)
        .map(|q| quantile_sorted(sorted, q as f64 / n_bins as f64))
        .collect()
}

/// Number of thresholds strictly below `value`; a value equal to a
/// threshold lands in the lower bin.
pub fn token_for(value: f64, thresholds: &[f64]) -> u32 {
    thresholds.partition_point(|t| *t < value) as u32
}

/// Tokenizes a date-ordered series. Values that are missing, or that have
/// fewer than `min_history` prior non-missing values, map to `None`.
pub fn tokenize_series(series: &[Option<f64>], cfg: &TokenizerConfig) -> Result<Vec<Option<u32>>> {
    cfg.validate()?;
    let mut history: Vec<f64> = Vec::with_capacity(series.len());
    let mut out = Vec::with_capacity(series.len());
    for value in series {
        let token = match value {
            Some(v) if history.len() >= cfg.min_history => {
                let th = thresholds_of_sorted(&history, cfg.n_bins);
                Some(token_for(*v, &th).min(cfg.n_bins as u32 - 1))
            }
            _ => None,
        };
        out.push(token);
        if let Some(v) = value {
            let at = history.partition_point(|h| h.total_cmp(v).is_le());
            history.insert(at, *v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deciles_of_one_to_ten() {
        let history: Vec<f64> = (1..=10).map(f64::from).collect();
        let th = expanding_thresholds(&history, 10).unwrap();
        let expected = [1.9, 2.8, 3.7, 4.6, 5.5, 6.4, 7.3, 8.2, 9.1];
        assert_eq!(th.len(), 9);
        for (a, b) in th.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_history() {
        let th = expanding_thresholds(&[5.0; 30], 10).unwrap();
        assert!(th.iter().all(|t| *t == 5.0));
    }

    #[test]
    fn insufficient_history() {
        assert!(matches!(
            expanding_thresholds(&[1.0, 2.0], 10),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ties_resolve_downward() {
        let series = vec![Some(3.0); 50];
        let tokens = tokenize_series(&series, &TokenizerConfig::default()).unwrap();
        assert!(tokens[..20].iter().all(Option::is_none));
        assert!(tokens[20..].iter().all(|t| *t == Some(0)));
    }

    #[test]
    fn warm_up_and_missing_inputs() {
        let cfg = TokenizerConfig::default();
        let mut series: Vec<Option<f64>> = (0..40).map(|i| Some(i as f64)).collect();
        series[25] = None;
        let tokens = tokenize_series(&series, &cfg).unwrap();
        assert!(tokens[..20].iter().all(Option::is_none));
        assert_eq!(tokens[25], None);
        // a strictly increasing series always exceeds every prior threshold
        assert_eq!(tokens[30], Some(9));
    }

    #[test]
    fn config_validation() {
        assert!(TokenizerConfig { n_bins: 1, min_history: 5 }.validate().is_err());
        assert!(TokenizerConfig { n_bins: 10, min_history: 5 }.validate().is_err());
        assert!(TokenizerConfig::default().validate().is_ok());
    }
}
