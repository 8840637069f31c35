use wflab::tokenizer::TokenizerConfig;

/// Sort the prefix from scratch and interpolate between order statistics.
pub fn oracle_thresholds(history: &[f64], n_bins: usize) -> Vec<f64> {
    let mut s = history.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let last = s.len() - 1;
    (1..n_bins)
        .map(|q| {
            let h = last as f64 * (q as f64 / n_bins as f64);
            let j = h.floor() as usize;
            let k = if j < last { j + 1 } else { last };
            s[j] + (h - j as f64) * (s[k] - s[j])
        })
        .collect()
}

pub fn oracle_tokens(series: &[Option<f64>], cfg: &TokenizerConfig) -> Vec<Option<u32>> {
    (0..series.len())
        .map(|n| {
            let v = series[n]?;
            let history: Vec<f64> = series[..n].iter().flatten().copied().collect();
            if history.len() < cfg.min_history {
                return None;
            }
            let th = oracle_thresholds(&history, cfg.n_bins);
            let below = th.iter().filter(|t| **t < v).count() as u32;
            Some(below.min(cfg.n_bins as u32 - 1))
        })
        .collect()
}
