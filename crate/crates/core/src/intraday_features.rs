//! First-hour feature matrix. Only bars inside the opening window plus
//! prior-session data feed a row; nothing from the reference bar onward.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::daily_features::{DailyFeature, DailyRow};
use crate::error::{Error, Result};
use crate::frame::FeatureMatrix;
use crate::market_data::Session;
use crate::stats::{mean, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnUnits {
    /// `close / open - 1`
    Relative,
    /// `close - open`, index points
    Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntradayConfig {
    /// Bars observed before the reference bar (12 at 5-minute resolution).
    pub window_bars: usize,
    /// Bars in the short sub-window (`*_6` features).
    pub half_window_bars: usize,
    /// Prior sessions in the `vol_z_12` baseline.
    pub volume_baseline: usize,
    pub return_units: ReturnUnits,
}

impl Default for IntradayConfig {
    fn default() -> Self {
        Self {
            window_bars: 12,
            half_window_bars: 6,
            volume_baseline: 20,
            return_units: ReturnUnits::Relative,
        }
    }
}

/// One entry of the feature manifest written next to every intraday export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub description: String,
}

pub fn sequence_names(cfg: &IntradayConfig) -> Vec<String> {
    (1..=cfg.window_bars).map(|i| format!("bar_ret_{i}")).collect()
}

fn scalar_columns(cfg: &IntradayConfig) -> Vec<(String, String)> {
    let (h, w) = (cfg.half_window_bars, cfg.window_bars);
    vec![
        (format!("cum_ret_{h}"), format!("bar 1 open to bar {h} close, relative")),
        (format!("cum_ret_{w}"), format!("bar 1 open to bar {w} close, relative")),
        (format!("range_{h}"), format!("high - low over bars 1-{h}, points")),
        (format!("range_{w}"), format!("high - low over bars 1-{w}, points")),
        (format!("vol_sum_{h}"), format!("volume over bars 1-{h}")),
        (format!("vol_sum_{w}"), format!("volume over bars 1-{w}")),
        ("up_count".into(), "bars with positive bar return".into()),
        ("down_count".into(), "bars with negative bar return".into()),
        ("max_up".into(), "largest bar return, floored at 0".into()),
        ("max_down".into(), "most negative bar return, capped at 0".into()),
        (format!("close_pos_{w}"), format!("bar {w} close within the window range, 0.5 when flat")),
        (
            format!("vol_z_{w}"),
            format!("vol_sum_{w} z-score against the prior {} sessions", cfg.volume_baseline),
        ),
        ("opening_gap".into(), "overnight gap of the session".into()),
        ("atr_ratio_val".into(), "daily ATR fast/slow ratio".into()),
        ("first_bar_ret".into(), "alias of bar_ret_1".into()),
    ]
}

/// Every column the intraday builder emits, in export order. The bar
/// return sequence is contiguous and comes first.
pub fn manifest(cfg: &IntradayConfig) -> Vec<ManifestEntry> {
    let unit = match cfg.return_units {
        ReturnUnits::Relative => "close/open - 1",
        ReturnUnits::Points => "close - open, points",
    };
    sequence_names(cfg)
        .into_iter()
        .map(|name| ManifestEntry {
            description: format!("bar return ({unit})"),
            name,
        })
        .chain(
            scalar_columns(cfg)
                .into_iter()
                .map(|(name, description)| ManifestEntry { name, description }),
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayRow {
    pub date: NaiveDate,
    /// In [`manifest`] order.
    pub values: Vec<Option<f64>>,
}

/// Per-session window statistics that need no cross-session context.
fn window_stats(session: &Session, cfg: &IntradayConfig) -> Vec<Option<f64>> {
    let bars = &session.bars[..cfg.window_bars];
    let rets: Vec<f64> = bars
        .iter()
        .map(|b| match cfg.return_units {
            ReturnUnits::Relative => b.close / b.open - 1.0,
            ReturnUnits::Points => b.close - b.open,
        })
        .collect();
    let open = bars[0].open;
    let span = |k: usize| {
        let hi = bars[..k].iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let lo = bars[..k].iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        (hi, lo)
    };
    let vol = |k: usize| bars[..k].iter().map(|b| b.volume as f64).sum::<f64>();
    let (hi_h, lo_h) = span(cfg.half_window_bars);
    let (hi_w, lo_w) = span(cfg.window_bars);
    let last_close = bars[cfg.window_bars - 1].close;
    let close_pos = match hi_w - lo_w {
        r if r > 0.0 => (last_close - lo_w) / r,
        _ => 0.5,
    };

    let mut out: Vec<Option<f64>> = rets.iter().map(|r| Some(*r)).collect();
    out.extend([
        Some(bars[cfg.half_window_bars - 1].close / open - 1.0),
        Some(last_close / open - 1.0),
        Some(hi_h - lo_h),
        Some(hi_w - lo_w),
        Some(vol(cfg.half_window_bars)),
        Some(vol(cfg.window_bars)),
        Some(rets.iter().filter(|r| **r > 0.0).count() as f64),
        Some(rets.iter().filter(|r| **r < 0.0).count() as f64),
        Some(rets.iter().copied().fold(0.0, f64::max)),
        Some(rets.iter().copied().fold(0.0, f64::min)),
        Some(close_pos),
    ]);
    out
}

/// Builds one row per session, in date order, before missing-row removal.
pub fn compute_intraday_rows(
    sessions: &[Session],
    daily_rows: &[DailyRow],
    cfg: &IntradayConfig,
) -> Result<Vec<IntradayRow>> {
    if cfg.half_window_bars == 0 || cfg.half_window_bars > cfg.window_bars {
        return Err(Error::InvalidConfig("half_window_bars must be in 1..=window_bars".into()));
    }
    if let Some(s) = sessions.iter().find(|s| s.bars.len() <= cfg.window_bars) {
        return Err(Error::InvalidInput(format!(
            "session {} has {} bars, need more than {}",
            s.date,
            s.bars.len(),
            cfg.window_bars
        )));
    }
    let daily: BTreeMap<NaiveDate, &DailyRow> = daily_rows.iter().map(|r| (r.date, r)).collect();
    let vol_sums: Vec<f64> = sessions
        .iter()
        .map(|s| s.bars[..cfg.window_bars].iter().map(|b| b.volume as f64).sum())
        .collect();

    let mut rows = Vec::with_capacity(sessions.len());
    for (i, s) in sessions.iter().enumerate() {
        let mut values = window_stats(s, cfg);
        let b = cfg.volume_baseline;
        let vol_z = (i >= b)
            .then(|| &vol_sums[i - b..i])
            .and_then(|w| {
                let sd = sample_std(w)?;
                (sd > 0.0).then(|| (vol_sums[i] - mean(w)) / sd)
            });
        let d = daily.get(&s.date);
        values.push(vol_z);
        values.push(d.and_then(|r| r.get(DailyFeature::OvernightGap)));
        values.push(d.and_then(|r| r.get(DailyFeature::AtrRatio)));
        values.push(values[0]);
        rows.push(IntradayRow { date: s.date, values });
    }
    Ok(rows)
}

pub fn column_names(cfg: &IntradayConfig) -> Vec<String> {
    manifest(cfg).into_iter().map(|e| e.name).collect()
}

/// Raw (untokenized) matrix with incomplete rows dropped.
pub fn build_intraday_features(
    sessions: &[Session],
    daily_rows: &[DailyRow],
    cfg: &IntradayConfig,
) -> Result<FeatureMatrix> {
    let rows = compute_intraday_rows(sessions, daily_rows, cfg)?;
    FeatureMatrix::from_optional_rows(column_names(cfg), rows.into_iter().map(|r| (r.date, r.values)))
}
