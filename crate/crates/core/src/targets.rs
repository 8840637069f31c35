//! Binary targets. Every comparison against a threshold is strict.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    DailyCloseVsOpen,
    FirstHourSurvival,
    IntradayFrom1030,
    IntradayVolAdjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Long,
    Short,
}

/// Default ATR baseline in points for the volatility-adjusted target.
pub const ATR_BASELINE: f64 = 10.34;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub side: Side,
    pub threshold_points: f64,
    /// Multiplier on `atr_ratio × atr_baseline`; vol-adjusted only.
    pub atr_multiplier: f64,
    pub atr_baseline: f64,
    /// Bars scanned by first-hour survival, and the index of the reference
    /// bar for the intraday targets.
    pub window_bars: usize,
}

impl TargetSpec {
    fn base(kind: TargetKind, side: Side, threshold_points: f64) -> Self {
        Self {
            kind,
            side,
            threshold_points,
            atr_multiplier: 1.0,
            atr_baseline: ATR_BASELINE,
            window_bars: 12,
        }
    }

    pub fn daily(side: Side) -> Self {
        Self::base(TargetKind::DailyCloseVsOpen, side, 2.0)
    }

    pub fn first_hour(side: Side) -> Self {
        Self::base(TargetKind::FirstHourSurvival, side, 2.0)
    }

    pub fn intraday(side: Side) -> Self {
        Self::base(TargetKind::IntradayFrom1030, side, 10.0)
    }

    pub fn vol_adjusted(side: Side) -> Self {
        Self {
            threshold_points: ATR_BASELINE,
            ..Self::base(TargetKind::IntradayVolAdjusted, side, ATR_BASELINE)
        }
    }

    pub fn with_threshold(mut self, points: f64) -> Self {
        self.threshold_points = points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_points > 0.0) {
            return Err(Error::InvalidConfig("threshold_points must be positive".into()));
        }
        if self.kind == TargetKind::IntradayVolAdjusted
            && !(self.atr_multiplier > 0.0 && self.atr_baseline > 0.0)
        {
            return Err(Error::InvalidConfig("atr_multiplier and atr_baseline must be positive".into()));
        }
        if self.window_bars == 0 {
            return Err(Error::InvalidConfig("window_bars must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub spec: TargetSpec,
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<u8>,
    pub base_rate: f64,
}

impl LabelSeries {
    fn new(spec: TargetSpec, pairs: Vec<(NaiveDate, u8)>) -> Self {
        let (dates, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let base_rate = base_rate(&labels).unwrap_or(0.0);
        Self {
            spec,
            dates,
            labels,
            base_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_map(&self) -> BTreeMap<NaiveDate, u8> {
        self.dates.iter().copied().zip(self.labels.iter().copied()).collect()
    }

    /// `date,label` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "label"])?;
        for (d, l) in self.dates.iter().zip(&self.labels) {
            w.write_record([d.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn exceeds(side: Side, reference: f64, outcome: f64, threshold: f64) -> u8 {
    let hit = match side {
        Side::Long => outcome > reference + threshold,
        Side::Short => reference > outcome + threshold,
    };
    hit as u8
}

fn reference_open(s: &Session, spec: &TargetSpec) -> Result<f64> {
    s.bars
        .get(spec.window_bars)
        .map(|b| b.open)
        .ok_or_else(|| Error::InvalidInput(format!("session {} has no reference bar", s.date)))
}

/// Session close against session open.
pub fn label_daily(sessions: &[Session], spec: &TargetSpec) -> Result<LabelSeries> {
    spec.validate()?;
    let pairs = sessions
        .iter()
        .map(|s| (s.date, exceeds(spec.side, s.open, s.close, spec.threshold_points)))
        .collect();
    Ok(LabelSeries::new(*spec, pairs))
}

/// 1 iff the favourable threshold is touched in the opening window strictly
/// before the adverse one. A bar touching both counts as adverse.
pub fn label_first_hour_survival(sessions: &[Session], spec: &TargetSpec) -> Result<LabelSeries> {
    spec.validate()?;
    let thr = spec.threshold_points;
    let pairs = sessions
        .iter()
        .map(|s| {
            let up = s.open + thr;
            let down = s.open - thr;
            let mut label = 0;
            for b in s.bars.iter().take(spec.window_bars) {
                let (favourable, adverse) = match spec.side {
                    Side::Long => (b.high >= up, b.low <= down),
                    Side::Short => (b.low <= down, b.high >= up),
                };
                if adverse {
                    break;
                }
                if favourable {
                    label = 1;
                    break;
                }
            }
            (s.date, label)
        })
        .collect();
    Ok(LabelSeries::new(*spec, pairs))
}

/// Session close against the open of the reference bar (10:30 by default).
pub fn label_intraday(sessions: &[Session], spec: &TargetSpec) -> Result<LabelSeries> {
    spec.validate()?;
    let pairs = sessions
        .iter()
        .map(|s| {
            let r = reference_open(s, spec)?;
            Ok((s.date, exceeds(spec.side, r, s.close, spec.threshold_points)))
        })
        .collect::<Result<_>>()?;
    Ok(LabelSeries::new(*spec, pairs))
}

/// Like [`label_intraday`] with the threshold `k × atr_ratio × baseline`.
/// Dates without an ATR ratio are excluded.
pub fn label_intraday_vol_adjusted(
    sessions: &[Session],
    atr_ratio: &BTreeMap<NaiveDate, f64>,
    spec: &TargetSpec,
) -> Result<LabelSeries> {
    spec.validate()?;
    let mut pairs = Vec::new();
    for s in sessions {
        let Some(ratio) = atr_ratio.get(&s.date) else {
            continue;
        };
        let threshold = spec.atr_multiplier * ratio * spec.atr_baseline;
        let r = reference_open(s, spec)?;
        pairs.push((s.date, exceeds(spec.side, r, s.close, threshold)));
    }
    Ok(LabelSeries::new(*spec, pairs))
}

pub fn base_rate(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("empty label series".into()));
    }
    Ok(labels.iter().filter(|l| **l == 1).count() as f64 / labels.len() as f64)
}

/// Dispatches on `spec.kind`.
pub fn build_labels(
    sessions: &[Session],
    atr_ratio: &BTreeMap<NaiveDate, f64>,
    spec: &TargetSpec,
) -> Result<LabelSeries> {
    match spec.kind {
        TargetKind::DailyCloseVsOpen => label_daily(sessions, spec),
        TargetKind::FirstHourSurvival => label_first_hour_survival(sessions, spec),
        TargetKind::IntradayFrom1030 => label_intraday(sessions, spec),
        TargetKind::IntradayVolAdjusted => label_intraday_vol_adjusted(sessions, atr_ratio, spec),
    }
}
