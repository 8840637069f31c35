//! Daily feature matrix: one row per session, every rolling statistic drawn
//! from strictly earlier sessions.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FeatureMatrix;
use crate::market_data::Session;
use crate::stats::{mean, pearson, sample_std};
use crate::tokenizer::{tokenize_series, TokenizerConfig};

macro_rules! daily_features {
    ($($var:ident => $name:literal),+ $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum DailyFeature { $($var),+ }

        impl DailyFeature {
            /// Export column order.
            pub const ALL: &'static [DailyFeature] = &[$(DailyFeature::$var),+];

            pub fn name(self) -> &'static str {
                match self { $(DailyFeature::$var => $name),+ }
            }
        }
    };
}

daily_features! {
    DailyReturn => "daily_return",
    LagRet1 => "lag_ret_1",
    LagRet2 => "lag_ret_2",
    LagRet3 => "lag_ret_3",
    LagRet5 => "lag_ret_5",
    RollingRet5 => "rolling_ret_5",
    RollingRet10 => "rolling_ret_10",
    RollingRet20 => "rolling_ret_20",
    OvernightGap => "overnight_gap",
    LagGap1 => "lag_gap_1",
    LagGap2 => "lag_gap_2",
    LagGap3 => "lag_gap_3",
    Volatility10 => "volatility_10",
    Volatility20 => "volatility_20",
    AtrRatio => "atr_ratio",
    RangeRatio => "range_ratio",
    ClosePos => "close_pos",
    VolZscore => "vol_zscore",
    First30mReturn => "first_30m_return",
    Last30mReturn => "last_30m_return",
    FirstBarVolDev => "first_bar_vol_dev",
    PriorClosePos => "prior_close_pos",
    PriorRangeRatio => "prior_range_ratio",
    PriorVolZscore => "prior_vol_zscore",
    Dow0 => "dow_0",
    Dow1 => "dow_1",
    Dow2 => "dow_2",
    Dow3 => "dow_3",
    Dow4 => "dow_4",
    RegimeLabel => "regime_label",
}

pub const N_DAILY: usize = 30;

impl DailyFeature {
    /// Continuous features are tokenized; weekday flags and the regime label pass through.
    pub fn is_continuous(self) -> bool {
        !matches!(
            self,
            DailyFeature::Dow0
                | DailyFeature::Dow1
                | DailyFeature::Dow2
                | DailyFeature::Dow3
                | DailyFeature::Dow4
                | DailyFeature::RegimeLabel
        )
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Row order of the descriptive-statistics table.
    pub const STATS_ORDER: &'static [DailyFeature] = &[
        DailyFeature::DailyReturn,
        DailyFeature::OvernightGap,
        DailyFeature::RangeRatio,
        DailyFeature::ClosePos,
        DailyFeature::VolZscore,
        DailyFeature::LagRet1,
        DailyFeature::LagRet2,
        DailyFeature::LagRet3,
        DailyFeature::LagRet5,
        DailyFeature::LagGap1,
        DailyFeature::LagGap2,
        DailyFeature::LagGap3,
        DailyFeature::RollingRet5,
        DailyFeature::RollingRet10,
        DailyFeature::RollingRet20,
        DailyFeature::Volatility10,
        DailyFeature::Volatility20,
        DailyFeature::AtrRatio,
        DailyFeature::First30mReturn,
        DailyFeature::Last30mReturn,
        DailyFeature::FirstBarVolDev,
        DailyFeature::PriorClosePos,
        DailyFeature::PriorRangeRatio,
        DailyFeature::PriorVolZscore,
        DailyFeature::Dow0,
        DailyFeature::Dow1,
        DailyFeature::Dow2,
        DailyFeature::Dow3,
        DailyFeature::Dow4,
        DailyFeature::RegimeLabel,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DailyConfig {
    /// Bars in the opening window of `first_30m_return`.
    pub first_window_bars: usize,
    /// Bars in the closing window of `last_30m_return`.
    pub last_window_bars: usize,
    /// Lookback of range, volume and first-bar-volume baselines.
    pub baseline_window: usize,
    pub atr_fast: usize,
    pub atr_slow: usize,
    /// Compound rolling returns instead of summing them.
    pub compound_rolling: bool,
}

impl Default for DailyConfig {
    fn default() -> Self {
        Self {
            first_window_bars: 6,
            last_window_bars: 6,
            baseline_window: 20,
            atr_fast: 10,
            atr_slow: 40,
            compound_rolling: false,
        }
    }
}

/// One session's daily features; `None` marks warm-up or undefined values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub values: [Option<f64>; N_DAILY],
}

impl DailyRow {
    pub fn get(&self, f: DailyFeature) -> Option<f64> {
        self.values[f.index()]
    }
}

/// Trailing window `[i - k, i)`, or `None` during warm-up.
fn prior(xs: &[f64], i: usize, k: usize) -> Option<&[f64]> {
    (i >= k).then(|| &xs[i - k..i])
}

fn zscore(value: f64, window: Option<&[f64]>) -> Option<f64> {
    let w = window?;
    let sd = sample_std(w)?;
    (sd > 0.0).then(|| (value - mean(w)) / sd)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub fn compute_daily_rows(
    sessions: &[Session],
    regime: Option<&BTreeMap<NaiveDate, i64>>,
    cfg: &DailyConfig,
) -> Result<Vec<DailyRow>> {
    if sessions.is_empty() {
        return Err(Error::InsufficientData("no sessions".into()));
    }
    if sessions.windows(2).any(|w| w[0].date >= w[1].date) {
        return Err(Error::InvalidInput("sessions must be sorted by date".into()));
    }
    let min_bars = cfg.first_window_bars.max(cfg.last_window_bars);
    if let Some(s) = sessions.iter().find(|s| s.bars.len() < min_bars) {
        return Err(Error::InvalidInput(format!("session {} has too few bars", s.date)));
    }

    let n = sessions.len();
    let ret: Vec<f64> = sessions.iter().map(|s| s.close / s.open - 1.0).collect();
    let gap: Vec<Option<f64>> = (0..n)
        .map(|i| (i > 0).then(|| sessions[i].open / sessions[i - 1].close - 1.0))
        .collect();
    let range: Vec<f64> = sessions.iter().map(Session::range).collect();
    let volume: Vec<f64> = sessions.iter().map(|s| s.volume as f64).collect();
    let first_vol: Vec<f64> = sessions.iter().map(|s| s.first_bar_volume as f64).collect();
    let true_range: Vec<f64> = (0..n)
        .map(|i| {
            let s = &sessions[i];
            match i {
                0 => s.range(),
                _ => {
                    let pc = sessions[i - 1].close;
                    s.range().max((s.high - pc).abs()).max((s.low - pc).abs())
                }
            }
        })
        .collect();
    let close_pos: Vec<f64> = sessions
        .iter()
        .map(|s| match s.range() {
            r if r > 0.0 => (s.close - s.low) / r,
            _ => 0.5,
        })
        .collect();
    let w = cfg.baseline_window;
    let range_ratio: Vec<Option<f64>> = (0..n)
        .map(|i| prior(&range, i, w).and_then(|p| ratio(range[i], mean(p))))
        .collect();
    let vol_z: Vec<Option<f64>> = (0..n).map(|i| zscore(volume[i], prior(&volume, i, w))).collect();

    let rolling = |i: usize, k: usize| {
        prior(&ret, i, k).map(|p| {
            if cfg.compound_rolling {
                p.iter().map(|r| 1.0 + r).product::<f64>() - 1.0
            } else {
                p.iter().sum()
            }
        })
    };
    let lag = |xs: &[f64], i: usize, k: usize| (i >= k).then(|| xs[i - k]);

    let mut rows = Vec::with_capacity(n);
    for (i, s) in sessions.iter().enumerate() {
        let mut v = [None; N_DAILY];
        let mut set = |f: DailyFeature, x: Option<f64>| v[f.index()] = x;
        use DailyFeature::*;

        set(DailyReturn, Some(ret[i]));
        set(LagRet1, lag(&ret, i, 1));
        set(LagRet2, lag(&ret, i, 2));
        set(LagRet3, lag(&ret, i, 3));
        set(LagRet5, lag(&ret, i, 5));
        set(RollingRet5, rolling(i, 5));
        set(RollingRet10, rolling(i, 10));
        set(RollingRet20, rolling(i, 20));
        set(OvernightGap, gap[i]);
        set(LagGap1, i.checked_sub(1).and_then(|j| gap[j]));
        set(LagGap2, i.checked_sub(2).and_then(|j| gap[j]));
        set(LagGap3, i.checked_sub(3).and_then(|j| gap[j]));
        set(Volatility10, prior(&ret, i, 10).and_then(sample_std));
        set(Volatility20, prior(&ret, i, 20).and_then(sample_std));
        set(
            AtrRatio,
            match (
                prior(&true_range, i, cfg.atr_fast),
                prior(&true_range, i, cfg.atr_slow),
            ) {
                (Some(fast), Some(slow)) => ratio(mean(fast), mean(slow)),
                _ => None,
            },
        );
        set(RangeRatio, range_ratio[i]);
        set(ClosePos, Some(close_pos[i]));
        set(VolZscore, vol_z[i]);
        set(
            First30mReturn,
            Some(s.bars[cfg.first_window_bars - 1].close / s.open - 1.0),
        );
        set(
            Last30mReturn,
            Some(s.close / s.bars[s.bars.len() - cfg.last_window_bars].open - 1.0),
        );
        set(FirstBarVolDev, zscore(first_vol[i], prior(&first_vol, i, w)));
        set(PriorClosePos, lag(&close_pos, i, 1));
        set(PriorRangeRatio, i.checked_sub(1).and_then(|j| range_ratio[j]));
        set(PriorVolZscore, i.checked_sub(1).and_then(|j| vol_z[j]));

        let dow = match s.date.weekday() {
            Weekday::Mon => 0,
            Weekday::Tue => 1,
            Weekday::Wed => 2,
            Weekday::Thu => 3,
            Weekday::Fri => 4,
            other => {
                return Err(Error::InvalidInput(format!(
                    "session {} falls on {other:?}",
                    s.date
                )))
            }
        };
        for (k, f) in [Dow0, Dow1, Dow2, Dow3, Dow4].into_iter().enumerate() {
            set(f, Some(if k == dow { 1.0 } else { 0.0 }));
        }
        set(
            RegimeLabel,
            match regime {
                None => Some(0.0),
                Some(map) => map.get(&s.date).map(|l| *l as f64),
            },
        );
        rows.push(DailyRow { date: s.date, values: v });
    }
    Ok(rows)
}

/// Column names of the tokenized daily matrix.
pub fn tokenized_names() -> Vec<String> {
    DailyFeature::ALL
        .iter()
        .map(|f| match f.is_continuous() {
            true => format!("{}_token", f.name()),
            false => f.name().to_string(),
        })
        .collect()
}

/// Tokenizes every continuous feature with expanding thresholds and drops
/// rows that still contain a missing value.
pub fn build_tokenized_matrix(rows: &[DailyRow], cfg: &TokenizerConfig) -> Result<FeatureMatrix> {
    let mut rows: Vec<&DailyRow> = rows.iter().collect();
    rows.sort_by_key(|r| r.date);
    let columns = tokenized_columns(&rows, cfg)?;
    let table = rows.iter().enumerate().map(|(i, r)| {
        (r.date, columns.iter().map(|c| c[i]).collect::<Vec<_>>())
    });
    FeatureMatrix::from_optional_rows(tokenized_names(), table)
}

/// Column-major tokenized values in [`DailyFeature::ALL`] order, before
/// incomplete rows are dropped. `rows` must be sorted by date.
pub fn tokenized_columns(rows: &[&DailyRow], cfg: &TokenizerConfig) -> Result<Vec<Vec<Option<f64>>>> {
    cfg.validate()?;
    DailyFeature::ALL
        .par_iter()
        .map(|f| {
            let raw: Vec<Option<f64>> = rows.iter().map(|r| r.get(*f)).collect();
            if f.is_continuous() {
                tokenize_series(&raw, cfg)
                    .map(|t| t.into_iter().map(|x| x.map(f64::from)).collect())
            } else {
                Ok(raw)
            }
        })
        .collect()
}

/// Raw export ordering: `date` then every feature in [`DailyFeature::ALL`] order.
pub fn raw_table(rows: &[DailyRow]) -> (Vec<String>, Vec<(NaiveDate, Vec<Option<f64>>)>) {
    let names = DailyFeature::ALL.iter().map(|f| f.name().to_string()).collect();
    let table = rows.iter().map(|r| (r.date, r.values.to_vec())).collect();
    (names, table)
}

/// `daily_return` of the following session, keyed by the earlier date.
pub fn next_day_returns(rows: &[DailyRow]) -> BTreeMap<NaiveDate, f64> {
    rows.windows(2)
        .filter_map(|w| Some((w[0].date, w[1].get(DailyFeature::DailyReturn)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub feature: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub next_day_corr: f64,
    /// Correlation undefined (zero variance or too few pairs); reported as 0.
    pub corr_degenerate: bool,
    pub missing: usize,
}

pub fn column_stats(name: &str, values: &[Option<f64>], target: &[Option<f64>]) -> FeatureStat {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = values
        .iter()
        .zip(target)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    let corr = pearson(&xs, &ys);
    FeatureStat {
        feature: name.to_string(),
        mean: (!present.is_empty()).then(|| mean(&present)),
        std: match present.len() {
            0 => None,
            1 => Some(0.0),
            _ => sample_std(&present),
        },
        min: present.iter().copied().reduce(f64::min),
        max: present.iter().copied().reduce(f64::max),
        next_day_corr: corr.unwrap_or(0.0),
        corr_degenerate: corr.is_none(),
        missing: values.len() - present.len(),
    }
}

/// Descriptive statistics per daily feature, plus pairwise-complete
/// correlation with the next session's return.
pub fn feature_stats(rows: &[DailyRow], next_day_return: &BTreeMap<NaiveDate, f64>) -> Result<Vec<FeatureStat>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no daily rows".into()));
    }
    let target: Vec<Option<f64>> = rows.iter().map(|r| next_day_return.get(&r.date).copied()).collect();
    Ok(DailyFeature::STATS_ORDER
        .iter()
        .map(|f| {
            let col: Vec<Option<f64>> = rows.iter().map(|r| r.get(*f)).collect();
            column_stats(f.name(), &col, &target)
        })
        .collect())
}

/// Parses a `date,label` regime sidecar with a header row.
pub fn parse_regime<R: std::io::Read>(reader: R) -> Result<BTreeMap<NaiveDate, i64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |reason: String| Error::MalformedRow { line, reason };
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| bad(e.to_string()))?;
        let label = rec[1].parse::<i64>().map_err(|e| bad(e.to_string()))?;
        if out.insert(date, label).is_some() {
            return Err(bad(format!("duplicate date {date}")));
        }
    }
    Ok(out)
}

pub fn write_stats_csv<W: std::io::Write>(out: W, stats: &[FeatureStat]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "mean", "std", "min", "max", "next_day_corr", "corr_degenerate", "missing"])?;
    let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    for s in stats {
        w.write_record([
            s.feature.clone(),
            f(s.mean),
            f(s.std),
            f(s.min),
            f(s.max),
            format!("{:.6}", s.next_day_corr),
            s.corr_degenerate.to_string(),
            s.missing.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
