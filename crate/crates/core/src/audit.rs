//! End-to-end no-lookahead audit.
//!
//! Every session after a cutoff date is rewritten, all pipeline artifacts
//! are recomputed, and each one dated on or before the cutoff is compared
//! bit for bit with the original.

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::daily_features::{compute_daily_rows, tokenized_columns, DailyConfig, DailyFeature, DailyRow};
use crate::error::{Error, Result};
use crate::intraday_features::{compute_intraday_rows, IntradayConfig, IntradayRow};
use crate::market_data::Session;
use crate::rng::derived;
use crate::targets::{build_labels, Side, TargetSpec};
use crate::tokenizer::TokenizerConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub daily: DailyConfig,
    pub intraday: IntradayConfig,
    pub tokenizer: TokenizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub cutoff: NaiveDate,
    pub sessions_checked: usize,
    pub sessions_mutated: usize,
    pub values_compared: usize,
    /// Human-readable description of each differing artifact.
    pub mismatches: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Rescales every bar of `s` by a random positive affine map and redraws its
/// volumes. OHLC consistency is preserved.
pub fn mutate_session<R: Rng>(s: &Session, rng: &mut R) -> Session {
    let k = rng.gen_range(0.7..1.3);
    let shift = rng.gen_range(-200.0..200.0);
    let bars = s
        .bars
        .iter()
        .map(|b| {
            let f = |p: f64| p * k + shift;
            let mut nb = *b;
            nb.open = f(b.open);
            nb.high = f(b.high) + rng.gen_range(0.0..5.0);
            nb.low = f(b.low) - rng.gen_range(0.0..5.0);
            nb.close = f(b.close);
            nb.volume = rng.gen_range(1..50_000);
            nb
        })
        .collect();
    Session::from_bars(s.date, bars)
}

struct Artifacts {
    daily: Vec<DailyRow>,
    tokens: Vec<Vec<Option<f64>>>,
    intraday: Vec<IntradayRow>,
    labels: Vec<(String, Vec<(NaiveDate, u8)>)>,
}

fn bits(v: &[Option<f64>]) -> Vec<Option<u64>> {
    v.iter().map(|x| x.map(f64::to_bits)).collect()
}

fn target_roster() -> Vec<(&'static str, TargetSpec)> {
    vec![
        ("a_long", TargetSpec::daily(Side::Long)),
        ("a_short", TargetSpec::daily(Side::Short)),
        ("b_long", TargetSpec::first_hour(Side::Long)),
        ("intraday_long", TargetSpec::intraday(Side::Long)),
        ("intraday_short", TargetSpec::intraday(Side::Short)),
        ("voladj", TargetSpec::vol_adjusted(Side::Long)),
    ]
}

fn artifacts(sessions: &[Session], cfg: &AuditConfig) -> Result<Artifacts> {
    let daily = compute_daily_rows(sessions, None, &cfg.daily)?;
    let refs: Vec<&DailyRow> = daily.iter().collect();
    let tokens = tokenized_columns(&refs, &cfg.tokenizer)?;
    let intraday = compute_intraday_rows(sessions, &daily, &cfg.intraday)?;
    let atr = daily
        .iter()
        .filter_map(|r| Some((r.date, r.get(DailyFeature::AtrRatio)?)))
        .collect();
    let labels = target_roster()
        .into_iter()
        .map(|(name, spec)| {
            let l = build_labels(sessions, &atr, &spec)?;
            Ok((name.to_string(), l.dates.into_iter().zip(l.labels).collect()))
        })
        .collect::<Result<_>>()?;
    Ok(Artifacts {
        daily,
        tokens,
        intraday,
        labels,
    })
}

/// Mutates every session dated after `cutoff` and checks that all daily
/// features, tokens, intraday features and labels dated on or before it
/// are unchanged.
pub fn leak_audit(sessions: &[Session], cutoff: NaiveDate, seed: u64, cfg: &AuditConfig) -> Result<AuditReport> {
    let keep = sessions.iter().take_while(|s| s.date <= cutoff).count();
    if keep == 0 || keep == sessions.len() {
        return Err(Error::InvalidInput(format!(
            "cutoff {cutoff} must leave sessions on both sides"
        )));
    }
    let mut rng = derived(seed, keep as u64);
    let mutated: Vec<Session> = sessions
        .iter()
        .enumerate()
        .map(|(i, s)| if i < keep { s.clone() } else { mutate_session(s, &mut rng) })
        .collect();

    let a = artifacts(sessions, cfg)?;
    let b = artifacts(&mutated, cfg)?;
    let mut mismatches = Vec::new();
    let mut compared = 0;

    for (x, y) in a.daily.iter().zip(&b.daily).take(keep) {
        for &f in DailyFeature::ALL.iter() {
            compared += 1;
            if x.get(f).map(f64::to_bits) != y.get(f).map(f64::to_bits) {
                mismatches.push(format!("daily {} on {}", f.name(), x.date));
            }
        }
    }
    for (j, (x, y)) in a.tokens.iter().zip(&b.tokens).enumerate() {
        compared += keep;
        if bits(&x[..keep]) != bits(&y[..keep]) {
            mismatches.push(format!("token column {}", DailyFeature::ALL[j].name()));
        }
    }
    for (x, y) in a.intraday.iter().zip(&b.intraday).take(keep) {
        compared += x.values.len();
        if bits(&x.values) != bits(&y.values) {
            mismatches.push(format!("intraday row {}", x.date));
        }
    }
    for ((name, x), (_, y)) in a.labels.iter().zip(&b.labels) {
        let before = |v: &Vec<(NaiveDate, u8)>| v.iter().filter(|(d, _)| *d <= cutoff).copied().collect::<Vec<_>>();
        let (px, py) = (before(x), before(y));
        compared += px.len();
        if px != py {
            mismatches.push(format!("labels {name}"));
        }
    }

    Ok(AuditReport {
        cutoff,
        sessions_checked: keep,
        sessions_mutated: sessions.len() - keep,
        values_compared: compared,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gen_sessions, SynthConfig};

    #[test]
    fn pipeline_has_no_lookahead() {
        let s = gen_sessions(&SynthConfig { n_days: 120, seed: 2, ..Default::default() }).unwrap();
        let r = leak_audit(&s, s[80].date, 9, &AuditConfig::default()).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches);
        assert_eq!(r.sessions_checked, 81);
        assert!(r.values_compared > 81 * 30);
    }

    #[test]
    fn mutation_changes_data_and_keeps_bars_valid() {
        let s = gen_sessions(&SynthConfig { n_days: 2, seed: 2, ..Default::default() }).unwrap();
        let m = mutate_session(&s[1], &mut derived(1, 1));
        assert_ne!(m, s[1]);
        assert!(m.bars.iter().all(|b| b.check().is_ok()));
    }

    #[test]
    fn cutoff_must_split_the_data() {
        let s = gen_sessions(&SynthConfig { n_days: 5, seed: 2, ..Default::default() }).unwrap();
        assert!(leak_audit(&s, s[4].date, 0, &AuditConfig::default()).is_err());
    }
}
