#![allow(dead_code)]

pub mod gbm_oracle;
pub mod token_oracle;

use chrono::NaiveDate;
use wflab::market_data::{Bar, Session, SessionSpec};
use wflab::synthetic::{gen_sessions, SynthConfig};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn synth(n_days: usize, planted_effect: f64, seed: u64) -> Vec<Session> {
    gen_sessions(&SynthConfig {
        n_days,
        planted_effect,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// A full RTH session from per-bar `(open, high, low, close, volume)`.
pub fn session(day: NaiveDate, bars: &[(f64, f64, f64, f64, u64)]) -> Session {
    let spec = SessionSpec::rth();
    assert_eq!(bars.len(), spec.expected_bars);
    let bars = bars
        .iter()
        .enumerate()
        .map(|(i, &(open, high, low, close, volume))| Bar {
            timestamp: day.and_time(spec.bar_time(i)),
            open,
            high,
            low,
            close,
            volume,
        })
        .collect();
    Session::from_bars(day, bars)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Prints and records one acceptance-style line.
pub fn report(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
