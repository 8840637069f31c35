//! Leakage-free evaluation toolkit for intraday directional classifiers on
//! five-minute OHLCV futures bars.
//!
//! The pipeline runs bars → sessions → daily / intraday features →
//! binary targets → walk-forward folds → fit / predict → metrics and
//! permutation tests. Every rolling statistic looks strictly backwards;
//! [`audit`] checks that property end to end.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod daily_features;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod gbm;
pub mod intraday_features;
pub mod lstm;
pub mod market_data;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod targets;
pub mod tokenizer;

mod stats;

pub use error::{Error, Result};
pub use frame::FeatureMatrix;
pub use market_data::{Bar, Session, SessionSpec};

/// Toolkit version written into every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
