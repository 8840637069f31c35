//! Walk-forward folds, classification metrics, calibration, permutation
//! testing and importance stability.

mod folds;
mod importance;
mod metrics;
mod permutation;

pub use folds::{make_folds, Fold, FoldDef, FoldSpec};
pub use importance::{importance_rank_matrix, RankMatrix};
pub use metrics::{calibration_curve, classification_metrics, macro_average, CalibrationBin, Metrics};
pub use permutation::{permutation_test, PermConfig, PermResult, ShuffleScope, Trainer, Verdict};
