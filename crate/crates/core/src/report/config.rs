use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::daily_features::DailyConfig;
use crate::error::{Error, Result};
use crate::evaluation::{FoldSpec, ShuffleScope};
use crate::gbm::GbmConfig;
use crate::intraday_features::IntradayConfig;
use crate::lstm::LstmConfig;
use crate::targets::{Side, TargetSpec};
use crate::tokenizer::TokenizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GbDaily,
    GbIntraday,
    GbVoladj,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::GbDaily, ModelKind::GbIntraday, ModelKind::GbVoladj, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GbDaily => "gb_daily",
            ModelKind::GbIntraday => "gb_intraday",
            ModelKind::GbVoladj => "gb_voladj",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }

    /// Target each model is evaluated against unless overridden.
    pub fn default_target(self) -> TargetName {
        match self {
            ModelKind::GbDaily => TargetName::ALong,
            ModelKind::GbIntraday | ModelKind::Lstm => TargetName::IntradayLong,
            ModelKind::GbVoladj => TargetName::Voladj,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    ALong,
    AShort,
    BLong,
    IntradayLong,
    IntradayShort,
    Voladj,
}

impl TargetName {
    pub const ALL: [TargetName; 6] = [
        TargetName::ALong,
        TargetName::AShort,
        TargetName::BLong,
        TargetName::IntradayLong,
        TargetName::IntradayShort,
        TargetName::Voladj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetName::ALong => "a_long",
            TargetName::AShort => "a_short",
            TargetName::BLong => "b_long",
            TargetName::IntradayLong => "intraday_long",
            TargetName::IntradayShort => "intraday_short",
            TargetName::Voladj => "voladj",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown target {s:?}")))
    }

    pub fn spec(self) -> TargetSpec {
        match self {
            TargetName::ALong => TargetSpec::daily(Side::Long),
            TargetName::AShort => TargetSpec::daily(Side::Short),
            TargetName::BLong => TargetSpec::first_hour(Side::Long),
            TargetName::IntradayLong => TargetSpec::intraday(Side::Long),
            TargetName::IntradayShort => TargetSpec::intraday(Side::Short),
            TargetName::Voladj => TargetSpec::vol_adjusted(Side::Long),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Pool every test prediction.
    Micro,
    /// Average per-fold metrics.
    Macro,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub bars: Option<PathBuf>,
    pub regime: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub model: ModelKind,
    /// Defaults to the model's paired target.
    pub target: Option<TargetName>,
    /// Permit a target other than the model's paired one.
    pub allow_target_override: bool,
    /// Override of the target's point threshold.
    pub threshold_points: Option<f64>,
    pub seed: u64,
    pub combine: Combine,
    pub importance_repeats: usize,
    pub top_k: usize,
    pub calibration_bins: usize,
    /// Write per-stage wall-clock times into the manifest. Off by default so
    /// that reruns produce identical files.
    pub record_timings: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            model: ModelKind::GbIntraday,
            target: None,
            allow_target_override: false,
            threshold_points: None,
            seed: 0,
            combine: Combine::Micro,
            importance_repeats: 5,
            top_k: 10,
            calibration_bins: 10,
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermSection {
    /// Iterations on the final fold; 0 disables the test.
    pub n: usize,
    pub scope: ShuffleScope,
    pub smoothed: bool,
    pub alpha: f64,
}

impl Default for PermSection {
    fn default() -> Self {
        Self {
            n: 0,
            scope: ShuffleScope::Global,
            smoothed: false,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditSection {
    pub enabled: bool,
    pub cutoffs: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            enabled: false,
            cutoffs: 20,
        }
    }
}

/// Everything a walk-forward run depends on. Loadable from TOML with one
/// section per component; missing keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub run: RunSection,
    pub permutation: PermSection,
    pub audit: AuditSection,
    pub folds: FoldSpec,
    pub tokenizer: TokenizerConfig,
    pub daily: DailyConfig,
    pub intraday: IntradayConfig,
    pub gbm: GbmConfig,
    pub lstm: LstmConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn target(&self) -> TargetName {
        self.run.target.unwrap_or(self.run.model.default_target())
    }

    pub fn target_spec(&self) -> TargetSpec {
        let spec = self.target().spec();
        match self.run.threshold_points {
            Some(t) => spec.with_threshold(t),
            None => spec,
        }
    }

    /// Sets the master seed and propagates it to the model configs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self.gbm.seed = seed;
        self.lstm.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let target = self.target();
        if target != self.run.model.default_target() && !self.run.allow_target_override {
            return Err(Error::InvalidConfig(format!(
                "model {} is paired with target {}; set allow_target_override to use {}",
                self.run.model.name(),
                self.run.model.default_target().name(),
                target.name()
            )));
        }
        if self.run.importance_repeats == 0 || self.run.top_k == 0 || self.run.calibration_bins == 0 {
            return Err(Error::InvalidConfig(
                "importance_repeats, top_k and calibration_bins must be positive".into(),
            ));
        }
        if !(self.permutation.alpha > 0.0 && self.permutation.alpha < 1.0) {
            return Err(Error::InvalidConfig("permutation alpha must be in (0, 1)".into()));
        }
        self.folds.validate()?;
        self.tokenizer.validate()?;
        self.target_spec().validate()?;
        match self.run.model {
            ModelKind::Lstm => self.lstm.validate(),
            _ => self.gbm.validate(),
        }
    }
}
