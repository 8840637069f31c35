//! Run configuration, the walk-forward pipeline and its file outputs.

mod config;
mod output;
mod pipeline;
mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

pub use config::{AuditSection, Combine, ModelKind, Paths, PermSection, RunConfig, RunSection, TargetName};
pub use output::{
    digest_bytes, digest_file, verify_digest, write_json, write_report_files, InputDigest, RunManifest,
};
pub use pipeline::{audit_cutoffs, build_dataset, evaluate, CombinedResult, Dataset, FoldResult, RunReport, StageCount, Timings};
pub use svg::{count_class, emit_figures, render_figure, Figure, FigureStatus};

use crate::daily_features::parse_regime;
use crate::error::{Error, Result, StageExt};
use crate::market_data::{assemble_sessions, parse_bars, write_skip_log, Assembly, FormatSpec, SessionSpec};

/// Parsed inputs of a run together with their digests.
pub struct Inputs {
    pub assembly: Assembly,
    pub n_bars: usize,
    pub regime: Option<BTreeMap<NaiveDate, i64>>,
    pub digests: Vec<InputDigest>,
}

/// Reads and digests the bars file (and regime sidecar). When
/// `expected_digest` is given the bars digest is checked before parsing.
pub fn load_inputs(paths: &Paths, expected_digest: Option<&str>) -> Result<Inputs> {
    let bars_path = paths
        .bars
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no bars file given".into()))?;
    let raw = std::fs::read(bars_path).stage("ingest")?;
    let digest = InputDigest {
        role: "bars".into(),
        path: bars_path.display().to_string(),
        bytes: raw.len() as u64,
        sha256: digest_bytes(&raw),
    };
    if let Some(expected) = expected_digest {
        verify_digest(expected, &digest).stage("ingest")?;
    }
    let bars = parse_bars(raw.as_slice(), &FormatSpec::default()).stage("ingest")?;
    let assembly = assemble_sessions(&bars, &SessionSpec::rth()).stage("ingest")?;
    let mut digests = vec![digest];
    let regime = match &paths.regime {
        Some(p) => {
            let text = std::fs::read(p).stage("ingest")?;
            digests.push(InputDigest {
                role: "regime".into(),
                path: p.display().to_string(),
                bytes: text.len() as u64,
                sha256: digest_bytes(&text),
            });
            Some(parse_regime(text.as_slice()).stage("ingest")?)
        }
        None => None,
    };
    Ok(Inputs {
        assembly,
        n_bars: bars.len(),
        regime,
        digests,
    })
}

pub struct RunOutput {
    pub report: RunReport,
    pub manifest: RunManifest,
    pub figures: Vec<FigureStatus>,
    pub out_dir: PathBuf,
}

/// Full pipeline: ingest, features, labels, folds, per-fold fit and
/// scoring, optional final-fold permutation test, then report, tables,
/// figures and manifest under `cfg.paths.out`.
pub fn run_walkforward(cfg: &RunConfig, expected_digest: Option<&str>) -> Result<RunOutput> {
    cfg.validate()?;
    let out_dir = cfg
        .paths
        .out
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no output directory given".into()))?;
    let mut timings = Timings::new(cfg.run.record_timings);
    let inputs = load_inputs(&cfg.paths, expected_digest)?;
    timings.mark("ingest");
    let sessions = &inputs.assembly.sessions;
    std::fs::create_dir_all(&out_dir)?;

    let mut outputs = Vec::new();
    if cfg.audit.enabled {
        let reports = audit_cutoffs(sessions, cfg.audit.cutoffs, cfg.run.seed, cfg).stage("leak_audit")?;
        write_json(&out_dir.join("leak_audit.json"), &reports)?;
        outputs.push("leak_audit.json".to_string());
        timings.mark("leak_audit");
    }

    let (dataset, mut stages) = build_dataset(sessions, inputs.regime.as_ref(), cfg)?;
    stages.insert(0, StageCount { stage: "bars".into(), rows: inputs.n_bars });
    timings.mark("features");
    let report = evaluate(&dataset, cfg, &mut timings)?;

    write_skip_log(std::fs::File::create(out_dir.join("skipped_sessions.jsonl"))?, &inputs.assembly.skipped)?;
    outputs.push("skipped_sessions.jsonl".into());
    outputs.extend(write_report_files(&out_dir, &report)?);
    let figures = emit_figures(std::slice::from_ref(&report), &out_dir)?;
    outputs.extend(figures.iter().filter_map(|f| f.file.clone()));
    timings.mark("outputs");

    let manifest = RunManifest {
        version: crate::VERSION.to_string(),
        config: cfg.clone(),
        inputs: inputs.digests,
        stages,
        skipped_sessions: inputs.assembly.skipped.len(),
        outputs,
        timings_ms: timings.recorded(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(RunOutput {
        report,
        manifest,
        figures,
        out_dir,
    })
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
