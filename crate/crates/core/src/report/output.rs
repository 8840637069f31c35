use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::pipeline::{RunReport, StageCount};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub stages: Vec<StageCount>,
    pub skipped_sessions: usize,
    pub outputs: Vec<String>,
    /// Milliseconds per stage; present only when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<(String, f64)>>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn digest_of(&self, role: &str) -> Option<&str> {
        self.inputs.iter().find(|d| d.role == role).map(|d| d.sha256.as_str())
    }
}

pub fn digest_bytes(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest> {
    let data = fs::read(path)?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        bytes: data.len() as u64,
        sha256: digest_bytes(&data),
    })
}

pub fn verify_digest(expected: &str, found: &InputDigest) -> Result<()> {
    if expected.eq_ignore_ascii_case(&found.sha256) {
        Ok(())
    } else {
        Err(Error::DigestMismatch {
            expected: expected.to_string(),
            found: found.sha256.clone(),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Fold table with the combined row last.
pub fn write_fold_table<W: Write>(out: W, r: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "fold", "train", "test_year", "n_train", "n_test", "test_base_rate", "accuracy", "precision", "recall", "f1",
        "prob_pos", "prob_neg", "tp", "fp", "tn", "fn",
    ])?;
    let row = |fold: String, train: String, test: String, ntr: String, base: f64, m: &crate::evaluation::Metrics| {
        vec![
            fold,
            train,
            test,
            ntr,
            m.n.to_string(),
            base.to_string(),
            m.accuracy.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            opt(m.mean_prob_actual_pos),
            opt(m.mean_prob_actual_neg),
            m.tp.to_string(),
            m.fp.to_string(),
            m.tn.to_string(),
            m.fn_.to_string(),
        ]
    };
    for f in &r.folds {
        w.write_record(row(
            f.fold.to_string(),
            format!("{}-{}", f.train_start, f.train_end),
            f.test_year.to_string(),
            f.n_train.to_string(),
            f.test_base_rate,
            &f.metrics,
        ))?;
    }
    let c = &r.combined;
    w.write_record(row("combined".into(), String::new(), "oos".into(), String::new(), c.base_rate, &c.metrics))?;
    w.flush()?;
    Ok(())
}

pub fn write_calibration_table<W: Write>(out: W, r: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fold", "bin_center", "mean_prob", "positive_rate", "count"])?;
    for f in &r.folds {
        for b in &f.calibration {
            w.write_record([
                f.fold.to_string(),
                b.center.to_string(),
                b.mean_prob.to_string(),
                b.positive_rate.to_string(),
                b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_permutation_tables(dir: &Path, r: &RunReport) -> Result<Vec<String>> {
    let Some(p) = &r.permutation else { return Ok(Vec::new()) };
    let mut w = csv::Writer::from_path(dir.join("permutation.csv"))?;
    w.write_record([
        "actual_accuracy", "n_iterations", "shuffled_mean", "shuffled_std", "shuffled_max", "n_at_least_actual",
        "p_value", "verdict",
    ])?;
    w.write_record([
        p.actual_accuracy.to_string(),
        p.n_iterations.to_string(),
        p.shuffled_mean.to_string(),
        p.shuffled_std.to_string(),
        p.shuffled_max.to_string(),
        p.n_at_least_actual.to_string(),
        p.p_value.to_string(),
        p.verdict.to_string(),
    ])?;
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("permutation_null.csv"))?;
    w.write_record(["iteration", "accuracy"])?;
    for (i, a) in p.shuffled.iter().enumerate() {
        w.write_record([i.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(vec!["permutation.csv".into(), "permutation_null.csv".into()])
}

pub fn write_importance_tables(dir: &Path, r: &RunReport) -> Result<Vec<String>> {
    let mut written = Vec::new();
    if r.folds.iter().all(|f| f.importance.is_some()) && !r.folds.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("importance.csv"))?;
        let mut header = vec!["feature".to_string()];
        header.extend(r.folds.iter().map(|f| format!("fold_{}", f.fold)));
        w.write_record(&header)?;
        for (j, name) in r.feature_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(r.folds.iter().map(|f| f.importance.as_ref().expect("checked")[j].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        written.push("importance.csv".into());
    }
    if let Some(m) = &r.importance_ranks {
        let mut w = csv::Writer::from_path(dir.join("importance_ranks.csv"))?;
        let mut header = vec!["feature".to_string()];
        header.extend((1..=r.folds.len()).map(|k| format!("fold_{k}")));
        header.push("in_all_top5".into());
        w.write_record(&header)?;
        for (name, ranks) in m.features.iter().zip(&m.ranks) {
            let mut rec = vec![name.clone()];
            rec.extend(ranks.iter().map(|x| x.to_string()));
            rec.push(m.in_all_top5.contains(name).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        written.push("importance_ranks.csv".into());
    }
    Ok(written)
}

/// Report JSON plus every delimited mirror. Returns the file names written.
pub fn write_report_files(dir: &Path, r: &RunReport) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), r)?;
    write_fold_table(fs::File::create(dir.join("folds.csv"))?, r)?;
    write_calibration_table(fs::File::create(dir.join("calibration.csv"))?, r)?;
    let mut names = vec!["report.json".to_string(), "folds.csv".into(), "calibration.csv".into()];
    names.extend(write_permutation_tables(dir, r)?);
    names.extend(write_importance_tables(dir, r)?);
    Ok(names)
}
