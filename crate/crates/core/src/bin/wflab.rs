use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use wflab::daily_features::{
    build_tokenized_matrix, compute_daily_rows, feature_stats, next_day_returns, raw_table, write_stats_csv,
    DailyFeature,
};
use wflab::frame::write_table_csv;
use wflab::intraday_features::{build_intraday_features, manifest as intraday_manifest};
use wflab::market_data::{write_skip_log, Session};
use wflab::report::{
    audit_cutoffs, emit_figures, load_inputs, load_report, run_walkforward, write_json, Combine, ModelKind, Paths,
    RunConfig, RunManifest, TargetName,
};
use wflab::synthetic::{gen_sessions, write_sessions_file, SynthConfig};
use wflab::targets::build_labels;

#[derive(Parser)]
#[command(name = "wflab", version, about = "Walk-forward evaluation of intraday directional classifiers")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse bars, assemble sessions and log skipped days.
    Ingest(InputArgs),
    /// Export daily, tokenized and intraday feature matrices.
    Features(FeatureArgs),
    /// Export a label series.
    Labels(LabelArgs),
    /// Run walk-forward validation.
    Walkforward(RunArgs),
    /// Walk-forward validation with a final-fold permutation test.
    Permtest(RunArgs),
    /// Write a synthetic bar file.
    Synth(SynthArgs),
    /// Render figures from one or more report files.
    Report(ReportArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    bars: PathBuf,
    #[arg(long)]
    regime: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeatureArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Check that no pre-cutoff artifact depends on later data.
    #[arg(long)]
    leak_audit: bool,
    #[arg(long, env = "WFLAB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_target)]
    target: TargetName,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    #[arg(long)]
    regime: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, value_parser = parse_target)]
    target: Option<TargetName>,
    /// Permit a target other than the model's paired one.
    #[arg(long)]
    allow_target_override: bool,
    /// Permutation iterations on the final fold.
    #[arg(long)]
    perm: Option<usize>,
    #[arg(long, env = "WFLAB_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    leak_audit: bool,
    /// Average per-fold metrics instead of pooling predictions.
    #[arg(long)]
    macro_combined: bool,
    /// Record wall-clock stage times in the manifest.
    #[arg(long)]
    record_timings: bool,
    /// Refuse to run unless the bars file matches this manifest's digest.
    #[arg(long)]
    verify: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 944)]
    days: usize,
    #[arg(long, default_value = "2022-01-03")]
    start: NaiveDate,
    #[arg(long, default_value_t = 0.0)]
    planted_effect: f64,
    /// Unconditional post-first-hour drift in points.
    #[arg(long, default_value_t = 0.0)]
    rest_drift: f64,
    #[arg(long, default_value_t = 30.0)]
    bar_vol: f64,
    #[arg(long, env = "WFLAB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json files to combine.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).map_err(|e| e.to_string())
}

fn parse_target(s: &str) -> std::result::Result<TargetName, String> {
    TargetName::parse(s).map_err(|e| e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn paths(input: &InputArgs) -> Paths {
    Paths {
        bars: Some(input.bars.clone()),
        regime: input.regime.clone(),
        out: Some(input.out.clone()),
    }
}

fn sessions_of(input: &InputArgs) -> Result<(Vec<Session>, Option<std::collections::BTreeMap<NaiveDate, i64>>)> {
    let inputs = load_inputs(&paths(input), None)?;
    Ok((inputs.assembly.sessions, inputs.regime))
}

fn ingest(a: InputArgs) -> Result<()> {
    let inputs = load_inputs(&paths(&a), None)?;
    fs::create_dir_all(&a.out)?;
    write_sessions_file(&a.out.join("sessions.csv"), &inputs.assembly.sessions)?;
    write_skip_log(File::create(a.out.join("skipped_sessions.jsonl"))?, &inputs.assembly.skipped)?;
    let summary = serde_json::json!({
        "bars": inputs.n_bars,
        "sessions": inputs.assembly.sessions.len(),
        "skipped": inputs.assembly.skipped.len(),
        "inputs": inputs.digests,
    });
    write_json(&a.out.join("ingest.json"), &summary)?;
    println!(
        "{} bars -> {} sessions ({} skipped)",
        inputs.n_bars,
        inputs.assembly.sessions.len(),
        inputs.assembly.skipped.len()
    );
    Ok(())
}

fn features(a: FeatureArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let (sessions, regime) = sessions_of(&a.input)?;
    let out = &a.input.out;
    fs::create_dir_all(out)?;
    if a.leak_audit {
        let reports = audit_cutoffs(&sessions, cfg.audit.cutoffs, a.seed, &cfg)?;
        write_json(&out.join("leak_audit.json"), &reports)?;
        println!("leak audit passed at {} cutoffs", reports.len());
    }
    let daily = compute_daily_rows(&sessions, regime.as_ref(), &cfg.daily)?;
    let (names, table) = raw_table(&daily);
    write_table_csv(BufWriter::new(File::create(out.join("daily_raw.csv"))?), &names, table)?;
    let tokens = build_tokenized_matrix(&daily, &cfg.tokenizer)?;
    tokens.write_csv(BufWriter::new(File::create(out.join("daily_tokens.csv"))?))?;
    let stats = feature_stats(&daily, &next_day_returns(&daily))?;
    write_stats_csv(File::create(out.join("daily_stats.csv"))?, &stats)?;
    let intraday = build_intraday_features(&sessions, &daily, &cfg.intraday)?;
    intraday.write_csv(BufWriter::new(File::create(out.join("intraday.csv"))?))?;
    write_json(&out.join("intraday_manifest.json"), &intraday_manifest(&cfg.intraday))?;
    println!(
        "daily {} rows, tokenized {} rows ({} dropped), intraday {} rows ({} dropped)",
        daily.len(),
        tokens.n_rows(),
        tokens.dropped_rows,
        intraday.n_rows(),
        intraday.dropped_rows
    );
    Ok(())
}

fn labels(a: LabelArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let (sessions, regime) = sessions_of(&a.input)?;
    let daily = compute_daily_rows(&sessions, regime.as_ref(), &cfg.daily)?;
    let atr = daily
        .iter()
        .filter_map(|r| Some((r.date, r.get(DailyFeature::AtrRatio)?)))
        .collect();
    let series = build_labels(&sessions, &atr, &a.target.spec())?;
    fs::create_dir_all(&a.input.out)?;
    let path = a.input.out.join(format!("labels_{}.csv", a.target.name()));
    series.write_csv(File::create(&path)?)?;
    println!(
        "{}: {} labels, base rate {:.4}",
        a.target.name(),
        series.len(),
        series.base_rate
    );
    Ok(())
}

fn walkforward(a: RunArgs, default_perm: usize) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(b) = a.bars {
        cfg.paths.bars = Some(b);
    }
    if let Some(r) = a.regime {
        cfg.paths.regime = Some(r);
    }
    if let Some(o) = a.out {
        cfg.paths.out = Some(o);
    }
    if let Some(m) = a.model {
        cfg.run.model = m;
    }
    if let Some(t) = a.target {
        cfg.run.target = Some(t);
    }
    cfg.run.allow_target_override |= a.allow_target_override;
    cfg.permutation.n = a.perm.unwrap_or(if default_perm > 0 { default_perm } else { cfg.permutation.n });
    if let Some(s) = a.seed {
        cfg = cfg.with_seed(s);
    }
    cfg.audit.enabled |= a.leak_audit;
    cfg.run.record_timings |= a.record_timings;
    if a.macro_combined {
        cfg.run.combine = Combine::Macro;
    }
    let expected = match &a.verify {
        Some(p) => {
            let m = RunManifest::load(p).with_context(|| format!("reading manifest {}", p.display()))?;
            match m.digest_of("bars") {
                Some(d) => Some(d.to_string()),
                None => bail!("manifest {} records no bars digest", p.display()),
            }
        }
        None => None,
    };

    let run = run_walkforward(&cfg, expected.as_deref())?;
    let r = &run.report;
    println!("{} on {} ({} rows, base rate {:.4})", r.model.name(), r.target.name(), r.n_rows, r.base_rate);
    for f in &r.folds {
        println!(
            "  fold {} {}-{} -> {}: n_test {} accuracy {:.4}",
            f.fold, f.train_start, f.train_end, f.test_year, f.n_test, f.metrics.accuracy
        );
    }
    println!("  combined oos accuracy {:.4}", r.combined.metrics.accuracy);
    if let Some(p) = &r.permutation {
        println!(
            "  permutation: actual {:.4}, null mean {:.4}, p = {:.4} ({})",
            p.actual_accuracy, p.shuffled_mean, p.p_value, p.verdict
        );
    }
    for f in &run.figures {
        if let Some(n) = &f.notice {
            println!("  skipped {:?}: {n}", f.figure);
        }
    }
    println!("wrote {}", run.out_dir.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_days: a.days,
        start_date: a.start,
        planted_effect: a.planted_effect,
        rest_drift_points: a.rest_drift,
        bar_vol: a.bar_vol,
        seed: a.seed,
        ..Default::default()
    };
    let sessions = gen_sessions(&cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_sessions_file(&a.out, &sessions)?;
    println!("wrote {} sessions to {}", sessions.len(), a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| load_report(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let statuses = emit_figures(&reports, &a.out)?;
    for s in &statuses {
        match (&s.file, &s.notice) {
            (Some(f), _) => println!("wrote {f}"),
            (None, Some(n)) => println!("skipped {:?}: {n}", s.figure),
            (None, None) => {}
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.cmd {
        Cmd::Ingest(a) => ingest(a),
        Cmd::Features(a) => features(a),
        Cmd::Labels(a) => labels(a),
        Cmd::Walkforward(a) => walkforward(a, 0),
        Cmd::Permtest(a) => walkforward(a, 200),
        Cmd::Synth(a) => synth(a),
        Cmd::Report(a) => report(a),
    }
}
