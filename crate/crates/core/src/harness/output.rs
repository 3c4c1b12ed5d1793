//! Metric streams as CSV and run summaries as JSON.
//!
//! Floats are written in Rust's shortest round-trip form, so every file
//! parses back to exactly the values held in memory.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::train::{EpochMetrics, PairedReport, TrainReport};
use crate::error::{Error, Result};

/// Overrides the default output directory when set.
pub const OUTPUT_DIR_ENV: &str = "LIPSCHITZ_LR_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub const METRICS_HEADER: [&str; 8] = ["epoch", "loss", "train_acc", "val_acc", "lr", "kz", "max_w", "L"];

/// An explicit directory wins, then the environment variable, then `out`.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

pub fn write_metrics_csv(metrics: &[EpochMetrics], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            m.loss.to_string(),
            m.train_acc.to_string(),
            m.val_acc.to_string(),
            m.lr.to_string(),
            m.kz.to_string(),
            m.max_w.to_string(),
            m.l.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics_csv(reader: impl Read) -> Result<Vec<EpochMetrics>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Parse {
            row: 0,
            message: format!("unexpected metrics header {header:?}"),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

fn result_json(r: &TrainReport) -> serde_json::Value {
    json!({
        "label": r.label,
        "init_checksum": format!("{:016x}", r.init_checksum),
        "initial_loss": r.initial_loss,
        "initial_train_acc": r.initial_train_acc,
        "initial_val_acc": r.initial_val_acc,
        "epochs_run": r.epochs_run,
        "iterations": r.iterations,
        "epochs_to_threshold": r.epochs_to_threshold,
        "censored": r.censored,
        "final_loss": r.final_loss,
        "final_train_acc": r.final_train_acc,
        "final_val_acc": r.final_val_acc,
        "fallback_applied": r.fallback_applied,
        "wall_time_secs": r.wall_time_secs,
    })
}

/// Files written for one run or comparison.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WrittenFiles {
    pub metrics: Vec<PathBuf>,
    pub lr_traces: Vec<PathBuf>,
    pub summary: PathBuf,
}

fn write_streams(dir: &Path, stem: &str, r: &TrainReport, files: &mut WrittenFiles) -> Result<()> {
    let metrics = dir.join(format!("{stem}_metrics.csv"));
    write_metrics_csv(&r.metrics, create(&metrics)?)?;
    let lr = dir.join(format!("{stem}_lr.csv"));
    r.lr_trace.write_csv(create(&lr)?)?;
    files.metrics.push(metrics);
    files.lr_traces.push(lr);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `<label>_metrics.csv`, `<label>_lr.csv` and `<label>_summary.json`.
pub fn write_train_outputs(dir: &Path, cfg: &ExperimentConfig, report: &TrainReport) -> Result<WrittenFiles> {
    ensure_dir(dir)?;
    let stem = cfg.run_label();
    let mut files = WrittenFiles::default();
    write_streams(dir, &stem, report, &mut files)?;
    files.summary = dir.join(format!("{stem}_summary.json"));
    write_json(&files.summary, &json!({ "config": cfg, "result": result_json(report) }))?;
    Ok(files)
}

/// One metrics/lr pair per arm plus a joint summary.
pub fn write_compare_outputs(dir: &Path, cfg: &ExperimentConfig, paired: &PairedReport) -> Result<WrittenFiles> {
    ensure_dir(dir)?;
    let mode = match paired.mode {
        super::train::CompareMode::Threshold => "threshold",
        super::train::CompareMode::Accuracy => "accuracy",
    };
    let base = format!("{}_{mode}_seed{}", cfg.data.label(), cfg.seed);
    let mut files = WrittenFiles::default();
    write_streams(dir, &format!("{base}_fixed{}", paired.fixed_lr), &paired.fixed, &mut files)?;
    write_streams(dir, &format!("{base}_adaptive"), &paired.adaptive, &mut files)?;
    files.summary = dir.join(format!("{base}_summary.json"));
    write_json(
        &files.summary,
        &json!({
            "config": cfg,
            "mode": paired.mode,
            "fixed_lr": paired.fixed_lr,
            "init_checksum": format!("{:016x}", paired.init_checksum),
            "speedup": paired.speedup(),
            "fixed": result_json(&paired.fixed),
            "adaptive": result_json(&paired.adaptive),
        }),
    )?;
    Ok(files)
}

/// Writes any serializable summary as pretty JSON.
pub fn write_summary(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_json(path, value)
}
