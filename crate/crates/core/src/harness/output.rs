use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::score::{MetricsRecord, ScoredTarget};
use super::ExperimentOutput;
use crate::{Error, Result};

/// SNR as written in outputs; the noiseless point prints as `inf`.
pub fn format_snr(snr: f64) -> String {
    if snr.is_infinite() {
        "inf".to_string()
    } else {
        format!("{snr}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Raw per-target rows.
pub fn results_csv(rows: &[ScoredTarget]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method", "snr_db", "trial", "target", "class", "truth_x", "truth_y", "est_x", "est_y", "error", "hit",
        "associated", "objective", "degenerate",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format_snr(r.snr_db),
            r.trial.to_string(),
            r.target.to_string(),
            r.kind.as_str().to_string(),
            format!("{}", r.truth.x),
            format!("{}", r.truth.y),
            opt(r.estimate.map(|p| p.x)),
            opt(r.estimate.map(|p| p.y)),
            opt(r.error),
            (r.hit as u8).to_string(),
            (r.associated as u8).to_string(),
            opt(r.objective),
            (r.degenerate as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Aggregated metrics; an empty RMSE population prints `NA`.
pub fn aggregate_csv(metrics: &[MetricsRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "snr_db", "class", "targets", "hits", "hit_rate", "common_hits", "rmse", "median_error"])
        .map_err(csv_err)?;
    for m in metrics {
        w.write_record([
            m.method.clone(),
            format_snr(m.snr_db),
            m.class.as_str().to_string(),
            m.targets.to_string(),
            m.hits.to_string(),
            format!("{}", m.hit_rate),
            m.common_hits.to_string(),
            m.rmse.map(|x| format!("{x}")).unwrap_or_else(|| "NA".to_string()),
            format!("{}", m.median_error),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Run manifest: configuration echo, software version and seeding scheme.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub software: &'static str,
    pub version: &'static str,
    pub master_seed: u64,
    pub seed_derivation: &'static str,
    pub snr_points: Vec<String>,
    pub trials_per_snr: usize,
    pub methods: &'a [String],
    pub total_resamples: u64,
    pub config: &'a ExperimentConfig,
}

pub fn manifest_json(out: &ExperimentOutput) -> Result<String> {
    let m = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: out.config.seed,
        seed_derivation: "splitmix64 chain over (master, snr index, trial index, attempt)",
        snr_points: out.config.snr_points().into_iter().map(format_snr).collect(),
        trials_per_snr: out.config.trials,
        methods: &out.config.methods,
        total_resamples: out.total_resamples(),
        config: &out.config,
    };
    serde_json::to_string_pretty(&m).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Writes `results.csv`, `aggregate.csv` and `manifest.json` into `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(&out.rows)?)?;
    std::fs::write(dir.join("aggregate.csv"), aggregate_csv(&out.metrics)?)?;
    std::fs::write(dir.join("manifest.json"), manifest_json(out)? + "\n")?;
    Ok(())
}
