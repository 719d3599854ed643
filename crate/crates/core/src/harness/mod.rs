//! Monte-Carlo experiment driver: seeded trials, paired method runs, scoring
//! against ground truth and CSV/JSON output.

mod config;
mod output;
mod score;
mod trial;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{parse_snr_list, ExperimentConfig, SearchSettings, DEFAULT_METHODS};
pub use output::{aggregate_csv, format_snr, manifest_json, results_csv, write_outputs, Manifest};
pub use score::{aggregate, match_and_score, median, MatchScore, MetricsRecord, ScoredTarget};
pub use trial::{run_trial, sound, trial_seed, ProcessingSettings, SoundingData, TrialOutcome, MAX_TRIAL_ATTEMPTS};

use crate::estimator::{Localizer, MethodRegistry};
use crate::Result;

/// Per-trial bookkeeping kept after scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub snr_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub resamples: u32,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Sorted by method, SNR, trial, target.
    pub rows: Vec<ScoredTarget>,
    pub metrics: Vec<MetricsRecord>,
    pub trials: Vec<TrialSummary>,
}

impl ExperimentOutput {
    pub fn total_resamples(&self) -> u64 {
        self.trials.iter().map(|t| t.resamples as u64).sum()
    }
}

/// Scores every method of one trial against its ground truth.
pub fn score_trial(outcome: &TrialOutcome, hit_radius: f64) -> Vec<ScoredTarget> {
    let truth: Vec<_> = outcome.scenario.targets.iter().map(|t| t.position).collect();
    let mut rows = Vec::with_capacity(truth.len() * outcome.results.len());
    for res in &outcome.results {
        let scores = match_and_score(&truth, &res.positions(), hit_radius);
        for (k, (t, s)) in outcome.scenario.targets.iter().zip(scores).enumerate() {
            let est = s.estimate.map(|j| &res.targets[j]);
            rows.push(ScoredTarget {
                method: res.method.clone(),
                snr_index: outcome.snr_index,
                snr_db: outcome.snr_db,
                trial: outcome.trial,
                target: k,
                kind: t.kind,
                truth: t.position,
                estimate: est.and_then(|e| e.position),
                error: s.error,
                hit: s.hit,
                associated: est.is_some_and(|e| e.associated),
                objective: est.map(|e| e.objective),
                degenerate: res.degenerate,
            });
        }
    }
    rows
}

/// Runs the configured sweep on `threads` worker threads (all cores when
/// `None`). The output does not depend on the thread count.
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &MethodRegistry,
    threads: Option<usize>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let methods: Vec<Arc<dyn Localizer>> = registry.select(&config.methods)?;
    let settings = ProcessingSettings::from_config(config)?;
    let search = config.search_config()?;
    let snrs = config.snr_points();
    let jobs: Vec<(usize, usize)> =
        (0..snrs.len()).flat_map(|s| (0..config.trials).map(move |t| (s, t))).collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| crate::Error::config(format!("thread pool: {e}")))?;

    let scored: Vec<(TrialSummary, Vec<ScoredTarget>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, t)| {
                let outcome = run_trial(&config.scenario, &settings, &search, &methods, config.seed, s, snrs[s], t)?;
                let summary =
                    TrialSummary { snr_index: s, trial: t, seed: outcome.seed, resamples: outcome.resamples };
                Ok((summary, score_trial(&outcome, config.hit_radius)))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut trials = Vec::with_capacity(scored.len());
    let mut rows = Vec::with_capacity(scored.iter().map(|(_, r)| r.len()).sum());
    for (summary, r) in scored {
        trials.push(summary);
        rows.extend(r);
    }
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.snr_index.cmp(&b.snr_index))
            .then(a.trial.cmp(&b.trial))
            .then(a.target.cmp(&b.target))
    });
    let metrics = aggregate(&rows);
    for (s, snr) in snrs.iter().enumerate() {
        let by_method: BTreeMap<&str, (usize, usize)> = rows.iter().filter(|r| r.snr_index == s).fold(
            BTreeMap::new(),
            |mut acc, r| {
                let e = acc.entry(r.method.as_str()).or_insert((0, 0));
                e.0 += r.hit as usize;
                e.1 += 1;
                acc
            },
        );
        log::info!("snr {} dB: {:?}", format_snr(*snr), by_method);
    }
    Ok(ExperimentOutput { config: config.clone(), rows, metrics, trials })
}
