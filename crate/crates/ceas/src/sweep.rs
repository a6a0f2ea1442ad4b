//! Seed sweeps: both protocols across a seed range, optionally in parallel,
//! with per-round aggregate envelopes.
//!
//! Runs are independent; results are collected keyed by (protocol, seed) so
//! output never depends on scheduling. The `CEAS_THREADS` environment
//! variable caps worker threads.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Protocol};
use crate::engine::{run_experiment, RunResult};
use crate::error::Result;

/// Per-round mean/std envelope for one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub round: u64,
    pub protocol: Protocol,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_utilisation: f64,
    pub mean_isolation_rate: f64,
}

pub const AGGREGATE_HEADER: &str =
    "round,protocol,mean_accuracy,std_accuracy,mean_utilisation,mean_isolation_rate";

/// Runs both protocols for every seed in `seeds`, ordered by
/// (protocol, seed) in the output.
pub fn run_sweep(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunResult>> {
    let mut jobs: Vec<(Protocol, u64)> = Vec::new();
    for protocol in [Protocol::Ceas, Protocol::RandomBaseline] {
        for &seed in seeds {
            jobs.push((protocol, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| crate::error::CeasError::domain(format!("thread pool: {e}")))?;
    let mut results: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(protocol, seed)| {
                let cfg = ExperimentConfig {
                    protocol,
                    ..config.clone()
                };
                run_experiment(&cfg, seed)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by_key(|r| (r.protocol, r.seed));
    Ok(results)
}

fn thread_cap() -> usize {
    std::env::var("CEAS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(0) // 0 lets rayon pick
}

/// Per-round mean and sample-std envelopes per protocol, ordered by
/// (protocol, round). Single-seed sweeps get zero-width envelopes.
pub fn aggregate(results: &[RunResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for protocol in [Protocol::Ceas, Protocol::RandomBaseline] {
        let runs: Vec<&RunResult> = results.iter().filter(|r| r.protocol == protocol).collect();
        let Some(n_rounds) = runs.iter().map(|r| r.metrics.len()).min() else {
            continue;
        };
        if runs.is_empty() {
            continue;
        }
        for i in 0..n_rounds {
            let acc: Vec<f64> = runs.iter().map(|r| r.metrics[i].accuracy).collect();
            let mean = acc.iter().sum::<f64>() / acc.len() as f64;
            let std = if acc.len() < 2 {
                0.0
            } else {
                (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64)
                    .sqrt()
            };
            let util =
                runs.iter().map(|r| r.metrics[i].utilisation).sum::<f64>() / runs.len() as f64;
            let iso =
                runs.iter().map(|r| r.metrics[i].isolation_rate).sum::<f64>() / runs.len() as f64;
            rows.push(AggregateRow {
                round: runs[0].metrics[i].round,
                protocol,
                mean_accuracy: mean,
                std_accuracy: std,
                mean_utilisation: util,
                mean_isolation_rate: iso,
            });
        }
    }
    rows
}

pub fn render_aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.round,
            r.protocol.as_str(),
            r.mean_accuracy,
            r.std_accuracy,
            r.mean_utilisation,
            r.mean_isolation_rate
        );
    }
    out
}
