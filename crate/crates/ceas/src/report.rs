//! Metrics CSV emission and parsing, plus run summaries.
//!
//! The schema is frozen:
//! `round,protocol,seed,accuracy,utilisation,isolation_rate,active_nodes,mean_fidelity,checkpoint_committed`
//! with one row per round per run and six-decimal fixed-point reals, so a
//! run's output is byte-stable.

use std::fmt::Write as _;

use crate::config::Protocol;
use crate::engine::{RoundMetrics, RunResult};
use crate::error::{CeasError, Result};

pub const CSV_HEADER: &str =
    "round,protocol,seed,accuracy,utilisation,isolation_rate,active_nodes,mean_fidelity,checkpoint_committed";

/// One parsed metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub round: u64,
    pub protocol: Protocol,
    pub seed: u64,
    pub accuracy: f64,
    pub utilisation: f64,
    pub isolation_rate: f64,
    pub active_nodes: usize,
    pub mean_fidelity: f64,
    pub checkpoint_committed: bool,
}

fn push_row(out: &mut String, protocol: Protocol, seed: u64, m: &RoundMetrics) {
    let _ = writeln!(
        out,
        "{},{},{},{:.6},{:.6},{:.6},{},{:.6},{}",
        m.round,
        protocol.as_str(),
        seed,
        m.accuracy,
        m.utilisation,
        m.isolation_rate,
        m.active_nodes,
        m.mean_fidelity,
        m.checkpoint_committed
    );
}

/// Renders one run as a complete CSV document.
pub fn render_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.metrics.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for m in &result.metrics {
        push_row(&mut out, result.protocol, result.seed, m);
    }
    out
}

/// Renders many runs as one combined CSV, ordered by (protocol, seed, round).
pub fn render_combined_csv(results: &[RunResult]) -> String {
    let mut order: Vec<&RunResult> = results.iter().collect();
    order.sort_by_key(|r| (r.protocol, r.seed));
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in order {
        for m in &r.metrics {
            push_row(&mut out, r.protocol, r.seed, m);
        }
    }
    out
}

/// Parses a metrics CSV produced by this crate.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CeasError::Csv("empty file".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(CeasError::Csv(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CeasError::Csv(format!(
                "row {}: expected 9 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| CeasError::Csv(format!("row {}: bad {what} `{s}`", i + 2)))
        };
        rows.push(MetricsRow {
            round: fields[0]
                .parse()
                .map_err(|_| CeasError::Csv(format!("row {}: bad round", i + 2)))?,
            protocol: Protocol::parse(fields[1]).map_err(|e| CeasError::Csv(e.to_string()))?,
            seed: fields[2]
                .parse()
                .map_err(|_| CeasError::Csv(format!("row {}: bad seed", i + 2)))?,
            accuracy: parse_f(fields[3], "accuracy")?,
            utilisation: parse_f(fields[4], "utilisation")?,
            isolation_rate: parse_f(fields[5], "isolation_rate")?,
            active_nodes: fields[6]
                .parse()
                .map_err(|_| CeasError::Csv(format!("row {}: bad active_nodes", i + 2)))?,
            mean_fidelity: parse_f(fields[7], "mean_fidelity")?,
            checkpoint_committed: match fields[8] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(CeasError::Csv(format!(
                        "row {}: bad checkpoint flag `{other}`",
                        i + 2
                    )))
                }
            },
        });
    }
    Ok(rows)
}

/// Human-readable run summary: final accuracy, mean utilisation over rounds,
/// final isolation rate.
pub fn render_summary(result: &RunResult) -> String {
    let final_accuracy = result.metrics.last().map_or(0.0, |m| m.accuracy);
    let mean_utilisation = if result.metrics.is_empty() {
        0.0
    } else {
        result.metrics.iter().map(|m| m.utilisation).sum::<f64>() / result.metrics.len() as f64
    };
    let final_isolation = result.metrics.last().map_or(0.0, |m| m.isolation_rate);
    let committed = result.checkpoints.iter().filter(|c| c.committed).count();
    format!(
        "protocol: {}\nseed: {}\nrounds: {}\nfinal_accuracy: {:.6}\nmean_utilisation: {:.6}\nfinal_isolation_rate: {:.6}\ncheckpoints_committed: {}/{}\n",
        result.protocol.as_str(),
        result.seed,
        result.metrics.len(),
        final_accuracy,
        mean_utilisation,
        final_isolation,
        committed,
        result.checkpoints.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::engine::run_experiment;

    fn tiny_run() -> RunResult {
        let cfg = ExperimentConfig {
            n_nodes: 10,
            rounds: 6,
            topology_degree: 4,
            min_active: 2,
            ..ExperimentConfig::default()
        };
        run_experiment(&cfg, 4).unwrap()
    }

    #[test]
    fn csv_round_trips() {
        let result = tiny_run();
        let csv = render_csv(&result);
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].round, 1);
        assert_eq!(rows[0].protocol, Protocol::Ceas);
        assert_eq!(rows[0].seed, 4);
    }

    #[test]
    fn header_only_for_empty_run() {
        let cfg = ExperimentConfig {
            n_nodes: 10,
            rounds: 0,
            topology_degree: 4,
            ..ExperimentConfig::default()
        };
        let result = run_experiment(&cfg, 1).unwrap();
        let csv = render_csv(&result);
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_csv("not,a,header\n1,2,3").is_err());
        let bad_row = format!("{CSV_HEADER}\n1,ceas,1,0.5\n");
        assert!(parse_csv(&bad_row).is_err());
    }

    #[test]
    fn summary_mentions_key_figures() {
        let result = tiny_run();
        let s = render_summary(&result);
        assert!(s.contains("final_accuracy"));
        assert!(s.contains("mean_utilisation"));
        assert!(s.contains("final_isolation_rate"));
    }
}
