//! Static SVG rendering of sweep results: per-protocol mean accuracy lines
//! with +/- one std shaded envelopes across rounds. Output is a pure
//! function of the input rows, so regeneration is byte-identical.

use std::fmt::Write as _;

use crate::config::Protocol;
use crate::error::{CeasError, Result};
use crate::report::MetricsRow;
use crate::sweep::AggregateRow;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    dashed: bool,
    rows: Vec<&'a AggregateRow>,
}

/// Aggregates raw metrics rows per (protocol, round) into envelope rows.
pub fn aggregate_rows(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for protocol in [Protocol::Ceas, Protocol::RandomBaseline] {
        let mut by_round: std::collections::BTreeMap<u64, Vec<f64>> =
            std::collections::BTreeMap::new();
        for r in rows.iter().filter(|r| r.protocol == protocol) {
            by_round.entry(r.round).or_default().push(r.accuracy);
        }
        for (round, acc) in by_round {
            let mean = acc.iter().sum::<f64>() / acc.len() as f64;
            let std = if acc.len() < 2 {
                0.0
            } else {
                (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64)
                    .sqrt()
            };
            out.push(AggregateRow {
                round,
                protocol,
                mean_accuracy: mean,
                std_accuracy: std,
                mean_utilisation: 0.0,
                mean_isolation_rate: 0.0,
            });
        }
    }
    out
}

fn x_scale(round: u64, max_round: u64) -> f64 {
    let span = WIDTH - MARGIN_L - MARGIN_R;
    MARGIN_L + span * (round.saturating_sub(1)) as f64 / (max_round.max(2) - 1) as f64
}

fn y_scale(accuracy: f64) -> f64 {
    let span = HEIGHT - MARGIN_T - MARGIN_B;
    MARGIN_T + span * (1.0 - accuracy.clamp(0.0, 1.0))
}

fn path_from(points: &[(f64, f64)]) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{x:.2},{y:.2} ");
    }
    d.trim_end().to_string()
}

/// Renders the accuracy-over-rounds comparison figure.
pub fn render_accuracy_svg(rows: &[AggregateRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(CeasError::Csv("no aggregate rows to plot".into()));
    }
    let max_round = rows.iter().map(|r| r.round).max().unwrap_or(1);
    let series: Vec<Series> = [
        (Protocol::Ceas, "CEAS", "#1f77b4", false),
        (Protocol::RandomBaseline, "random baseline", "#d62728", true),
    ]
    .into_iter()
    .filter_map(|(p, label, color, dashed)| {
        let rows: Vec<&AggregateRow> = rows.iter().filter(|r| r.protocol == p).collect();
        (!rows.is_empty()).then_some(Series {
            label,
            color,
            dashed,
            rows,
        })
    })
    .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">Global accuracy across training rounds</text>"#,
        WIDTH / 2.0
    );

    // Axes and gridlines.
    for tick in 0..=10 {
        let acc = tick as f64 / 10.0;
        let y = y_scale(acc);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{acc:.1}</text>"#,
            MARGIN_L - 8.0,
            y + 4.0
        );
    }
    let x_ticks = 6usize;
    for i in 0..=x_ticks {
        let round = 1 + (max_round.saturating_sub(1)) * i as u64 / x_ticks as u64;
        let x = x_scale(round, max_round);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{round}</text>"#,
            HEIGHT - MARGIN_B + 20.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">round</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">accuracy</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for s in &series {
        // Envelope polygon: mean + std forward, mean - std backward.
        let mut envelope: Vec<(f64, f64)> = s
            .rows
            .iter()
            .map(|r| {
                (
                    x_scale(r.round, max_round),
                    y_scale(r.mean_accuracy + r.std_accuracy),
                )
            })
            .collect();
        envelope.extend(s.rows.iter().rev().map(|r| {
            (
                x_scale(r.round, max_round),
                y_scale(r.mean_accuracy - r.std_accuracy),
            )
        }));
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.15" stroke="none"/>"#,
            envelope
                .iter()
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect::<Vec<_>>()
                .join(" "),
            s.color
        );
        let line: Vec<(f64, f64)> = s
            .rows
            .iter()
            .map(|r| (x_scale(r.round, max_round), y_scale(r.mean_accuracy)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="7,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            path_from(&line),
            s.color
        );
    }

    // Legend.
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 20.0 * i as f64;
        let dash = if s.dashed { r#" stroke-dasharray="7,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
            MARGIN_L + 12.0,
            MARGIN_L + 48.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_L + 56.0,
            y + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::report::{parse_csv, render_combined_csv};
    use crate::sweep::run_sweep;

    fn sample_rows() -> Vec<AggregateRow> {
        let cfg = ExperimentConfig {
            n_nodes: 10,
            rounds: 8,
            topology_degree: 4,
            min_active: 2,
            ..ExperimentConfig::default()
        };
        let results = run_sweep(&cfg, &[1, 2]).unwrap();
        let csv = render_combined_csv(&results);
        aggregate_rows(&parse_csv(&csv).unwrap())
    }

    #[test]
    fn svg_has_both_series_and_size() {
        let svg = render_accuracy_svg(&sample_rows()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("CEAS"));
        assert!(svg.contains("random baseline"));
        assert!(svg.len() > 1000);
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = sample_rows();
        assert_eq!(
            render_accuracy_svg(&rows).unwrap(),
            render_accuracy_svg(&rows).unwrap()
        );
    }

    #[test]
    fn single_seed_envelope_has_zero_width() {
        let rows: Vec<AggregateRow> = sample_rows()
            .into_iter()
            .map(|mut r| {
                r.std_accuracy = 0.0;
                r
            })
            .collect();
        // Degenerate envelopes still render.
        assert!(render_accuracy_svg(&rows).is_ok());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render_accuracy_svg(&[]).is_err());
    }
}
