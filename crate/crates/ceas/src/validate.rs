//! Self-contained oracle checks runnable from the CLI: each check compares
//! an implementation against an independent reference (grid search, Monte
//! Carlo, power iteration) and reports pass/fail.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::consensus::{build_mixing_matrix, gossip_round, optimal_inverse_variance_weights};
use crate::consensus::FidelityStamp;
use crate::inventory::{expected_inventory_step, LifetimeModel, LinkInventory, PairSelector};
use crate::param::ParamVector;
use crate::rng::stream;
use crate::topology::Topology;

/// Options for a validation pass.
#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Test hook: perturb the inverse-variance weights so the minimum-
    /// variance check must fail (negative control).
    pub corrupt_inverse_variance: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            seed: 1,
            corrupt_inverse_variance: false,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every oracle check and returns the results in a fixed order.
pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckResult> {
    vec![
        check_min_variance_weights(opts),
        check_inventory_recursion(opts),
        check_survival_law(opts),
        check_gossip_convergence(opts),
    ]
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<28} {:<6} detail", "check", "status");
    for r in results {
        let _ = writeln!(
            out,
            "{:<28} {:<6} {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.detail
        );
    }
    out
}

/// Grid search over the weight simplex (step 0.01) must never beat the
/// inverse-trace weighting on aggregate variance `sum w_k^2 trace_k`.
fn check_min_variance_weights(opts: &ValidationOptions) -> CheckResult {
    let mut rng = stream(opts.seed ^ 0x5105);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut passed = true;
    for _ in 0..100 {
        let len = rng.random_range(2..=4usize);
        let traces: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..=10.0)).collect();
        let weights = match optimal_inverse_variance_weights(&traces) {
            Ok(w) => w,
            Err(e) => {
                return CheckResult {
                    name: "min-variance-weights",
                    passed: false,
                    detail: format!("weight construction failed: {e}"),
                }
            }
        };
        let mut candidate: Vec<f64> = weights.as_slice().to_vec();
        if opts.corrupt_inverse_variance {
            // Shift mass toward the noisiest estimator.
            let hi = traces
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let lo = traces
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if hi != lo {
                let shift = candidate[lo] * 0.5;
                candidate[lo] -= shift;
                candidate[hi] += shift;
            }
        }
        let var_candidate: f64 = candidate.iter().zip(&traces).map(|(w, t)| w * w * t).sum();
        let var_grid = grid_min_variance(&traces, 100);
        // The grid lives inside the simplex, so the continuous optimum can
        // only be at or below it; float slack only.
        let gap = var_candidate - var_grid;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-12 {
            passed = false;
        }
    }
    CheckResult {
        name: "min-variance-weights",
        passed,
        detail: format!("worst (candidate - grid) variance gap {worst_gap:.3e}"),
    }
}

fn grid_min_variance(traces: &[f64], step: usize) -> f64 {
    fn recurse(traces: &[f64], idx: usize, remaining: usize, step: usize, acc: f64, best: &mut f64) {
        if idx == traces.len() - 1 {
            let w = remaining as f64 / step as f64;
            let var = acc + w * w * traces[idx];
            if var < *best {
                *best = var;
            }
            return;
        }
        for c in 0..=remaining {
            let w = c as f64 / step as f64;
            recurse(traces, idx + 1, remaining - c, step, acc + w * w * traces[idx], best);
        }
    }
    let mut best = f64::INFINITY;
    recurse(traces, 0, step, step, 0.0, &mut best);
    best
}

/// Mean inventory after one stochastic expire/generate/consume step must
/// match `e^{-lambda} m + r - c` within 2% over 10^4 trials, for five
/// parameter settings in exponential-lifetime mode.
fn check_inventory_recursion(opts: &ValidationOptions) -> CheckResult {
    let settings: [(usize, f64, usize, usize); 5] = [
        (10, (10.0f64 / 9.0).ln(), 5, 3),
        (20, 0.25, 8, 5),
        (0, 0.5, 6, 2),
        (15, 0.1, 5, 3),
        (30, 0.05, 4, 4),
    ];
    let mut rng = stream(opts.seed ^ 0xE47);
    let mut worst_rel = 0.0f64;
    let mut passed = true;
    let trials = 10_000;
    for &(m, lambda, r, c) in &settings {
        let mut total = 0.0;
        for _ in 0..trials {
            let mut link = LinkInventory::new((0, 1), lambda).expect("valid rate");
            link.generate_pairs(m, 1.0, LifetimeModel::Exponential, 0, &mut rng)
                .expect("generation");
            link.age_and_expire(1);
            link.generate_pairs(r, 1.0, LifetimeModel::Exponential, 1, &mut rng)
                .expect("generation");
            for _ in 0..c {
                link.consume(PairSelector::EarliestExpiring, 1, &mut rng);
            }
            total += link.usable_count() as f64;
        }
        let mean = total / trials as f64;
        let expected = expected_inventory_step(m as f64, lambda, r as f64, c as f64);
        let rel = if expected.abs() < 1e-9 {
            mean.abs()
        } else {
            (mean - expected).abs() / expected.abs()
        };
        worst_rel = worst_rel.max(rel);
        if rel > 0.02 {
            passed = false;
        }
    }
    CheckResult {
        name: "inventory-recursion",
        passed,
        detail: format!("worst relative error {worst_rel:.4} over {} settings", settings.len()),
    }
}

/// Empirical survival of 10^5 exponential-lifetime pairs over dt in {1,2,3}
/// must sit inside the 95% binomial interval around `e^{-lambda dt}`.
fn check_survival_law(opts: &ValidationOptions) -> CheckResult {
    let lambda = 0.2;
    let n = 100_000usize;
    let mut rng = stream(opts.seed ^ 0x5000);
    let mut link = LinkInventory::new((0, 1), lambda).expect("valid rate");
    link.generate_pairs(n, 1.0, LifetimeModel::Exponential, 0, &mut rng)
        .expect("generation");
    let lifetimes: Vec<f64> = link.pairs().iter().map(|p| p.coherence_time).collect();
    let mut worst_z = 0.0f64;
    let mut passed = true;
    for dt in [1.0, 2.0, 3.0] {
        let p = (-lambda * dt).exp();
        let survived = lifetimes.iter().filter(|&&t| t > dt).count() as f64;
        let p_hat = survived / n as f64;
        let half_width = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
        let z = (p_hat - p).abs() / (half_width / 1.96);
        worst_z = worst_z.max(z);
        if (p_hat - p).abs() > half_width {
            passed = false;
        }
    }
    CheckResult {
        name: "survival-law",
        passed,
        detail: format!("worst |z| = {worst_z:.2} (95% CI bound 1.96)"),
    }
}

/// Uniform-stamp gossip must reach the arithmetic mean within 1e-6 in at
/// most 50 steps on small regular graphs; weighted gossip must reach the
/// stationary-eigenvector mean.
fn check_gossip_convergence(opts: &ValidationOptions) -> CheckResult {
    let mut rng = stream(opts.seed ^ 0x6055);
    let quarantined = BTreeSet::new();
    let mut worst = 0.0f64;
    let mut passed = true;

    let graphs: Vec<Topology> = vec![
        Topology::complete(6, &mut rng).expect("complete graph"),
        Topology::cycle(5).expect("cycle"),
        Topology::random_regular(10, 4, &mut rng).expect("regular graph"),
    ];
    for topo in &graphs {
        let n = topo.n_nodes();
        let params: Vec<ParamVector> = (0..n)
            .map(|k| ParamVector::new(vec![rng.random_range(-2.0..2.0), k as f64]))
            .collect();
        let stamps: Vec<FidelityStamp> = (0..n).map(|k| FidelityStamp::new(k, 0.8)).collect();
        let mean: f64 = params.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let out = gossip_round(&params, topo, &stamps, &quarantined, 50).expect("gossip");
        for v in &out {
            let err = (v[0] - mean).abs();
            worst = worst.max(err);
            if err > 1e-6 {
                passed = false;
            }
        }

        // Heterogeneous stamps: limit is the pi-weighted mean.
        let stamps: Vec<FidelityStamp> = (0..n)
            .map(|k| FidelityStamp::new(k, 0.1 + 0.9 * ((k + 1) as f64 / n as f64)))
            .collect();
        let w = build_mixing_matrix(topo, &stamps, &quarantined).expect("mixing matrix");
        let pi = w.stationary_distribution(20_000);
        let target: f64 = pi.iter().zip(&params).map(|(p, v)| p * v[0]).sum();
        let out = gossip_round(&params, topo, &stamps, &quarantined, 400).expect("gossip");
        for v in &out {
            let err = (v[0] - target).abs();
            worst = worst.max(err);
            if err > 1e-6 {
                passed = false;
            }
        }
    }
    CheckResult {
        name: "gossip-convergence",
        passed,
        detail: format!("worst deviation {worst:.2e} (bound 1e-6)"),
    }
}

/// Convenience used by the CLI and tests.
pub fn validation_exit_code(results: &[CheckResult]) -> i32 {
    if all_passed(results) {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_validation_passes() {
        let results = run_validation(&ValidationOptions::default());
        assert_eq!(results.len(), 4);
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
        assert_eq!(validation_exit_code(&results), 0);
    }

    #[test]
    fn corrupted_weights_fail_the_min_variance_check() {
        let results = run_validation(&ValidationOptions {
            seed: 1,
            corrupt_inverse_variance: true,
        });
        let mv = results
            .iter()
            .find(|r| r.name == "min-variance-weights")
            .unwrap();
        assert!(!mv.passed);
        assert_eq!(validation_exit_code(&results), 1);
    }

    #[test]
    fn table_lists_every_check() {
        let results = run_validation(&ValidationOptions::default());
        let table = render_table(&results);
        for r in &results {
            assert!(table.contains(r.name));
        }
    }
}
