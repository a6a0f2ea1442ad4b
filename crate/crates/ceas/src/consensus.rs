//! Fidelity-weighted aggregation and gossip mixing.
//!
//! Stamps summarise node reliability as a scalar in (0, 1]; weights and
//! mixing-matrix entries are proportional to them, with quarantined nodes
//! pinned to weight zero. Gossip applies a row-stochastic matrix rebuilt per
//! step so edge availability can vary within a round.

use std::collections::BTreeSet;

use crate::error::{CeasError, Result};
use crate::param::ParamVector;
use crate::topology::Topology;

/// Scalar reliability statistic for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityStamp {
    pub node: usize,
    /// Core fidelity in (0, 1].
    pub fidelity: f64,
    /// Optional configured information proxy; recorded, not folded in.
    pub qfi_proxy: f64,
    /// Optional process distance; damps the stamp exponentially.
    pub process_distance: f64,
}

impl FidelityStamp {
    pub fn new(node: usize, fidelity: f64) -> Self {
        FidelityStamp {
            node,
            fidelity,
            qfi_proxy: 0.0,
            process_distance: 0.0,
        }
    }

    /// Stamp value `fidelity * exp(-process_distance)`, in (0, 1].
    pub fn value(&self) -> f64 {
        self.fidelity * (-self.process_distance).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fidelity > 0.0 && self.fidelity <= 1.0) {
            return Err(CeasError::domain("fidelity must lie in (0, 1]"));
        }
        if self.qfi_proxy < 0.0 || self.process_distance < 0.0 {
            return Err(CeasError::domain(
                "qfi_proxy and process_distance must be nonnegative",
            ));
        }
        Ok(())
    }
}

/// Normalized per-node aggregation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }
}

/// Stamp-proportional weights over non-quarantined nodes, summing to one.
pub fn normalize_weights(
    stamps: &[FidelityStamp],
    quarantined: &BTreeSet<usize>,
) -> Result<WeightVector> {
    let mut weights = vec![0.0; stamps.len()];
    let mut total = 0.0;
    for (k, stamp) in stamps.iter().enumerate() {
        stamp.validate()?;
        if !quarantined.contains(&stamp.node) {
            weights[k] = stamp.value();
            total += weights[k];
        }
    }
    if total <= 0.0 {
        return Err(CeasError::ConsensusStall { round: 0 });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(WeightVector(weights))
}

/// Weighted componentwise combination of gradients or parameters.
pub fn aggregate(vectors: &[ParamVector], weights: &WeightVector) -> Result<ParamVector> {
    if vectors.len() != weights.len() {
        return Err(CeasError::Shape {
            expected: weights.len(),
            got: vectors.len(),
        });
    }
    let dim = vectors
        .first()
        .ok_or_else(|| CeasError::domain("aggregate over empty set"))?
        .len();
    let mut out = ParamVector::zeros(dim);
    for (v, &w) in vectors.iter().zip(weights.as_slice()) {
        v.check_dim(dim)?;
        if w != 0.0 {
            out.axpy(w, v)?;
        }
    }
    Ok(out)
}

/// Minimum-variance weights for independent estimators with the given
/// covariance traces: `w_k` proportional to `1 / trace_k`.
pub fn optimal_inverse_variance_weights(traces: &[f64]) -> Result<WeightVector> {
    if traces.is_empty() {
        return Err(CeasError::domain("no traces given"));
    }
    let mut weights = Vec::with_capacity(traces.len());
    for &t in traces {
        if t <= 0.0 || !t.is_finite() {
            return Err(CeasError::domain("covariance traces must be positive"));
        }
        weights.push(1.0 / t);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(WeightVector(weights))
}

/// Dense row-stochastic mixing matrix for one gossip step.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    n: usize,
    w: Vec<f64>,
    pub round: u64,
}

impl MixingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, k: usize, j: usize) -> f64 {
        self.w[k * self.n + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.w[k * self.n..(k + 1) * self.n]
    }

    pub fn row_sums_are_stochastic(&self, tol: f64) -> bool {
        (0..self.n).all(|k| {
            let s: f64 = self.row(k).iter().sum();
            (s - 1.0).abs() <= tol && self.row(k).iter().all(|&v| v >= 0.0)
        })
    }

    /// Applies `theta <- W theta` with a fixed summation order.
    pub fn apply(&self, params: &[ParamVector]) -> Result<Vec<ParamVector>> {
        if params.len() != self.n {
            return Err(CeasError::Shape {
                expected: self.n,
                got: params.len(),
            });
        }
        let dim = params.first().map_or(0, |p| p.len());
        let mut out = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let mut acc = ParamVector::zeros(dim);
            for (j, p) in params.iter().enumerate() {
                let w = self.entry(k, j);
                if w != 0.0 {
                    acc.axpy(w, p)?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Stationary left eigenvector by power iteration (pi W = pi).
    pub fn stationary_distribution(&self, iterations: usize) -> Vec<f64> {
        let mut pi = vec![1.0 / self.n as f64; self.n];
        for _ in 0..iterations {
            let mut next = vec![0.0; self.n];
            for (k, &p) in pi.iter().enumerate() {
                if p != 0.0 {
                    for j in 0..self.n {
                        next[j] += p * self.entry(k, j);
                    }
                }
            }
            let total: f64 = next.iter().sum();
            for v in &mut next {
                *v /= total;
            }
            pi = next;
        }
        pi
    }
}

/// Builds the step matrix over an explicit edge set without requiring
/// connectivity; isolated active nodes get identity rows.
pub(crate) fn step_matrix(
    n: usize,
    edges: &[(usize, usize)],
    stamps: &[FidelityStamp],
    quarantined: &BTreeSet<usize>,
    round: u64,
) -> Result<MixingMatrix> {
    if stamps.len() != n {
        return Err(CeasError::Shape {
            expected: n,
            got: stamps.len(),
        });
    }
    let mut phi = vec![0.0; n];
    for (k, stamp) in stamps.iter().enumerate() {
        stamp.validate()?;
        phi[k] = stamp.value();
    }
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        if !quarantined.contains(&a) && !quarantined.contains(&b) {
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
    }
    let mut w = vec![0.0; n * n];
    for k in 0..n {
        if quarantined.contains(&k) {
            w[k * n + k] = 1.0;
            continue;
        }
        let mass: f64 = phi[k] + neighbours[k].iter().map(|&j| phi[j]).sum::<f64>();
        for &j in &neighbours[k] {
            w[k * n + j] = phi[j] / mass;
        }
        // Diagonal absorbs the remainder so the row sums to one.
        let off: f64 = neighbours[k].iter().map(|&j| phi[j] / mass).sum();
        w[k * n + k] = 1.0 - off;
    }
    Ok(MixingMatrix { n, w, round })
}

/// Row-stochastic mixing matrix over the full topology. Off-diagonal entries
/// are proportional to the neighbour's stamp; quarantined nodes have
/// identity rows and zero columns. Errors when the active subgraph is
/// disconnected.
pub fn build_mixing_matrix(
    topology: &Topology,
    stamps: &[FidelityStamp],
    quarantined: &BTreeSet<usize>,
) -> Result<MixingMatrix> {
    let n = topology.n_nodes();
    let active: Vec<bool> = (0..n).map(|k| !quarantined.contains(&k)).collect();
    if !topology.is_connected_over(&active) {
        return Err(CeasError::Disconnected);
    }
    step_matrix(n, topology.edges(), stamps, quarantined, 0)
}

/// Applies `depth` gossip steps, rebuilding the matrix each step. Isolated
/// nodes pass their vectors through unchanged.
pub fn gossip_round(
    params: &[ParamVector],
    topology: &Topology,
    stamps: &[FidelityStamp],
    quarantined: &BTreeSet<usize>,
    depth: usize,
) -> Result<Vec<ParamVector>> {
    let mut state = params.to_vec();
    for step in 0..depth {
        let w = step_matrix(
            topology.n_nodes(),
            topology.edges(),
            stamps,
            quarantined,
            step as u64,
        )?;
        state = w.apply(&state)?;
    }
    Ok(state)
}
