//! Byzantine attack injection, authentication verification, trust scores,
//! and divergence-based quarantine.
//!
//! The simulator tracks tampering ground truth in the tag's tamper bit;
//! protocol logic only ever sees the probabilistic verification outcome.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CeasError, Result};
use crate::param::ParamVector;

/// Nodes whose trust falls below this floor are excluded from aggregation
/// and mixing alongside quarantined nodes.
pub const TRUST_FLOOR: f64 = 0.2;

/// Trust assigned on re-admission after quarantine.
pub const READMISSION_TRUST: f64 = 0.5;

/// Fidelity must exceed this multiple of its initial value for a node to
/// re-enter on recovery.
pub const READMISSION_FIDELITY_FACTOR: f64 = 0.9;

/// Attack transformations a Byzantine node applies to its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Gaussian,
    Flip,
    Scale,
    /// Cycles gaussian -> flip -> scale every `switch_period` rounds.
    Adaptive,
}

impl AttackMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(AttackMode::Gaussian),
            "flip" => Ok(AttackMode::Flip),
            "scale" => Ok(AttackMode::Scale),
            "adaptive" => Ok(AttackMode::Adaptive),
            other => Err(CeasError::config(
                "attack_mode",
                format!("unknown mode `{other}` (expected gaussian, flip, scale, or adaptive)"),
            )),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackMode::Gaussian => "gaussian",
            AttackMode::Flip => "flip",
            AttackMode::Scale => "scale",
            AttackMode::Adaptive => "adaptive",
        }
    }
}

/// Attack parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub mode: AttackMode,
    /// Gaussian noise std as a multiple of the honest parameter std.
    pub gaussian_scale: f64,
    pub flip_factor: f64,
    pub scale_factor: f64,
    /// Rounds between mode switches in adaptive mode.
    pub switch_period: u64,
}

impl AttackSpec {
    pub fn with_mode(mode: AttackMode) -> Self {
        AttackSpec {
            mode,
            gaussian_scale: 0.6,
            flip_factor: -1.05,
            scale_factor: 1.6,
            switch_period: 20,
        }
    }

    /// Concrete transform active at `round` (1-based).
    pub fn active_mode(&self, round: u64) -> AttackMode {
        match self.mode {
            AttackMode::Adaptive => {
                let phase = (round.saturating_sub(1) / self.switch_period.max(1)) % 3;
                match phase {
                    0 => AttackMode::Gaussian,
                    1 => AttackMode::Flip,
                    _ => AttackMode::Scale,
                }
            }
            fixed => fixed,
        }
    }
}

/// Transforms `params` according to the attack active at `round`.
/// `sigma_w` is the empirical per-component std of the honest population,
/// supplied by the (omniscient) simulator.
pub fn apply_attack<R: Rng>(
    params: &ParamVector,
    spec: &AttackSpec,
    sigma_w: f64,
    round: u64,
    rng: &mut R,
) -> ParamVector {
    match spec.active_mode(round) {
        AttackMode::Gaussian => {
            let std = spec.gaussian_scale * sigma_w;
            let mut out = params.clone();
            for v in out.as_mut_slice() {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
            out
        }
        AttackMode::Flip => params.scaled(spec.flip_factor),
        AttackMode::Scale => params.scaled(spec.scale_factor),
        AttackMode::Adaptive => unreachable!("active_mode resolves adaptive"),
    }
}

/// Authentication tag attached to a parameter payload.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthTag {
    pub digest: u64,
    /// Ground-truth tamper bit, visible to the simulator only.
    pub tampered: bool,
    /// Probability a tampered payload is flagged.
    pub detection_prob: f64,
}

impl AuthTag {
    pub fn new(payload: &ParamVector, tampered: bool, detection_prob: f64) -> Self {
        // FNV-1a over the component bit patterns.
        let mut digest = 0xcbf2_9ce4_8422_2325u64;
        for v in payload.iter() {
            for byte in v.to_bits().to_le_bytes() {
                digest ^= byte as u64;
                digest = digest.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        AuthTag {
            digest,
            tampered,
            detection_prob,
        }
    }
}

/// Verification outcome: untampered payloads always pass; tampered payloads
/// fail with probability `detection_prob`.
pub fn verify_tag<R: Rng>(tag: &AuthTag, rng: &mut R) -> bool {
    if !tag.tampered {
        return true;
    }
    rng.random::<f64>() >= tag.detection_prob
}

/// Exponential moving average of verification outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustState {
    pub trust: f64,
    pub alpha: f64,
    history: VecDeque<bool>,
}

const TRUST_HISTORY_CAP: usize = 32;

impl TrustState {
    pub fn new(initial: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&initial) {
            return Err(CeasError::domain("trust must lie in [0, 1]"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CeasError::domain("alpha must lie in (0, 1)"));
        }
        Ok(TrustState {
            trust: initial,
            alpha,
            history: VecDeque::with_capacity(TRUST_HISTORY_CAP),
        })
    }

    /// trust <- alpha * trust + (1 - alpha) * v
    pub fn update(&mut self, v: bool) {
        self.trust = self.alpha * self.trust + (1.0 - self.alpha) * f64::from(v);
        if self.history.len() == TRUST_HISTORY_CAP {
            self.history.pop_front();
        }
        self.history.push_back(v);
    }

    pub fn reset(&mut self, trust: f64) {
        self.trust = trust;
        self.history.clear();
    }

    pub fn history(&self) -> impl Iterator<Item = bool> + '_ {
        self.history.iter().copied()
    }
}

/// KL divergence between isotropic Gaussians centred at the two parameter
/// vectors with shared variance: `||a - b||^2 / (2 sigma_sq)`.
pub fn kl_divergence(
    node_params: &ParamVector,
    global_params: &ParamVector,
    sigma_sq: f64,
) -> Result<f64> {
    if sigma_sq <= 0.0 {
        return Err(CeasError::domain("sigma_sq must be positive"));
    }
    let diff = node_params.sub(global_params)?;
    Ok(diff.norm_sq() / (2.0 * sigma_sq))
}

/// Outcome of one quarantine evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuarantineOutcome {
    pub newly_quarantined: Vec<usize>,
    pub readmitted: Vec<usize>,
}

/// Rolling-divergence quarantine with fidelity-dependent thresholds and two
/// re-admission paths: a minimum-active floor and fidelity recovery.
#[derive(Debug, Clone)]
pub struct QuarantineState {
    pub window: usize,
    divergence_history: Vec<VecDeque<f64>>,
    quarantined: BTreeSet<usize>,
    pub threshold_base: f64,
    pub min_active: usize,
    initial_fidelity: Vec<f64>,
}

impl QuarantineState {
    pub fn new(
        n: usize,
        window: usize,
        threshold_base: f64,
        min_active: usize,
        initial_fidelity: Vec<f64>,
    ) -> Result<Self> {
        if window == 0 {
            return Err(CeasError::config("quarantine_window", "must be positive"));
        }
        if initial_fidelity.len() != n {
            return Err(CeasError::Shape {
                expected: n,
                got: initial_fidelity.len(),
            });
        }
        Ok(QuarantineState {
            window,
            divergence_history: vec![VecDeque::with_capacity(window); n],
            quarantined: BTreeSet::new(),
            threshold_base,
            min_active,
            initial_fidelity,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.divergence_history.len()
    }

    pub fn quarantined(&self) -> &BTreeSet<usize> {
        &self.quarantined
    }

    pub fn is_quarantined(&self, k: usize) -> bool {
        self.quarantined.contains(&k)
    }

    /// Fidelity-dependent threshold: lower fidelity loosens the bar, since
    /// honest-but-noisy nodes naturally diverge more.
    pub fn threshold(&self, fidelity: f64) -> f64 {
        self.threshold_base / fidelity.max(0.1)
    }

    pub fn rolling_sum(&self, k: usize) -> f64 {
        self.divergence_history[k].iter().sum()
    }

    /// Records this round's divergences, quarantines active nodes whose
    /// rolling sum exceeds their threshold, then re-admits (lowest id first)
    /// while the active count sits below the floor or a node's fidelity has
    /// recovered past `READMISSION_FIDELITY_FACTOR` of its initial value.
    /// Re-admission clears divergence history; the caller resets trust.
    pub fn quarantine_step(
        &mut self,
        fidelities: &[f64],
        divergences: &[f64],
    ) -> QuarantineOutcome {
        let n = self.n_nodes();
        debug_assert_eq!(fidelities.len(), n);
        debug_assert_eq!(divergences.len(), n);
        for k in 0..n {
            let h = &mut self.divergence_history[k];
            if h.len() == self.window {
                h.pop_front();
            }
            h.push_back(divergences[k]);
        }

        let mut outcome = QuarantineOutcome::default();
        for k in 0..n {
            if self.quarantined.contains(&k) {
                continue;
            }
            if self.rolling_sum(k) > self.threshold(fidelities[k]) {
                self.quarantined.insert(k);
                outcome.newly_quarantined.push(k);
            }
        }

        // Fidelity-recovery path.
        let recovered: Vec<usize> = self
            .quarantined
            .iter()
            .copied()
            .filter(|&k| fidelities[k] > READMISSION_FIDELITY_FACTOR * self.initial_fidelity[k])
            .collect();
        for k in recovered {
            self.readmit(k);
            outcome.readmitted.push(k);
        }

        // Minimum-active floor: refill from the lowest node id.
        let mut active = n - self.quarantined.len();
        while active < self.min_active {
            let Some(&lowest) = self.quarantined.iter().next() else {
                break;
            };
            self.readmit(lowest);
            outcome.readmitted.push(lowest);
            active += 1;
        }
        outcome.readmitted.sort_unstable();
        outcome.readmitted.dedup();
        outcome
    }

    fn readmit(&mut self, k: usize) {
        self.quarantined.remove(&k);
        self.divergence_history[k].clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(mode: AttackMode) -> AttackSpec {
        AttackSpec::with_mode(mode)
    }

    #[test]
    fn flip_transform_exact() {
        let p = ParamVector::new(vec![1.0, -2.0]);
        let mut rng = crate::rng::stream(1);
        let out = apply_attack(&p, &spec(AttackMode::Flip), 1.0, 1, &mut rng);
        assert_eq!(out.as_slice(), &[-1.05, 2.1]);
    }

    #[test]
    fn scale_transform_exact() {
        let p = ParamVector::new(vec![1.0, -2.0]);
        let mut rng = crate::rng::stream(1);
        let out = apply_attack(&p, &spec(AttackMode::Scale), 1.0, 1, &mut rng);
        assert_eq!(out.as_slice(), &[1.6, -3.2]);
    }

    #[test]
    fn gaussian_with_zero_sigma_is_identity() {
        let p = ParamVector::new(vec![0.5, 0.25, -1.0]);
        let mut rng = crate::rng::stream(1);
        let out = apply_attack(&p, &spec(AttackMode::Gaussian), 0.0, 1, &mut rng);
        assert_eq!(out, p);
    }

    #[test]
    fn adaptive_cycles_modes() {
        let s = spec(AttackMode::Adaptive);
        assert_eq!(s.active_mode(1), AttackMode::Gaussian);
        assert_eq!(s.active_mode(20), AttackMode::Gaussian);
        assert_eq!(s.active_mode(21), AttackMode::Flip);
        assert_eq!(s.active_mode(40), AttackMode::Flip);
        assert_eq!(s.active_mode(41), AttackMode::Scale);
        assert_eq!(s.active_mode(61), AttackMode::Gaussian);
    }

    #[test]
    fn untampered_always_verifies() {
        let p = ParamVector::new(vec![1.0]);
        let tag = AuthTag::new(&p, false, 0.95);
        let mut rng = crate::rng::stream(2);
        for _ in 0..1000 {
            assert!(verify_tag(&tag, &mut rng));
        }
    }

    #[test]
    fn perfect_detector_always_catches() {
        let p = ParamVector::new(vec![1.0]);
        let tag = AuthTag::new(&p, true, 1.0);
        let mut rng = crate::rng::stream(3);
        for _ in 0..100 {
            assert!(!verify_tag(&tag, &mut rng));
        }
    }

    #[test]
    fn false_negative_rate_concentrates() {
        let p = ParamVector::new(vec![1.0]);
        let tag = AuthTag::new(&p, true, 0.95);
        let mut rng = crate::rng::stream(4);
        let trials = 10_000;
        let accepted = (0..trials).filter(|_| verify_tag(&tag, &mut rng)).count();
        let rate = accepted as f64 / trials as f64;
        assert!((0.04..=0.06).contains(&rate), "rate {rate}");
    }

    #[test]
    fn trust_update_is_exact_ema() {
        let mut t = TrustState::new(1.0, 0.9).unwrap();
        t.update(false);
        assert_eq!(t.trust, 0.9 * 1.0 + 0.1 * 0.0);

        let mut t = TrustState::new(0.9, 0.9).unwrap();
        t.update(true);
        assert_eq!(t.trust, 0.9 * 0.9 + 0.1 * 1.0);
        assert_relative_eq!(t.trust, 0.91, epsilon = 1e-15);
    }

    #[test]
    fn repeated_failures_decay_geometrically() {
        let mut t = TrustState::new(1.0, 0.9).unwrap();
        for _ in 0..50 {
            t.update(false);
        }
        assert_relative_eq!(t.trust, 0.9f64.powi(50), epsilon = 1e-12);
        assert!(t.trust < 0.01);
    }

    #[test]
    fn kl_closed_form() {
        let a = ParamVector::new(vec![1.0, 0.0]);
        let b = ParamVector::new(vec![0.0, 0.0]);
        assert_eq!(kl_divergence(&a, &a, 1.0).unwrap(), 0.0);
        assert_eq!(kl_divergence(&a, &b, 1.0).unwrap(), 0.5);
        // Symmetric for the equal-covariance Gaussian family.
        assert_eq!(
            kl_divergence(&a, &b, 2.0).unwrap(),
            kl_divergence(&b, &a, 2.0).unwrap()
        );
        assert!(kl_divergence(&a, &b, 0.0).is_err());
        assert!(kl_divergence(&a, &ParamVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn zero_divergence_never_quarantines() {
        let mut q = QuarantineState::new(3, 5, 1.0, 1, vec![1.0; 3]).unwrap();
        for _ in 0..20 {
            let out = q.quarantine_step(&[0.5; 3], &[0.0; 3]);
            assert!(out.newly_quarantined.is_empty());
        }
        assert!(q.quarantined().is_empty());
    }

    #[test]
    fn rolling_sum_above_threshold_quarantines() {
        // threshold_base = 1, F = 0.5 -> threshold 2; rolling sum 2.5 trips it.
        let mut q = QuarantineState::new(2, 5, 1.0, 1, vec![1.0; 2]).unwrap();
        assert_eq!(q.threshold(0.5), 2.0);
        let out = q.quarantine_step(&[0.5, 0.5], &[2.5, 0.1]);
        assert_eq!(out.newly_quarantined, vec![0]);
        assert!(q.is_quarantined(0));
        assert!(!q.is_quarantined(1));
    }

    #[test]
    fn min_active_floor_readmits_lowest_id_first() {
        let n = 20;
        let mut q = QuarantineState::new(n, 5, 0.5, 15, vec![1.0; n]).unwrap();
        // Trip seven nodes; active drops to 13, so two must come back.
        let mut div = vec![0.0; n];
        for d in div.iter_mut().take(7) {
            *d = 10.0;
        }
        let fid = vec![0.5; n];
        let out = q.quarantine_step(&fid, &div);
        assert_eq!(out.newly_quarantined.len(), 7);
        assert_eq!(out.readmitted, vec![0, 1]);
        assert_eq!(q.quarantined().len(), 5);
        assert!(!q.is_quarantined(0));
        // Cleared history: the refilled nodes are not re-quarantined by
        // stale divergence.
        assert_eq!(q.rolling_sum(0), 0.0);
    }

    #[test]
    fn fidelity_recovery_readmits() {
        let mut q = QuarantineState::new(2, 5, 0.5, 1, vec![1.0, 1.0]).unwrap();
        q.quarantine_step(&[0.5, 0.5], &[10.0, 0.0]);
        assert!(q.is_quarantined(0));
        // Fidelity back above 0.9 * initial.
        let out = q.quarantine_step(&[0.95, 0.5], &[0.0, 0.0]);
        assert_eq!(out.readmitted, vec![0]);
        assert!(!q.is_quarantined(0));
    }

    proptest! {
        #[test]
        fn trust_stays_in_unit_interval(
            alpha in 0.01f64..0.99,
            start in 0.0f64..1.0,
            votes in proptest::collection::vec(proptest::bool::ANY, 1..200),
        ) {
            let mut t = TrustState::new(start, alpha).unwrap();
            for v in votes {
                t.update(v);
                prop_assert!((0.0..=1.0).contains(&t.trust));
            }
        }

        #[test]
        fn readmission_never_duplicates_or_overfills(
            n in 4usize..30,
            min_active in 1usize..10,
            burst in proptest::collection::vec(0.0f64..20.0, 4..30),
        ) {
            let n = n.max(burst.len());
            let mut div = burst.clone();
            div.resize(n, 0.0);
            let mut q = QuarantineState::new(n, 3, 2.0, min_active, vec![1.0; n]).unwrap();
            let out = q.quarantine_step(&vec![0.5; n], &div);
            let mut seen = std::collections::BTreeSet::new();
            for &k in &out.readmitted {
                prop_assert!(seen.insert(k), "node {k} readmitted twice");
            }
            prop_assert!(n - q.quarantined().len() <= n);
        }
    }
}
