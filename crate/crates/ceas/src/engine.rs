//! The per-round protocol state machine.
//!
//! Round order: expire/generate pairs per scheduler plan, local training
//! (Byzantine nodes then transform their parameters), fidelity decay and
//! stamping, gossip over entangled edges (each edge-use consumes one pair),
//! periodic BFT checkpoint, quarantine, metrics.
//!
//! Everything downstream of `(config, seed)` is deterministic: node order
//! is fixed, collections are ordered, and a single ChaCha stream is
//! consumed in a fixed sequence.

use std::collections::BTreeSet;

use rand::Rng;

use crate::config::{ExperimentConfig, Protocol};
use crate::consensus::{aggregate, normalize_weights, step_matrix, FidelityStamp};
use crate::datagen::{
    evaluate_accuracy, generate_dataset, local_gradient, DataSpec, Dataset, GradientNoiseSpec,
    LocalModel, NoiseModel,
};
use crate::error::{CeasError, Result};
use crate::inventory::{LifetimeModel, LinkInventory, PairSelector};
use crate::param::ParamVector;
use crate::rng::{stream, SimRng};
use crate::scheduler::{plan_round, SchedulerPolicy, SchedulerState};
use crate::security::{
    apply_attack, kl_divergence, verify_tag, AttackSpec, AuthTag, QuarantineState, TrustState,
    READMISSION_TRUST, TRUST_FLOOR,
};
use crate::topology::Topology;

/// Feature dimension of every local dataset.
pub const DATA_DIM: usize = 8;
/// Samples per node-local dataset.
pub const SAMPLES_PER_NODE: usize = 160;
/// Size of the held-out evaluation set.
pub const EVAL_SAMPLES: usize = 2000;
/// Norm of the systematic gradient bias at error rate 1.
pub const NOISE_BIAS_SCALE: f64 = 0.5;
/// Per-component gradient noise variance at error rate 1.
pub const NOISE_VARIANCE_SCALE: f64 = 1.0;
/// Fidelity never decays below this floor.
pub const FIDELITY_FLOOR: f64 = 1e-6;

/// Honest or Byzantine behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Honest,
    Byzantine,
}

/// One node's full state.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub role: Role,
    pub model: LocalModel,
    pub dataset: Dataset,
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub trust: TrustState,
    pub quarantined: bool,
    pub noise: NoiseModel,
    /// Hardware coherence time driving this node's fidelity decay.
    pub tau_c: f64,
}

/// Outcome of one checkpoint round.
#[derive(Debug, Clone)]
pub struct CheckpointRecord {
    pub round: u64,
    pub committed: bool,
    pub global: Option<ParamVector>,
    pub signers: Vec<usize>,
    /// Verification outcome per participating node.
    pub verifications: Vec<(usize, bool)>,
}

/// Per-round metric record.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub accuracy: f64,
    /// Cumulative consumed/generated over all links.
    pub utilisation: f64,
    /// Cumulative fraction of Byzantine nodes quarantined at least once.
    pub isolation_rate: f64,
    pub active_nodes: usize,
    pub mean_fidelity: f64,
    pub checkpoint_committed: bool,
}

/// Safety counters accumulated over a run; all must stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditReport {
    /// Committed checkpoints that included a failed-verification signer.
    pub checkpoint_signer_violations: u64,
    /// Nonzero aggregation or mixing weight observed for a quarantined node.
    pub quarantined_weight_violations: u64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.checkpoint_signer_violations == 0 && self.quarantined_weight_violations == 0
    }
}

/// Complete trace of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub protocol: Protocol,
    pub metrics: Vec<RoundMetrics>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub audit: AuditReport,
}

/// One decay step `f * (1 - gamma)` with `gamma(tau_c) = 1 - e^{-1/tau_c}`,
/// clamped below at `FIDELITY_FLOOR`.
pub fn decay_fidelity(f: f64, tau_c: f64) -> Result<f64> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(CeasError::domain("fidelity must lie in (0, 1]"));
    }
    if tau_c <= 0.0 {
        return Err(CeasError::domain("tau_c must be positive"));
    }
    Ok((f * (-1.0 / tau_c).exp()).max(FIDELITY_FLOOR))
}

/// Deterministic round-based simulation of one experiment.
pub struct Simulation {
    cfg: ExperimentConfig,
    seed: u64,
    rng: SimRng,
    topology: Topology,
    nodes: Vec<NodeState>,
    links: Vec<LinkInventory>,
    quarantine: QuarantineState,
    eval_set: Dataset,
    global_model: ParamVector,
    depth: usize,
    attack: AttackSpec,
    round: u64,
    ever_quarantined_byz: BTreeSet<usize>,
    checkpoints: Vec<CheckpointRecord>,
    audit: AuditReport,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(seed);
        let n = cfg.n_nodes;

        let topology = Topology::random_regular(n, cfg.topology_degree, &mut rng)?;

        // Shuffled role assignment: the first ceil(honest_fraction * N) ids
        // of the shuffle are honest.
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut roles = vec![Role::Byzantine; n];
        for &id in order.iter().take(cfg.n_honest()) {
            roles[id] = Role::Honest;
        }

        let mut nodes = Vec::with_capacity(n);
        for (id, &role) in roles.iter().enumerate() {
            let (delta_c, label_noise, error_rate) = match role {
                Role::Honest => (cfg.delta_c_honest, cfg.label_noise_honest, cfg.honest_error),
                Role::Byzantine => (cfg.delta_c_byz, cfg.label_noise_byz, cfg.byz_error),
            };
            let dataset = generate_dataset(&DataSpec {
                n_samples: SAMPLES_PER_NODE,
                dim: DATA_DIM,
                class_separation: delta_c,
                label_noise,
                seed: rng.random(),
            })?;
            let noise = GradientNoiseSpec {
                bias_scale: NOISE_BIAS_SCALE,
                variance_scale: NOISE_VARIANCE_SCALE,
                error_rate,
            }
            .realize(DATA_DIM + 1, &mut rng)?;
            let fidelity = rng.random_range(0.9..=1.0);
            // Shared memory-coherence budget: the midpoint of the pair
            // window. Equal decay keeps stamp ratios at their initial
            // spread instead of diverging geometrically.
            let tau_c = 0.5 * (cfg.tau_c_min + cfg.tau_c_max);
            nodes.push(NodeState {
                id,
                role,
                model: LocalModel::zeros(DATA_DIM),
                dataset,
                fidelity,
                initial_fidelity: fidelity,
                trust: TrustState::new(1.0, cfg.trust_alpha)?,
                quarantined: false,
                noise,
                tau_c,
            });
        }

        let eval_set = generate_dataset(&DataSpec {
            n_samples: EVAL_SAMPLES,
            dim: DATA_DIM,
            class_separation: cfg.eval_delta_c,
            label_noise: cfg.eval_label_noise,
            seed: rng.random(),
        })?;

        let decay_rate = 2.0 / (cfg.tau_c_min + cfg.tau_c_max);
        let links: Vec<LinkInventory> = topology
            .edges()
            .iter()
            .map(|&e| LinkInventory::new(e, decay_rate))
            .collect::<Result<_>>()?;

        let quarantine = QuarantineState::new(
            n,
            cfg.quarantine_window,
            cfg.quarantine_threshold_base,
            cfg.min_active,
            nodes.iter().map(|nd| nd.initial_fidelity).collect(),
        )?;

        Ok(Simulation {
            depth: cfg.gossip_depth.resolve(n),
            attack: AttackSpec::with_mode(cfg.attack_mode),
            seed,
            rng,
            topology,
            nodes,
            links,
            quarantine,
            eval_set,
            global_model: ParamVector::zeros(DATA_DIM + 1),
            round: 0,
            ever_quarantined_byz: BTreeSet::new(),
            checkpoints: Vec::new(),
            audit: AuditReport::default(),
            cfg: cfg.clone(),
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkInventory] {
        &self.links
    }

    pub fn quarantined(&self) -> &BTreeSet<usize> {
        self.quarantine.quarantined()
    }

    /// Current rolling divergence sum per node (calibration hook).
    pub fn rolling_divergences(&self) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|k| self.quarantine.rolling_sum(k))
            .collect()
    }

    /// Overrides attack parameters (factors, switch period) before running.
    pub fn set_attack(&mut self, attack: AttackSpec) {
        self.attack = attack;
    }

    /// Nodes excluded from aggregation and mixing: quarantined, or trust
    /// below the floor. The baseline excludes nobody.
    fn excluded(&self) -> BTreeSet<usize> {
        match self.cfg.protocol {
            Protocol::RandomBaseline => BTreeSet::new(),
            Protocol::Ceas => self
                .nodes
                .iter()
                .filter(|nd| nd.quarantined || nd.trust.trust < TRUST_FLOOR)
                .map(|nd| nd.id)
                .collect(),
        }
    }

    fn stamps(&self) -> Vec<FidelityStamp> {
        match self.cfg.protocol {
            Protocol::RandomBaseline => {
                (0..self.nodes.len()).map(|k| FidelityStamp::new(k, 1.0)).collect()
            }
            Protocol::Ceas => self
                .nodes
                .iter()
                .map(|nd| FidelityStamp::new(nd.id, nd.fidelity))
                .collect(),
        }
    }

    /// Pooled per-component std of honest parameter vectors.
    fn honest_sigma(&self) -> f64 {
        self.honest_variance(|nd| nd.role == Role::Honest).sqrt()
    }

    /// Pooled per-component variance over nodes passing `filter`.
    fn honest_variance(&self, filter: impl Fn(&NodeState) -> bool) -> f64 {
        let members: Vec<&NodeState> = self.nodes.iter().filter(|nd| filter(nd)).collect();
        if members.is_empty() {
            return 0.0;
        }
        let dim = DATA_DIM + 1;
        let mut mean = vec![0.0; dim];
        for nd in &members {
            for (m, v) in mean.iter_mut().zip(nd.model.params.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= members.len() as f64;
        }
        let mut ss = 0.0;
        for nd in &members {
            for (m, v) in mean.iter().zip(nd.model.params.iter()) {
                let d = v - m;
                ss += d * d;
            }
        }
        ss / (members.len() * dim) as f64
    }

    fn current_params(&self) -> Vec<ParamVector> {
        self.nodes.iter().map(|nd| nd.model.params.clone()).collect()
    }

    /// Coordinate-wise median over active submissions: the divergence
    /// monitor's global reference. A minority cohort cannot drag it outside
    /// the honest cluster, which a weighted mean cannot guarantee.
    fn divergence_reference(&self, submitted: &[ParamVector]) -> ParamVector {
        let active: Vec<&ParamVector> = self
            .nodes
            .iter()
            .filter(|nd| !nd.quarantined)
            .map(|nd| &submitted[nd.id])
            .collect();
        let dim = DATA_DIM + 1;
        let mut out = vec![0.0; dim];
        let mut column = Vec::with_capacity(active.len());
        for (d, slot) in out.iter_mut().enumerate() {
            column.clear();
            column.extend(active.iter().map(|p| p[d]));
            column.sort_by(|a, b| a.partial_cmp(b).expect("finite parameters"));
            let mid = column.len() / 2;
            *slot = if column.len() % 2 == 1 {
                column[mid]
            } else {
                0.5 * (column[mid - 1] + column[mid])
            };
        }
        ParamVector::new(out)
    }

    /// Stamp-weighted estimate over non-excluded nodes; the audit checks
    /// quarantined weights stay zero.
    fn weighted_estimate(&mut self, excluded: &BTreeSet<usize>) -> Result<ParamVector> {
        let stamps = self.stamps();
        let weights = normalize_weights(&stamps, excluded).map_err(|e| match e {
            CeasError::ConsensusStall { .. } => CeasError::ConsensusStall { round: self.round },
            other => other,
        })?;
        for nd in &self.nodes {
            if nd.quarantined && weights.get(nd.id) != 0.0 {
                self.audit.quarantined_weight_violations += 1;
            }
        }
        aggregate(&self.current_params(), &weights)
    }

    /// Executes one round and returns its metrics.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        self.round += 1;
        let t = self.round;
        let n = self.nodes.len();
        let excluded = self.excluded();

        // (1) Inventory: expire, plan, generate.
        for link in &mut self.links {
            link.age_and_expire(t);
        }
        let demand: Vec<usize> = self
            .topology
            .edges()
            .iter()
            .map(|&(a, b)| {
                if excluded.contains(&a) || excluded.contains(&b) {
                    0
                } else {
                    self.depth
                }
            })
            .collect();
        let sched_state = SchedulerState {
            usable: self.links.iter().map(|l| l.usable_count()).collect(),
            decay_rates: self.links.iter().map(|l| l.decay_rate).collect(),
            demand,
            round: t,
        };
        let policy = match self.cfg.protocol {
            Protocol::Ceas => self.cfg.scheduler_policy,
            Protocol::RandomBaseline => SchedulerPolicy::Random,
        };
        let plan = plan_round(&sched_state, self.cfg.bell_budget, policy, &mut self.rng)?;
        let lifetime = LifetimeModel::Uniform {
            min: self.cfg.tau_c_min,
            max: self.cfg.tau_c_max,
        };
        for (l, link) in self.links.iter_mut().enumerate() {
            link.generate_pairs(plan.attempts[l], self.cfg.p_gen, lifetime, t, &mut self.rng)?;
        }

        // (2) Local steps; Byzantine nodes then transform their parameters.
        for k in 0..n {
            let node = &mut self.nodes[k];
            let grad = local_gradient(&node.model, &node.dataset, &node.noise, &mut self.rng)?;
            node.model.params.axpy(-self.cfg.learning_rate, &grad)?;
        }
        let sigma_w = self.honest_sigma();
        for k in 0..n {
            if self.nodes[k].role == Role::Byzantine {
                let attacked =
                    apply_attack(&self.nodes[k].model.params, &self.attack, sigma_w, t, &mut self.rng);
                self.nodes[k].model.params = attacked;
            }
        }

        // (3) Fidelity decay and stamps.
        for node in &mut self.nodes {
            node.fidelity = decay_fidelity(node.fidelity, node.tau_c)?;
        }
        let stamps = self.stamps();

        // (4) Divergence of submitted parameters against the monitor's
        // global reference, for the quarantine step later this round.
        let submitted = self.current_params();
        let divergences = if self.cfg.protocol == Protocol::Ceas {
            let reference = self.divergence_reference(&submitted);
            let sigma_sq = self
                .honest_variance(|nd| nd.role == Role::Honest && !nd.quarantined)
                .max(1e-12);
            submitted
                .iter()
                .map(|p| kl_divergence(p, &reference, sigma_sq))
                .collect::<Result<Vec<f64>>>()?
        } else {
            vec![0.0; n]
        };

        // (5) Gossip over entangled edges; every edge-use consumes a pair.
        // Byzantine senders hold their transformed vector for the whole
        // round, so the tampered value keeps re-entering each step.
        let selector = match self.cfg.protocol {
            Protocol::Ceas => PairSelector::EarliestExpiring,
            Protocol::RandomBaseline => PairSelector::Random,
        };
        let anchors: Vec<Option<ParamVector>> = self
            .nodes
            .iter()
            .map(|nd| {
                (nd.role == Role::Byzantine && !excluded.contains(&nd.id))
                    .then(|| nd.model.params.clone())
            })
            .collect();
        let mut mixed = submitted;
        for _ in 0..self.depth {
            let mut surviving = Vec::new();
            for (l, &(a, b)) in self.topology.edges().iter().enumerate() {
                if excluded.contains(&a) || excluded.contains(&b) {
                    continue;
                }
                if self.links[l].consume(selector, t, &mut self.rng).is_some() {
                    surviving.push((a, b));
                }
            }
            let w = step_matrix(n, &surviving, &stamps, &excluded, t)?;
            for nd in &self.nodes {
                if nd.quarantined {
                    for k in 0..n {
                        if k != nd.id && w.entry(k, nd.id) != 0.0 {
                            self.audit.quarantined_weight_violations += 1;
                        }
                    }
                }
            }
            mixed = w.apply(&mixed)?;
            for (k, anchor) in anchors.iter().enumerate() {
                if let Some(a) = anchor {
                    mixed[k] = a.clone();
                }
            }
        }
        for (node, p) in self.nodes.iter_mut().zip(mixed) {
            node.model.params = p;
        }

        // (6) BFT checkpoint.
        let mut committed = false;
        let mut baseline_subset: Vec<usize> = Vec::new();
        if self.cfg.protocol == Protocol::RandomBaseline {
            // Uniform participant subset, redrawn every round; on checkpoint
            // rounds its mean is committed and installed everywhere.
            let subset_size = n.div_ceil(2);
            baseline_subset = rand::seq::index::sample(&mut self.rng, n, subset_size).into_vec();
            baseline_subset.sort_unstable();
        }
        if t % self.cfg.checkpoint_period == 0 {
            match self.cfg.protocol {
                Protocol::Ceas => committed = self.ceas_checkpoint(t)?,
                Protocol::RandomBaseline => {
                    let params = self.current_params();
                    let subset: Vec<ParamVector> = baseline_subset
                        .iter()
                        .map(|&k| params[k].clone())
                        .collect();
                    let global = crate::param::mean_vector(&subset)?;
                    for node in &mut self.nodes {
                        node.model.params = global.clone();
                    }
                    self.checkpoints.push(CheckpointRecord {
                        round: t,
                        committed: true,
                        global: Some(global.clone()),
                        signers: baseline_subset.clone(),
                        verifications: Vec::new(),
                    });
                    self.global_model = global;
                    committed = true;
                }
            }
        }

        // (7) Quarantine update.
        if self.cfg.protocol == Protocol::Ceas {
            let fidelities: Vec<f64> = self.nodes.iter().map(|nd| nd.fidelity).collect();
            let outcome = self.quarantine.quarantine_step(&fidelities, &divergences);
            for &k in &outcome.newly_quarantined {
                self.nodes[k].quarantined = true;
                if self.nodes[k].role == Role::Byzantine {
                    self.ever_quarantined_byz.insert(k);
                }
            }
            for &k in &outcome.readmitted {
                self.nodes[k].quarantined = false;
                self.nodes[k].trust.reset(READMISSION_TRUST);
                if self.cfg.fidelity_recovery {
                    self.nodes[k].fidelity = self.nodes[k].initial_fidelity;
                }
            }
        }

        // (8) Metrics.
        let estimate = match self.cfg.protocol {
            Protocol::Ceas => {
                if committed {
                    self.global_model.clone()
                } else {
                    let excluded_now = self.excluded();
                    self.weighted_estimate(&excluded_now)?
                }
            }
            Protocol::RandomBaseline => {
                let params = self.current_params();
                let subset: Vec<ParamVector> = baseline_subset
                    .iter()
                    .map(|&k| params[k].clone())
                    .collect();
                crate::param::mean_vector(&subset)?
            }
        };
        let accuracy = evaluate_accuracy(&LocalModel::from_params(estimate), &self.eval_set)?;
        let n_byz = self.nodes.iter().filter(|nd| nd.role == Role::Byzantine).count();
        let isolation_rate = if n_byz == 0 {
            0.0
        } else {
            self.ever_quarantined_byz.len() as f64 / n_byz as f64
        };
        let active_nodes = n - self.quarantine.quarantined().len();
        let active_fid: Vec<f64> = self
            .nodes
            .iter()
            .filter(|nd| !nd.quarantined)
            .map(|nd| nd.fidelity)
            .collect();
        let mean_fidelity = if active_fid.is_empty() {
            0.0
        } else {
            active_fid.iter().sum::<f64>() / active_fid.len() as f64
        };
        Ok(RoundMetrics {
            round: t,
            accuracy,
            utilisation: crate::scheduler::utilisation(&self.links).unwrap_or(0.0),
            isolation_rate,
            active_nodes,
            mean_fidelity,
            checkpoint_committed: committed,
        })
    }

    /// Verify tags, update trust, and commit the stamp-weighted global model
    /// when at least `2f + 1` active nodes verified.
    fn ceas_checkpoint(&mut self, t: u64) -> Result<bool> {
        let n = self.nodes.len();
        let mut verifications = Vec::new();
        let mut signers = Vec::new();
        for k in 0..n {
            if self.nodes[k].quarantined {
                continue;
            }
            let tag = AuthTag::new(
                &self.nodes[k].model.params,
                self.nodes[k].role == Role::Byzantine,
                self.cfg.tag_detection_prob,
            );
            let v = verify_tag(&tag, &mut self.rng);
            verifications.push((k, v));
            self.nodes[k].trust.update(v);
            if v {
                signers.push(k);
            }
        }

        let quorum = self.cfg.quorum();
        let mut committed = false;
        let mut global = None;
        if signers.len() >= quorum {
            // Weight zero for everyone outside the signer set, plus the
            // trust-floored; on a stall the checkpoint simply fails.
            let mut agg_excluded: BTreeSet<usize> = (0..n).collect();
            for &s in &signers {
                if self.nodes[s].trust.trust >= TRUST_FLOOR {
                    agg_excluded.remove(&s);
                }
            }
            if agg_excluded.len() < n {
                let committed_model = self.weighted_estimate(&agg_excluded)?;
                for node in &mut self.nodes {
                    if !node.quarantined {
                        node.model.params = committed_model.clone();
                    }
                }
                self.global_model = committed_model.clone();
                global = Some(committed_model);
                committed = true;
            }
        }

        if committed {
            let failed: BTreeSet<usize> = verifications
                .iter()
                .filter(|(_, v)| !v)
                .map(|(k, _)| *k)
                .collect();
            if signers.iter().any(|s| failed.contains(s)) {
                self.audit.checkpoint_signer_violations += 1;
            }
        }
        self.checkpoints.push(CheckpointRecord {
            round: t,
            committed,
            global,
            signers,
            verifications,
        });
        Ok(committed)
    }

    /// Runs the configured number of rounds and returns the full trace.
    pub fn run(mut self) -> Result<RunResult> {
        let mut metrics = Vec::with_capacity(self.cfg.rounds as usize);
        for _ in 0..self.cfg.rounds {
            metrics.push(self.run_round()?);
        }
        Ok(RunResult {
            seed: self.seed,
            protocol: self.cfg.protocol,
            metrics,
            checkpoints: self.checkpoints,
            audit: self.audit,
        })
    }
}

/// Builds and runs one experiment; the trace is a pure function of
/// `(config, seed)`.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    Simulation::new(config, seed)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_nodes: 12,
            rounds: 20,
            topology_degree: 4,
            min_active: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn decay_closed_form() {
        let f = decay_fidelity(1.0, 4.0).unwrap();
        assert_relative_eq!(f, (-0.25f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(f, 0.7788, epsilon = 1e-4);
        assert!(decay_fidelity(0.0, 4.0).is_err());
        assert!(decay_fidelity(0.5, 0.0).is_err());
    }

    #[test]
    fn decay_vanishes_for_long_coherence() {
        let f = decay_fidelity(0.8, 1e12).unwrap();
        assert_relative_eq!(f, 0.8, epsilon = 1e-9);
    }

    #[test]
    fn decay_telescopes_to_exponential() {
        // f_t = f0 * e^{-t / tau_c} for constant tau_c, above the floor.
        let tau = 4.0;
        let f0 = 0.97;
        let mut f = f0;
        for t in 1..=50u32 {
            f = decay_fidelity(f, tau).unwrap();
            let closed = f0 * (-(t as f64) / tau).exp();
            if closed > FIDELITY_FLOOR * 2.0 {
                assert!((f - closed).abs() < 1e-9, "t={t}: {f} vs {closed}");
            }
        }
    }

    #[test]
    fn role_split_matches_fraction() {
        let sim = Simulation::new(&ExperimentConfig::default(), 1).unwrap();
        let honest = sim.nodes().iter().filter(|n| n.role == Role::Honest).count();
        assert_eq!(honest, 30);
        assert_eq!(sim.nodes().len() - honest, 20);
    }

    #[test]
    fn zero_rounds_is_an_empty_trace() {
        let cfg = ExperimentConfig {
            rounds: 0,
            ..small_config()
        };
        let result = run_experiment(&cfg, 3).unwrap();
        assert!(result.metrics.is_empty());
        assert!(result.checkpoints.is_empty());
    }

    #[test]
    fn checkpoint_rounds_follow_the_period() {
        let cfg = ExperimentConfig {
            rounds: 17,
            ..small_config()
        };
        let result = run_experiment(&cfg, 5).unwrap();
        let rounds: Vec<u64> = result.checkpoints.iter().map(|c| c.round).collect();
        assert_eq!(rounds, vec![4, 8, 12, 16]);
    }

    #[test]
    fn identical_seed_identical_trace() {
        let cfg = small_config();
        let a = run_experiment(&cfg, 9).unwrap();
        let b = run_experiment(&cfg, 9).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn clean_run_improves_accuracy() {
        // No Byzantine nodes, no gradient noise, effectively no decay.
        let cfg = ExperimentConfig {
            n_nodes: 12,
            rounds: 50,
            topology_degree: 4,
            honest_fraction: 1.0,
            honest_error: 0.0,
            tau_c_min: 1e9,
            tau_c_max: 1e9,
            min_active: 3,
            ..ExperimentConfig::default()
        };
        let result = run_experiment(&cfg, 11).unwrap();
        let early = result.metrics[2].accuracy;
        let late = result.metrics.last().unwrap().accuracy;
        assert!(late > 0.7, "late accuracy {late}");
        assert!(late >= early - 0.02, "accuracy regressed: {early} -> {late}");
        assert!(result.audit.is_clean());
    }

    #[test]
    fn baseline_runs_and_never_isolates() {
        let cfg = ExperimentConfig {
            protocol: Protocol::RandomBaseline,
            ..small_config()
        };
        let result = run_experiment(&cfg, 13).unwrap();
        assert!(result.metrics.iter().all(|m| m.isolation_rate == 0.0));
        assert!(result.metrics.iter().all(|m| m.active_nodes == 12));
        // Baseline checkpoints always commit.
        assert!(result.checkpoints.iter().all(|c| c.committed));
    }

    #[test]
    fn liveness_under_design_bound() {
        // 70% honest keeps the true Byzantine count under floor(N/3); every
        // checkpoint must reach quorum (allowing rare false positives).
        let cfg = ExperimentConfig {
            honest_fraction: 0.7,
            rounds: 60,
            ..ExperimentConfig::default()
        };
        let mut committed = 0usize;
        let mut total = 0usize;
        for seed in 1..=10u64 {
            let result = run_experiment(&cfg, seed).unwrap();
            total += result.checkpoints.len();
            committed += result.checkpoints.iter().filter(|c| c.committed).count();
            assert!(result.audit.is_clean());
        }
        assert!(
            committed as f64 >= 0.95 * total as f64,
            "only {committed}/{total} checkpoints committed"
        );
    }

    #[test]
    fn audit_is_clean_under_attack() {
        let result = run_experiment(&small_config(), 17).unwrap();
        assert!(result.audit.is_clean());
        for c in &result.checkpoints {
            if c.committed {
                let failed: Vec<usize> = c
                    .verifications
                    .iter()
                    .filter(|(_, v)| !v)
                    .map(|(k, _)| *k)
                    .collect();
                for s in &c.signers {
                    assert!(!failed.contains(s));
                }
            }
        }
    }

    #[test]
    fn conservation_holds_at_end_of_run() {
        let cfg = small_config();
        let sim = {
            let mut s = Simulation::new(&cfg, 19).unwrap();
            for _ in 0..cfg.rounds {
                s.run_round().unwrap();
            }
            s
        };
        for link in sim.links() {
            assert!(link.conservation_holds());
        }
    }
}
