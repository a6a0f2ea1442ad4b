//! Experiment configuration: a flat `key = value` text format whose defaults
//! reproduce the reference mid-scale experiment. Unknown keys are rejected
//! so typos cannot silently fall back to defaults.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CeasError, Result};
use crate::scheduler::SchedulerPolicy;
use crate::security::AttackMode;

/// Which protocol a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Protocol {
    /// Fidelity-weighted gossip, BFT checkpoints, quarantine, EEF scheduling.
    Ceas,
    /// Uniform aggregation over a random participant subset; no fidelity
    /// weighting, no quarantine, entanglement-oblivious scheduling.
    RandomBaseline,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ceas" => Ok(Protocol::Ceas),
            "random-baseline" => Ok(Protocol::RandomBaseline),
            other => Err(CeasError::config(
                "protocol",
                format!("unknown protocol `{other}` (expected ceas or random-baseline)"),
            )),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Ceas => "ceas",
            Protocol::RandomBaseline => "random-baseline",
        }
    }
}

/// Gossip depth: automatic `ceil(log2 N)` or a fixed step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GossipDepth {
    Auto,
    Fixed(usize),
}

impl GossipDepth {
    pub fn resolve(&self, n_nodes: usize) -> usize {
        match *self {
            GossipDepth::Auto => (n_nodes.max(2) as f64).log2().ceil() as usize,
            GossipDepth::Fixed(d) => d,
        }
    }
}

/// Full experiment parameterization. Defaults reproduce the mid-scale
/// 50-node setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    pub rounds: u64,
    pub honest_fraction: f64,
    pub honest_error: f64,
    pub byz_error: f64,
    pub delta_c_honest: f64,
    pub delta_c_byz: f64,
    pub label_noise_honest: f64,
    pub label_noise_byz: f64,
    pub eval_delta_c: f64,
    pub eval_label_noise: f64,
    pub bell_budget: usize,
    pub tau_c_min: f64,
    pub tau_c_max: f64,
    pub checkpoint_period: u64,
    pub quarantine_window: usize,
    pub min_active: usize,
    pub trust_alpha: f64,
    pub tag_detection_prob: f64,
    pub learning_rate: f64,
    pub gossip_depth: GossipDepth,
    pub topology_degree: usize,
    pub p_gen: f64,
    pub protocol: Protocol,
    pub attack_mode: AttackMode,
    pub scheduler_policy: SchedulerPolicy,
    /// Base of the fidelity-dependent quarantine threshold, calibrated so
    /// honest nodes at the default error rate false-positive in under 5% of
    /// runs (see the `calibrate_threshold` example).
    pub quarantine_threshold_base: f64,
    /// Reset fidelity to its initial value on re-admission.
    pub fidelity_recovery: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_nodes: 50,
            rounds: 300,
            honest_fraction: 0.6,
            honest_error: 0.01,
            byz_error: 0.20,
            delta_c_honest: 1.4,
            delta_c_byz: 0.9,
            label_noise_honest: 0.03,
            label_noise_byz: 0.25,
            eval_delta_c: 1.6,
            eval_label_noise: 0.03,
            bell_budget: 250,
            tau_c_min: 3.0,
            tau_c_max: 6.0,
            checkpoint_period: 4,
            quarantine_window: 5,
            min_active: 15,
            trust_alpha: 0.9,
            tag_detection_prob: 0.95,
            learning_rate: 0.05,
            gossip_depth: GossipDepth::Auto,
            topology_degree: 6,
            p_gen: 0.8,
            protocol: Protocol::Ceas,
            attack_mode: AttackMode::Adaptive,
            scheduler_policy: SchedulerPolicy::Eef,
            quarantine_threshold_base: DEFAULT_THRESHOLD_BASE,
            fidelity_recovery: true,
        }
    }
}

/// Calibrated quarantine threshold base (see `examples/calibrate_threshold`).
pub const DEFAULT_THRESHOLD_BASE: f64 = 400.0;

const KEYS: &[&str] = &[
    "n_nodes",
    "rounds",
    "honest_fraction",
    "honest_error",
    "byz_error",
    "delta_c_honest",
    "delta_c_byz",
    "label_noise_honest",
    "label_noise_byz",
    "eval_delta_c",
    "eval_label_noise",
    "bell_budget",
    "tau_c_min",
    "tau_c_max",
    "checkpoint_period",
    "quarantine_window",
    "min_active",
    "trust_alpha",
    "tag_detection_prob",
    "learning_rate",
    "gossip_depth",
    "topology_degree",
    "p_gen",
    "protocol",
    "attack_mode",
    "scheduler_policy",
    "quarantine_threshold_base",
    "fidelity_recovery",
];

impl ExperimentConfig {
    /// Parses the flat `key = value` format. Blank lines and `#` comments
    /// are ignored; unknown or duplicate keys are rejected by name.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CeasError::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(CeasError::config(key, "unknown configuration key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(CeasError::config(key, "duplicate configuration key"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| CeasError::config(key, format!("cannot parse `{value}`")))
        }
        match key {
            "n_nodes" => self.n_nodes = num(key, value)?,
            "rounds" => self.rounds = num(key, value)?,
            "honest_fraction" => self.honest_fraction = num(key, value)?,
            "honest_error" => self.honest_error = num(key, value)?,
            "byz_error" => self.byz_error = num(key, value)?,
            "delta_c_honest" => self.delta_c_honest = num(key, value)?,
            "delta_c_byz" => self.delta_c_byz = num(key, value)?,
            "label_noise_honest" => self.label_noise_honest = num(key, value)?,
            "label_noise_byz" => self.label_noise_byz = num(key, value)?,
            "eval_delta_c" => self.eval_delta_c = num(key, value)?,
            "eval_label_noise" => self.eval_label_noise = num(key, value)?,
            "bell_budget" => self.bell_budget = num(key, value)?,
            "tau_c_min" => self.tau_c_min = num(key, value)?,
            "tau_c_max" => self.tau_c_max = num(key, value)?,
            "checkpoint_period" => self.checkpoint_period = num(key, value)?,
            "quarantine_window" => self.quarantine_window = num(key, value)?,
            "min_active" => self.min_active = num(key, value)?,
            "trust_alpha" => self.trust_alpha = num(key, value)?,
            "tag_detection_prob" => self.tag_detection_prob = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "gossip_depth" => {
                self.gossip_depth = if value == "auto" {
                    GossipDepth::Auto
                } else {
                    GossipDepth::Fixed(num(key, value)?)
                }
            }
            "topology_degree" => self.topology_degree = num(key, value)?,
            "p_gen" => self.p_gen = num(key, value)?,
            "protocol" => self.protocol = Protocol::parse(value)?,
            "attack_mode" => self.attack_mode = AttackMode::parse(value)?,
            "scheduler_policy" => self.scheduler_policy = SchedulerPolicy::parse(value)?,
            "quarantine_threshold_base" => self.quarantine_threshold_base = num(key, value)?,
            "fidelity_recovery" => self.fidelity_recovery = num(key, value)?,
            _ => unreachable!("key list is checked before set"),
        }
        Ok(())
    }

    /// Canonical serialization; parses back to an identical configuration.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("n_nodes", self.n_nodes.to_string());
        put("rounds", self.rounds.to_string());
        put("honest_fraction", self.honest_fraction.to_string());
        put("honest_error", self.honest_error.to_string());
        put("byz_error", self.byz_error.to_string());
        put("delta_c_honest", self.delta_c_honest.to_string());
        put("delta_c_byz", self.delta_c_byz.to_string());
        put("label_noise_honest", self.label_noise_honest.to_string());
        put("label_noise_byz", self.label_noise_byz.to_string());
        put("eval_delta_c", self.eval_delta_c.to_string());
        put("eval_label_noise", self.eval_label_noise.to_string());
        put("bell_budget", self.bell_budget.to_string());
        put("tau_c_min", self.tau_c_min.to_string());
        put("tau_c_max", self.tau_c_max.to_string());
        put("checkpoint_period", self.checkpoint_period.to_string());
        put("quarantine_window", self.quarantine_window.to_string());
        put("min_active", self.min_active.to_string());
        put("trust_alpha", self.trust_alpha.to_string());
        put("tag_detection_prob", self.tag_detection_prob.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put(
            "gossip_depth",
            match self.gossip_depth {
                GossipDepth::Auto => "auto".to_string(),
                GossipDepth::Fixed(d) => d.to_string(),
            },
        );
        put("topology_degree", self.topology_degree.to_string());
        put("p_gen", self.p_gen.to_string());
        put("protocol", self.protocol.as_str().to_string());
        put("attack_mode", self.attack_mode.as_str().to_string());
        put("scheduler_policy", self.scheduler_policy.as_str().to_string());
        put(
            "quarantine_threshold_base",
            self.quarantine_threshold_base.to_string(),
        );
        put("fidelity_recovery", self.fidelity_recovery.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        fn range(key: &str, ok: bool, want: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CeasError::config(key, format!("must be {want}")))
            }
        }
        range("n_nodes", self.n_nodes >= 2, "at least 2")?;
        range(
            "honest_fraction",
            self.honest_fraction > 0.0 && self.honest_fraction <= 1.0,
            "in (0, 1]",
        )?;
        range(
            "honest_error",
            (0.0..=1.0).contains(&self.honest_error),
            "in [0, 1]",
        )?;
        range("byz_error", (0.0..=1.0).contains(&self.byz_error), "in [0, 1]")?;
        range("delta_c_honest", self.delta_c_honest > 0.0, "positive")?;
        range("delta_c_byz", self.delta_c_byz > 0.0, "positive")?;
        range(
            "label_noise_honest",
            (0.0..=0.5).contains(&self.label_noise_honest),
            "in [0, 0.5]",
        )?;
        range(
            "label_noise_byz",
            (0.0..=0.5).contains(&self.label_noise_byz),
            "in [0, 0.5]",
        )?;
        range("eval_delta_c", self.eval_delta_c > 0.0, "positive")?;
        range(
            "eval_label_noise",
            (0.0..=0.5).contains(&self.eval_label_noise),
            "in [0, 0.5]",
        )?;
        range("tau_c_min", self.tau_c_min > 0.0, "positive")?;
        range(
            "tau_c_max",
            self.tau_c_max >= self.tau_c_min,
            "at least tau_c_min",
        )?;
        range("checkpoint_period", self.checkpoint_period >= 1, "at least 1")?;
        range("quarantine_window", self.quarantine_window >= 1, "at least 1")?;
        range(
            "trust_alpha",
            self.trust_alpha > 0.0 && self.trust_alpha < 1.0,
            "in (0, 1)",
        )?;
        range(
            "tag_detection_prob",
            (0.0..=1.0).contains(&self.tag_detection_prob),
            "in [0, 1]",
        )?;
        range("learning_rate", self.learning_rate > 0.0, "positive")?;
        if let GossipDepth::Fixed(d) = self.gossip_depth {
            range("gossip_depth", d >= 1, "at least 1 (or `auto`)")?;
        }
        range(
            "topology_degree",
            self.topology_degree >= 2 && self.topology_degree < self.n_nodes,
            "at least 2 and below n_nodes",
        )?;
        range(
            "topology_degree",
            self.n_nodes * self.topology_degree % 2 == 0,
            "such that n_nodes * topology_degree is even",
        )?;
        range("p_gen", (0.0..=1.0).contains(&self.p_gen), "in [0, 1]")?;
        range(
            "quarantine_threshold_base",
            self.quarantine_threshold_base > 0.0,
            "positive",
        )?;
        Ok(())
    }

    /// Honest node count `ceil(honest_fraction * n_nodes)`.
    pub fn n_honest(&self) -> usize {
        ((self.honest_fraction * self.n_nodes as f64).ceil() as usize).min(self.n_nodes)
    }

    /// Design bound on Byzantine nodes used for quorum sizing:
    /// `floor(N/3) - 1`, never below zero.
    pub fn byzantine_design_bound(&self) -> usize {
        (self.n_nodes / 3).saturating_sub(1)
    }

    /// Checkpoint quorum `2f + 1` under the design bound.
    pub fn quorum(&self) -> usize {
        2 * self.byzantine_design_bound() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_nodes, 50);
        assert_eq!(c.rounds, 300);
        assert_eq!(c.n_honest(), 30);
        assert_eq!(c.bell_budget, 250);
        assert_eq!(c.checkpoint_period, 4);
        assert_eq!(c.gossip_depth.resolve(c.n_nodes), 6);
        assert_eq!(c.quorum(), 31);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn round_trip_is_identity() {
        let c = ExperimentConfig::default();
        let text = c.serialize();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn partial_files_inherit_defaults() {
        let c = ExperimentConfig::parse("rounds = 10\nprotocol = random-baseline\n").unwrap();
        assert_eq!(c.rounds, 10);
        assert_eq!(c.protocol, Protocol::RandomBaseline);
        assert_eq!(c.n_nodes, 50);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = ExperimentConfig::parse("n_node = 50\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_node"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        assert!(ExperimentConfig::parse("rounds = 10\nrounds = 20\n").is_err());
    }

    #[test]
    fn out_of_range_value_names_the_key() {
        let err = ExperimentConfig::parse("trust_alpha = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("trust_alpha"));
        let err = ExperimentConfig::parse("p_gen = -0.1\n").unwrap_err();
        assert!(err.to_string().contains("p_gen"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let c = ExperimentConfig::parse("# header\n\nrounds = 5 # trailing\n").unwrap();
        assert_eq!(c.rounds, 5);
    }

    #[test]
    fn gossip_depth_modes() {
        assert_eq!(GossipDepth::Auto.resolve(50), 6);
        assert_eq!(GossipDepth::Auto.resolve(8), 3);
        assert_eq!(GossipDepth::Fixed(2).resolve(50), 2);
        let c = ExperimentConfig::parse("gossip_depth = 4\n").unwrap();
        assert_eq!(c.gossip_depth, GossipDepth::Fixed(4));
    }
}
