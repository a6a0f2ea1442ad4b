//! Deterministic round-based simulator for consensus-entanglement-aware
//! scheduling (CEAS) in distributed learning networks.
//!
//! The simulator models a mid-scale network of compute nodes that jointly
//! train a classifier while exchanging parameters over entanglement-enabled
//! links. It combines:
//!
//! - **Fidelity-weighted consensus**: per-node scalar stamps drive
//!   aggregation weights and row-stochastic gossip mixing matrices.
//! - **Perishable entanglement inventories**: Bell pairs age out on a
//!   coherence window; an earliest-expiring-first scheduler allocates a
//!   per-round generation budget across links.
//! - **Byzantine quarantine**: authentication-tag verification feeds trust
//!   scores, and rolling parameter-divergence sums against fidelity-dependent
//!   thresholds isolate misbehaving nodes, with re-admission paths.
//! - **BFT checkpoints**: every few rounds a verified supermajority commits
//!   a weighted global model.
//!
//! Runs are pure functions of `(config, seed)`: identical inputs produce
//! byte-identical metrics output. See the `examples/` directory for a tour
//! of each capability and the `ceas` binary for the batch interface
//! (`run`, `sweep`, `plot`, `validate`).

pub mod cli;
pub mod config;
pub mod consensus;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod inventory;
pub mod param;
pub mod plot;
pub mod report;
pub mod rng;
pub mod scheduler;
pub mod security;
pub mod sweep;
pub mod topology;
pub mod validate;

pub use config::{ExperimentConfig, GossipDepth, Protocol};
pub use engine::{run_experiment, RoundMetrics, RunResult, Simulation};
pub use error::{CeasError, Result};
pub use param::ParamVector;
