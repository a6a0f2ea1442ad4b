use ceas::engine::Simulation;
use ceas::security::AttackSpec;
use ceas::{ExperimentConfig, Protocol};

fn main() {
    let cfg = ExperimentConfig { quarantine_threshold_base: 220.0, ..ExperimentConfig::default() };
    for seed in 1..=10u64 {
        let mut sim = Simulation::new(&cfg, seed).unwrap();
        let mut spec = AttackSpec::with_mode(cfg.attack_mode);
        spec.switch_period = 20;
        sim.set_attack(spec);
        let mut acc = Vec::new();
        for _ in 0..300 {
            acc.push(sim.run_round().unwrap().accuracy);
        }
        let f100 = acc[200..].iter().sum::<f64>() / 100.0;
        let min_late = acc[200..].iter().copied().fold(f64::INFINITY, f64::min);
        let max_late = acc[200..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let q = sim.quarantined().len();
        println!("seed {seed}: final100={f100:.3} late range [{min_late:.3},{max_late:.3}] q={q}");
    }
    // Baseline per-seed too.
    let bcfg = ExperimentConfig { protocol: Protocol::RandomBaseline, ..cfg };
    for seed in 1..=10u64 {
        let r = ceas::run_experiment(&bcfg, seed).unwrap();
        let acc: Vec<f64> = r.metrics.iter().map(|m| m.accuracy).collect();
        let f100 = acc[200..].iter().sum::<f64>() / 100.0;
        println!("base seed {seed}: final100={f100:.3}");
    }
}
