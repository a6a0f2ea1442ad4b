//! Per-link pools of perishable Bell pairs.
//!
//! Pairs carry a creation round and a lifetime; a pair is usable at round `t`
//! iff `created_at + coherence_time > t` and it has not been consumed.
//! Lifetimes are either drawn uniformly from a coherence window (the main
//! experiment) or exponentially (the mode used to validate the expected
//! inventory recursion).

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{CeasError, Result};

/// One entangled pair held in quantum memory.
#[derive(Debug, Clone, PartialEq)]
pub struct BellPair {
    pub created_at: u64,
    pub coherence_time: f64,
    pub consumed: bool,
}

impl BellPair {
    pub fn usable_at(&self, now: u64) -> bool {
        !self.consumed && self.created_at as f64 + self.coherence_time > now as f64
    }

    /// Remaining lifetime `max(0, created_at + coherence_time - now)`.
    pub fn remaining(&self, now: u64) -> f64 {
        (self.created_at as f64 + self.coherence_time - now as f64).max(0.0)
    }
}

/// How fresh pairs receive their lifetimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifetimeModel {
    /// Deterministic lifetime drawn uniformly from `[min, max]` rounds.
    Uniform { min: f64, max: f64 },
    /// Exponential lifetime at the link's decay rate.
    Exponential,
}

impl LifetimeModel {
    fn validate(&self) -> Result<()> {
        match *self {
            LifetimeModel::Uniform { min, max } => {
                if min <= 0.0 || max < min {
                    Err(CeasError::domain("lifetime range must satisfy 0 < min <= max"))
                } else {
                    Ok(())
                }
            }
            LifetimeModel::Exponential => Ok(()),
        }
    }
}

/// Which usable pair a consumption request takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSelector {
    /// Spend the pair closest to expiry; ties go to the oldest entry.
    EarliestExpiring,
    /// Uniformly random usable pair.
    Random,
}

/// Pool of pairs shared by one network edge, with lifetime bookkeeping.
#[derive(Debug, Clone)]
pub struct LinkInventory {
    pub endpoints: (usize, usize),
    pairs: Vec<BellPair>,
    pub decay_rate: f64,
    pub generated_total: u64,
    pub consumed_total: u64,
    pub expired_total: u64,
}

impl LinkInventory {
    pub fn new(endpoints: (usize, usize), decay_rate: f64) -> Result<Self> {
        if decay_rate < 0.0 {
            return Err(CeasError::domain("decay_rate must be nonnegative"));
        }
        Ok(LinkInventory {
            endpoints,
            pairs: Vec::new(),
            decay_rate,
            generated_total: 0,
            consumed_total: 0,
            expired_total: 0,
        })
    }

    pub fn usable_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[BellPair] {
        &self.pairs
    }

    /// generated = consumed + expired + usable, at all times.
    pub fn conservation_holds(&self) -> bool {
        self.generated_total
            == self.consumed_total + self.expired_total + self.pairs.len() as u64
    }

    /// Attempts `attempts` generations, each succeeding with probability
    /// `p_gen`; successes join the pool with a lifetime drawn from `model`.
    /// Returns the success count.
    pub fn generate_pairs<R: Rng>(
        &mut self,
        attempts: usize,
        p_gen: f64,
        model: LifetimeModel,
        now: u64,
        rng: &mut R,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&p_gen) {
            return Err(CeasError::domain("p_gen must lie in [0, 1]"));
        }
        model.validate()?;
        let mut successes = 0;
        for _ in 0..attempts {
            if rng.random::<f64>() >= p_gen {
                continue;
            }
            let coherence_time = match model {
                LifetimeModel::Uniform { min, max } => {
                    if max > min {
                        rng.random_range(min..=max)
                    } else {
                        min
                    }
                }
                LifetimeModel::Exponential => {
                    let exp = Exp::new(self.decay_rate)
                        .map_err(|_| CeasError::domain("exponential lifetime needs decay_rate > 0"))?;
                    exp.sample(rng)
                }
            };
            self.pairs.push(BellPair {
                created_at: now,
                coherence_time,
                consumed: false,
            });
            successes += 1;
        }
        self.generated_total += successes as u64;
        Ok(successes)
    }

    /// Removes pairs whose lifetime has elapsed (`created + tau_c <= now`)
    /// and returns how many expired.
    pub fn age_and_expire(&mut self, now: u64) -> usize {
        let before = self.pairs.len();
        self.pairs.retain(|p| p.usable_at(now));
        let expired = before - self.pairs.len();
        self.expired_total += expired as u64;
        expired
    }

    /// Removes and returns one usable pair chosen by `selector`, or `None`
    /// when the pool holds none.
    pub fn consume<R: Rng>(
        &mut self,
        selector: PairSelector,
        now: u64,
        rng: &mut R,
    ) -> Option<BellPair> {
        let candidates: Vec<usize> = (0..self.pairs.len())
            .filter(|&i| self.pairs[i].usable_at(now))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let chosen = match selector {
            PairSelector::EarliestExpiring => candidates
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    self.pairs[a]
                        .remaining(now)
                        .partial_cmp(&self.pairs[b].remaining(now))
                        .expect("lifetimes are finite")
                })
                .expect("nonempty candidates"),
            PairSelector::Random => candidates[rng.random_range(0..candidates.len())],
        };
        let mut pair = self.pairs.swap_remove(chosen);
        pair.consumed = true;
        self.consumed_total += 1;
        Some(pair)
    }
}

/// Probability that a pair with exponential lifetime at `decay_rate` is
/// still usable after `dt` rounds: `exp(-decay_rate * dt)`.
pub fn survival_probability(decay_rate: f64, dt: f64) -> Result<f64> {
    if decay_rate < 0.0 || dt < 0.0 {
        return Err(CeasError::domain(
            "survival_probability needs nonnegative rate and duration",
        ));
    }
    Ok((-decay_rate * dt).exp())
}

/// One step of the expected inventory recursion:
/// `e^{-decay_rate} * m + r - c`. May go negative; callers clamp policy-side.
pub fn expected_inventory_step(m: f64, decay_rate: f64, r: f64, c: f64) -> f64 {
    (-decay_rate).exp() * m + r - c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn link() -> LinkInventory {
        LinkInventory::new((0, 1), 0.2).unwrap()
    }

    #[test]
    fn survival_closed_form() {
        assert_eq!(survival_probability(0.0, 5.0).unwrap(), 1.0);
        assert_relative_eq!(
            survival_probability(0.2, 1.0).unwrap(),
            (-0.2f64).exp(),
            epsilon = 1e-12
        );
        assert!(survival_probability(-0.1, 1.0).is_err());
        assert!(survival_probability(0.1, -1.0).is_err());
    }

    #[test]
    fn deterministic_generation_limit() {
        let mut l = link();
        let mut rng = crate::rng::stream(1);
        let made = l
            .generate_pairs(10, 1.0, LifetimeModel::Uniform { min: 3.0, max: 3.0 }, 0, &mut rng)
            .unwrap();
        assert_eq!(made, 10);
        assert!(l.pairs().iter().all(|p| p.coherence_time == 3.0));
        assert_eq!(l.generated_total, 10);
    }

    #[test]
    fn zero_attempts_changes_nothing() {
        let mut l = link();
        let mut rng = crate::rng::stream(1);
        let made = l
            .generate_pairs(0, 0.5, LifetimeModel::Uniform { min: 3.0, max: 6.0 }, 0, &mut rng)
            .unwrap();
        assert_eq!(made, 0);
        assert_eq!(l.usable_count(), 0);
        assert!(l.conservation_holds());
    }

    #[test]
    fn generation_rate_concentrates() {
        let mut l = link();
        let mut rng = crate::rng::stream(5);
        let attempts = 10_000;
        let made = l
            .generate_pairs(
                attempts,
                0.7,
                LifetimeModel::Uniform { min: 3.0, max: 6.0 },
                0,
                &mut rng,
            )
            .unwrap();
        let rate = made as f64 / attempts as f64;
        assert!((0.68..=0.72).contains(&rate), "rate {rate}");
    }

    #[test]
    fn expiry_boundary_is_strict() {
        let mut l = link();
        let mut rng = crate::rng::stream(2);
        l.generate_pairs(1, 1.0, LifetimeModel::Uniform { min: 3.0, max: 3.0 }, 0, &mut rng)
            .unwrap();
        assert_eq!(l.age_and_expire(2), 0);
        assert_eq!(l.usable_count(), 1);
        assert_eq!(l.age_and_expire(3), 1);
        assert_eq!(l.usable_count(), 0);
        assert_eq!(l.expired_total, 1);
    }

    #[test]
    fn everything_past_lifetime_expires() {
        let mut l = link();
        let mut rng = crate::rng::stream(3);
        l.generate_pairs(100, 1.0, LifetimeModel::Uniform { min: 3.0, max: 3.0 }, 0, &mut rng)
            .unwrap();
        assert_eq!(l.age_and_expire(10), 100);
        assert_eq!(l.expired_total, 100);
        assert_eq!(l.usable_count(), 0);
        assert!(l.conservation_holds());
    }

    #[test]
    fn earliest_expiring_pair_goes_first() {
        let mut l = link();
        let mut rng = crate::rng::stream(4);
        for tau in [1.5, 3.5, 2.5] {
            l.generate_pairs(1, 1.0, LifetimeModel::Uniform { min: tau, max: tau }, 0, &mut rng)
                .unwrap();
        }
        let taken = l.consume(PairSelector::EarliestExpiring, 0, &mut rng).unwrap();
        assert_eq!(taken.coherence_time, 1.5);
        assert!(taken.consumed);
        assert!(l.conservation_holds());
    }

    #[test]
    fn consume_from_empty_is_absence() {
        let mut l = link();
        let mut rng = crate::rng::stream(4);
        assert!(l.consume(PairSelector::EarliestExpiring, 0, &mut rng).is_none());
    }

    #[test]
    fn expected_step_direct_values() {
        let lambda = (10.0f64 / 9.0).ln();
        assert_relative_eq!(expected_inventory_step(10.0, lambda, 5.0, 3.0), 11.0, epsilon = 1e-12);
        assert_eq!(expected_inventory_step(0.0, 0.7, 0.0, 0.0), 0.0);
    }

    #[test]
    fn empirical_survival_matches_exponential_law() {
        // 1e5 exponential-lifetime pairs, survival over dt = 1 within +/- 0.01.
        let lambda = 0.2;
        let mut l = LinkInventory::new((0, 1), lambda).unwrap();
        let mut rng = crate::rng::stream(6);
        let n = 100_000;
        l.generate_pairs(n, 1.0, LifetimeModel::Exponential, 0, &mut rng)
            .unwrap();
        l.age_and_expire(1);
        let survived = l.usable_count() as f64 / n as f64;
        assert!((survived - (-lambda as f64).exp()).abs() < 0.01);
    }

    #[test]
    fn expected_inventory_step_matches_monte_carlo() {
        // One stochastic round (expire, generate, consume) vs the recursion.
        let lambda = 0.25f64;
        let (m, r, c) = (20usize, 8usize, 5usize);
        let mut rng = crate::rng::stream(7);
        let trials = 10_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let mut l = LinkInventory::new((0, 1), lambda).unwrap();
            l.generate_pairs(m, 1.0, LifetimeModel::Exponential, 0, &mut rng)
                .unwrap();
            l.age_and_expire(1);
            l.generate_pairs(r, 1.0, LifetimeModel::Exponential, 1, &mut rng)
                .unwrap();
            for _ in 0..c {
                l.consume(PairSelector::EarliestExpiring, 1, &mut rng);
            }
            total += l.usable_count() as f64;
        }
        let mean = total / trials as f64;
        let expected = expected_inventory_step(m as f64, lambda, r as f64, c as f64);
        assert_relative_eq!(mean, expected, max_relative = 0.02);
    }

    proptest! {
        #[test]
        fn conservation_under_random_operations(
            seed in 0u64..1000,
            ops in proptest::collection::vec(0u8..3, 1..60),
        ) {
            let mut l = LinkInventory::new((0, 1), 0.3).unwrap();
            let mut rng = crate::rng::stream(seed);
            let mut now = 0u64;
            for op in ops {
                match op {
                    0 => {
                        l.generate_pairs(
                            3,
                            0.8,
                            LifetimeModel::Uniform { min: 1.0, max: 4.0 },
                            now,
                            &mut rng,
                        ).unwrap();
                    }
                    1 => {
                        now += 1;
                        l.age_and_expire(now);
                    }
                    _ => {
                        if let Some(p) = l.consume(PairSelector::EarliestExpiring, now, &mut rng) {
                            // A consumed pair was usable when taken.
                            prop_assert!(p.created_at as f64 + p.coherence_time > now as f64);
                        }
                    }
                }
                prop_assert!(l.conservation_holds());
            }
        }
    }
}
