//! Evolutionary lifelong learner.
//!
//! For every reward state the learner keeps a bounded pool of elite policies,
//! each paired with the reward value of the last episode it was executed in.
//! At the start of an episode a policy is either a mutated pool member
//! (`p1`), a pool member taken out for re-evaluation (`p2`) or a fresh random
//! policy (`p3`). When the episode expires the executed policy competes for a
//! place in the pool.

mod generators;
mod pool;

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::gridworld::GridLayout;
use crate::types::{Policy, RewardState};

pub use generators::{Biased, GeneratorRegistry, PolicyGenerator, Unbiased};
pub use pool::{update_pool, PolicyPool, PoolEntry, PoolUpdate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown policy generator {0:?}")]
    UnknownGenerator(String),
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Pool capacity `d`.
    pub pool_capacity: usize,
    /// Probability of mutating a sampled pool policy.
    pub p_mutate: f64,
    /// Probability of re-evaluating (removing) a sampled pool policy.
    pub p_reevaluate: f64,
    /// Probability of generating a fresh policy.
    pub p_fresh: f64,
    /// Name of the [`PolicyGenerator`] strategy.
    pub bias: String,
    pub mutation_rate: f64,
    pub region_growth_prob: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            pool_capacity: 10,
            p_mutate: 0.6,
            p_reevaluate: 0.2,
            p_fresh: 0.2,
            bias: "biased".into(),
            mutation_rate: 0.05,
            region_growth_prob: 0.9,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let invalid = |msg: String| Err(LearnerError::InvalidConfig(msg));
        if self.pool_capacity == 0 {
            return invalid("pool capacity must be positive".into());
        }
        for (name, p) in [
            ("p1", self.p_mutate),
            ("p2", self.p_reevaluate),
            ("p3", self.p_fresh),
            ("region growth probability", self.region_growth_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        let total = self.p_mutate + self.p_reevaluate + self.p_fresh;
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return invalid(format!("p1 + p2 + p3 = {total}, expected 1"));
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return invalid(format!("mutation rate {} is outside (0, 1]", self.mutation_rate));
        }
        Ok(())
    }
}

/// How an episode's policy was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Mutated,
    Reevaluated,
    Fresh,
}

/// Per-lifetime learner: one pool per reward state seen so far.
#[derive(Debug)]
pub struct LearnerState {
    config: LearnerConfig,
    generator: Box<dyn PolicyGenerator>,
    pools: BTreeMap<RewardState, PolicyPool>,
}

impl LearnerState {
    pub fn new(config: LearnerConfig, registry: &GeneratorRegistry) -> Result<Self, LearnerError> {
        config.validate()?;
        let generator = registry.create(&config)?;
        Ok(Self {
            config,
            generator,
            pools: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn generator(&self) -> &dyn PolicyGenerator {
        self.generator.as_ref()
    }

    pub fn pool(&self, state: RewardState) -> Option<&PolicyPool> {
        self.pools.get(&state)
    }

    pub fn pool_mut(&mut self, state: RewardState) -> &mut PolicyPool {
        let capacity = self.config.pool_capacity;
        self.pools.entry(state).or_insert_with(|| PolicyPool::new(capacity))
    }

    pub fn pools(&self) -> impl Iterator<Item = (&RewardState, &PolicyPool)> {
        self.pools.iter()
    }

    /// Picks the policy for a new episode of `state`.
    ///
    /// `rng` drives the method choice, pool sampling and fresh generation;
    /// `mutation_rng` drives mutation only. An empty pool always yields a
    /// fresh policy.
    pub fn generate_policy(
        &mut self,
        state: RewardState,
        layout: &GridLayout,
        rng: &mut dyn RngCore,
        mutation_rng: &mut dyn RngCore,
    ) -> (Policy, Provenance) {
        let (p_mutate, p_reevaluate) = (self.config.p_mutate, self.config.p_reevaluate);
        let generator = self.generator.as_ref();
        let pool = match self.pools.get_mut(&state) {
            Some(pool) if !pool.is_empty() => pool,
            _ => return (generator.random_policy(layout, rng), Provenance::Fresh),
        };
        let u: f64 = rng.gen();
        if u < p_mutate {
            let pick = rng.gen_range(0..pool.len());
            let child = generator.mutate(&pool.entries()[pick].policy, layout, mutation_rng);
            (child, Provenance::Mutated)
        } else if u < p_mutate + p_reevaluate {
            let pick = rng.gen_range(0..pool.len());
            (pool.take(pick).policy, Provenance::Reevaluated)
        } else {
            (generator.random_policy(layout, rng), Provenance::Fresh)
        }
    }

    /// Offers an executed policy and its episode value to the state's pool.
    pub fn update_pool(&mut self, state: RewardState, policy: Policy, value: f64) -> PoolUpdate {
        self.pool_mut(state).update(policy, value)
    }
}

/// Free-function form of [`PolicyGenerator::random_policy`] resolved through
/// the built-in registry.
pub fn random_policy(
    config: &LearnerConfig,
    layout: &GridLayout,
    rng: &mut dyn RngCore,
) -> Result<Policy, LearnerError> {
    Ok(GeneratorRegistry::builtin().create(config)?.random_policy(layout, rng))
}

/// Free-function form of [`PolicyGenerator::mutate`].
pub fn mutate(
    policy: &Policy,
    config: &LearnerConfig,
    layout: &GridLayout,
    rng: &mut dyn RngCore,
) -> Result<Policy, LearnerError> {
    Ok(GeneratorRegistry::builtin().create(config)?.mutate(policy, layout, rng))
}
