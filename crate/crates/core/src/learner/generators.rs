//! Policy generation and mutation strategies.
//!
//! A [`PolicyGenerator`] decides what distribution fresh policies are drawn
//! from and how pool policies are perturbed. Strategies are registered by name
//! in a [`GeneratorRegistry`] and picked at runtime from [`LearnerConfig::bias`].

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore};

use crate::gridworld::GridLayout;
use crate::types::{Action, Policy};

use super::{LearnerConfig, LearnerError};

pub trait PolicyGenerator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// A policy drawn from scratch, total over the layout's free cells.
    fn random_policy(&self, layout: &GridLayout, rng: &mut dyn RngCore) -> Policy;

    /// A perturbed copy of `policy`.
    fn mutate(&self, policy: &Policy, layout: &GridLayout, rng: &mut dyn RngCore) -> Policy;
}

fn random_action(rng: &mut dyn RngCore) -> Action {
    Action::from_index(rng.gen_range(0..4))
}

/// Independent uniform actions; mutation resamples each cell with probability
/// `mutation_rate`.
#[derive(Debug, Clone)]
pub struct Unbiased {
    pub mutation_rate: f64,
}

impl PolicyGenerator for Unbiased {
    fn name(&self) -> &'static str {
        "unbiased"
    }

    fn random_policy(&self, layout: &GridLayout, rng: &mut dyn RngCore) -> Policy {
        Policy::from_actions((0..layout.free_count()).map(|_| random_action(rng)).collect())
    }

    fn mutate(&self, policy: &Policy, _layout: &GridLayout, rng: &mut dyn RngCore) -> Policy {
        policy.with_changes(|actions| {
            for a in actions.iter_mut() {
                if rng.gen_bool(self.mutation_rate) {
                    *a = random_action(rng);
                }
            }
        })
    }
}

/// Spatially coherent policies: actions are assigned to 4-connected patches
/// grown from seed cells, each neighbour joining with probability
/// `region_growth_prob`.
#[derive(Debug, Clone)]
pub struct Biased {
    pub mutation_rate: f64,
    pub region_growth_prob: f64,
}

impl Biased {
    /// Grows a patch from `seed` over cells accepted by `open`, marking members
    /// in `member` and returning them.
    fn grow(
        &self,
        layout: &GridLayout,
        seed: usize,
        open: impl Fn(usize) -> bool,
        member: &mut [bool],
        rng: &mut dyn RngCore,
    ) -> Vec<usize> {
        let mut patch = vec![seed];
        member[seed] = true;
        let mut cursor = 0;
        while cursor < patch.len() {
            let cell = patch[cursor];
            cursor += 1;
            for n in layout.neighbours(cell) {
                if !member[n] && open(n) && rng.gen_bool(self.region_growth_prob) {
                    member[n] = true;
                    patch.push(n);
                }
            }
        }
        patch
    }

    /// Number of seed cells used by one mutation.
    pub fn seeds_per_mutation(&self, cells: usize) -> usize {
        ((self.mutation_rate * cells as f64).ceil() as usize).clamp(1, cells)
    }
}

impl PolicyGenerator for Biased {
    fn name(&self) -> &'static str {
        "biased"
    }

    fn random_policy(&self, layout: &GridLayout, rng: &mut dyn RngCore) -> Policy {
        let n = layout.free_count();
        let mut actions = vec![Action::Up; n];
        let mut assigned = vec![false; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for seed in order {
            if assigned[seed] {
                continue;
            }
            let action = random_action(rng);
            // `assigned` doubles as the membership mask: only unassigned
            // cells can join
            for cell in self.grow(layout, seed, |_| true, &mut assigned, rng) {
                actions[cell] = action;
            }
        }
        Policy::from_actions(actions)
    }

    fn mutate(&self, policy: &Policy, layout: &GridLayout, rng: &mut dyn RngCore) -> Policy {
        if self.mutation_rate == 0.0 {
            return policy.clone();
        }
        let n = layout.free_count();
        let seeds = index::sample(rng, n, self.seeds_per_mutation(n)).into_vec();
        let mut member = vec![false; n];
        policy.with_changes(|actions| {
            for seed in seeds {
                member.iter_mut().for_each(|m| *m = false);
                let action = random_action(rng);
                for cell in self.grow(layout, seed, |_| true, &mut member, rng) {
                    actions[cell] = action;
                }
            }
        })
    }
}

type Factory = fn(&LearnerConfig) -> Box<dyn PolicyGenerator>;

/// Name-keyed table of generator strategies.
#[derive(Debug, Clone)]
pub struct GeneratorRegistry {
    entries: Vec<(&'static str, Factory)>,
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GeneratorRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// `unbiased` and `biased`.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register("unbiased", |c| {
            Box::new(Unbiased {
                mutation_rate: c.mutation_rate,
            })
        });
        registry.register("biased", |c| {
            Box::new(Biased {
                mutation_rate: c.mutation_rate,
                region_growth_prob: c.region_growth_prob,
            })
        });
        registry
    }

    /// Adds or replaces a strategy.
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn create(&self, config: &LearnerConfig) -> Result<Box<dyn PolicyGenerator>, LearnerError> {
        self.entries
            .iter()
            .find(|(n, _)| *n == config.bias)
            .map(|(_, factory)| factory(config))
            .ok_or_else(|| LearnerError::UnknownGenerator(config.bias.clone()))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Connected components of the layout's free cells.
    fn components(layout: &GridLayout) -> Vec<usize> {
        let n = layout.free_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(c) = stack.pop() {
                for nb in layout.neighbours(c) {
                    if label[nb] == usize::MAX {
                        label[nb] = next;
                        stack.push(nb);
                    }
                }
            }
            next += 1;
        }
        label
    }

    #[test]
    fn full_growth_gives_constant_regions() {
        let layout = GridLayout::canonical();
        let label = components(&layout);
        let g = Biased {
            mutation_rate: 0.05,
            region_growth_prob: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = g.random_policy(&layout, &mut rng);
            for i in 0..layout.free_count() {
                for j in 0..layout.free_count() {
                    if label[i] == label[j] {
                        assert_eq!(p.action(i), p.action(j));
                    }
                }
            }
        }
    }

    #[test]
    fn unbiased_zero_rate_is_identity() {
        let layout = GridLayout::canonical();
        let g = Unbiased { mutation_rate: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = g.random_policy(&layout, &mut rng);
        assert_eq!(g.mutate(&p, &layout, &mut rng), p);
    }

    #[test]
    fn biased_mutation_changes_a_connected_patch() {
        let layout = GridLayout::canonical();
        let g = Biased {
            mutation_rate: 1.0 / 74.0,
            region_growth_prob: 0.5,
        };
        assert_eq!(g.seeds_per_mutation(74), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let parent = Policy::constant(74, Action::Up);
        for _ in 0..200 {
            let child = g.mutate(&parent, &layout, &mut rng);
            let changed: Vec<usize> = (0..74).filter(|&i| child.action(i) != parent.action(i)).collect();
            if changed.is_empty() {
                continue;
            }
            // all changed cells share one action and form a connected set
            assert!(changed.iter().all(|&c| child.action(c) == child.action(changed[0])));
            let mut seen = vec![changed[0]];
            let mut cursor = 0;
            while cursor < seen.len() {
                let c = seen[cursor];
                cursor += 1;
                for nb in layout.neighbours(c) {
                    if changed.contains(&nb) && !seen.contains(&nb) {
                        seen.push(nb);
                    }
                }
            }
            assert_eq!(seen.len(), changed.len());
        }
    }

    #[test]
    fn registry_resolves_by_name() {
        let registry = GeneratorRegistry::builtin();
        let mut config = LearnerConfig::default();
        for name in ["unbiased", "biased"] {
            config.bias = name.into();
            assert_eq!(registry.create(&config).unwrap().name(), name);
        }
        config.bias = "annealed".into();
        assert!(matches!(
            registry.create(&config),
            Err(LearnerError::UnknownGenerator(_))
        ));
        assert_eq!(registry.names().collect::<Vec<_>>(), ["unbiased", "biased"]);
    }
}
