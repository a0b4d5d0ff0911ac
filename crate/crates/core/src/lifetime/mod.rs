//! The agent's lifetime: environment, reward machine and learner stepping
//! together for a fixed number of timesteps.

mod curves;
mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::gridworld::GridLayout;
use crate::learner::{GeneratorRegistry, LearnerConfig, LearnerState};
use crate::reward_machine::{MachineRuntime, RewardMachineSpec, TraceRecord, TraceStep};
use crate::types::{Observation, Poi, RewardState};

pub use curves::{aggregate_runs, CurveAccumulator, CurvePoint, WindowTally};
pub use io::{read_metrics_csv, write_curve_csv, write_metrics_csv, MetricsCsvWriter, CURVE_HEADER, METRICS_HEADER};

pub const DEFAULT_LIFESPAN: u64 = 100_000_000;
pub const DEFAULT_WINDOW: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifetimeConfig {
    /// Number of timesteps `T`.
    pub lifespan: u64,
    pub seed: u64,
    /// Bucket size for learning curves; episodes go to the window holding
    /// their start timestep.
    pub window: u64,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            lifespan: DEFAULT_LIFESPAN,
            seed: 0,
            window: DEFAULT_WINDOW,
        }
    }
}

impl LifetimeConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.lifespan == 0 {
            return Err(Error::Config("lifespan must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// One completed episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub start_timestep: u64,
    pub from_state: RewardState,
    pub to_state: RewardState,
    pub value: f64,
    pub length: u32,
}

/// Completed episodes of one lifetime, in timestep order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub seed: u64,
    pub lifespan: u64,
    pub records: Vec<EpisodeRecord>,
}

impl MetricsLog {
    /// Timesteps of the final, unfinished episode.
    pub fn discarded_tail(&self) -> u64 {
        self.lifespan - self.records.iter().map(|r| u64::from(r.length)).sum::<u64>()
    }
}

/// Hooks called by [`run_lifetime_with`]. Both default to no-ops.
pub trait LifetimeObserver {
    fn on_step(&mut self, _timestep: u64, _step: &TraceStep) {}
    fn on_episode(&mut self, _record: &EpisodeRecord) {}
}

impl LifetimeObserver for () {}

/// Collects episode records into a [`MetricsLog`].
#[derive(Debug, Default)]
pub struct RecordCollector {
    pub records: Vec<EpisodeRecord>,
}

impl LifetimeObserver for RecordCollector {
    fn on_episode(&mut self, record: &EpisodeRecord) {
        self.records.push(*record);
    }
}

/// Collects the full per-step trace.
#[derive(Debug, Default)]
pub struct TraceCollector {
    pub steps: Vec<TraceStep>,
}

impl LifetimeObserver for TraceCollector {
    fn on_step(&mut self, _timestep: u64, step: &TraceStep) {
        self.steps.push(*step);
    }
}

impl<A: LifetimeObserver, B: LifetimeObserver> LifetimeObserver for (A, B) {
    fn on_step(&mut self, timestep: u64, step: &TraceStep) {
        self.0.on_step(timestep, step);
        self.1.on_step(timestep, step);
    }

    fn on_episode(&mut self, record: &EpisodeRecord) {
        self.0.on_episode(record);
        self.1.on_episode(record);
    }
}

/// Sub-stream ids of a run's random stream.
const GENERATION_STREAM: u64 = 1;
const MUTATION_STREAM: u64 = 2;
const EMISSION_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// What a lifetime ended with, besides what the observer saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifetimeEnd {
    pub episodes: u64,
    pub final_state: RewardState,
    pub discarded_tail: u64,
}

/// Runs one lifetime, reporting steps and completed episodes to `observer`.
///
/// The agent starts at home in the machine's initial reward state. Each
/// episode's policy comes from the learner; when the episode expires the
/// policy and its value are offered to the pool of the state it ran in. The
/// final, unfinished episode is dropped.
pub fn run_lifetime_with<O: LifetimeObserver>(
    layout: &GridLayout,
    machine: &RewardMachineSpec,
    learner_config: &LearnerConfig,
    registry: &GeneratorRegistry,
    config: &LifetimeConfig,
    observer: &mut O,
) -> Result<LifetimeEnd, Error> {
    config.validate()?;
    let mut learner = LearnerState::new(learner_config.clone(), registry)?;
    let mut generation_rng = stream(config.seed, GENERATION_STREAM);
    let mut mutation_rng = stream(config.seed, MUTATION_STREAM);
    let mut emission_rng = stream(config.seed, EMISSION_STREAM);

    let home = layout.poi(Poi::Home);
    let mut cell = layout.free_index(home).expect("home is a free cell");
    let mut runtime = MachineRuntime::new(machine, home);
    let mut state = runtime.current_state();
    let (mut policy, _) = learner.generate_policy(state, layout, &mut generation_rng, &mut mutation_rng);
    let mut episode_start = 0u64;
    let mut episodes = 0u64;

    for t in 0..config.lifespan {
        let action = policy.action(cell);
        cell = layout.step_index(cell, action);
        let observation = Observation {
            position: layout.position_of(cell),
            poi: layout.poi_of_index(cell),
        };
        let advance = runtime.advance(observation, &mut emission_rng)?;
        observer.on_step(
            t,
            &TraceStep {
                observation,
                action,
                state,
                value: advance.value,
            },
        );
        if let Some(value) = advance.value.value() {
            let record = EpisodeRecord {
                start_timestep: episode_start,
                from_state: state,
                to_state: advance.state,
                value,
                length: (t + 1 - episode_start) as u32,
            };
            learner.update_pool(state, policy, value);
            observer.on_episode(&record);
            episodes += 1;
            state = advance.state;
            episode_start = t + 1;
            policy = learner
                .generate_policy(state, layout, &mut generation_rng, &mut mutation_rng)
                .0;
        }
    }

    Ok(LifetimeEnd {
        episodes,
        final_state: state,
        discarded_tail: config.lifespan - episode_start,
    })
}

/// Runs one lifetime and returns its episode records.
pub fn run_lifetime(
    layout: &GridLayout,
    machine: &RewardMachineSpec,
    learner_config: &LearnerConfig,
    config: &LifetimeConfig,
) -> Result<MetricsLog, Error> {
    let mut collector = RecordCollector::default();
    run_lifetime_with(
        layout,
        machine,
        learner_config,
        &GeneratorRegistry::builtin(),
        config,
        &mut collector,
    )?;
    Ok(MetricsLog {
        seed: config.seed,
        lifespan: config.lifespan,
        records: collector.records,
    })
}

/// Runs one lifetime keeping both the episode records and the full trace.
pub fn run_lifetime_traced(
    layout: &GridLayout,
    machine: &RewardMachineSpec,
    learner_config: &LearnerConfig,
    config: &LifetimeConfig,
) -> Result<(MetricsLog, TraceRecord), Error> {
    let mut observers = (RecordCollector::default(), TraceCollector::default());
    let end = run_lifetime_with(
        layout,
        machine,
        learner_config,
        &GeneratorRegistry::builtin(),
        config,
        &mut observers,
    )?;
    let (records, trace) = observers;
    Ok((
        MetricsLog {
            seed: config.seed,
            lifespan: config.lifespan,
            records: records.records,
        },
        TraceRecord {
            start_position: layout.poi(Poi::Home),
            steps: trace.steps,
            final_state: end.final_state,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward_machine::{build_base_machine, validate_trace, GET_FOOD, TIMED_OUT};

    fn config(lifespan: u64, seed: u64) -> LifetimeConfig {
        LifetimeConfig {
            lifespan,
            seed,
            window: 1000,
        }
    }

    /// A generator whose every policy is "go down", which pins the agent at
    /// home.
    fn stuck_learner() -> (LearnerConfig, GeneratorRegistry) {
        #[derive(Debug)]
        struct Down;
        impl crate::learner::PolicyGenerator for Down {
            fn name(&self) -> &'static str {
                "down"
            }
            fn random_policy(&self, layout: &GridLayout, _: &mut dyn rand::RngCore) -> crate::types::Policy {
                crate::types::Policy::constant(layout.free_count(), crate::types::Action::Down)
            }
            fn mutate(
                &self,
                p: &crate::types::Policy,
                _: &GridLayout,
                _: &mut dyn rand::RngCore,
            ) -> crate::types::Policy {
                p.clone()
            }
        }
        let mut registry = GeneratorRegistry::builtin();
        registry.register("down", |_| Box::new(Down));
        let config = LearnerConfig {
            bias: "down".into(),
            ..LearnerConfig::default()
        };
        (config, registry)
    }

    #[test]
    fn single_forced_timeout() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        let (learner, registry) = stuck_learner();
        let mut collector = RecordCollector::default();
        run_lifetime_with(&layout, &machine, &learner, &registry, &config(24, 0), &mut collector).unwrap();
        assert_eq!(collector.records.len(), 1);
        let r = collector.records[0];
        assert_eq!(r.value, -1.0);
        assert_eq!(r.to_state, machine.state_of(&[GET_FOOD, TIMED_OUT]).unwrap());
        assert_eq!(r.length, 24);
    }

    #[test]
    fn partial_episode_is_discarded() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        let (learner, registry) = stuck_learner();
        let mut collector = RecordCollector::default();
        let end = run_lifetime_with(&layout, &machine, &learner, &registry, &config(10, 0), &mut collector).unwrap();
        assert!(collector.records.is_empty());
        assert_eq!(end.discarded_tail, 10);
    }

    #[test]
    fn equal_seeds_give_equal_logs() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        let learner = LearnerConfig::default();
        let a = run_lifetime(&layout, &machine, &learner, &config(20_000, 5)).unwrap();
        let b = run_lifetime(&layout, &machine, &learner, &config(20_000, 5)).unwrap();
        let c = run_lifetime(&layout, &machine, &learner, &config(20_000, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lengths_and_chain() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        let log = run_lifetime(&layout, &machine, &LearnerConfig::default(), &config(50_000, 1)).unwrap();
        let total: u64 = log.records.iter().map(|r| u64::from(r.length)).sum();
        assert_eq!(total + log.discarded_tail(), 50_000);
        assert_eq!(log.records[0].from_state, machine.initial_state());
        for pair in log.records.windows(2) {
            assert_eq!(pair[0].to_state, pair[1].from_state);
            assert_eq!(
                pair[0].start_timestep + u64::from(pair[0].length),
                pair[1].start_timestep
            );
        }
        assert!(log.records.iter().all(|r| (1..=24).contains(&r.length)));
    }

    #[test]
    fn traced_run_validates() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        let (log, trace) =
            run_lifetime_traced(&layout, &machine, &LearnerConfig::default(), &config(10_000, 2)).unwrap();
        assert_eq!(trace.steps.len(), 10_000);
        assert_eq!(validate_trace(&trace, &machine), Ok(()));
        let expirations = trace.steps.iter().filter(|s| !s.value.is_null()).count();
        assert_eq!(expirations, log.records.len());
    }

    #[test]
    fn zero_lifespan_is_rejected() {
        let layout = GridLayout::canonical();
        let machine = build_base_machine();
        assert!(run_lifetime(&layout, &machine, &LearnerConfig::default(), &config(0, 0)).is_err());
    }
}
