//! Named reward designs and experiment presets, plus multi-run execution.
//!
//! Reward designs live in a [`MachineRegistry`] and policy generators in a
//! [`GeneratorRegistry`]; an [`ExperimentPreset`] names one of each. An
//! [`ExperimentConfig`] is the serializable form of a whole experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gridworld::GridLayout;
use crate::learner::{GeneratorRegistry, LearnerConfig};
use crate::lifetime::{run_lifetime_with, LifetimeConfig, LifetimeEnd, LifetimeObserver};
use crate::reward_machine::{
    build_base_machine, build_progress_machine, build_suboptimal_machine, MachineError, RewardMachineSpec,
    DEFAULT_GUIDANCE_COEF, DEFAULT_GUIDANCE_P,
};

/// Tunables of the reward designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    pub guidance_p: f64,
    pub guidance_coef: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            guidance_p: DEFAULT_GUIDANCE_P,
            guidance_coef: DEFAULT_GUIDANCE_COEF,
        }
    }
}

type MachineFactory = fn(&MachineParams) -> Result<RewardMachineSpec, MachineError>;

#[derive(Debug, Clone)]
pub struct MachineRegistry {
    entries: Vec<(&'static str, MachineFactory)>,
}

impl Default for MachineRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MachineRegistry {
    /// `base`, `progress` and `suboptimal`.
    pub fn builtin() -> Self {
        let mut registry = Self { entries: Vec::new() };
        registry.register("base", |_| Ok(build_base_machine()));
        registry.register("progress", |p| build_progress_machine(p.guidance_p, p.guidance_coef));
        registry.register("suboptimal", |_| Ok(build_suboptimal_machine()));
        registry
    }

    pub fn register(&mut self, name: &'static str, factory: MachineFactory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn build(&self, name: &str, params: &MachineParams) -> Result<RewardMachineSpec, MachineError> {
        let (_, factory) = self
            .entries
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| MachineError::UnknownName(name.to_string()))?;
        factory(params)
    }
}

/// One of the five experimental conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub machine: &'static str,
    pub bias: &'static str,
}

pub const PRESETS: [ExperimentPreset; 5] = [
    ExperimentPreset {
        name: "base",
        machine: "base",
        bias: "unbiased",
    },
    ExperimentPreset {
        name: "progress-unbiased",
        machine: "progress",
        bias: "unbiased",
    },
    ExperimentPreset {
        name: "progress-biased",
        machine: "progress",
        bias: "biased",
    },
    ExperimentPreset {
        name: "suboptimal-unbiased",
        machine: "suboptimal",
        bias: "unbiased",
    },
    ExperimentPreset {
        name: "suboptimal-biased",
        machine: "suboptimal",
        bias: "biased",
    },
];

pub fn preset(name: &str) -> Option<&'static ExperimentPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Everything needed to run a batch of lifetimes.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub layout: GridLayout,
    pub machine: RewardMachineSpec,
    pub learner: LearnerConfig,
    pub runs: u32,
    pub base_seed: u64,
    pub lifespan: u64,
    pub window: u64,
}

impl Experiment {
    /// An experiment for a preset with default hyperparameters.
    pub fn from_preset(preset: &ExperimentPreset, params: &MachineParams) -> Result<Self, Error> {
        Ok(Self {
            layout: GridLayout::canonical(),
            machine: MachineRegistry::builtin().build(preset.machine, params)?,
            learner: LearnerConfig {
                bias: preset.bias.to_string(),
                ..LearnerConfig::default()
            },
            runs: 20,
            base_seed: 0,
            lifespan: crate::lifetime::DEFAULT_LIFESPAN,
            window: crate::lifetime::DEFAULT_WINDOW,
        })
    }

    pub fn lifetime_config(&self, run: u32) -> LifetimeConfig {
        LifetimeConfig {
            lifespan: self.lifespan,
            seed: self.base_seed.wrapping_add(u64::from(run)),
            window: self.window,
        }
    }

    /// Runs every lifetime on the current rayon pool. `make_observer` builds
    /// one observer per run; results come back in run order regardless of
    /// completion order.
    pub fn run_all<O, F>(&self, registry: &GeneratorRegistry, make_observer: F) -> Result<Vec<(O, LifetimeEnd)>, Error>
    where
        O: LifetimeObserver + Send,
        F: Fn(u32) -> Result<O, Error> + Sync,
    {
        self.learner.validate()?;
        (0..self.runs)
            .into_par_iter()
            .map(|run| {
                let mut observer = make_observer(run)?;
                let end = run_lifetime_with(
                    &self.layout,
                    &self.machine,
                    &self.learner,
                    registry,
                    &self.lifetime_config(run),
                    &mut observer,
                )?;
                Ok((observer, end))
            })
            .collect()
    }
}

/// Learner hyperparameters as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSettings {
    pub d: usize,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub mutation_rate: f64,
    pub region_growth_prob: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        let c = LearnerConfig::default();
        Self {
            d: c.pool_capacity,
            p1: c.p_mutate,
            p2: c.p_reevaluate,
            p3: c.p_fresh,
            mutation_rate: c.mutation_rate,
            region_growth_prob: c.region_growth_prob,
        }
    }
}

impl LearnerSettings {
    pub fn to_config(&self, bias: &str) -> LearnerConfig {
        LearnerConfig {
            pool_capacity: self.d,
            p_mutate: self.p1,
            p_reevaluate: self.p2,
            p_fresh: self.p3,
            bias: bias.to_string(),
            mutation_rate: self.mutation_rate,
            region_growth_prob: self.region_growth_prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSettings {
    pub p: f64,
    pub coef: f64,
}

impl Default for GuidanceSettings {
    fn default() -> Self {
        Self {
            p: DEFAULT_GUIDANCE_P,
            coef: DEFAULT_GUIDANCE_COEF,
        }
    }
}

/// A complete, reproducible experiment description.
///
/// ```toml
/// preset = "progress-unbiased"
/// runs = 20
/// seed = 0
/// lifespan = 100000000
/// window = 1000000
///
/// [learner]
/// d = 10
/// p1 = 0.6
/// p2 = 0.2
/// p3 = 0.2
/// mutation_rate = 0.05
/// region_growth_prob = 0.9
///
/// [guidance]
/// p = 0.8
/// coef = 0.01
/// ```
///
/// `layout` (layout text) and `machine` (machine TOML) are optional and
/// replace the canonical layout and the preset's reward design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub runs: u32,
    pub seed: u64,
    pub lifespan: u64,
    pub window: u64,
    #[serde(default)]
    pub learner: LearnerSettings,
    #[serde(default)]
    pub guidance: GuidanceSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine: Option<String>,
}

impl ExperimentConfig {
    /// Default settings for a preset.
    pub fn for_preset(name: &str) -> Result<Self, Error> {
        preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        Ok(Self {
            preset: name.to_string(),
            runs: 20,
            seed: 0,
            lifespan: crate::lifetime::DEFAULT_LIFESPAN,
            window: crate::lifetime::DEFAULT_WINDOW,
            learner: LearnerSettings::default(),
            guidance: GuidanceSettings::default(),
            layout: None,
            machine: None,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn layout_text(&self) -> &str {
        self.layout.as_deref().unwrap_or(crate::gridworld::CANONICAL_LAYOUT)
    }

    /// Resolves names and validates everything.
    pub fn build(&self, machines: &MachineRegistry) -> Result<Experiment, Error> {
        let preset = preset(&self.preset).ok_or_else(|| Error::Config(format!("unknown preset {:?}", self.preset)))?;
        let machine = match &self.machine {
            Some(text) => RewardMachineSpec::from_toml(text)?,
            None => machines.build(
                preset.machine,
                &MachineParams {
                    guidance_p: self.guidance.p,
                    guidance_coef: self.guidance.coef,
                },
            )?,
        };
        let experiment = Experiment {
            layout: GridLayout::parse(self.layout_text())?,
            machine,
            learner: self.learner.to_config(preset.bias),
            runs: self.runs,
            base_seed: self.seed,
            lifespan: self.lifespan,
            window: self.window,
        };
        experiment.learner.validate()?;
        experiment.lifetime_config(0).validate()?;
        Ok(experiment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifetime::RecordCollector;

    #[test]
    fn presets_resolve() {
        let machines = MachineRegistry::builtin();
        let generators = GeneratorRegistry::builtin();
        for p in PRESETS {
            assert!(machines.build(p.machine, &MachineParams::default()).is_ok());
            assert!(generators.names().any(|n| n == p.bias));
        }
        assert!(preset("progress-biased").is_some());
        assert!(preset("progress").is_none());
        assert!(machines.build("shaped", &MachineParams::default()).is_err());
    }

    #[test]
    fn runs_come_back_in_order() {
        let mut e = Experiment::from_preset(preset("base").unwrap(), &MachineParams::default()).unwrap();
        e.runs = 3;
        e.lifespan = 2_000;
        e.base_seed = 40;
        let out = e
            .run_all(&GeneratorRegistry::builtin(), |_| Ok(RecordCollector::default()))
            .unwrap();
        assert_eq!(out.len(), 3);
        for (run, (collector, _)) in out.iter().enumerate() {
            let single =
                crate::lifetime::run_lifetime(&e.layout, &e.machine, &e.learner, &e.lifetime_config(run as u32))
                    .unwrap();
            assert_eq!(collector.records, single.records);
        }
    }

    #[test]
    fn config_round_trips() {
        let mut c = ExperimentConfig::for_preset("suboptimal-biased").unwrap();
        c.learner.d = 40;
        c.layout = Some(crate::gridworld::CANONICAL_LAYOUT.to_string());
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let e = back.build(&MachineRegistry::builtin()).unwrap();
        assert_eq!(e.learner.pool_capacity, 40);
        assert_eq!(e.learner.bias, "biased");
        assert_eq!(e.machine.name(), "suboptimal");
    }

    #[test]
    fn config_rejects_bad_values() {
        let machines = MachineRegistry::builtin();
        assert!(ExperimentConfig::for_preset("nope").is_err());
        let mut c = ExperimentConfig::for_preset("base").unwrap();
        c.learner.p1 = 0.5;
        c.learner.p2 = 0.5;
        c.learner.p3 = 0.5;
        assert!(c.build(&machines).is_err());
        let mut c = ExperimentConfig::for_preset("progress-biased").unwrap();
        c.guidance.p = 1.5;
        assert!(c.build(&machines).is_err());
        let mut c = ExperimentConfig::for_preset("base").unwrap();
        c.window = 0;
        assert!(c.build(&machines).is_err());
        assert!(ExperimentConfig::from_toml("preset = 3").is_err());
    }
}
