use rand::Rng;

use crate::types::{Observation, Position, RewardState, RewardValue};

use super::spec::{Event, RewardMachineSpec};
use super::MachineError;

/// Result of feeding one observation to the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    /// Reward state after this step (the next local goal when `expired`).
    pub state: RewardState,
    pub value: RewardValue,
    pub expired: bool,
}

/// Per-lifetime execution state of a reward machine.
#[derive(Debug, Clone)]
pub struct MachineRuntime<'a> {
    spec: &'a RewardMachineSpec,
    current: RewardState,
    elapsed: u32,
    episode_start: Position,
    flags: u32,
}

impl<'a> MachineRuntime<'a> {
    pub fn new(spec: &'a RewardMachineSpec, start: Position) -> Self {
        Self {
            spec,
            current: spec.initial_state(),
            elapsed: 0,
            episode_start: start,
            flags: 0,
        }
    }

    pub fn spec(&self) -> &'a RewardMachineSpec {
        self.spec
    }

    pub fn current_state(&self) -> RewardState {
        self.current
    }

    pub fn episode_elapsed(&self) -> u32 {
        self.elapsed
    }

    pub fn episode_start(&self) -> Position {
        self.episode_start
    }

    pub fn flag_bits(&self) -> u32 {
        self.flags
    }

    /// Consumes the observation made after one environment step.
    ///
    /// Reaching a marked cell expires the episode when a rule covers that
    /// event in the current state; otherwise the episode times out once
    /// `time_limit` steps have elapsed. Emissions with a single candidate do
    /// not draw from `rng`.
    pub fn advance<R: Rng + ?Sized>(&mut self, obs: Observation, rng: &mut R) -> Result<Advance, MachineError> {
        let spec = self.spec;
        self.elapsed += 1;
        let flags = spec.flags_before_event(self.flags, obs.poi);

        let goal = match obs.poi {
            crate::types::Poi::None => None,
            poi => spec.lookup(self.current, Event::Reached(poi), flags),
        };
        let transition = match goal {
            Some(t) => Some(t),
            None if self.elapsed >= spec.time_limit() => Some(
                spec.lookup(self.current, Event::Timeout, flags)
                    .ok_or_else(|| MachineError::NoMatchingRule {
                        state: spec.format_state(self.current),
                        event: Event::Timeout,
                    })?,
            ),
            None => None,
        };
        self.flags = spec.flags_after_event(flags, obs.poi);

        let Some(transition) = transition else {
            return Ok(Advance {
                state: self.current,
                value: RewardValue::Null,
                expired: false,
            });
        };

        let emission = &spec.rule(transition.rule).emission;
        let expr = if emission.is_deterministic() {
            emission.candidates()[0].value
        } else {
            emission.select(rng.gen::<f64>())
        };
        let value = expr.evaluate(self.episode_start.manhattan(obs.position));

        self.current = transition.next;
        self.elapsed = 0;
        self.episode_start = obs.position;
        Ok(Advance {
            state: self.current,
            value: RewardValue::Value(value),
            expired: true,
        })
    }
}
