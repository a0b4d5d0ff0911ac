//! Membership check of a reward history in the language a machine accepts.

use std::fmt;

use crate::types::{Action, Observation, Poi, Position, RewardState, RewardValue};

use super::spec::{Event, RewardMachineSpec};

/// One timestep: the observation made after acting, the action taken, the
/// reward state being pursued during the step and the emitted value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub observation: Observation,
    pub action: Action,
    pub state: RewardState,
    pub value: RewardValue,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRecord {
    /// Where the agent stood before the first step.
    pub start_position: Position,
    pub steps: Vec<TraceStep>,
    /// Reward state after the last step.
    pub final_state: RewardState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub description: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.description)
    }
}

const VALUE_TOLERANCE: f64 = 1e-12;

/// Replays the machine's deterministic structure over the trace and checks
/// that values appear exactly at expirations, states stay constant within an
/// episode, every expiration follows a rule with a value from that rule's
/// support, and no episode exceeds the time limit.
pub fn validate_trace(trace: &TraceRecord, spec: &RewardMachineSpec) -> Result<(), Violation> {
    let violation = |step: usize, description: String| Err(Violation { step, description });
    let mut state = match trace.steps.first() {
        Some(s) => s.state,
        None => return Ok(()),
    };
    if !spec.reachable_states().contains(&state) {
        return violation(0, format!("unreachable reward state {}", spec.format_state(state)));
    }
    let mut elapsed = 0u32;
    let mut flags = 0u32;
    let mut episode_start = trace.start_position;

    for (i, step) in trace.steps.iter().enumerate() {
        if step.state != state {
            return violation(
                i,
                format!(
                    "reward state changed within an episode: {} -> {}",
                    spec.format_state(state),
                    spec.format_state(step.state)
                ),
            );
        }
        elapsed += 1;
        if elapsed > spec.time_limit() {
            return violation(i, format!("episode exceeds the time limit of {}", spec.time_limit()));
        }
        let obs = step.observation;
        let seen = spec.flags_before_event(flags, obs.poi);
        let transition = match obs.poi {
            Poi::None => None,
            poi => spec.lookup(state, Event::Reached(poi), seen),
        };
        let transition = match transition {
            Some(t) => Some(t),
            None if elapsed == spec.time_limit() => match spec.lookup(state, Event::Timeout, seen) {
                Some(t) => Some(t),
                None => return violation(i, format!("no timeout rule for {}", spec.format_state(state))),
            },
            None => None,
        };
        flags = spec.flags_after_event(seen, obs.poi);

        match (transition, step.value) {
            (None, RewardValue::Null) => {}
            (None, RewardValue::Value(v)) => {
                return violation(i, format!("value {v} emitted in the middle of an episode"));
            }
            (Some(_), RewardValue::Null) if elapsed == spec.time_limit() => {
                return violation(i, format!("episode exceeds the time limit of {}", spec.time_limit()));
            }
            (Some(_), RewardValue::Null) => {
                return violation(i, "goal reached but no value emitted".into());
            }
            (Some(t), RewardValue::Value(v)) => {
                let d = episode_start.manhattan(obs.position);
                let rule = spec.rule(t.rule);
                if !rule.emission.support(d).any(|c| (c - v).abs() <= VALUE_TOLERANCE) {
                    return violation(i, format!("value {v} is not a candidate of the matching rule"));
                }
                let next = trace.steps.get(i + 1).map_or(trace.final_state, |s| s.state);
                if next != t.next {
                    return violation(
                        i,
                        format!(
                            "transition to {} does not follow the rule (expected {})",
                            spec.format_state(next),
                            spec.format_state(t.next)
                        ),
                    );
                }
                state = t.next;
                elapsed = 0;
                episode_start = obs.position;
            }
        }
    }
    if trace.final_state != state {
        return violation(
            trace.steps.len(),
            "final state differs from the last episode's state".into(),
        );
    }
    Ok(())
}
