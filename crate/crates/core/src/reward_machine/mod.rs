//! The reward language: a Mealy-style machine over Boolean goal variables.
//!
//! Driven by the agent's observations, a [`MachineRuntime`] tracks the current
//! reward state (the local goal), detects when an episode expires (goal
//! reached or time limit hit) and emits a possibly stochastic reward value.
//! [`validate_trace`] checks that a recorded reward history is one the machine
//! can produce.

mod builders;
mod file;
mod runtime;
mod spec;
mod trace;

use thiserror::Error;

pub use builders::*;
pub use runtime::{Advance, MachineRuntime};
pub use spec::{
    Candidate, Emission, Event, FlagSpec, Guard, Literals, RewardMachineSpec, Rule, Transition, ValueExpr, MAX_FLAGS,
    MAX_VARIABLES,
};
pub use trace::{validate_trace, TraceRecord, TraceStep, Violation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MachineError {
    #[error("no rule matches state {state} on {event}")]
    NoMatchingRule { state: String, event: Event },
    #[error("several rules match state {state} on {event} (flags {flags:#b})")]
    AmbiguousRules { state: String, event: Event, flags: u32 },
    #[error("invalid emission: {0}")]
    InvalidEmission(String),
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("unknown name {0:?}")]
    UnknownName(String),
    #[error("malformed state string {0:?}")]
    BadStateString(String),
    #[error("cannot parse machine file: {0}")]
    Parse(String),
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::types::{Action, Observation, Poi, Position, RewardState, RewardValue};

    fn obs(row: i32, col: i32, poi: Poi) -> Observation {
        Observation {
            position: Position::new(row, col),
            poi,
        }
    }

    fn plain(row: i32, col: i32) -> Observation {
        obs(row, col, Poi::None)
    }

    fn st(spec: &RewardMachineSpec, vars: &[&str]) -> RewardState {
        spec.state_of(vars).unwrap()
    }

    fn transition(spec: &RewardMachineSpec, state: RewardState, event: Event, flags: u32) -> (RewardState, Vec<f64>) {
        let t = spec.lookup(state, event, flags).expect("rule");
        (t.next, spec.rule(t.rule).emission.support(0).collect())
    }

    #[test]
    fn base_success_and_timeouts() {
        let m = build_base_machine();
        let gf = st(&m, &[GET_FOOD]);
        assert_eq!(
            transition(&m, gf, Event::Reached(Poi::Food), 0),
            (st(&m, &[]), vec![1.0])
        );
        assert_eq!(
            transition(&m, gf, Event::Timeout, 0),
            (st(&m, &[GET_FOOD, TIMED_OUT]), vec![-1.0])
        );
        let gf_to = st(&m, &[GET_FOOD, TIMED_OUT]);
        assert_eq!(transition(&m, gf_to, Event::Timeout, 0), (gf_to, vec![0.0]));
        assert_eq!(m.time_limit(), 24);
        assert_eq!(m.reachable_states().len(), 4);
    }

    #[test]
    fn progress_emission_uses_displacement() {
        let m = build_progress_machine(0.8, 0.01).unwrap();
        let gf = st(&m, &[GET_FOOD]);
        let t = m.lookup(gf, Event::Timeout, 0).unwrap();
        let emission = &m.rule(t.rule).emission;
        let c = emission.candidates();
        assert_eq!(c.len(), 2);
        assert!((c[0].value.evaluate(10) - 0.1).abs() < 1e-12);
        assert_eq!(c[0].probability, 0.8);
        assert_eq!(c[1].value.evaluate(10), -1.0);
        assert!((c[1].probability - 0.2).abs() < 1e-12);
        assert_eq!(c[0].value.evaluate(0), 0.0);
        // success is never guided
        let s = m.lookup(gf, Event::Reached(Poi::Food), 0).unwrap();
        assert!(m.rule(s.rule).emission.is_deterministic());
        assert!(build_progress_machine(1.5, 0.01).is_err());
    }

    #[test]
    fn suboptimal_branches() {
        let m = build_suboptimal_machine();
        let flag = 1;
        let start = st(&m, &[GET_FOOD]);
        let (next, values) = transition(&m, start, Event::Timeout, flag);
        assert_eq!(next, st(&m, &[GET_FOOD, TIMED_OUT, VISITED_LEFT]));
        assert_eq!(values, vec![0.6, -0.2]);
        assert_eq!(
            transition(&m, start, Event::Reached(Poi::Food), flag),
            (st(&m, &[]), vec![0.8])
        );
        assert_eq!(
            transition(&m, start, Event::Reached(Poi::Food), 0),
            (st(&m, &[]), vec![1.0])
        );
        assert!(m.reachable_states().len() <= 8);
    }

    #[test]
    fn guidance_value_ordering() {
        // b < value(neither) < a < value(goal)
        let (b, a) = (LEFT_GUIDANCE_LOW, LEFT_GUIDANCE_HIGH);
        let neither = REPEAT_TIMEOUT_VALUE;
        assert!(b < neither && neither < a && a < LEFT_ROUTE_SUCCESS_VALUE && a < SUCCESS_VALUE);
    }

    #[test]
    fn mid_episode_step_emits_null() {
        let m = build_base_machine();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rt.advance(plain(8, 5), &mut rng).unwrap();
        assert_eq!(
            a,
            Advance {
                state: m.initial_state(),
                value: RewardValue::Null,
                expired: false
            }
        );
        assert_eq!(rt.episode_elapsed(), 1);
    }

    #[test]
    fn timeout_fires_at_limit() {
        let m = build_base_machine();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..23 {
            assert!(!rt.advance(plain(8, 5), &mut rng).unwrap().expired);
        }
        let a = rt.advance(plain(8, 5), &mut rng).unwrap();
        assert!(a.expired);
        assert_eq!(a.value, RewardValue::Value(-1.0));
        assert_eq!(a.state, st(&m, &[GET_FOOD, TIMED_OUT]));
        assert_eq!(rt.episode_elapsed(), 0);
        assert_eq!(rt.episode_start(), Position::new(8, 5));
    }

    #[test]
    fn deterministic_emission_leaves_rng_alone() {
        let m = build_base_machine();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reference = rng.clone();
        rt.advance(obs(1, 5, Poi::Food), &mut rng).unwrap();
        assert_eq!(rng, reference);
    }

    #[test]
    fn progress_runtime_uses_episode_displacement() {
        // p = 1 makes the guided branch certain
        let m = build_progress_machine(1.0, 0.01).unwrap();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..24 {
            rt.advance(plain(3, 1), &mut rng).unwrap();
        }
        // |9-3| + |5-1| = 10
        assert_eq!(rt.current_state(), st(&m, &[GET_FOOD, TIMED_OUT]));
        let v = {
            let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
            let mut last = None;
            for _ in 0..24 {
                last = Some(rt.advance(plain(3, 1), &mut rng).unwrap());
            }
            last.unwrap().value.value().unwrap()
        };
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn left_flag_persists_across_timeouts_and_resets_on_goal() {
        let m = build_suboptimal_machine();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rt.advance(obs(5, 1, Poi::LeftTunnel), &mut rng).unwrap();
        for _ in 0..23 {
            rt.advance(plain(4, 1), &mut rng).unwrap();
        }
        assert_eq!(rt.current_state(), st(&m, &[GET_FOOD, TIMED_OUT, VISITED_LEFT]));
        assert_eq!(rt.flag_bits(), 1);
        let a = rt.advance(obs(1, 5, Poi::Food), &mut rng).unwrap();
        assert_eq!(a.value, RewardValue::Value(0.8));
        assert_eq!(a.state, st(&m, &[]));
        assert_eq!(rt.flag_bits(), 0);
    }

    #[test]
    fn returning_home_clears_left_flag() {
        let m = build_suboptimal_machine();
        let mut rt = MachineRuntime::new(&m, Position::new(9, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rt.advance(obs(5, 1, Poi::LeftTunnel), &mut rng).unwrap();
        rt.advance(obs(9, 5, Poi::Home), &mut rng).unwrap();
        assert_eq!(rt.flag_bits(), 0);
        let a = rt.advance(obs(1, 5, Poi::Food), &mut rng).unwrap();
        assert_eq!(a.value, RewardValue::Value(1.0));
    }

    #[test]
    fn missing_timeout_rule_is_rejected() {
        let mut rules = build_base_machine().rules().to_vec();
        rules.pop();
        let err = RewardMachineSpec::new(
            "broken",
            vec![GET_FOOD.into(), TIMED_OUT.into()],
            vec![],
            RewardState::default().with(0, true),
            24,
            rules,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MachineError::NoMatchingRule {
                event: Event::Timeout,
                ..
            }
        ));
    }

    #[test]
    fn overlapping_rules_are_rejected() {
        let mut rules = build_base_machine().rules().to_vec();
        rules.push(Rule {
            guard: Guard {
                state: Literals::new([(0, true)]),
                event: Event::Timeout,
                flags: Literals::default(),
            },
            update: Literals::default(),
            emission: Emission::constant(0.0),
        });
        let err = RewardMachineSpec::new(
            "broken",
            vec![GET_FOOD.into(), TIMED_OUT.into()],
            vec![],
            RewardState::default().with(0, true),
            24,
            rules,
        )
        .unwrap_err();
        assert!(matches!(err, MachineError::AmbiguousRules { .. }));
    }

    #[test]
    fn emission_probabilities_must_sum_to_one() {
        let c = |v, p| Candidate {
            value: ValueExpr::Constant(v),
            probability: p,
        };
        assert!(Emission::new(vec![c(1.0, 0.5), c(0.0, 0.4)]).is_err());
        assert!(Emission::new(vec![]).is_err());
        assert!(Emission::new(vec![c(1.0, 1.2), c(0.0, -0.2)]).is_err());
        assert!(Emission::new(vec![c(1.0, 0.5), c(0.0, 0.5 + 1e-12)]).is_ok());
    }

    #[test]
    fn state_strings_round_trip() {
        let m = build_suboptimal_machine();
        for &s in m.reachable_states() {
            assert_eq!(m.parse_state(&m.format_state(s)).unwrap(), s);
        }
        assert_eq!(m.format_state(st(&m, &[GET_FOOD])), "GET_FOOD&!TIMED_OUT&!VISITED_LEFT");
        assert!(m.parse_state("GET_FOOD&!TIMED_OUT").is_err());
        assert!(m.parse_state("GET_FOOD&GET_FOOD&!TIMED_OUT").is_err());
    }

    #[test]
    fn toml_round_trip_for_builders() {
        for m in [
            build_base_machine(),
            build_progress_machine(0.8, 0.01).unwrap(),
            build_suboptimal_machine(),
        ] {
            let text = m.to_toml();
            assert_eq!(RewardMachineSpec::from_toml(&text).unwrap(), m, "{text}");
        }
    }

    #[test]
    fn toml_errors_are_reported() {
        assert!(matches!(
            RewardMachineSpec::from_toml("name = 3"),
            Err(MachineError::Parse(_))
        ));
        let text = build_base_machine().to_toml().replace("reached:F", "reached:Q");
        assert!(matches!(
            RewardMachineSpec::from_toml(&text),
            Err(MachineError::UnknownName(_))
        ));
    }

    fn record(m: &RewardMachineSpec, start: Position, path: &[Observation], seed: u64) -> TraceRecord {
        let mut rt = MachineRuntime::new(m, start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::new();
        for &o in path {
            let state = rt.current_state();
            let a = rt.advance(o, &mut rng).unwrap();
            steps.push(TraceStep {
                observation: o,
                action: Action::Up,
                state,
                value: a.value,
            });
        }
        TraceRecord {
            start_position: start,
            steps,
            final_state: rt.current_state(),
        }
    }

    fn wander() -> Vec<Observation> {
        let mut path = vec![plain(8, 5); 30];
        path.push(obs(5, 1, Poi::LeftTunnel));
        path.extend(vec![plain(4, 1); 30]);
        path.push(obs(1, 5, Poi::Food));
        path.extend(vec![plain(2, 5); 50]);
        path.push(obs(9, 5, Poi::Home));
        path
    }

    #[test]
    fn validator_accepts_generated_traces() {
        for m in [
            build_base_machine(),
            build_progress_machine(0.8, 0.01).unwrap(),
            build_suboptimal_machine(),
        ] {
            for seed in 0..20 {
                let trace = record(&m, Position::new(9, 5), &wander(), seed);
                assert_eq!(validate_trace(&trace, &m), Ok(()));
            }
        }
    }

    #[test]
    fn validator_rejects_mid_episode_value() {
        let m = build_base_machine();
        let mut trace = record(&m, Position::new(9, 5), &wander(), 0);
        trace.steps[3].value = RewardValue::Value(1.0);
        let v = validate_trace(&trace, &m).unwrap_err();
        assert_eq!(v.step, 3);
    }

    #[test]
    fn validator_rejects_overlong_episode() {
        let m = build_base_machine();
        let mut trace = record(&m, Position::new(9, 5), &vec![plain(8, 5); 25], 0);
        // pretend the 24th step did not expire
        trace.steps[23].value = RewardValue::Null;
        for s in &mut trace.steps {
            s.state = m.initial_state();
        }
        let v = validate_trace(&trace, &m).unwrap_err();
        assert!(v.description.contains("time limit"), "{v}");
    }

    #[test]
    fn validator_rejects_foreign_values_and_transitions() {
        let m = build_suboptimal_machine();
        let trace = record(&m, Position::new(9, 5), &wander(), 4);
        let expiry = trace.steps.iter().position(|s| !s.value.is_null()).unwrap();
        let mut bad = trace.clone();
        bad.steps[expiry].value = RewardValue::Value(0.5);
        assert!(validate_trace(&bad, &m).is_err());
        let mut bad = trace.clone();
        bad.steps[expiry + 1].state = m.initial_state().with(1, false).with(0, false);
        assert!(validate_trace(&bad, &m).is_err());
    }
}
