//! The three food-gathering reward designs.

use crate::types::{Poi, RewardState};

use super::spec::{Candidate, Emission, Event, FlagSpec, Guard, Literals, RewardMachineSpec, Rule, ValueExpr};
use super::MachineError;

pub const GET_FOOD: &str = "GET_FOOD";
pub const TIMED_OUT: &str = "TIMED_OUT";
pub const VISITED_LEFT: &str = "VISITED_LEFT";
pub const VISITED_LEFT_FLAG: &str = "visited_left";

pub const TIME_LIMIT: u32 = 24;
pub const DEFAULT_GUIDANCE_P: f64 = 0.8;
pub const DEFAULT_GUIDANCE_COEF: f64 = 0.01;

pub const SUCCESS_VALUE: f64 = 1.0;
pub const FIRST_TIMEOUT_VALUE: f64 = -1.0;
pub const REPEAT_TIMEOUT_VALUE: f64 = 0.0;
pub const LEFT_ROUTE_SUCCESS_VALUE: f64 = 0.8;
pub const LEFT_GUIDANCE_HIGH: f64 = 0.6;
pub const LEFT_GUIDANCE_LOW: f64 = -0.2;
pub const LEFT_GUIDANCE_P: f64 = 0.8;

const GF: usize = 0;
const TO: usize = 1;
const VL: usize = 2;

fn rule(
    state: &[(usize, bool)],
    event: Event,
    flags: &[(usize, bool)],
    update: &[(usize, bool)],
    emission: Emission,
) -> Rule {
    Rule {
        guard: Guard {
            state: Literals::new(state.iter().copied()),
            event,
            flags: Literals::new(flags.iter().copied()),
        },
        update: Literals::new(update.iter().copied()),
        emission,
    }
}

fn progress_or(base: f64, p: f64, coef: f64) -> Result<Emission, MachineError> {
    Emission::new(vec![
        Candidate {
            value: ValueExpr::Progress { coef },
            probability: p,
        },
        Candidate {
            value: ValueExpr::Constant(base),
            probability: 1.0 - p,
        },
    ])
}

fn base_with_timeouts(name: &str, first: Emission, repeat: Emission) -> RewardMachineSpec {
    let reached = Event::Reached;
    let rules = vec![
        rule(
            &[(GF, true)],
            reached(Poi::Food),
            &[],
            &[(GF, false), (TO, false)],
            Emission::constant(SUCCESS_VALUE),
        ),
        rule(
            &[(GF, false)],
            reached(Poi::Home),
            &[],
            &[(GF, true), (TO, false)],
            Emission::constant(SUCCESS_VALUE),
        ),
        rule(&[(TO, false)], Event::Timeout, &[], &[(TO, true)], first),
        rule(&[(TO, true)], Event::Timeout, &[], &[], repeat),
    ];
    RewardMachineSpec::new(
        name,
        vec![GET_FOOD.into(), TIMED_OUT.into()],
        Vec::new(),
        RewardState::default().with(GF, true),
        TIME_LIMIT,
        rules,
    )
    .expect("base machine is well formed")
}

/// `+1` for reaching the current goal, `-1` for the first timeout and `0` for
/// each repeated timeout.
pub fn build_base_machine() -> RewardMachineSpec {
    base_with_timeouts(
        "base",
        Emission::constant(FIRST_TIMEOUT_VALUE),
        Emission::constant(REPEAT_TIMEOUT_VALUE),
    )
}

/// The base machine whose timeouts pay `coef * d` with probability `p`, `d`
/// being the episode's Manhattan displacement, and the base value otherwise.
pub fn build_progress_machine(p: f64, coef: f64) -> Result<RewardMachineSpec, MachineError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MachineError::InvalidEmission(format!(
            "guidance probability {p} outside [0, 1]"
        )));
    }
    if !coef.is_finite() {
        return Err(MachineError::InvalidEmission(
            "guidance coefficient must be finite".into(),
        ));
    }
    Ok(base_with_timeouts(
        "progress",
        progress_or(FIRST_TIMEOUT_VALUE, p, coef)?,
        progress_or(REPEAT_TIMEOUT_VALUE, p, coef)?,
    ))
}

/// Guides the agent toward the left tunnel: a first timeout after visiting L
/// pays `+0.6` (p = 0.8) or `-0.2` and sets `VISITED_LEFT`; reaching the goal
/// through L pays `+0.8` instead of `+1`.
pub fn build_suboptimal_machine() -> RewardMachineSpec {
    let reached = Event::Reached;
    let clear = [(GF, false), (TO, false), (VL, false)];
    let home_clear = [(GF, true), (TO, false), (VL, false)];
    let left = 0;
    let guidance = Emission::new(vec![
        Candidate {
            value: ValueExpr::Constant(LEFT_GUIDANCE_HIGH),
            probability: LEFT_GUIDANCE_P,
        },
        Candidate {
            value: ValueExpr::Constant(LEFT_GUIDANCE_LOW),
            probability: 1.0 - LEFT_GUIDANCE_P,
        },
    ])
    .expect("valid guidance emission");
    let rules = vec![
        rule(
            &[(GF, true)],
            reached(Poi::Food),
            &[(left, false)],
            &clear,
            Emission::constant(SUCCESS_VALUE),
        ),
        rule(
            &[(GF, true)],
            reached(Poi::Food),
            &[(left, true)],
            &clear,
            Emission::constant(LEFT_ROUTE_SUCCESS_VALUE),
        ),
        rule(
            &[(GF, false)],
            reached(Poi::Home),
            &[(left, false)],
            &home_clear,
            Emission::constant(SUCCESS_VALUE),
        ),
        rule(
            &[(GF, false)],
            reached(Poi::Home),
            &[(left, true)],
            &home_clear,
            Emission::constant(LEFT_ROUTE_SUCCESS_VALUE),
        ),
        rule(
            &[(TO, false), (VL, false)],
            Event::Timeout,
            &[(left, false)],
            &[(TO, true)],
            Emission::constant(FIRST_TIMEOUT_VALUE),
        ),
        rule(
            &[(TO, false), (VL, false)],
            Event::Timeout,
            &[(left, true)],
            &[(TO, true), (VL, true)],
            guidance,
        ),
        rule(
            &[(TO, true), (VL, false)],
            Event::Timeout,
            &[],
            &[],
            Emission::constant(REPEAT_TIMEOUT_VALUE),
        ),
        rule(
            &[(VL, true)],
            Event::Timeout,
            &[],
            &[],
            Emission::constant(REPEAT_TIMEOUT_VALUE),
        ),
    ];
    RewardMachineSpec::new(
        "suboptimal",
        vec![GET_FOOD.into(), TIMED_OUT.into(), VISITED_LEFT.into()],
        vec![FlagSpec {
            name: VISITED_LEFT_FLAG.into(),
            set_on: vec![Poi::LeftTunnel],
            reset_on: vec![Poi::Food, Poi::Home],
        }],
        RewardState::default().with(GF, true),
        TIME_LIMIT,
        rules,
    )
    .expect("sub-optimal machine is well formed")
}
