use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::types::{Poi, RewardState};

use super::MachineError;

pub const MAX_VARIABLES: usize = 10;
pub const MAX_FLAGS: usize = 4;

/// What ends an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Reached(Poi),
    Timeout,
}

impl Event {
    pub const ALL: [Event; 5] = [
        Event::Timeout,
        Event::Reached(Poi::Food),
        Event::Reached(Poi::Home),
        Event::Reached(Poi::LeftTunnel),
        Event::Reached(Poi::RightTunnel),
    ];

    fn slot(self) -> usize {
        match self {
            Event::Timeout => 0,
            Event::Reached(Poi::Food) => 1,
            Event::Reached(Poi::Home) => 2,
            Event::Reached(Poi::LeftTunnel) => 3,
            Event::Reached(Poi::RightTunnel) => 4,
            Event::Reached(Poi::None) => unreachable!("NONE is never reached"),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Timeout => f.write_str("timeout"),
            Event::Reached(poi) => write!(f, "reached:{}", poi.symbol()),
        }
    }
}

/// A partial assignment used both as a guard and as a state update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Literals {
    mask: u32,
    values: u32,
}

impl Literals {
    pub fn new(literals: impl IntoIterator<Item = (usize, bool)>) -> Self {
        let mut out = Literals::default();
        for (var, value) in literals {
            out.mask |= 1 << var;
            if value {
                out.values |= 1 << var;
            } else {
                out.values &= !(1 << var);
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        (0..32)
            .filter(|i| self.mask & (1 << i) != 0)
            .map(|i| (i, self.values & (1 << i) != 0))
    }

    #[inline]
    pub fn matches(&self, bits: u32) -> bool {
        bits & self.mask == self.values
    }

    #[inline]
    pub fn apply(&self, bits: u32) -> u32 {
        (bits & !self.mask) | self.values
    }
}

/// The value of one emission candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueExpr {
    Constant(f64),
    /// `coef` times the Manhattan displacement between the episode's start
    /// and end positions.
    Progress {
        coef: f64,
    },
}

impl ValueExpr {
    pub fn evaluate(self, displacement: u32) -> f64 {
        match self {
            ValueExpr::Constant(v) => v,
            ValueExpr::Progress { coef } => coef * f64::from(displacement),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub value: ValueExpr,
    pub probability: f64,
}

/// A finite distribution over reward values.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    candidates: Vec<Candidate>,
}

impl Emission {
    pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

    pub fn new(candidates: Vec<Candidate>) -> Result<Self, MachineError> {
        if candidates.is_empty() {
            return Err(MachineError::InvalidEmission("no candidates".into()));
        }
        if let Some(c) = candidates.iter().find(|c| !(0.0..=1.0).contains(&c.probability)) {
            return Err(MachineError::InvalidEmission(format!(
                "probability {} outside [0, 1]",
                c.probability
            )));
        }
        let total: f64 = candidates.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > Self::PROBABILITY_TOLERANCE {
            return Err(MachineError::InvalidEmission(format!("probabilities sum to {total}")));
        }
        Ok(Self { candidates })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            candidates: vec![Candidate {
                value: ValueExpr::Constant(value),
                probability: 1.0,
            }],
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn is_deterministic(&self) -> bool {
        self.candidates.len() == 1
    }

    /// Picks the candidate selected by a uniform draw `u` in `[0, 1)`.
    pub fn select(&self, u: f64) -> ValueExpr {
        let mut cumulative = 0.0;
        for c in &self.candidates {
            cumulative += c.probability;
            if u < cumulative {
                return c.value;
            }
        }
        // rounding slack: fall back to the last candidate with mass
        self.candidates
            .iter()
            .rev()
            .find(|c| c.probability > 0.0)
            .unwrap_or(&self.candidates[self.candidates.len() - 1])
            .value
    }

    /// Values this emission can produce for a given displacement, ignoring
    /// zero-probability candidates.
    pub fn support(&self, displacement: u32) -> impl Iterator<Item = f64> + '_ {
        self.candidates
            .iter()
            .filter(|c| c.probability > 0.0)
            .map(move |c| c.value.evaluate(displacement))
    }
}

/// A run-local Boolean tracked from observations, e.g. whether the left
/// tunnel was visited since the last visit to food or home.
///
/// Set-on cells are applied before the step's expiration event is evaluated,
/// reset-on cells after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagSpec {
    pub name: String,
    pub set_on: Vec<Poi>,
    pub reset_on: Vec<Poi>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub state: Literals,
    pub event: Event,
    pub flags: Literals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub guard: Guard,
    pub update: Literals,
    pub emission: Emission,
}

/// Outcome of a rule lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub rule: usize,
    pub next: RewardState,
}

/// A validated reward machine.
///
/// Construction checks that the rules are mutually exclusive over every
/// reachable (state, event, flags) triple and that every reachable state has a
/// timeout rule, then precomputes a lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMachineSpec {
    name: String,
    variables: Vec<String>,
    flags: Vec<FlagSpec>,
    initial: RewardState,
    time_limit: u32,
    rules: Vec<Rule>,
    table: Vec<u16>,
    reachable: Vec<RewardState>,
    flag_set_mask: [u8; 5],
    flag_reset_mask: [u8; 5],
}

const NO_RULE: u16 = u16::MAX;

fn poi_index(poi: Poi) -> usize {
    match poi {
        Poi::None => 0,
        Poi::Food => 1,
        Poi::Home => 2,
        Poi::LeftTunnel => 3,
        Poi::RightTunnel => 4,
    }
}

impl RewardMachineSpec {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<String>,
        flags: Vec<FlagSpec>,
        initial: RewardState,
        time_limit: u32,
        rules: Vec<Rule>,
    ) -> Result<Self, MachineError> {
        if variables.is_empty() || variables.len() > MAX_VARIABLES {
            return Err(MachineError::Invalid(format!(
                "expected 1..={MAX_VARIABLES} variables, got {}",
                variables.len()
            )));
        }
        let unique: BTreeSet<&String> = variables.iter().chain(flags.iter().map(|f| &f.name)).collect();
        if unique.len() != variables.len() + flags.len() {
            return Err(MachineError::Invalid("duplicate variable or flag name".into()));
        }
        if flags.len() > MAX_FLAGS {
            return Err(MachineError::Invalid(format!("at most {MAX_FLAGS} flags")));
        }
        if time_limit == 0 {
            return Err(MachineError::Invalid("time limit must be positive".into()));
        }
        if rules.len() >= NO_RULE as usize {
            return Err(MachineError::Invalid("too many rules".into()));
        }
        let state_space = 1u32 << variables.len();
        if initial.bits() >= state_space {
            return Err(MachineError::Invalid("initial state sets undeclared variables".into()));
        }
        for rule in &rules {
            let undeclared = |l: &Literals| l.iter().any(|(v, _)| v >= variables.len());
            if undeclared(&rule.guard.state) || undeclared(&rule.update) {
                return Err(MachineError::Invalid("rule references an undeclared variable".into()));
            }
            if rule.guard.flags.iter().any(|(f, _)| f >= flags.len()) {
                return Err(MachineError::Invalid("rule references an undeclared flag".into()));
            }
            if rule.guard.event == Event::Reached(Poi::None) {
                return Err(MachineError::Invalid("events must name a marked cell".into()));
            }
        }

        let mut flag_set_mask = [0u8; 5];
        let mut flag_reset_mask = [0u8; 5];
        for (i, flag) in flags.iter().enumerate() {
            for &poi in &flag.set_on {
                flag_set_mask[poi_index(poi)] |= 1 << i;
            }
            for &poi in &flag.reset_on {
                flag_reset_mask[poi_index(poi)] |= 1 << i;
            }
        }

        let flag_space = 1usize << flags.len();
        let mut spec = Self {
            name: name.into(),
            variables,
            flags,
            initial,
            time_limit,
            rules,
            table: vec![NO_RULE; state_space as usize * Event::ALL.len() * flag_space],
            reachable: Vec::new(),
            flag_set_mask,
            flag_reset_mask,
        };

        // fill the table for every state; ambiguity and gaps only matter for
        // reachable states, checked below
        let mut ambiguous = Vec::new();
        for bits in 0..state_space {
            for event in Event::ALL {
                for flag_bits in 0..flag_space as u32 {
                    let mut matching = spec.rules.iter().enumerate().filter(|(_, r)| {
                        r.guard.event == event && r.guard.state.matches(bits) && r.guard.flags.matches(flag_bits)
                    });
                    if let Some((i, _)) = matching.next() {
                        let idx = spec.table_index(RewardState::from_bits(bits), event, flag_bits);
                        spec.table[idx] = i as u16;
                        if matching.next().is_some() {
                            ambiguous.push((RewardState::from_bits(bits), event, flag_bits));
                        }
                    }
                }
            }
        }

        let mut seen = vec![false; state_space as usize];
        let mut queue = VecDeque::from([initial]);
        seen[initial.bits() as usize] = true;
        while let Some(state) = queue.pop_front() {
            spec.reachable.push(state);
            for event in Event::ALL {
                for flag_bits in 0..flag_space as u32 {
                    if let Some(&(s, e, f)) = ambiguous
                        .iter()
                        .find(|(s, e, f)| *s == state && *e == event && *f == flag_bits)
                    {
                        return Err(MachineError::AmbiguousRules {
                            state: spec.format_state(s),
                            event: e,
                            flags: f,
                        });
                    }
                    match spec.lookup(state, event, flag_bits) {
                        Some(t) => {
                            if !seen[t.next.bits() as usize] {
                                seen[t.next.bits() as usize] = true;
                                queue.push_back(t.next);
                            }
                        }
                        None if event == Event::Timeout => {
                            return Err(MachineError::NoMatchingRule {
                                state: spec.format_state(state),
                                event,
                            })
                        }
                        None => {}
                    }
                }
            }
        }
        spec.reachable.sort();
        Ok(spec)
    }

    #[inline]
    fn table_index(&self, state: RewardState, event: Event, flag_bits: u32) -> usize {
        ((state.bits() as usize * Event::ALL.len()) + event.slot()) << self.flags.len() | flag_bits as usize
    }

    /// The rule matching a (state, event, flags) triple, if any.
    #[inline]
    pub fn lookup(&self, state: RewardState, event: Event, flag_bits: u32) -> Option<Transition> {
        let rule = *self.table.get(self.table_index(state, event, flag_bits))?;
        (rule != NO_RULE).then(|| Transition {
            rule: rule as usize,
            next: RewardState::from_bits(self.rules[rule as usize].update.apply(state.bits())),
        })
    }

    /// Flags after observing `poi`, before event evaluation.
    #[inline]
    pub(crate) fn flags_before_event(&self, flag_bits: u32, poi: Poi) -> u32 {
        flag_bits | u32::from(self.flag_set_mask[poi_index(poi)])
    }

    /// Flags after the step's event has been evaluated.
    #[inline]
    pub(crate) fn flags_after_event(&self, flag_bits: u32, poi: Poi) -> u32 {
        flag_bits & !u32::from(self.flag_reset_mask[poi_index(poi)])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn flags(&self) -> &[FlagSpec] {
        &self.flags
    }

    pub fn flag_index(&self, name: &str) -> Option<usize> {
        self.flags.iter().position(|f| f.name == name)
    }

    pub fn initial_state(&self) -> RewardState {
        self.initial
    }

    pub fn time_limit(&self) -> u32 {
        self.time_limit
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    /// States reachable from the initial state, in bit order.
    pub fn reachable_states(&self) -> &[RewardState] {
        &self.reachable
    }

    /// Builds a state from the names of the variables that are true.
    pub fn state_of(&self, true_vars: &[&str]) -> Result<RewardState, MachineError> {
        true_vars.iter().try_fold(RewardState::default(), |s, name| {
            self.variable_index(name)
                .map(|i| s.with(i, true))
                .ok_or_else(|| MachineError::UnknownName((*name).to_string()))
        })
    }

    /// Canonical conjunction string, e.g. `GET_FOOD&!TIMED_OUT`.
    pub fn format_state(&self, state: RewardState) -> String {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| if state.get(i) { v.clone() } else { format!("!{v}") })
            .collect::<Vec<_>>()
            .join("&")
    }

    /// Inverse of [`format_state`](Self::format_state); every variable must
    /// appear exactly once.
    pub fn parse_state(&self, text: &str) -> Result<RewardState, MachineError> {
        let mut state = RewardState::default();
        let mut assigned = 0u32;
        for literal in text.split('&').map(str::trim) {
            let (name, value) = match literal.strip_prefix('!') {
                Some(rest) => (rest, false),
                None => (literal, true),
            };
            let i = self
                .variable_index(name)
                .ok_or_else(|| MachineError::UnknownName(name.to_string()))?;
            if assigned & (1 << i) != 0 {
                return Err(MachineError::BadStateString(text.to_string()));
            }
            assigned |= 1 << i;
            state = state.with(i, value);
        }
        if assigned.count_ones() as usize != self.variables.len() {
            return Err(MachineError::BadStateString(text.to_string()));
        }
        Ok(state)
    }
}
