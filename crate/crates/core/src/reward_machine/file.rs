//! TOML representation of a reward machine.
//!
//! ```toml
//! name = "base"
//! variables = ["GET_FOOD", "TIMED_OUT"]
//! initial = ["GET_FOOD"]          # variables that start out true
//! time_limit = 24
//!
//! [[flags]]                       # optional observation-tracked flags
//! name = "visited_left"
//! set_on = ["L"]
//! reset_on = ["F", "H"]
//!
//! [[rules]]
//! when = { GET_FOOD = true }      # partial assignment guard
//! event = "reached:F"             # or "timeout"
//! flags = { visited_left = false } # optional
//! set = { GET_FOOD = false, TIMED_OUT = false }
//! emit = [{ value = 1.0 }]
//!
//! [[rules]]
//! when = { TIMED_OUT = false }
//! event = "timeout"
//! set = { TIMED_OUT = true }
//! emit = [{ progress = 0.01, p = 0.8 }, { value = -1.0, p = 0.2 }]
//! ```
//!
//! A candidate carries either a constant `value` or a `progress` coefficient
//! (multiplied by the episode's Manhattan displacement). `p` defaults to 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{Poi, RewardState};

use super::spec::{Candidate, Emission, Event, FlagSpec, Guard, Literals, RewardMachineSpec, Rule, ValueExpr};
use super::MachineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineFile {
    name: String,
    variables: Vec<String>,
    initial: Vec<String>,
    time_limit: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flags: Vec<FlagFile>,
    rules: Vec<RuleFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagFile {
    name: String,
    set_on: Vec<String>,
    reset_on: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    when: BTreeMap<String, bool>,
    event: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    flags: BTreeMap<String, bool>,
    #[serde(default)]
    set: BTreeMap<String, bool>,
    emit: Vec<CandidateFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    progress: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
}

fn parse_poi(text: &str) -> Result<Poi, MachineError> {
    let mut chars = text.chars();
    match (chars.next().and_then(Poi::from_symbol), chars.next()) {
        (Some(poi), None) => Ok(poi),
        _ => Err(MachineError::UnknownName(text.to_string())),
    }
}

fn parse_event(text: &str) -> Result<Event, MachineError> {
    match text {
        "timeout" => Ok(Event::Timeout),
        _ => match text.strip_prefix("reached:") {
            Some(poi) => Ok(Event::Reached(parse_poi(poi)?)),
            None => Err(MachineError::UnknownName(text.to_string())),
        },
    }
}

fn literals(map: &BTreeMap<String, bool>, names: &[String]) -> Result<Literals, MachineError> {
    let resolved = map
        .iter()
        .map(|(name, &value)| {
            names
                .iter()
                .position(|n| n == name)
                .map(|i| (i, value))
                .ok_or_else(|| MachineError::UnknownName(name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Literals::new(resolved))
}

fn literal_map(literals: &Literals, names: &[String]) -> BTreeMap<String, bool> {
    literals.iter().map(|(i, v)| (names[i].clone(), v)).collect()
}

impl RewardMachineSpec {
    pub fn from_toml(text: &str) -> Result<Self, MachineError> {
        let file: MachineFile = toml::from_str(text).map_err(|e| MachineError::Parse(e.to_string()))?;
        let flag_names: Vec<String> = file.flags.iter().map(|f| f.name.clone()).collect();
        let flags = file
            .flags
            .iter()
            .map(|f| {
                Ok(FlagSpec {
                    name: f.name.clone(),
                    set_on: f.set_on.iter().map(|p| parse_poi(p)).collect::<Result<_, _>>()?,
                    reset_on: f.reset_on.iter().map(|p| parse_poi(p)).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, MachineError>>()?;
        let mut initial = RewardState::default();
        for name in &file.initial {
            let i = file
                .variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| MachineError::UnknownName(name.clone()))?;
            initial = initial.with(i, true);
        }
        let rules = file
            .rules
            .iter()
            .map(|r| {
                let candidates = r
                    .emit
                    .iter()
                    .map(|c| {
                        let value = match (c.value, c.progress) {
                            (Some(v), None) => ValueExpr::Constant(v),
                            (None, Some(coef)) => ValueExpr::Progress { coef },
                            _ => {
                                return Err(MachineError::InvalidEmission(
                                    "candidate needs exactly one of `value` or `progress`".into(),
                                ))
                            }
                        };
                        Ok(Candidate {
                            value,
                            probability: c.p.unwrap_or(1.0),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Rule {
                    guard: Guard {
                        state: literals(&r.when, &file.variables)?,
                        event: parse_event(&r.event)?,
                        flags: literals(&r.flags, &flag_names)?,
                    },
                    update: literals(&r.set, &file.variables)?,
                    emission: Emission::new(candidates)?,
                })
            })
            .collect::<Result<Vec<_>, MachineError>>()?;
        RewardMachineSpec::new(file.name, file.variables, flags, initial, file.time_limit, rules)
    }

    pub fn to_toml(&self) -> String {
        let names = self.variables();
        let flag_names: Vec<String> = self.flags().iter().map(|f| f.name.clone()).collect();
        let symbols = |pois: &[Poi]| pois.iter().map(|p| p.symbol().to_string()).collect();
        let file = MachineFile {
            name: self.name().to_string(),
            variables: names.to_vec(),
            initial: names
                .iter()
                .enumerate()
                .filter(|(i, _)| self.initial_state().get(*i))
                .map(|(_, n)| n.clone())
                .collect(),
            time_limit: self.time_limit(),
            flags: self
                .flags()
                .iter()
                .map(|f| FlagFile {
                    name: f.name.clone(),
                    set_on: symbols(&f.set_on),
                    reset_on: symbols(&f.reset_on),
                })
                .collect(),
            rules: self
                .rules()
                .iter()
                .map(|r| RuleFile {
                    when: literal_map(&r.guard.state, names),
                    event: r.guard.event.to_string(),
                    flags: literal_map(&r.guard.flags, &flag_names),
                    set: literal_map(&r.update, names),
                    emit: r
                        .emission
                        .candidates()
                        .iter()
                        .map(|c| {
                            let (value, progress) = match c.value {
                                ValueExpr::Constant(v) => (Some(v), None),
                                ValueExpr::Progress { coef } => (None, Some(coef)),
                            };
                            CandidateFile {
                                value,
                                progress,
                                p: (c.probability != 1.0).then_some(c.probability),
                            }
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("machine spec serializes")
    }
}
