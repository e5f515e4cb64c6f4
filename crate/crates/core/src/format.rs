//! The on-disk automaton format: one JSON document per automaton with guard
//! strings in the grammar `p`, `x<i>`, `c:<name>`, `==`, `!=`, `&&`, `true`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Location, RegisterAutomaton, Transition};
use crate::guard::{parse_guard, Atom, DataValue, Structure};
use crate::word::ActionDecl;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad guard `{0}`: {1}")]
    Guard(String, String),
    #[error("bad register name `{0}` (expected x<i>)")]
    BadRegister(String),
    #[error("bad assignment source `{0}` (expected p or x<i>)")]
    BadAssignmentSource(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("invalid structure: {0}")]
    Structure(#[from] crate::guard::GuardError),
    #[error("invalid automaton: {0}")]
    Automaton(#[from] crate::automaton::RaError),
}

#[derive(Serialize, Deserialize)]
struct RaFile {
    name: String,
    #[serde(default)]
    constants: BTreeMap<String, DataValue>,
    actions: Vec<ActionDecl>,
    locations: Vec<LocationFile>,
    initial: String,
    transitions: Vec<TransitionFile>,
}

#[derive(Serialize, Deserialize)]
struct LocationFile {
    name: String,
    accepting: bool,
    #[serde(default)]
    registers: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TransitionFile {
    from: String,
    action: String,
    #[serde(default = "guard_true")]
    guard: String,
    #[serde(default)]
    assign: BTreeMap<String, String>,
    to: String,
}

fn guard_true() -> String {
    "true".to_string()
}

fn register_name(index: u32) -> String {
    format!("x{index}")
}

fn parse_register(name: &str) -> Result<u32, FormatError> {
    name.strip_prefix('x')
        .and_then(|i| i.parse::<u32>().ok())
        .filter(|i| *i >= 1)
        .ok_or_else(|| FormatError::BadRegister(name.to_string()))
}

/// Serializes an automaton to the JSON document format.
pub fn to_json(ra: &RegisterAutomaton) -> Result<String, FormatError> {
    let file = RaFile {
        name: ra.name.clone(),
        constants: ra
            .structure
            .constants()
            .iter()
            .map(|(n, v)| (n.clone(), *v))
            .collect(),
        actions: ra.actions.clone(),
        locations: ra
            .locations
            .iter()
            .map(|l| LocationFile {
                name: l.name.clone(),
                accepting: l.accepting,
                registers: l.registers.iter().map(|r| register_name(*r)).collect(),
            })
            .collect(),
        initial: ra.locations[ra.initial].name.clone(),
        transitions: ra
            .transitions
            .iter()
            .map(|t| TransitionFile {
                from: ra.locations[t.source].name.clone(),
                action: t.action.clone(),
                guard: t.guard.to_string(),
                assign: t
                    .assignment
                    .iter()
                    .map(|(reg, src)| (register_name(*reg), src.to_string()))
                    .collect(),
                to: ra.locations[t.target].name.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses and validates an automaton from the JSON document format.
pub fn from_json(text: &str) -> Result<RegisterAutomaton, FormatError> {
    let file: RaFile = serde_json::from_str(text)?;
    let structure = Structure::new(file.constants.into_iter().collect())?;

    let locations: Vec<Location> = file
        .locations
        .iter()
        .map(|l| {
            Ok(Location {
                name: l.name.clone(),
                accepting: l.accepting,
                registers: l
                    .registers
                    .iter()
                    .map(|r| parse_register(r))
                    .collect::<Result<_, _>>()?,
            })
        })
        .collect::<Result<_, FormatError>>()?;

    let find = |name: &str| -> Result<usize, FormatError> {
        locations
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| FormatError::UnknownLocation(name.to_string()))
    };

    let initial = find(&file.initial)?;
    let transitions = file
        .transitions
        .iter()
        .map(|t| {
            let guard = parse_guard(&t.guard)
                .map_err(|e| FormatError::Guard(t.guard.clone(), e))?;
            let assignment = t
                .assign
                .iter()
                .map(|(reg, src)| {
                    let reg = parse_register(reg)?;
                    let src = match src.as_str() {
                        "p" => Atom::Param,
                        other => Atom::Var(parse_register(other).map_err(|_| {
                            FormatError::BadAssignmentSource(src.clone())
                        })?),
                    };
                    Ok((reg, src))
                })
                .collect::<Result<_, FormatError>>()?;
            Ok(Transition {
                source: find(&t.from)?,
                action: t.action.clone(),
                guard,
                assignment,
                target: find(&t.to)?,
            })
        })
        .collect::<Result<_, FormatError>>()?;

    let ra = RegisterAutomaton {
        name: file.name,
        structure,
        actions: file.actions,
        locations,
        initial,
        transitions,
    };
    ra.validate(false)?;
    Ok(ra)
}

pub fn save(ra: &RegisterAutomaton, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, to_json(ra)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<RegisterAutomaton, FormatError> {
    from_json(&std::fs::read_to_string(path)?)
}
