//! Systems under test with native comparison tainting, and the benchmark
//! catalog both oracle families are measured on.
//!
//! Each session behaves like a small stubbed program: it stores tainted
//! values and compares them the way the real data structure would, so the
//! comparison log reflects exactly the equality tests the code performs.
//! A session answers membership queries as a language acceptor and meters
//! inputs and resets; a reset counts as one input.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::automaton::{Location, RegisterAutomaton, Transition};
use crate::guard::{Atom, DataValue, Guard, Literal, Structure};
use crate::taint::{ComparisonLog, TaintedValue};
use crate::word::{ActionDecl, DataWord};

/// Which benchmark system to instantiate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SutSpec {
    Fifo { capacity: usize },
    Set { capacity: usize },
    Lock { code: Vec<DataValue> },
    Repetition { length: usize, code: DataValue },
    /// Accepts every word; used by learner smoke tests.
    AcceptAll,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SutError {
    #[error("unknown system id `{0}` (expected fifo:<n>, set:<n>, lock:<d1,...,dk> or rep:<k>:<v>)")]
    UnknownId(String),
    #[error("size {0} outside the supported range {1}..={2}")]
    SizeOutOfRange(usize, usize, usize),
}

impl SutSpec {
    /// Parses the command-line identifiers `fifo:<n>`, `set:<n>`,
    /// `lock:<d1,...,dk>` and `rep:<k>:<v>`.
    pub fn parse(id: &str) -> Result<Self, SutError> {
        let mk_err = || SutError::UnknownId(id.to_string());
        let spec = if let Some(n) = id.strip_prefix("fifo:") {
            SutSpec::Fifo { capacity: n.parse().map_err(|_| mk_err())? }
        } else if let Some(n) = id.strip_prefix("set:") {
            SutSpec::Set { capacity: n.parse().map_err(|_| mk_err())? }
        } else if let Some(code) = id.strip_prefix("lock:") {
            let code: Result<Vec<DataValue>, _> =
                code.split(',').map(|d| d.trim().parse()).collect();
            SutSpec::Lock { code: code.map_err(|_| mk_err())? }
        } else if let Some(rest) = id.strip_prefix("rep:") {
            let (k, v) = rest.split_once(':').ok_or_else(mk_err)?;
            SutSpec::Repetition {
                length: k.parse().map_err(|_| mk_err())?,
                code: v.parse().map_err(|_| mk_err())?,
            }
        } else {
            return Err(mk_err());
        };
        spec.check_bounds()?;
        Ok(spec)
    }

    fn check_bounds(&self) -> Result<(), SutError> {
        match self {
            SutSpec::Fifo { capacity } | SutSpec::Set { capacity } => {
                if !(1..=20).contains(capacity) {
                    return Err(SutError::SizeOutOfRange(*capacity, 1, 20));
                }
            }
            SutSpec::Lock { code } => {
                if !(1..=6).contains(&code.len()) {
                    return Err(SutError::SizeOutOfRange(code.len(), 1, 6));
                }
            }
            SutSpec::Repetition { length, .. } => {
                if !(1..=6).contains(length) {
                    return Err(SutError::SizeOutOfRange(*length, 1, 6));
                }
            }
            SutSpec::AcceptAll => {}
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        match self {
            SutSpec::Fifo { capacity } => format!("fifo:{capacity}"),
            SutSpec::Set { capacity } => format!("set:{capacity}"),
            SutSpec::Lock { code } => format!(
                "lock:{}",
                code.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
            ),
            SutSpec::Repetition { length, code } => format!("rep:{length}:{code}"),
            SutSpec::AcceptAll => "accept-all".to_string(),
        }
    }
}

impl fmt::Display for SutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Inputs and resets consumed by a session so far. A reset is counted as an
/// input, so `symbols = inputs + resets`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Meter {
    pub inputs: u64,
    pub resets: u64,
}

impl Meter {
    pub fn symbols(&self) -> u64 {
        self.inputs + self.resets
    }

    pub fn since(&self, earlier: &Meter) -> Meter {
        Meter { inputs: self.inputs - earlier.inputs, resets: self.resets - earlier.resets }
    }
}

/// Verdict plus the per-step constraints recorded while the system ran.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaintedObservation {
    pub accepted: bool,
    /// One conjunction per symbol; `true` where no comparison fired.
    pub constraints: Vec<Guard>,
}

enum Behaviour {
    Fifo { capacity: usize, queue: VecDeque<TaintedValue>, sunk: bool },
    Set { capacity: usize, elements: Vec<TaintedValue>, sunk: bool },
    Lock { code: Vec<DataValue>, progress: usize, sunk: bool },
    Repetition { length: usize, code: DataValue, progress: usize, sunk: bool },
    AcceptAll,
}

/// A single system under test. One session owns its state and its
/// comparison log; interleaved sessions never share either.
pub struct SutSession {
    spec: SutSpec,
    structure: Structure,
    actions: Vec<ActionDecl>,
    behaviour: Behaviour,
    log: ComparisonLog,
    meter: Meter,
    /// Word length of every membership query, for metering audits.
    transcript: Vec<usize>,
}

impl SutSession {
    pub fn new(spec: SutSpec) -> Self {
        let structure = spec_structure(&spec);
        let actions = spec_actions(&spec);
        let behaviour = fresh_behaviour(&spec);
        SutSession {
            spec,
            structure,
            actions,
            behaviour,
            log: ComparisonLog::new(),
            meter: Meter::default(),
            transcript: Vec::new(),
        }
    }

    pub fn spec(&self) -> &SutSpec {
        &self.spec
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn actions(&self) -> &[ActionDecl] {
        &self.actions
    }

    pub fn meter(&self) -> Meter {
        self.meter
    }

    pub fn transcript(&self) -> &[usize] {
        &self.transcript
    }

    /// Puts the system back into its initial state; metered as one input.
    pub fn reset(&mut self) {
        self.behaviour = fresh_behaviour(&self.spec);
        self.log.clear();
        self.meter.resets += 1;
    }

    /// Feeds one word from the initial state and reports the verdict along
    /// with the constraints recorded at each step.
    pub fn membership_query(&mut self, word: &DataWord) -> TaintedObservation {
        self.reset();
        self.meter.inputs += word.len() as u64;
        self.transcript.push(word.len());
        let mut constraints = Vec::with_capacity(word.len());
        for (i, symbol) in word.symbols().iter().enumerate() {
            let marker = i as u32 + 1;
            let value = TaintedValue::new(symbol.value, marker, self.log.clone());
            self.step(&symbol.action, value);
            constraints.push(Guard::new(self.log.drain()));
        }
        TaintedObservation { accepted: self.accepting(), constraints }
    }

    /// Verdict-only variant for black-box use; identically metered.
    pub fn accepts(&mut self, word: &DataWord) -> bool {
        self.membership_query(word).accepted
    }

    fn accepting(&self) -> bool {
        match &self.behaviour {
            Behaviour::Fifo { sunk, .. }
            | Behaviour::Set { sunk, .. }
            | Behaviour::Lock { sunk, .. }
            | Behaviour::Repetition { sunk, .. } => !sunk,
            Behaviour::AcceptAll => true,
        }
    }

    fn step(&mut self, action: &str, input: TaintedValue) {
        match &mut self.behaviour {
            Behaviour::Fifo { capacity, queue, sunk } => {
                if *sunk {
                    return;
                }
                match action {
                    "Push" => {
                        // A full buffer silently drops the pushed value.
                        if queue.len() < *capacity {
                            queue.push_back(input);
                        }
                    }
                    "Pop" => match queue.front() {
                        Some(front) if front.eq_tainted(&input) => {
                            queue.pop_front();
                        }
                        _ => *sunk = true,
                    },
                    _ => *sunk = true,
                }
            }
            Behaviour::Set { capacity, elements, sunk } => {
                if *sunk {
                    return;
                }
                match action {
                    "Insert" => {
                        // Presence scan in storage order, stopping at the
                        // first hit; a full set drops new values.
                        let present = elements.iter().any(|e| e.eq_tainted(&input));
                        if !present && elements.len() < *capacity {
                            elements.push(input);
                        }
                    }
                    "Remove" => {
                        match elements.iter().position(|e| e.eq_tainted(&input)) {
                            Some(i) => {
                                elements.remove(i);
                            }
                            None => *sunk = true,
                        }
                    }
                    _ => *sunk = true,
                }
            }
            Behaviour::Lock { code, progress, sunk } => {
                if *sunk {
                    return;
                }
                match action {
                    "a" => {
                        if *progress == code.len() {
                            // Dialing an unlocked lock breaks it.
                            *sunk = true;
                        } else {
                            let expected = code[*progress];
                            if input.eq_constant(&expected.to_string(), expected) {
                                *progress += 1;
                            } else {
                                *progress = 0;
                            }
                        }
                    }
                    _ => {
                        // The probe only succeeds once unlocked.
                        if *progress != code.len() {
                            *sunk = true;
                        }
                    }
                }
            }
            Behaviour::Repetition { length, code, progress, sunk } => {
                if *sunk {
                    return;
                }
                match action {
                    "a" => {
                        if input.eq_constant(&code.to_string(), *code) {
                            *progress = (*progress + 1).min(*length);
                        } else {
                            *progress = 0;
                        }
                    }
                    _ => {
                        if *progress != *length {
                            *sunk = true;
                        }
                    }
                }
            }
            Behaviour::AcceptAll => {}
        }
    }
}

fn fresh_behaviour(spec: &SutSpec) -> Behaviour {
    match spec {
        SutSpec::Fifo { capacity } => {
            Behaviour::Fifo { capacity: *capacity, queue: VecDeque::new(), sunk: false }
        }
        SutSpec::Set { capacity } => {
            Behaviour::Set { capacity: *capacity, elements: Vec::new(), sunk: false }
        }
        SutSpec::Lock { code } => {
            Behaviour::Lock { code: code.clone(), progress: 0, sunk: false }
        }
        SutSpec::Repetition { length, code } => Behaviour::Repetition {
            length: *length,
            code: *code,
            progress: 0,
            sunk: false,
        },
        SutSpec::AcceptAll => Behaviour::AcceptAll,
    }
}

fn spec_structure(spec: &SutSpec) -> Structure {
    match spec {
        SutSpec::Lock { code } => Structure::from_values(code),
        SutSpec::Repetition { code, .. } => Structure::from_values(&[*code]),
        _ => Structure::empty(),
    }
}

fn spec_actions(spec: &SutSpec) -> Vec<ActionDecl> {
    match spec {
        SutSpec::Fifo { .. } => {
            vec![ActionDecl::parameterised("Push"), ActionDecl::parameterised("Pop")]
        }
        SutSpec::Set { .. } => {
            vec![ActionDecl::parameterised("Insert"), ActionDecl::parameterised("Remove")]
        }
        SutSpec::Lock { .. } | SutSpec::Repetition { .. } => {
            vec![ActionDecl::parameterised("a"), ActionDecl::plain("b")]
        }
        SutSpec::AcceptAll => {
            vec![ActionDecl::parameterised("a")]
        }
    }
}

/// A fresh session together with the ground-truth automaton used by
/// validation and the bounded equivalence tests.
pub struct CatalogEntry {
    pub session: SutSession,
    pub reference: RegisterAutomaton,
}

pub fn catalog(spec: &SutSpec) -> CatalogEntry {
    let reference = match spec {
        SutSpec::Fifo { capacity } => fifo_reference(*capacity),
        SutSpec::Set { capacity } => set_reference(*capacity),
        SutSpec::Lock { code } => lock_reference(code),
        SutSpec::Repetition { length, code } => repetition_reference(*length, *code),
        SutSpec::AcceptAll => accept_all_reference(),
    };
    CatalogEntry { session: SutSession::new(spec.clone()), reference }
}

fn var(i: u32) -> Atom {
    Atom::Var(i)
}

fn keep(registers: impl IntoIterator<Item = u32>) -> crate::automaton::Assignment {
    registers.into_iter().map(|r| (r, var(r))).collect()
}

/// The FIFO buffer: locations count the fill level, registers hold the
/// buffered values front-first, a failed pop falls into a rejecting sink,
/// and a push onto a full buffer is accepted but dropped.
fn fifo_reference(capacity: usize) -> RegisterAutomaton {
    let mut locations: Vec<Location> = (0..=capacity)
        .map(|k| Location {
            name: format!("l{k}"),
            accepting: true,
            registers: (1..=k as u32).collect(),
        })
        .collect();
    let sink = locations.len();
    locations.push(Location {
        name: "sink".to_string(),
        accepting: false,
        registers: Default::default(),
    });

    let mut transitions = Vec::new();
    for k in 0..=capacity {
        if k < capacity {
            let mut assignment = keep(1..=k as u32);
            assignment.insert(k as u32 + 1, Atom::Param);
            transitions.push(Transition {
                source: k,
                action: "Push".to_string(),
                guard: Guard::top(),
                assignment,
                target: k + 1,
            });
        } else {
            transitions.push(Transition {
                source: k,
                action: "Push".to_string(),
                guard: Guard::top(),
                assignment: keep(1..=capacity as u32),
                target: k,
            });
        }
        if k == 0 {
            transitions.push(Transition {
                source: 0,
                action: "Pop".to_string(),
                guard: Guard::top(),
                assignment: Default::default(),
                target: sink,
            });
        } else {
            // Popping the front shifts the remaining values down.
            let shift: crate::automaton::Assignment =
                (1..k as u32).map(|r| (r, var(r + 1))).collect();
            transitions.push(Transition {
                source: k,
                action: "Pop".to_string(),
                guard: Guard::new(vec![Literal::eq(Atom::Param, var(1))]),
                assignment: shift,
                target: k - 1,
            });
            transitions.push(Transition {
                source: k,
                action: "Pop".to_string(),
                guard: Guard::new(vec![Literal::neq(Atom::Param, var(1))]),
                assignment: Default::default(),
                target: sink,
            });
        }
    }
    for action in ["Push", "Pop"] {
        transitions.push(Transition {
            source: sink,
            action: action.to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: sink,
        });
    }

    RegisterAutomaton {
        name: format!("fifo:{capacity}"),
        structure: Structure::empty(),
        actions: spec_actions(&SutSpec::Fifo { capacity }),
        locations,
        initial: 0,
        transitions,
    }
}

/// The bounded set: one location per fill level, registers hold the stored
/// values in insertion order. Inserting scans for the value in order (with
/// short-circuit), removing an absent value sinks, and inserting into a full
/// set is accepted but dropped.
fn set_reference(capacity: usize) -> RegisterAutomaton {
    let mut locations: Vec<Location> = (0..=capacity)
        .map(|k| Location {
            name: format!("l{k}"),
            accepting: true,
            registers: (1..=k as u32).collect(),
        })
        .collect();
    let sink = locations.len();
    locations.push(Location {
        name: "sink".to_string(),
        accepting: false,
        registers: Default::default(),
    });

    // Guard prefix for "not equal to the first i stored values".
    let distinct_from = |count: u32| -> Vec<Literal> {
        (1..=count)
            .map(|r| Literal::neq(Atom::Param, var(r)))
            .collect()
    };

    let mut transitions = Vec::new();
    for k in 0..=capacity {
        // Insert finding the value at position r: no state change.
        for r in 1..=k as u32 {
            let mut lits = distinct_from(r - 1);
            lits.push(Literal::eq(Atom::Param, var(r)));
            transitions.push(Transition {
                source: k,
                action: "Insert".to_string(),
                guard: Guard::new(lits),
                assignment: keep(1..=k as u32),
                target: k,
            });
        }
        // Insert of a fresh value: store it, or drop it when full.
        if k < capacity {
            let mut assignment = keep(1..=k as u32);
            assignment.insert(k as u32 + 1, Atom::Param);
            transitions.push(Transition {
                source: k,
                action: "Insert".to_string(),
                guard: Guard::new(distinct_from(k as u32)),
                assignment,
                target: k + 1,
            });
        } else {
            transitions.push(Transition {
                source: k,
                action: "Insert".to_string(),
                guard: Guard::new(distinct_from(k as u32)),
                assignment: keep(1..=k as u32),
                target: k,
            });
        }
        // Remove of the value at position r: later values shift down.
        for r in 1..=k as u32 {
            let mut lits = distinct_from(r - 1);
            lits.push(Literal::eq(Atom::Param, var(r)));
            let mut assignment: crate::automaton::Assignment =
                (1..r).map(|i| (i, var(i))).collect();
            for i in r..k as u32 {
                assignment.insert(i, var(i + 1));
            }
            transitions.push(Transition {
                source: k,
                action: "Remove".to_string(),
                guard: Guard::new(lits),
                assignment,
                target: k - 1,
            });
        }
        // Remove of an absent value sinks.
        transitions.push(Transition {
            source: k,
            action: "Remove".to_string(),
            guard: Guard::new(distinct_from(k as u32)),
            assignment: Default::default(),
            target: sink,
        });
    }
    for action in ["Insert", "Remove"] {
        transitions.push(Transition {
            source: sink,
            action: action.to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: sink,
        });
    }

    RegisterAutomaton {
        name: format!("set:{capacity}"),
        structure: Structure::empty(),
        actions: spec_actions(&SutSpec::Set { capacity }),
        locations,
        initial: 0,
        transitions,
    }
}

/// The combination lock: dialing the code digits in order unlocks it, any
/// wrong digit resets progress, the probe `b` is accepted only once
/// unlocked, and dialing an unlocked lock breaks it.
fn lock_reference(code: &[DataValue]) -> RegisterAutomaton {
    let structure = Structure::from_values(code);
    let depth = code.len();
    let mut locations: Vec<Location> = (0..=depth)
        .map(|k| Location {
            name: format!("l{k}"),
            accepting: true,
            registers: Default::default(),
        })
        .collect();
    let sink = locations.len();
    locations.push(Location {
        name: "sink".to_string(),
        accepting: false,
        registers: Default::default(),
    });

    let mut transitions = Vec::new();
    for k in 0..depth {
        let digit = Atom::Const(code[k].to_string());
        transitions.push(Transition {
            source: k,
            action: "a".to_string(),
            guard: Guard::new(vec![Literal::eq(Atom::Param, digit.clone())]),
            assignment: Default::default(),
            target: k + 1,
        });
        transitions.push(Transition {
            source: k,
            action: "a".to_string(),
            guard: Guard::new(vec![Literal::neq(Atom::Param, digit)]),
            assignment: Default::default(),
            target: 0,
        });
        transitions.push(Transition {
            source: k,
            action: "b".to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: sink,
        });
    }
    transitions.push(Transition {
        source: depth,
        action: "a".to_string(),
        guard: Guard::top(),
        assignment: Default::default(),
        target: sink,
    });
    transitions.push(Transition {
        source: depth,
        action: "b".to_string(),
        guard: Guard::top(),
        assignment: Default::default(),
        target: depth,
    });
    for action in ["a", "b"] {
        transitions.push(Transition {
            source: sink,
            action: action.to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: sink,
        });
    }

    RegisterAutomaton {
        name: SutSpec::Lock { code: code.to_vec() }.id(),
        structure,
        actions: spec_actions(&SutSpec::Lock { code: code.to_vec() }),
        locations,
        initial: 0,
        transitions,
    }
}

/// The repetition system: like a lock over a single repeated digit, except
/// that further matching dials keep it open instead of breaking it.
fn repetition_reference(length: usize, code: DataValue) -> RegisterAutomaton {
    let structure = Structure::from_values(&[code]);
    let mut locations: Vec<Location> = (0..=length)
        .map(|k| Location {
            name: format!("l{k}"),
            accepting: true,
            registers: Default::default(),
        })
        .collect();
    let sink = locations.len();
    locations.push(Location {
        name: "sink".to_string(),
        accepting: false,
        registers: Default::default(),
    });

    let digit = Atom::Const(code.to_string());
    let mut transitions = Vec::new();
    for k in 0..=length {
        let next = if k < length { k + 1 } else { length };
        transitions.push(Transition {
            source: k,
            action: "a".to_string(),
            guard: Guard::new(vec![Literal::eq(Atom::Param, digit.clone())]),
            assignment: Default::default(),
            target: next,
        });
        transitions.push(Transition {
            source: k,
            action: "a".to_string(),
            guard: Guard::new(vec![Literal::neq(Atom::Param, digit.clone())]),
            assignment: Default::default(),
            target: 0,
        });
        transitions.push(Transition {
            source: k,
            action: "b".to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: if k == length { length } else { sink },
        });
    }
    for action in ["a", "b"] {
        transitions.push(Transition {
            source: sink,
            action: action.to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: sink,
        });
    }

    RegisterAutomaton {
        name: SutSpec::Repetition { length, code }.id(),
        structure,
        actions: spec_actions(&SutSpec::Repetition { length, code }),
        locations,
        initial: 0,
        transitions,
    }
}

fn accept_all_reference() -> RegisterAutomaton {
    RegisterAutomaton {
        name: "accept-all".to_string(),
        structure: Structure::empty(),
        actions: spec_actions(&SutSpec::AcceptAll),
        locations: vec![Location {
            name: "l0".to_string(),
            accepting: true,
            registers: Default::default(),
        }],
        initial: 0,
        transitions: vec![Transition {
            source: 0,
            action: "a".to_string(),
            guard: Guard::top(),
            assignment: Default::default(),
            target: 0,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon;

    #[test]
    fn sut_ids_parse_and_print() {
        for id in ["fifo:2", "set:1", "lock:1,9,6,2", "rep:3:7"] {
            assert_eq!(SutSpec::parse(id).unwrap().id(), id);
        }
        assert!(SutSpec::parse("stack:2").is_err());
        assert!(SutSpec::parse("fifo:0").is_err());
        assert!(SutSpec::parse("fifo:21").is_err());
        assert!(SutSpec::parse("lock:1,2,3,4,5,6,7").is_err());
    }

    #[test]
    fn fifo_membership_reports_the_tainted_word_constraints() {
        let mut s = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let w = DataWord::from_pairs(&[
            ("Push", 7),
            ("Push", 7),
            ("Pop", 7),
            ("Push", 5),
            ("Pop", 7),
            ("Pop", 5),
        ]);
        let obs = s.membership_query(&w);
        assert!(obs.accepted);
        let v = |i| Atom::Marker(i);
        assert_eq!(
            obs.constraints,
            vec![
                Guard::top(),
                Guard::top(),
                Guard::new(vec![Literal::eq(v(3), v(1))]),
                Guard::top(),
                Guard::new(vec![Literal::eq(v(5), v(2))]),
                Guard::new(vec![Literal::eq(v(6), v(4))]),
            ]
        );
    }

    #[test]
    fn empty_query_is_accepted_with_no_constraints() {
        let mut s = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let obs = s.membership_query(&DataWord::empty());
        assert!(obs.accepted);
        assert!(obs.constraints.is_empty());
    }

    #[test]
    fn lock_records_one_constant_comparison_per_dial() {
        let mut s = SutSession::new(SutSpec::Lock { code: vec![1, 9, 6, 2] });
        let w = DataWord::from_pairs(&[("a", 1), ("a", 9), ("a", 6), ("a", 2)]);
        let obs = s.membership_query(&w);
        assert!(obs.accepted);
        let c = |d: &str| Atom::Const(d.to_string());
        assert_eq!(
            obs.constraints,
            vec![
                Guard::new(vec![Literal::eq(Atom::Marker(1), c("1"))]),
                Guard::new(vec![Literal::eq(Atom::Marker(2), c("9"))]),
                Guard::new(vec![Literal::eq(Atom::Marker(3), c("6"))]),
                Guard::new(vec![Literal::eq(Atom::Marker(4), c("2"))]),
            ]
        );
    }

    #[test]
    fn meter_counts_resets_as_inputs() {
        let mut s = SutSession::new(SutSpec::Fifo { capacity: 1 });
        s.membership_query(&DataWord::from_pairs(&[("Push", 1), ("Pop", 1)]));
        s.membership_query(&DataWord::empty());
        let m = s.meter();
        assert_eq!(m.inputs, 2);
        assert_eq!(m.resets, 2);
        assert_eq!(m.symbols(), 4);
        assert_eq!(s.transcript(), &[2, 0]);
    }

    #[test]
    fn interleaved_sessions_do_not_share_logs() {
        let mut a = SutSession::new(SutSpec::Fifo { capacity: 1 });
        let mut b = SutSession::new(SutSpec::Set { capacity: 1 });
        let wa = DataWord::from_pairs(&[("Push", 3), ("Pop", 3)]);
        let wb = DataWord::from_pairs(&[("Insert", 4), ("Remove", 5)]);
        let oa = a.membership_query(&wa);
        let ob = b.membership_query(&wb);
        assert!(oa.accepted);
        assert!(!ob.accepted);
        assert_eq!(oa.constraints[1], Guard::new(vec![Literal::eq(Atom::Marker(2), Atom::Marker(1))]));
        assert_eq!(ob.constraints[1], Guard::new(vec![Literal::neq(Atom::Marker(2), Atom::Marker(1))]));
    }

    /// Every catalog entry agrees with its reference automaton on canonical
    /// words: same verdicts and, literal for literal, same constraints.
    #[test]
    fn sessions_agree_with_their_references() {
        let entries = vec![
            (SutSpec::Fifo { capacity: 1 }, 6),
            (SutSpec::Fifo { capacity: 2 }, 6),
            (SutSpec::Set { capacity: 1 }, 6),
            (SutSpec::Set { capacity: 2 }, 5),
            (SutSpec::Lock { code: vec![1, 9] }, 5),
            (SutSpec::Repetition { length: 2, code: 7 }, 5),
            (SutSpec::Lock { code: vec![1, 9, 6, 2] }, 5),
        ];
        for (spec, depth) in entries {
            let CatalogEntry { mut session, reference } = catalog(&spec);
            reference.validate(true).unwrap();
            for w in canon::canonical_words(&reference.actions, &reference.structure, depth) {
                let observed = session.membership_query(&w);
                let expected = reference.tainted_run(&w).unwrap();
                assert_eq!(observed.accepted, expected.accepted, "{spec} verdict on {w}");
                assert_eq!(
                    observed.constraints, expected.constraints,
                    "{spec} constraints on {w}"
                );
            }
        }
    }

    #[test]
    fn all_catalog_references_validate() {
        for spec in [
            SutSpec::Fifo { capacity: 3 },
            SutSpec::Set { capacity: 3 },
            SutSpec::Lock { code: vec![1, 9, 6, 2] },
            SutSpec::Repetition { length: 3, code: 7 },
            SutSpec::AcceptAll,
        ] {
            catalog(&spec).reference.validate(true).unwrap();
        }
    }
}
