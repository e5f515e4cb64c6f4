//! Register automata: finite-control acceptors whose transitions carry
//! equality guards over stored registers and the input parameter, plus
//! register assignments.
//!
//! All automata handled here are deterministic and completely specified;
//! [`RegisterAutomaton::validate`] checks both, and simplicity (no registers
//! in the initial location) where it is required. Standard and tainted run
//! semantics live here as well.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::guard::{Atom, DataValue, Guard, Structure, Valuation};
use crate::solver;
use crate::word::{ActionDecl, DataWord};

/// Index into [`RegisterAutomaton::locations`].
pub type LocationId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub accepting: bool,
    /// Register indices available in this location (`x<i>`).
    pub registers: BTreeSet<u32>,
}

/// Where an assigned register takes its value from: a source-location
/// register or the transition parameter.
pub type Assignment = BTreeMap<u32, Atom>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub source: LocationId,
    pub action: String,
    /// Guard over the source registers, `p`, and constants.
    pub guard: Guard,
    /// Maps each target register to a source register or `p`.
    pub assignment: Assignment,
    pub target: LocationId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterAutomaton {
    pub name: String,
    pub structure: Structure,
    pub actions: Vec<ActionDecl>,
    pub locations: Vec<Location>,
    pub initial: LocationId,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RaError {
    #[error("automaton has no locations")]
    Empty,
    #[error("location index {0} out of range")]
    BadLocation(usize),
    #[error("unknown action `{0}` in transition from `{1}`")]
    UnknownAction(String, String),
    #[error("guard of a transition from `{0}` mentions {1}, which is not a register there")]
    ForeignRegister(String, Atom),
    #[error("assignment into `{0}` writes {1}, which is not a register of the target")]
    BadAssignmentTarget(String, u32),
    #[error("assignment from `{0}` reads {1}, which is neither a source register nor `p`")]
    BadAssignmentSource(String, Atom),
    #[error("transitions from `{0}` on `{1}` overlap: guards `{2}` and `{3}` are jointly satisfiable")]
    Overlap(String, String, Guard, Guard),
    #[error("transitions from `{0}` on `{1}` are incomplete: no guard covers some input")]
    Incomplete(String, String),
    #[error("initial location `{0}` has registers, so the automaton is not simple")]
    NotSimple(String),
    #[error("no transition fires from `{0}` on `{1}`")]
    Stuck(String, String),
    #[error("guard evaluation failed: {0}")]
    Guard(#[from] crate::guard::GuardError),
}

/// One step of a run: the location reached and the register valuation there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunStep {
    pub location: LocationId,
    pub registers: BTreeMap<u32, DataValue>,
}

/// A [`RunStep`] extended with the taint marker held by each register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaintedRunStep {
    pub location: LocationId,
    pub registers: BTreeMap<u32, DataValue>,
    pub markers: BTreeMap<u32, u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub accepted: bool,
    pub trace: Vec<RunStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaintedRunOutcome {
    pub accepted: bool,
    pub trace: Vec<TaintedRunStep>,
    /// One guard per symbol: the fired guard with registers replaced by the
    /// markers of the values they hold and `p` by the current input marker.
    pub constraints: Vec<Guard>,
}

impl RegisterAutomaton {
    pub fn location(&self, id: LocationId) -> &Location {
        &self.locations[id]
    }

    pub fn action_decl(&self, name: &str) -> Option<&ActionDecl> {
        self.actions.iter().find(|a| a.name == name)
    }

    fn transitions_from<'a, 'b>(
        &'a self,
        source: LocationId,
        action: &'b str,
    ) -> impl Iterator<Item = &'a Transition> + use<'a, 'b> {
        self.transitions
            .iter()
            .filter(move |t| t.source == source && t.action == action)
    }

    /// Structural and semantic validation: shapes, determinism (pairwise
    /// unsatisfiable guards) and complete specification (guards cover every
    /// input). With `require_simple`, the initial location must be
    /// register-free.
    pub fn validate(&self, require_simple: bool) -> Result<(), RaError> {
        if self.locations.is_empty() {
            return Err(RaError::Empty);
        }
        if self.initial >= self.locations.len() {
            return Err(RaError::BadLocation(self.initial));
        }
        if require_simple && !self.locations[self.initial].registers.is_empty() {
            return Err(RaError::NotSimple(self.locations[self.initial].name.clone()));
        }
        for t in &self.transitions {
            let src = self
                .locations
                .get(t.source)
                .ok_or(RaError::BadLocation(t.source))?;
            let tgt = self
                .locations
                .get(t.target)
                .ok_or(RaError::BadLocation(t.target))?;
            if self.action_decl(&t.action).is_none() {
                return Err(RaError::UnknownAction(t.action.clone(), src.name.clone()));
            }
            for atom in t.guard.atoms() {
                match atom {
                    Atom::Param | Atom::Const(_) => {}
                    Atom::Var(i) if src.registers.contains(i) => {}
                    other => {
                        return Err(RaError::ForeignRegister(src.name.clone(), other.clone()))
                    }
                }
            }
            for (reg, from) in &t.assignment {
                if !tgt.registers.contains(reg) {
                    return Err(RaError::BadAssignmentTarget(tgt.name.clone(), *reg));
                }
                match from {
                    Atom::Param => {}
                    Atom::Var(i) if src.registers.contains(i) => {}
                    other => {
                        return Err(RaError::BadAssignmentSource(src.name.clone(), other.clone()))
                    }
                }
            }
            for reg in &tgt.registers {
                if !t.assignment.contains_key(reg) {
                    return Err(RaError::BadAssignmentTarget(tgt.name.clone(), *reg));
                }
            }
        }
        self.check_determinism_and_completeness()
    }

    fn check_determinism_and_completeness(&self) -> Result<(), RaError> {
        for (loc_id, loc) in self.locations.iter().enumerate() {
            for action in &self.actions {
                let guards: Vec<&Guard> = self
                    .transitions_from(loc_id, &action.name)
                    .map(|t| &t.guard)
                    .collect();
                for (i, a) in guards.iter().enumerate() {
                    for b in &guards[i + 1..] {
                        let conj = a.and(b);
                        // The solver works over indexed variables, so`p`
                        // is renamed to a fresh index first.
                        let fresh = loc.registers.iter().max().copied().unwrap_or(0) + 1;
                        let conj = conj.substitute(&Atom::Param, &Atom::Var(fresh));
                        if solver::satisfiable(&conj, &self.structure) {
                            return Err(RaError::Overlap(
                                loc.name.clone(),
                                action.name.clone(),
                                (*a).clone(),
                                (*b).clone(),
                            ));
                        }
                    }
                }
                if !self.guards_cover(&guards) {
                    return Err(RaError::Incomplete(loc.name.clone(), action.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Tautology check over the equality theory: enumerate every equality
    /// type of the mentioned registers and the parameter, and require some
    /// guard to hold for each.
    fn guards_cover(&self, guards: &[&Guard]) -> bool {
        let mut vars: BTreeSet<Atom> = BTreeSet::new();
        vars.insert(Atom::Param);
        for g in guards {
            for atom in g.atoms() {
                if atom.is_var() {
                    vars.insert(atom.clone());
                }
            }
        }
        let vars: Vec<Atom> = vars.into_iter().collect();
        let consts: Vec<DataValue> = self.structure.constant_values().collect();
        // Candidate values: every constant plus enough mutually fresh ones.
        let mut pool = consts.clone();
        let mut fresh = 0;
        while pool.len() < consts.len() + vars.len() {
            if !pool.contains(&fresh) {
                pool.push(fresh);
            }
            fresh += 1;
        }
        let mut stack = vec![Vec::<DataValue>::new()];
        while let Some(chosen) = stack.pop() {
            if chosen.len() == vars.len() {
                let nu = Valuation::from_pairs(
                    vars.iter().cloned().zip(chosen.iter().copied()),
                );
                let covered = guards
                    .iter()
                    .any(|g| nu.satisfies(g, &self.structure).unwrap_or(false));
                if !covered {
                    return false;
                }
                continue;
            }
            for &v in &pool {
                let mut next = chosen.clone();
                next.push(v);
                stack.push(next);
            }
        }
        true
    }

    fn initial_step(&self) -> RunStep {
        RunStep { location: self.initial, registers: BTreeMap::new() }
    }

    /// Runs the automaton over a word. Exactly one transition fires per
    /// symbol; anything else is a model-validation error.
    pub fn run(&self, word: &DataWord) -> Result<RunOutcome, RaError> {
        self.run_from(word, self.initial_step())
    }

    pub fn run_from(&self, word: &DataWord, start: RunStep) -> Result<RunOutcome, RaError> {
        let mut trace = vec![start];
        for symbol in word.symbols() {
            let step = trace.last().unwrap();
            let (transition, extended) = self.fire(step, &symbol.action, symbol.value)?;
            let mut registers = BTreeMap::new();
            for (reg, from) in &transition.assignment {
                registers.insert(*reg, extended.resolve(from, &self.structure)?);
            }
            trace.push(RunStep { location: transition.target, registers });
        }
        let accepted = self.locations[trace.last().unwrap().location].accepting;
        Ok(RunOutcome { accepted, trace })
    }

    /// Convenience: the accept/reject verdict for a word.
    pub fn accepts(&self, word: &DataWord) -> Result<bool, RaError> {
        Ok(self.run(word)?.accepted)
    }

    fn fire<'a>(
        &'a self,
        step: &RunStep,
        action: &str,
        value: DataValue,
    ) -> Result<(&'a Transition, Valuation), RaError> {
        let mut extended = Valuation::from_pairs(
            step.registers.iter().map(|(r, v)| (Atom::Var(*r), *v)),
        );
        extended.bind(Atom::Param, value);
        let mut fired = None;
        for t in self.transitions_from(step.location, action) {
            if extended.satisfies(&t.guard, &self.structure)? {
                if fired.is_some() {
                    return Err(RaError::Overlap(
                        self.locations[step.location].name.clone(),
                        action.to_string(),
                        t.guard.clone(),
                        t.guard.clone(),
                    ));
                }
                fired = Some(t);
            }
        }
        let t = fired.ok_or_else(|| {
            RaError::Stuck(self.locations[step.location].name.clone(), action.to_string())
        })?;
        Ok((t, extended))
    }

    /// The tainted run: alongside the ordinary run, each register tracks the
    /// marker of the input that produced its value, and each fired guard is
    /// reported with registers replaced by their markers and `p` by the
    /// marker of the current input.
    pub fn tainted_run(&self, word: &DataWord) -> Result<TaintedRunOutcome, RaError> {
        let mut trace = vec![TaintedRunStep {
            location: self.initial,
            registers: BTreeMap::new(),
            markers: BTreeMap::new(),
        }];
        let mut constraints = Vec::with_capacity(word.len());
        for (i, symbol) in word.symbols().iter().enumerate() {
            let marker = i as u32 + 1;
            let step = trace.last().unwrap();
            let plain = RunStep { location: step.location, registers: step.registers.clone() };
            let (transition, extended) = self.fire(&plain, &symbol.action, symbol.value)?;

            // The marker environment for this step: stored markers plus the
            // fresh marker for `p`.
            let substitute = |atom: &Atom| -> Atom {
                match atom {
                    Atom::Param => Atom::Marker(marker),
                    Atom::Var(r) => Atom::Marker(step.markers[r]),
                    other => other.clone(),
                }
            };
            let fired = Guard::new(
                transition
                    .guard
                    .literals()
                    .iter()
                    .map(|l| {
                        crate::guard::Literal::new(
                            substitute(&l.lhs),
                            substitute(&l.rhs),
                            l.equal,
                        )
                    })
                    .collect(),
            );
            constraints.push(fired);

            let mut registers = BTreeMap::new();
            let mut markers = BTreeMap::new();
            for (reg, from) in &transition.assignment {
                registers.insert(*reg, extended.resolve(from, &self.structure)?);
                markers.insert(
                    *reg,
                    match from {
                        Atom::Param => marker,
                        Atom::Var(r) => step.markers[r],
                        _ => unreachable!("validated assignment source"),
                    },
                );
            }
            trace.push(TaintedRunStep { location: transition.target, registers, markers });
        }
        let accepted = self.locations[trace.last().unwrap().location].accepting;
        Ok(TaintedRunOutcome { accepted, trace, constraints })
    }
}
