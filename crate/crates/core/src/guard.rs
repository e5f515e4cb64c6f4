//! Equality guards over registers, parameters, taint markers and named
//! constants.
//!
//! A [`Guard`] is a pure conjunction of (possibly negated) equality literals.
//! The empty conjunction is `true`. Literals are kept in a canonical form
//! (oriented, sorted, deduplicated) so that syntactic equality of guards is
//! meaningful; logical equivalence beyond that is the job of the solver.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The data domain: natural numbers.
pub type DataValue = u64;

/// One endpoint of an equality literal.
///
/// `Var(i)` is the indexed variable `x<i>` (1-based); in a register automaton
/// it names a register, in a tree-query predicate it names the i-th data
/// value of the word. `Marker(i)` is the taint marker `v<i>` attached to the
/// i-th input of a run. `Param` is the formal parameter `p` of a transition.
/// `Const` refers to a named constant of the [`Structure`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    Const(String),
    Var(u32),
    Marker(u32),
    Param,
}

impl Atom {
    pub fn is_var(&self) -> bool {
        matches!(self, Atom::Var(_))
    }

    pub fn var_index(&self) -> Option<u32> {
        match self {
            Atom::Var(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Param => write!(f, "p"),
            Atom::Var(i) => write!(f, "x{i}"),
            Atom::Marker(i) => write!(f, "v{i}"),
            Atom::Const(name) => write!(f, "c:{name}"),
        }
    }
}

/// A single (dis)equality between two atoms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub lhs: Atom,
    pub rhs: Atom,
    pub equal: bool,
}

impl Literal {
    /// Builds a literal with the greater atom on the left, so `p = x1`,
    /// `x3 != x1` and `x2 = c:one` all come out the way they are written.
    pub fn new(a: Atom, b: Atom, equal: bool) -> Self {
        if a >= b {
            Literal { lhs: a, rhs: b, equal }
        } else {
            Literal { lhs: b, rhs: a, equal }
        }
    }

    pub fn eq(a: Atom, b: Atom) -> Self {
        Literal::new(a, b, true)
    }

    pub fn neq(a: Atom, b: Atom) -> Self {
        Literal::new(a, b, false)
    }

    /// Replaces every occurrence of `from` by `to`, re-orienting the result.
    pub fn substitute(&self, from: &Atom, to: &Atom) -> Literal {
        let map = |a: &Atom| if a == from { to.clone() } else { a.clone() };
        Literal::new(map(&self.lhs), map(&self.rhs), self.equal)
    }

    /// A literal relating an atom to itself: `x = x` is vacuously true,
    /// `x != x` is unsatisfiable.
    pub fn is_reflexive(&self) -> bool {
        self.lhs == self.rhs
    }

    pub fn atoms(&self) -> [&Atom; 2] {
        [&self.lhs, &self.rhs]
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.equal { "==" } else { "!=" };
        write!(f, "{} {} {}", self.lhs, op, self.rhs)
    }
}

/// A conjunction of literals; the empty conjunction is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Guard {
    literals: Vec<Literal>,
}

impl Guard {
    /// The trivially true guard.
    pub fn top() -> Self {
        Guard { literals: Vec::new() }
    }

    /// Canonical form: sorted and deduplicated.
    pub fn new(mut literals: Vec<Literal>) -> Self {
        literals.sort();
        literals.dedup();
        Guard { literals }
    }

    pub fn is_top(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn and(&self, other: &Guard) -> Guard {
        let mut lits = self.literals.clone();
        lits.extend(other.literals.iter().cloned());
        Guard::new(lits)
    }

    pub fn and_literal(&self, lit: Literal) -> Guard {
        let mut lits = self.literals.clone();
        lits.push(lit);
        Guard::new(lits)
    }

    /// Substitutes `from` by `to` in every literal. Reflexive equalities
    /// produced by the substitution are dropped; a reflexive disequality
    /// makes the guard unsatisfiable and is kept so the solver can see it.
    pub fn substitute(&self, from: &Atom, to: &Atom) -> Guard {
        Guard::new(
            self.literals
                .iter()
                .map(|l| l.substitute(from, to))
                .filter(|l| !(l.is_reflexive() && l.equal))
                .collect(),
        )
    }

    /// Simultaneous renaming of atoms according to `map`; atoms not in the
    /// map are left alone.
    pub fn rename(&self, map: &BTreeMap<Atom, Atom>) -> Guard {
        let rename_atom = |a: &Atom| map.get(a).cloned().unwrap_or_else(|| a.clone());
        Guard::new(
            self.literals
                .iter()
                .map(|l| Literal::new(rename_atom(&l.lhs), rename_atom(&l.rhs), l.equal))
                .filter(|l| !(l.is_reflexive() && l.equal))
                .collect(),
        )
    }

    /// True when some literal is a reflexive disequality (`x != x`).
    pub fn has_reflexive_disequality(&self) -> bool {
        self.literals.iter().any(|l| l.is_reflexive() && !l.equal)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.literals.iter().flat_map(|l| l.atoms())
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "true");
        }
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " && ")?;
            }
            write!(f, "{lit}")?;
        }
        Ok(())
    }
}

/// The fixed constant environment: a finite map from constant symbol to
/// value. Symbols and values are both required to be distinct.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    constants: Vec<(String, DataValue)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuardError {
    #[error("duplicate constant symbol `{0}`")]
    DuplicateConstantSymbol(String),
    #[error("constant symbols `{0}` and `{1}` share the value {2}")]
    DuplicateConstantValue(String, String, DataValue),
    #[error("unknown constant symbol `{0}`")]
    UnknownConstant(String),
    #[error("valuation does not bind {0}")]
    Unbound(Atom),
}

impl Structure {
    /// A structure without constants (plain equality).
    pub fn empty() -> Self {
        Structure { constants: Vec::new() }
    }

    pub fn new(constants: Vec<(String, DataValue)>) -> Result<Self, GuardError> {
        for (i, (name, value)) in constants.iter().enumerate() {
            for (other_name, other_value) in &constants[i + 1..] {
                if name == other_name {
                    return Err(GuardError::DuplicateConstantSymbol(name.clone()));
                }
                if value == other_value {
                    return Err(GuardError::DuplicateConstantValue(
                        name.clone(),
                        other_name.clone(),
                        *value,
                    ));
                }
            }
        }
        Ok(Structure { constants })
    }

    /// Constants named after their decimal value, deduplicated.
    pub fn from_values(values: &[DataValue]) -> Self {
        let mut constants: Vec<(String, DataValue)> = Vec::new();
        for &v in values {
            if !constants.iter().any(|(_, w)| *w == v) {
                constants.push((v.to_string(), v));
            }
        }
        Structure { constants }
    }

    pub fn constants(&self) -> &[(String, DataValue)] {
        &self.constants
    }

    pub fn value_of(&self, name: &str) -> Result<DataValue, GuardError> {
        self.constants
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| GuardError::UnknownConstant(name.to_string()))
    }

    /// The constant symbol holding `value`, if any.
    pub fn constant_with_value(&self, value: DataValue) -> Option<&str> {
        self.constants
            .iter()
            .find(|(_, v)| *v == value)
            .map(|(n, _)| n.as_str())
    }

    pub fn constant_values(&self) -> impl Iterator<Item = DataValue> + '_ {
        self.constants.iter().map(|(_, v)| *v)
    }

    pub fn is_constant_value(&self, value: DataValue) -> bool {
        self.constants.iter().any(|(_, v)| *v == value)
    }
}

/// A finite map from atoms to data values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    bindings: BTreeMap<Atom, DataValue>,
}

impl Valuation {
    pub fn empty() -> Self {
        Valuation { bindings: BTreeMap::new() }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Atom, DataValue)>) -> Self {
        Valuation { bindings: pairs.into_iter().collect() }
    }

    /// Binds `x1..xn` to the given values in order.
    pub fn of_word_values(values: &[DataValue]) -> Self {
        Valuation {
            bindings: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (Atom::Var(i as u32 + 1), v))
                .collect(),
        }
    }

    pub fn bind(&mut self, atom: Atom, value: DataValue) {
        self.bindings.insert(atom, value);
    }

    pub fn get(&self, atom: &Atom) -> Option<DataValue> {
        self.bindings.get(atom).copied()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, DataValue)> {
        self.bindings.iter().map(|(a, v)| (a, *v))
    }

    /// Resolves an atom to its value: constants through the structure,
    /// everything else through the bindings.
    pub fn resolve(&self, atom: &Atom, structure: &Structure) -> Result<DataValue, GuardError> {
        match atom {
            Atom::Const(name) => structure.value_of(name),
            _ => self
                .get(atom)
                .ok_or_else(|| GuardError::Unbound(atom.clone())),
        }
    }

    /// Literal-wise evaluation of a guard; errors if the guard mentions an
    /// atom this valuation does not bind.
    pub fn satisfies(&self, guard: &Guard, structure: &Structure) -> Result<bool, GuardError> {
        for lit in guard.literals() {
            let l = self.resolve(&lit.lhs, structure)?;
            let r = self.resolve(&lit.rhs, structure)?;
            if (l == r) != lit.equal {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Guard evaluation as a standalone operation.
pub fn evaluate_guard(
    valuation: &Valuation,
    guard: &Guard,
    structure: &Structure,
) -> Result<bool, GuardError> {
    valuation.satisfies(guard, structure)
}

/// Parses the textual guard grammar: `p`, `x<i>`, `c:<name>`, `==`, `!=`,
/// `&&` and `true`.
pub fn parse_guard(text: &str) -> Result<Guard, String> {
    let text = text.trim();
    if text.is_empty() || text == "true" {
        return Ok(Guard::top());
    }
    let mut literals = Vec::new();
    for clause in text.split("&&") {
        let clause = clause.trim();
        let (lhs, rhs, equal) = if let Some((l, r)) = clause.split_once("==") {
            (l, r, true)
        } else if let Some((l, r)) = clause.split_once("!=") {
            (l, r, false)
        } else {
            return Err(format!("expected `==` or `!=` in `{clause}`"));
        };
        literals.push(Literal::new(parse_atom(lhs)?, parse_atom(rhs)?, equal));
    }
    Ok(Guard::new(literals))
}

fn parse_atom(text: &str) -> Result<Atom, String> {
    let text = text.trim();
    if text == "p" {
        return Ok(Atom::Param);
    }
    if let Some(name) = text.strip_prefix("c:") {
        if name.is_empty() {
            return Err("empty constant name".to_string());
        }
        return Ok(Atom::Const(name.to_string()));
    }
    if let Some(idx) = text.strip_prefix('x') {
        if let Ok(i) = idx.parse::<u32>() {
            if i >= 1 {
                return Ok(Atom::Var(i));
            }
        }
    }
    if let Some(idx) = text.strip_prefix('v') {
        if let Ok(i) = idx.parse::<u32>() {
            if i >= 1 {
                return Ok(Atom::Marker(i));
            }
        }
    }
    Err(format!("cannot parse atom `{text}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_conjunction_is_true() {
        let nu = Valuation::empty();
        let s = Structure::empty();
        assert!(nu.satisfies(&Guard::top(), &s).unwrap());
    }

    #[test]
    fn reflexive_equality_holds() {
        let nu = Valuation::from_pairs([(Atom::Var(1), 5), (Atom::Param, 5)]);
        let g = Guard::new(vec![Literal::eq(Atom::Param, Atom::Var(1))]);
        assert!(nu.satisfies(&g, &Structure::empty()).unwrap());
    }

    #[test]
    fn lock_guard_rejects_wrong_value() {
        // p == c with constant c = 1 under p |-> 3
        let s = Structure::new(vec![("c".to_string(), 1)]).unwrap();
        let nu = Valuation::from_pairs([(Atom::Param, 3)]);
        let g = Guard::new(vec![Literal::eq(Atom::Param, Atom::Const("c".to_string()))]);
        assert!(!nu.satisfies(&g, &s).unwrap());
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let nu = Valuation::empty();
        let g = Guard::new(vec![Literal::eq(Atom::Param, Atom::Var(1))]);
        assert_eq!(
            nu.satisfies(&g, &Structure::empty()),
            Err(GuardError::Unbound(Atom::Param))
        );
    }

    #[test]
    fn literal_orientation_puts_greater_atom_left() {
        let l = Literal::eq(Atom::Var(1), Atom::Var(3));
        assert_eq!(l.lhs, Atom::Var(3));
        assert_eq!(l.rhs, Atom::Var(1));
        let l = Literal::eq(Atom::Const("one".into()), Atom::Var(2));
        assert_eq!(l.lhs, Atom::Var(2));
        let l = Literal::eq(Atom::Param, Atom::Var(9));
        assert_eq!(l.lhs, Atom::Param);
    }

    #[test]
    fn guard_canonical_form_sorts_and_dedups() {
        let a = Guard::new(vec![
            Literal::eq(Atom::Var(3), Atom::Var(1)),
            Literal::neq(Atom::Var(4), Atom::Var(2)),
            Literal::eq(Atom::Var(1), Atom::Var(3)),
        ]);
        let b = Guard::new(vec![
            Literal::neq(Atom::Var(4), Atom::Var(2)),
            Literal::eq(Atom::Var(3), Atom::Var(1)),
        ]);
        assert_eq!(a, b);
        assert_eq!(a.literals().len(), 2);
    }

    #[test]
    fn structure_rejects_duplicate_values() {
        assert!(Structure::new(vec![("a".into(), 1), ("b".into(), 1)]).is_err());
        assert!(Structure::new(vec![("a".into(), 1), ("a".into(), 2)]).is_err());
    }

    #[test]
    fn guard_round_trips_through_text() {
        for text in ["true", "p == x1", "p != x1 && p != c:one", "x3 == x1 && x4 != x2"] {
            let g = parse_guard(text).unwrap();
            assert_eq!(parse_guard(&g.to_string()).unwrap(), g);
        }
        assert_eq!(parse_guard("true").unwrap(), Guard::top());
        assert!(parse_guard("p << x1").is_err());
        assert!(parse_guard("x0 == p").is_err());
    }
}
