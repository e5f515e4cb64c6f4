//! Decision procedure and model finder for conjunctions and disjunctions of
//! equality/disequality literals over naturals with named constants.
//!
//! Satisfiability is decided by a union-find pass: equalities merge classes
//! (constants are pre-seeded with their fixed values), and a conjunction is
//! unsatisfiable exactly when a disequality connects one class or two
//! distinct constants end up merged. Model construction assigns each
//! undetermined class the smallest natural that collides with nothing.

use std::collections::BTreeMap;

use crate::guard::{Atom, DataValue, Guard, Structure, Valuation};

/// A disjunction of conjunctions; the empty disjunction is `false`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DnfPredicate {
    pub disjuncts: Vec<Guard>,
}

impl DnfPredicate {
    /// The unsatisfiable predicate.
    pub fn bottom() -> Self {
        DnfPredicate { disjuncts: Vec::new() }
    }

    /// The trivially true predicate (a single empty conjunction).
    pub fn top() -> Self {
        DnfPredicate { disjuncts: vec![Guard::top()] }
    }

    pub fn is_bottom(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn add_disjunct(&mut self, guard: Guard) {
        self.disjuncts.push(guard);
    }
}

impl std::fmt::Display for DnfPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.disjuncts.is_empty() {
            return write!(f, "false");
        }
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " || ")?;
            }
            write!(f, "({d})")?;
        }
        Ok(())
    }
}

/// Union-find over the atoms of a conjunction, with an optional fixed value
/// per class (from constants or pre-bound variables).
struct Classes {
    parent: Vec<usize>,
    value: Vec<Option<DataValue>>,
    index: BTreeMap<Atom, usize>,
}

impl Classes {
    fn new() -> Self {
        Classes { parent: Vec::new(), value: Vec::new(), index: BTreeMap::new() }
    }

    fn node(&mut self, atom: &Atom, structure: &Structure, fixed: &Valuation) -> usize {
        if let Some(&i) = self.index.get(atom) {
            return i;
        }
        let i = self.parent.len();
        self.parent.push(i);
        let value = match atom {
            Atom::Const(name) => structure.value_of(name).ok(),
            other => fixed.get(other),
        };
        self.value.push(value);
        self.index.insert(atom.clone(), i);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Merges two classes; fails when their fixed values disagree.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let merged = match (self.value[ra], self.value[rb]) {
            (Some(x), Some(y)) if x != y => return false,
            (Some(x), _) => Some(x),
            (_, y) => y,
        };
        self.parent[ra] = rb;
        self.value[rb] = merged;
        true
    }
}

/// Decides satisfiability of a conjunction over the naturals.
pub fn satisfiable(conjunction: &Guard, structure: &Structure) -> bool {
    satisfiable_under(conjunction, &Valuation::empty(), structure)
}

/// Satisfiability when some atoms are already pinned to concrete values.
pub fn satisfiable_under(
    conjunction: &Guard,
    fixed: &Valuation,
    structure: &Structure,
) -> bool {
    build_classes(conjunction, fixed, structure).is_some()
}

/// Runs the union-find pass; `None` means unsatisfiable.
fn build_classes(
    conjunction: &Guard,
    fixed: &Valuation,
    structure: &Structure,
) -> Option<Classes> {
    let mut classes = Classes::new();
    for lit in conjunction.literals() {
        if lit.equal {
            let a = classes.node(&lit.lhs, structure, fixed);
            let b = classes.node(&lit.rhs, structure, fixed);
            if !classes.union(a, b) {
                return None;
            }
        }
    }
    for lit in conjunction.literals() {
        if !lit.equal {
            let a = classes.node(&lit.lhs, structure, fixed);
            let b = classes.node(&lit.rhs, structure, fixed);
            let (ra, rb) = (classes.find(a), classes.find(b));
            if ra == rb {
                return None;
            }
            if let (Some(x), Some(y)) = (classes.value[ra], classes.value[rb]) {
                if x == y {
                    return None;
                }
            }
        }
    }
    Some(classes)
}

/// Extends `fixed` to a total valuation of `x1..x<num_vars>` satisfying some
/// disjunct of `predicate`, or `None` if no disjunct admits one.
///
/// Disjuncts are tried in order. Classes not forced to a value get the
/// smallest natural distinct from every constant, every fixed binding and
/// every value already chosen.
pub fn find_model(
    predicate: &DnfPredicate,
    fixed: &Valuation,
    num_vars: u32,
    structure: &Structure,
) -> Option<Valuation> {
    predicate
        .disjuncts
        .iter()
        .find_map(|disjunct| model_of_conjunction(disjunct, fixed, num_vars, structure))
}

fn model_of_conjunction(
    conjunction: &Guard,
    fixed: &Valuation,
    num_vars: u32,
    structure: &Structure,
) -> Option<Valuation> {
    let mut classes = build_classes(conjunction, fixed, structure)?;
    let mut model = Valuation::empty();
    for (atom, value) in fixed.iter() {
        model.bind(atom.clone(), value);
    }

    let mut taken: Vec<DataValue> = structure.constant_values().collect();
    taken.extend(fixed.iter().map(|(_, v)| v));

    // Assign variables in index order so fresh values are reproducible.
    for i in 1..=num_vars {
        let var = Atom::Var(i);
        if model.get(&var).is_some() {
            continue;
        }
        let node = classes.node(&var, structure, fixed);
        let root = classes.find(node);
        let value = match classes.value[root] {
            Some(v) => v,
            None => {
                let fresh = smallest_unused(&taken);
                classes.value[root] = Some(fresh);
                fresh
            }
        };
        taken.push(value);
        model.bind(var, value);
    }
    Some(model)
}

fn smallest_unused(taken: &[DataValue]) -> DataValue {
    let mut v = 0;
    while taken.contains(&v) {
        v += 1;
    }
    v
}

/// The still-unexplored part of the parameter space during characteristic
/// predicate construction.
///
/// Starting from `true`, conjunctions are excluded one by one; a model
/// returned by [`Frontier::next_model`] satisfies none of the excluded
/// conjunctions. Candidate valuations are enumerated by equality type: each
/// free variable is, in order, tried fresh first, then equal to each anchor
/// value (fixed bindings and constants, ascending), then equal to each
/// earlier fresh variable. The frontier is exhausted exactly when every
/// equality type has been excluded.
#[derive(Clone, Debug)]
pub struct Frontier {
    structure: Structure,
    num_vars: u32,
    fixed: Valuation,
    blocked: Vec<Guard>,
}

impl Frontier {
    pub fn new(structure: Structure, num_vars: u32, fixed: Valuation) -> Self {
        Frontier { structure, num_vars, fixed, blocked: Vec::new() }
    }

    /// Excludes every valuation satisfying `conjunction` from future models.
    pub fn exclude(&mut self, conjunction: Guard) {
        self.blocked.push(conjunction);
    }

    pub fn excluded(&self) -> &[Guard] {
        &self.blocked
    }

    /// The first (in enumeration order) valuation extending the fixed
    /// bindings that satisfies no excluded conjunction.
    pub fn next_model(&self) -> Option<Valuation> {
        let free: Vec<u32> = (1..=self.num_vars)
            .filter(|i| self.fixed.get(&Atom::Var(*i)).is_none())
            .collect();

        let mut anchors: Vec<DataValue> = self.structure.constant_values().collect();
        anchors.extend(self.fixed.iter().map(|(_, v)| v));
        anchors.sort_unstable();
        anchors.dedup();

        let mut assignment: Vec<DataValue> = Vec::with_capacity(free.len());
        if self.search(&free, &anchors, &mut assignment) {
            let mut model = Valuation::empty();
            for (atom, value) in self.fixed.iter() {
                model.bind(atom.clone(), value);
            }
            for (&i, &v) in free.iter().zip(assignment.iter()) {
                model.bind(Atom::Var(i), v);
            }
            Some(model)
        } else {
            None
        }
    }

    fn search(&self, free: &[u32], anchors: &[DataValue], assignment: &mut Vec<DataValue>) -> bool {
        if assignment.len() == free.len() {
            return !self.some_blocked_holds(free, assignment, false);
        }
        for value in self.choices(anchors, assignment) {
            assignment.push(value);
            let pruned = self.some_blocked_holds(free, assignment, true);
            if !pruned && self.search(free, anchors, assignment) {
                return true;
            }
            assignment.pop();
        }
        false
    }

    /// Candidate values for the next free variable: one fresh value first,
    /// then anchors ascending, then the fresh values of earlier variables.
    fn choices(&self, anchors: &[DataValue], assignment: &[DataValue]) -> Vec<DataValue> {
        let mut taken: Vec<DataValue> = anchors.to_vec();
        taken.extend_from_slice(assignment);
        let mut out = vec![smallest_unused(&taken)];
        out.extend_from_slice(anchors);
        for v in assignment {
            if !anchors.contains(v) && !out.contains(v) {
                out.push(*v);
            }
        }
        out
    }

    /// Checks blocked conjunctions against the partial assignment. With
    /// `partial_only`, a conjunction counts only when all its atoms are
    /// already decided, which makes the check usable for pruning.
    fn some_blocked_holds(&self, free: &[u32], assignment: &[DataValue], partial_only: bool) -> bool {
        let lookup = |atom: &Atom| -> Option<DataValue> {
            match atom {
                Atom::Const(name) => self.structure.value_of(name).ok(),
                Atom::Var(i) => self.fixed.get(atom).or_else(|| {
                    free.iter()
                        .position(|j| j == i)
                        .filter(|&pos| pos < assignment.len())
                        .map(|pos| assignment[pos])
                }),
                other => self.fixed.get(other),
            }
        };
        'next: for guard in &self.blocked {
            for lit in guard.literals() {
                match (lookup(&lit.lhs), lookup(&lit.rhs)) {
                    (Some(l), Some(r)) => {
                        if (l == r) != lit.equal {
                            continue 'next;
                        }
                    }
                    _ => {
                        if partial_only {
                            continue 'next;
                        }
                        // An undecided atom in a full assignment means the
                        // guard mentions a variable outside our scope;
                        // treat the literal as not constraining us.
                    }
                }
            }
            return true;
        }
        false
    }
}

/// Logical equivalence of two DNF predicates over `x1..x<num_vars>` for all
/// valuations extending `fixed`, decided by enumerating equality types.
pub fn dnf_equivalent_under(
    a: &DnfPredicate,
    b: &DnfPredicate,
    fixed: &Valuation,
    num_vars: u32,
    structure: &Structure,
) -> bool {
    let mut frontier = Frontier::new(structure.clone(), num_vars, fixed.clone());
    loop {
        let Some(model) = frontier.next_model() else {
            return true;
        };
        let holds = |p: &DnfPredicate| {
            p.disjuncts
                .iter()
                .any(|d| model.satisfies(d, structure).unwrap_or(false))
        };
        if holds(a) != holds(b) {
            return false;
        }
        frontier.exclude(equality_type_of(&model, structure));
    }
}

/// The full equality type of a model as a conjunction: for every pair of
/// bound atoms one (dis)equality, and for every atom/constant pair likewise.
pub fn equality_type_of(model: &Valuation, structure: &Structure) -> Guard {
    let atoms: Vec<(Atom, DataValue)> =
        model.iter().map(|(a, v)| (a.clone(), v)).collect();
    let mut literals = Vec::new();
    for (i, (a, va)) in atoms.iter().enumerate() {
        for (b, vb) in atoms.iter().skip(i + 1) {
            literals.push(crate::guard::Literal::new(a.clone(), b.clone(), va == vb));
        }
        for (name, value) in structure.constants() {
            literals.push(crate::guard::Literal::new(
                a.clone(),
                Atom::Const(name.clone()),
                *va == *value,
            ));
        }
    }
    Guard::new(literals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guard::Literal;

    fn var(i: u32) -> Atom {
        Atom::Var(i)
    }

    #[test]
    fn direct_contradiction_is_unsat() {
        let g = Guard::new(vec![
            Literal::eq(var(3), var(1)),
            Literal::neq(var(3), var(1)),
        ]);
        assert!(!satisfiable(&g, &Structure::empty()));
    }

    #[test]
    fn constants_pin_values() {
        // (x2 = x1) && (x2 = c:one) && (x1 = c:two) with one=1, two=2
        let s = Structure::new(vec![("one".into(), 1), ("two".into(), 2)]).unwrap();
        let g = Guard::new(vec![
            Literal::eq(var(2), var(1)),
            Literal::eq(var(2), Atom::Const("one".into())),
            Literal::eq(var(1), Atom::Const("two".into())),
        ]);
        assert!(!satisfiable(&g, &s));
        // Brute force over {1, 2, 3} agrees.
        let mut brute_sat = false;
        for a in 1..=3u64 {
            for b in 1..=3u64 {
                let nu = Valuation::from_pairs([(var(1), a), (var(2), b)]);
                if nu.satisfies(&g, &s).unwrap() {
                    brute_sat = true;
                }
            }
        }
        assert!(!brute_sat);
    }

    #[test]
    fn model_respects_fixed_bindings_and_equalities() {
        // (x3 = x1) && (x4 = x2) under x1 |-> 5, x2 |-> 7
        let fixed = Valuation::from_pairs([(var(1), 5), (var(2), 7)]);
        let p = DnfPredicate {
            disjuncts: vec![Guard::new(vec![
                Literal::eq(var(3), var(1)),
                Literal::eq(var(4), var(2)),
            ])],
        };
        let m = find_model(&p, &fixed, 4, &Structure::empty()).unwrap();
        assert_eq!(m.get(&var(3)), Some(5));
        assert_eq!(m.get(&var(4)), Some(7));
    }

    #[test]
    fn model_of_top_uses_fresh_values() {
        let fixed = Valuation::from_pairs([(var(1), 5), (var(2), 7)]);
        let m = find_model(&DnfPredicate::top(), &fixed, 4, &Structure::empty()).unwrap();
        let p = DnfPredicate::top();
        assert!(m.satisfies(&p.disjuncts[0], &Structure::empty()).unwrap());
        // Fresh values avoid the fixed bindings and each other.
        assert_eq!(m.get(&var(3)), Some(0));
        assert_eq!(m.get(&var(4)), Some(1));
    }

    #[test]
    fn model_avoids_constants() {
        // x1 != c:one with one=1 gives x1 |-> 0
        let s = Structure::new(vec![("one".into(), 1)]).unwrap();
        let p = DnfPredicate {
            disjuncts: vec![Guard::new(vec![Literal::neq(
                var(1),
                Atom::Const("one".into()),
            )])],
        };
        let m = find_model(&p, &Valuation::empty(), 1, &s).unwrap();
        assert_eq!(m.get(&var(1)), Some(0));
    }

    #[test]
    fn frontier_of_negated_top_is_empty() {
        let mut f = Frontier::new(Structure::empty(), 2, Valuation::empty());
        f.exclude(Guard::top());
        assert!(f.next_model().is_none());
    }

    #[test]
    fn frontier_walkthrough_terminates_after_three_paths() {
        // Frontier over x1..x4 with x1 |-> 5, x2 |-> 7; excluding the three
        // path constraints leaves nothing.
        let fixed = Valuation::from_pairs([(var(1), 5), (var(2), 7)]);
        let mut f = Frontier::new(Structure::empty(), 4, fixed);
        f.exclude(Guard::new(vec![Literal::neq(var(3), var(1))]));
        f.exclude(Guard::new(vec![
            Literal::eq(var(3), var(1)),
            Literal::neq(var(4), var(2)),
        ]));
        let m = f.next_model().expect("one path left");
        assert_eq!(m.get(&var(3)), Some(5));
        assert_eq!(m.get(&var(4)), Some(7));
        f.exclude(Guard::new(vec![
            Literal::eq(var(3), var(1)),
            Literal::eq(var(4), var(2)),
        ]));
        assert!(f.next_model().is_none());
    }

    #[test]
    fn excluding_an_equality_forces_the_disequality() {
        let mut f = Frontier::new(Structure::empty(), 2, Valuation::empty());
        f.exclude(Guard::new(vec![Literal::eq(var(2), var(1))]));
        let m = f.next_model().unwrap();
        assert_ne!(m.get(&var(1)), m.get(&var(2)));
    }

    #[test]
    fn frontier_enumerates_each_equality_type_once() {
        // Two free variables, one constant: the equality types are the
        // partitions of {x1, x2} with classes optionally anchored to the
        // constant: x1=x2 in {c, fresh} (2) plus x1 != x2 with each side in
        // {c, fresh} minus the impossible both-equal-c case (4 - 1 = 3).
        let s = Structure::new(vec![("k".into(), 9)]).unwrap();
        let mut f = Frontier::new(s.clone(), 2, Valuation::empty());
        let mut seen = Vec::new();
        while let Some(m) = f.next_model() {
            let ty = equality_type_of(&m, &s);
            assert!(!seen.contains(&ty), "type enumerated twice: {ty}");
            seen.push(ty.clone());
            f.exclude(ty);
            assert!(seen.len() <= 16, "runaway enumeration");
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn find_model_returns_none_for_bottom() {
        assert!(find_model(
            &DnfPredicate::bottom(),
            &Valuation::empty(),
            3,
            &Structure::empty()
        )
        .is_none());
    }
}
