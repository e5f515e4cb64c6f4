//! The tainted tree oracle.
//!
//! A tree query is answered in three stages: build a characteristic
//! predicate of the query by exploring one representative word per
//! constraint path, convert the predicate into a (possibly redundant)
//! decision tree, and minimise the tree by merging equality branches that
//! the fresh branch already explains.

use std::time::Instant;

use crate::guard::{Atom, DataValue, Guard, Literal, Structure, Valuation};
use crate::oracle::{QueryBudget, QueryError, TreeOracle, TreeQuery, UsageTracker};
use crate::sdt::{diseq_guard, eq_guard, specialise_onto, SdtNode, SymbolicDecisionTree};
use crate::solver::{satisfiable_under, DnfPredicate, Frontier};
use crate::sut::{Meter, SutSession};
use crate::word::{DataSymbol, DataWord};

/// The predicate over `x1..x(k+n)` characterising the accepted
/// instantiations of a tree query, plus the exploration transcript.
#[derive(Clone, Debug)]
pub struct CharacteristicPredicate {
    pub predicate: DnfPredicate,
    /// Every explored word with its verdict, in exploration order; its
    /// length is the number of loop iterations the construction took.
    pub transcript: Vec<(DataWord, bool)>,
}

pub struct TaintedTreeOracle {
    tracker: UsageTracker,
}

impl TaintedTreeOracle {
    pub fn new(budget: QueryBudget) -> Self {
        TaintedTreeOracle { tracker: UsageTracker::new(budget) }
    }

    /// Explores the query's constraint paths with tainted membership
    /// queries until the frontier is exhausted. Each iteration costs one
    /// reset plus one word.
    pub fn characteristic_predicate(
        &mut self,
        session: &mut SutSession,
        query: &TreeQuery,
    ) -> Result<CharacteristicPredicate, QueryError> {
        let started = Instant::now();
        self.characteristic_predicate_from(session, query, started)
    }

    fn characteristic_predicate_from(
        &mut self,
        session: &mut SutSession,
        query: &TreeQuery,
        started: Instant,
    ) -> Result<CharacteristicPredicate, QueryError> {
        explore_characteristic_predicate(&mut self.tracker, session, query, started)
    }

    pub fn used(&self) -> Meter {
        self.tracker.used
    }
}

impl TreeOracle for TaintedTreeOracle {
    fn tree_query(
        &mut self,
        session: &mut SutSession,
        query: &TreeQuery,
    ) -> Result<SymbolicDecisionTree, QueryError> {
        let started = Instant::now();
        let characteristic =
            self.characteristic_predicate_from(session, query, started)?;
        let nu_u = Valuation::of_word_values(&query.prefix.values());
        let tree = build_sdt(
            &characteristic.predicate,
            query.prefix.len(),
            &query.suffix,
            &nu_u,
            session.structure(),
        );
        let root = minimise(&tree.root);
        Ok(SymbolicDecisionTree { root, ..tree })
    }

    fn used(&self) -> Meter {
        self.tracker.used
    }
}

/// The shared exploration loop: draw a model of the unexplored frontier,
/// query its word, record the path constraint, and exclude it, until the
/// frontier is exhausted.
pub(crate) fn explore_characteristic_predicate(
    tracker: &mut UsageTracker,
    session: &mut SutSession,
    query: &TreeQuery,
    started: Instant,
) -> Result<CharacteristicPredicate, QueryError> {
    let structure = session.structure().clone();
    let k = query.prefix.len();
    let n = query.suffix.len();
    let prefix_values = query.prefix.values();
    let nu_u = Valuation::of_word_values(&prefix_values);

    let mut frontier = Frontier::new(structure.clone(), (k + n) as u32, nu_u);
    let mut predicate = DnfPredicate::bottom();
    let mut transcript = Vec::new();

    while let Some(model) = frontier.next_model() {
        let word = instantiate(query, &model);
        let observation = tracker.membership(session, started, &word)?;
        let path =
            canonical_path_constraint(&observation.constraints[k..], &prefix_values, &structure);
        if observation.accepted {
            predicate.add_disjunct(path.clone());
        }
        transcript.push((word, observation.accepted));
        frontier.exclude(path);
    }
    Ok(CharacteristicPredicate { predicate, transcript })
}

/// Builds the query word for a frontier model: prefix values are fixed,
/// suffix values come from the model.
fn instantiate(query: &TreeQuery, model: &Valuation) -> DataWord {
    let k = query.prefix.len();
    let mut word = query.prefix.clone();
    for (j, action) in query.suffix.iter().enumerate() {
        let value = model
            .get(&Atom::Var((k + j + 1) as u32))
            .expect("frontier model is total");
        word.push(DataSymbol::new(action, value));
    }
    word
}

/// Conjoins the suffix-step constraints of one observation into a path
/// constraint over indexed variables.
///
/// Markers become their position's variable. References to prefix positions
/// are rewritten to the representative that later guard construction will
/// use: the constant symbol when the prefix value is a constant, otherwise
/// the latest prefix position holding the same value.
fn canonical_path_constraint(
    suffix_constraints: &[Guard],
    prefix_values: &[DataValue],
    structure: &Structure,
) -> Guard {
    let k = prefix_values.len();
    let rewrite = |atom: &Atom| -> Atom {
        match atom {
            Atom::Marker(j) if (*j as usize) <= k => {
                let value = prefix_values[*j as usize - 1];
                if let Some(name) = structure.constant_with_value(value) {
                    Atom::Const(name.to_string())
                } else {
                    let latest = (1..=k)
                        .rev()
                        .find(|&i| prefix_values[i - 1] == value)
                        .expect("value present at its own position");
                    Atom::Var(latest as u32)
                }
            }
            Atom::Marker(j) => Atom::Var(*j),
            other => other.clone(),
        }
    };
    let mut literals = Vec::new();
    for guard in suffix_constraints {
        for lit in guard.literals() {
            literals.push(Literal::new(rewrite(&lit.lhs), rewrite(&lit.rhs), lit.equal));
        }
    }
    Guard::new(literals)
}

/// Converts a characteristic predicate into a decision tree over the suffix
/// variables `x(k+1)..x(k+n)`.
///
/// At each level the branch targets are the references the predicate
/// compares that variable against. The residual predicate of an equality
/// branch is rewritten so the merged value is referenced through its new
/// representative: the branch variable for a position, the constant symbol
/// for a constant. Disjuncts that contradict the prefix valuation are
/// dropped.
pub fn build_sdt(
    predicate: &DnfPredicate,
    prefix_len: usize,
    suffix: &[String],
    nu_u: &Valuation,
    structure: &Structure,
) -> SymbolicDecisionTree {
    let root = construct(
        predicate,
        prefix_len as u32 + 1,
        (prefix_len + suffix.len()) as u32,
        nu_u,
        structure,
    );
    SymbolicDecisionTree { prefix_len, suffix: suffix.to_vec(), root }
}

fn construct(
    predicate: &DnfPredicate,
    var: u32,
    last: u32,
    nu_u: &Valuation,
    structure: &Structure,
) -> SdtNode {
    if var > last {
        return SdtNode::leaf(!predicate.is_bottom());
    }

    let mut refs: Vec<Atom> = Vec::new();
    for disjunct in &predicate.disjuncts {
        for lit in disjunct.literals() {
            if lit.lhs == Atom::Var(var) && !refs.contains(&lit.rhs) {
                refs.push(lit.rhs.clone());
            }
        }
    }
    refs.sort();

    if refs.is_empty() {
        let child = construct(predicate, var + 1, last, nu_u, structure);
        return SdtNode::branch(var, vec![(Guard::top(), child)]);
    }

    let mut children = Vec::with_capacity(refs.len() + 1);

    let fresh_guard = diseq_guard(var, &refs);
    let residual = restrict(predicate, &fresh_guard, None, nu_u, structure);
    children.push((
        fresh_guard,
        construct(&residual, var + 1, last, nu_u, structure),
    ));

    for target in &refs {
        let guard = eq_guard(var, target);
        let rewrite = match target {
            Atom::Var(_) => (target.clone(), Atom::Var(var)),
            _ => (Atom::Var(var), target.clone()),
        };
        let residual = restrict(predicate, &guard, Some(rewrite), nu_u, structure);
        children.push((guard, construct(&residual, var + 1, last, nu_u, structure)));
    }
    SdtNode::branch(var, children)
}

/// Conjoins `guard` onto every disjunct, keeps the ones satisfiable under
/// the prefix valuation, and applies the representative rewriting of an
/// equality branch.
fn restrict(
    predicate: &DnfPredicate,
    guard: &Guard,
    rewrite: Option<(Atom, Atom)>,
    nu_u: &Valuation,
    structure: &Structure,
) -> DnfPredicate {
    let mut out = DnfPredicate::bottom();
    for disjunct in &predicate.disjuncts {
        let conjoined = disjunct.and(guard);
        if !satisfiable_under(&conjoined, nu_u, structure) {
            continue;
        }
        let kept = match &rewrite {
            Some((from, to)) => conjoined.substitute(from, to).and(guard),
            None => conjoined,
        };
        out.add_disjunct(kept);
    }
    out
}

/// Drops every equality branch whose subtree the fresh branch reproduces
/// under the merge relabelling, bottom-up.
pub fn minimise(node: &SdtNode) -> SdtNode {
    let SdtNode::Branch { var, children } = node else {
        return node.clone();
    };
    let var = *var;
    let minimised: Vec<(Guard, SdtNode)> = children
        .iter()
        .map(|(g, t)| (g.clone(), minimise(t)))
        .collect();

    let is_eq_child = |guard: &Guard| {
        matches!(guard.literals(), [lit] if lit.equal && lit.lhs == Atom::Var(var))
    };
    let fresh = minimised.iter().find(|(g, _)| !is_eq_child(g));
    let Some((_, fresh_subtree)) = fresh else {
        return SdtNode::branch(var, minimised);
    };
    let fresh_subtree = fresh_subtree.clone();

    let mut kept_refs = Vec::new();
    let mut children_out = Vec::new();
    for (guard, subtree) in &minimised {
        if !is_eq_child(guard) {
            continue;
        }
        let target = guard.literals()[0].rhs.clone();
        let explained = specialise_onto(&fresh_subtree, var, &target)
            .is_some_and(|merged| merged.isomorphic(subtree));
        if !explained {
            kept_refs.push(target);
            children_out.push((guard.clone(), subtree.clone()));
        }
    }
    let fresh_guard =
        if kept_refs.is_empty() { Guard::top() } else { diseq_guard(var, &kept_refs) };
    children_out.push((fresh_guard, fresh_subtree));
    SdtNode::branch(var, children_out)
}
