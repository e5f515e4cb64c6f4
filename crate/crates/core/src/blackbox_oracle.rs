//! The black-box tree oracle: answers tree queries from yes/no membership
//! verdicts alone, ignoring all taint information.
//!
//! Trees are built bottom-up. For each suffix action the oracle decides
//! which stored values (and which constants) actually influence future
//! behaviour: a candidate is necessary when the fresh-value branch, seen
//! through the merge relabelling, fails to reproduce the candidate's
//! subtree. Children are then one equality branch per necessary reference
//! plus the fresh branch under the conjoined disequality.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use thiserror::Error;

use crate::canon;
use crate::guard::{Atom, DataValue, Guard, Structure, Valuation};
use crate::oracle::{QueryBudget, QueryError, TreeOracle, TreeQuery, UsageTracker};
use crate::sdt::{diseq_guard, eq_guard, specialise_onto, SdtNode, SymbolicDecisionTree};
use crate::solver;
use crate::sut::{Meter, SutSession};
use crate::word::{DataSymbol, DataWord};

/// The positions of a word whose values can still be referenced: those with
/// no equal value at a later position.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PotentialSet {
    pub indices: BTreeSet<u32>,
}

pub fn potential(word: &DataWord) -> PotentialSet {
    let values = word.values();
    let indices = (1..=values.len())
        .filter(|&i| !values[i..].contains(&values[i - 1]))
        .map(|i| i as u32)
        .collect();
    PotentialSet { indices }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RepresentativeError {
    #[error("guard `{0}` has no model under the prefix valuation")]
    Unsatisfiable(Guard),
}

/// A data value `d` such that the prefix valuation extended by `p -> d`
/// satisfies the guard; the all-disequalities guard yields the smallest
/// value that avoids the prefix and the constants.
pub fn representative_value(
    word: &DataWord,
    guard: &Guard,
    structure: &Structure,
) -> Result<DataValue, RepresentativeError> {
    let values = word.values();
    let param = Atom::Var(values.len() as u32 + 1);
    let renamed = guard.substitute(&Atom::Param, &param);
    let nu_u = Valuation::of_word_values(&values);
    let predicate = solver::DnfPredicate { disjuncts: vec![renamed] };
    let model = solver::find_model(&predicate, &nu_u, values.len() as u32 + 1, structure)
        .ok_or_else(|| RepresentativeError::Unsatisfiable(guard.clone()))?;
    Ok(model.get(&param).expect("model is total"))
}

pub struct BlackboxTreeOracle {
    tracker: UsageTracker,
    memoize: bool,
    memo: HashMap<(Vec<DataSymbol>, usize), SdtNode>,
}

impl BlackboxTreeOracle {
    pub fn new(budget: QueryBudget) -> Self {
        BlackboxTreeOracle { tracker: UsageTracker::new(budget), memoize: false, memo: HashMap::new() }
    }

    /// Reuses subtrees for repeated (prefix, remaining-suffix) pairs within
    /// one query. Off by default so query counts reflect the naive cost.
    pub fn with_memoization(mut self, on: bool) -> Self {
        self.memoize = on;
        self
    }

    pub fn used(&self) -> Meter {
        self.tracker.used
    }

    /// The candidate references available after `prefix`: potential
    /// positions whose value is not a constant, plus every constant symbol.
    fn candidate_refs(prefix: &DataWord, structure: &Structure) -> Vec<Atom> {
        let values = prefix.values();
        let mut refs: Vec<Atom> = potential(prefix)
            .indices
            .into_iter()
            .filter(|&i| !structure.is_constant_value(values[i as usize - 1]))
            .map(Atom::Var)
            .collect();
        refs.extend(
            structure
                .constants()
                .iter()
                .map(|(name, _)| Atom::Const(name.clone())),
        );
        refs.sort();
        refs
    }

    fn ref_value(prefix: &DataWord, target: &Atom, structure: &Structure) -> DataValue {
        match target {
            Atom::Var(i) => prefix.values()[*i as usize - 1],
            Atom::Const(name) => structure.value_of(name).expect("catalog constant"),
            _ => unreachable!("candidate refs are positions or constants"),
        }
    }

    /// The necessary subset of the candidates for the next `action`: a
    /// candidate stays when merging it onto the fresh branch is undefined
    /// or changes the tree.
    pub fn necessary_refs(
        &mut self,
        session: &mut SutSession,
        prefix: &DataWord,
        action: &str,
        rest: &[String],
    ) -> Result<Vec<Atom>, QueryError> {
        let started = Instant::now();
        self.necessary_refs_from(session, prefix, action, rest, started)
    }

    fn necessary_refs_from(
        &mut self,
        session: &mut SutSession,
        prefix: &DataWord,
        action: &str,
        rest: &[String],
        started: Instant,
    ) -> Result<Vec<Atom>, QueryError> {
        let structure = session.structure().clone();
        let parameterised = session
            .actions()
            .iter()
            .find(|a| a.name == action)
            .is_none_or(|a| a.parameterised);
        if !parameterised {
            return Ok(Vec::new());
        }
        let var = prefix.len() as u32 + 1;
        let fresh = canon::fresh_value(&prefix.values(), &structure);
        let mut necessary = Vec::new();
        for target in Self::candidate_refs(prefix, &structure) {
            let fresh_tree =
                self.build(session, &prefix.extended(DataSymbol::new(action, fresh)), rest, started)?;
            let value = Self::ref_value(prefix, &target, &structure);
            let candidate_tree =
                self.build(session, &prefix.extended(DataSymbol::new(action, value)), rest, started)?;
            let explained = specialise_onto(&fresh_tree, var, &target)
                .is_some_and(|merged| merged.isomorphic(&candidate_tree));
            if !explained {
                necessary.push(target);
            }
        }
        Ok(necessary)
    }

    fn build(
        &mut self,
        session: &mut SutSession,
        prefix: &DataWord,
        suffix: &[String],
        started: Instant,
    ) -> Result<SdtNode, QueryError> {
        let memo_key = (prefix.symbols().to_vec(), suffix.len());
        if self.memoize {
            if let Some(hit) = self.memo.get(&memo_key) {
                return Ok(hit.clone());
            }
        }
        let node = self.build_uncached(session, prefix, suffix, started)?;
        if self.memoize {
            self.memo.insert(memo_key, node.clone());
        }
        Ok(node)
    }

    fn build_uncached(
        &mut self,
        session: &mut SutSession,
        prefix: &DataWord,
        suffix: &[String],
        started: Instant,
    ) -> Result<SdtNode, QueryError> {
        let Some((action, rest)) = suffix.split_first() else {
            let observation = self.tracker.membership(session, started, prefix)?;
            return Ok(SdtNode::leaf(observation.accepted));
        };
        let structure = session.structure().clone();
        let var = prefix.len() as u32 + 1;
        let parameterised = session
            .actions()
            .iter()
            .find(|a| &a.name == action)
            .is_none_or(|a| a.parameterised);

        if !parameterised {
            let child =
                self.build(session, &prefix.extended(DataSymbol::new(action, 0)), rest, started)?;
            return Ok(SdtNode::branch(var, vec![(Guard::top(), child)]));
        }

        let necessary = self.necessary_refs_from(session, prefix, action, rest, started)?;
        let fresh = canon::fresh_value(&prefix.values(), &structure);

        let mut children = Vec::with_capacity(necessary.len() + 1);
        let fresh_guard = if necessary.is_empty() {
            Guard::top()
        } else {
            diseq_guard(var, &necessary)
        };
        let fresh_tree =
            self.build(session, &prefix.extended(DataSymbol::new(action, fresh)), rest, started)?;
        children.push((fresh_guard, fresh_tree));
        for target in &necessary {
            let value = Self::ref_value(prefix, target, &structure);
            let subtree =
                self.build(session, &prefix.extended(DataSymbol::new(action, value)), rest, started)?;
            children.push((eq_guard(var, target), subtree));
        }
        Ok(SdtNode::branch(var, children))
    }
}

impl TreeOracle for BlackboxTreeOracle {
    fn tree_query(
        &mut self,
        session: &mut SutSession,
        query: &TreeQuery,
    ) -> Result<SymbolicDecisionTree, QueryError> {
        let started = Instant::now();
        self.memo.clear();
        let root = self.build(session, &query.prefix, &query.suffix, started)?;
        Ok(SymbolicDecisionTree {
            prefix_len: query.prefix.len(),
            suffix: query.suffix.clone(),
            root,
        })
    }

    fn used(&self) -> Meter {
        self.tracker.used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::SutSpec;

    fn word(pairs: &[(&str, DataValue)]) -> DataWord {
        DataWord::from_pairs(pairs)
    }

    fn v(i: u32) -> Atom {
        Atom::Var(i)
    }

    #[test]
    fn potential_keeps_latest_occurrences() {
        assert_eq!(
            potential(&word(&[("Push", 5), ("Push", 7)])).indices,
            BTreeSet::from([1, 2])
        );
        assert_eq!(
            potential(&word(&[("Push", 7), ("Push", 7)])).indices,
            BTreeSet::from([2])
        );
        assert_eq!(potential(&DataWord::empty()).indices, BTreeSet::new());
    }

    #[test]
    fn representative_values_follow_the_guard() {
        let u = word(&[("Push", 5), ("Push", 7)]);
        let s = Structure::empty();
        let forced = Guard::new(vec![crate::guard::Literal::eq(Atom::Param, v(1))]);
        assert_eq!(representative_value(&u, &forced, &s).unwrap(), 5);
        let fresh = Guard::new(vec![
            crate::guard::Literal::neq(Atom::Param, v(1)),
            crate::guard::Literal::neq(Atom::Param, v(2)),
        ]);
        assert_eq!(representative_value(&u, &fresh, &s).unwrap(), 0);
        let s1 = Structure::new(vec![("c".into(), 1)]).unwrap();
        let constant = Guard::new(vec![crate::guard::Literal::eq(
            Atom::Param,
            Atom::Const("c".into()),
        )]);
        assert_eq!(representative_value(&DataWord::empty(), &constant, &s1).unwrap(), 1);
        let contradiction = Guard::new(vec![
            crate::guard::Literal::eq(Atom::Param, v(1)),
            crate::guard::Literal::neq(Atom::Param, v(1)),
        ]);
        assert!(representative_value(&u, &contradiction, &s).is_err());
    }

    #[test]
    fn fifo_pop_needs_only_the_front() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        let refs = oracle
            .necessary_refs(
                &mut session,
                &word(&[("Push", 5), ("Push", 7)]),
                "Pop",
                &["Pop".to_string()],
            )
            .unwrap();
        assert_eq!(refs, vec![v(1)]);
    }

    #[test]
    fn empty_suffix_never_needs_references() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 1 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        // Pushing is insensitive to history at the root: every branch is a
        // single accepting leaf.
        let refs = oracle
            .necessary_refs(&mut session, &word(&[("Push", 5)]), "Push", &[])
            .unwrap();
        assert_eq!(refs, Vec::<Atom>::new());
    }

    #[test]
    fn fifo_one_pop_of_the_stored_value_is_necessary() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 1 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        let refs = oracle
            .necessary_refs(&mut session, &word(&[("Push", 5)]), "Pop", &[])
            .unwrap();
        assert_eq!(refs, vec![v(1)]);
    }

    #[test]
    fn fifo_query_builds_the_expected_tree() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        let tree = oracle
            .tree_query(
                &mut session,
                &TreeQuery::new(
                    word(&[("Push", 5), ("Push", 7)]),
                    vec!["Pop".to_string(), "Pop".to_string()],
                ),
            )
            .unwrap();
        let expected = "\
tree prefix_len=2 suffix=[Pop,Pop]
  x3 {x1}
    [x3 != x1] x4 {}
      [true] -
    [x3 == x1] x4 {x2}
      [x4 != x2] -
      [x4 == x2] +
";
        assert_eq!(tree.dump(), expected);
    }

    #[test]
    fn empty_query_on_fifo_is_an_accepting_leaf() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        let tree = oracle
            .tree_query(&mut session, &TreeQuery::new(DataWord::empty(), vec![]))
            .unwrap();
        assert_eq!(tree.root, SdtNode::leaf(true));
    }

    #[test]
    fn lock_branches_on_the_next_code_digit_only() {
        let mut session = SutSession::new(SutSpec::Lock { code: vec![1, 9] });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::unlimited());
        // After dialing 1, behaviour depends on dialing 9 next, not on 1.
        let refs = oracle
            .necessary_refs(
                &mut session,
                &word(&[("a", 1)]),
                "a",
                &["b".to_string()],
            )
            .unwrap();
        assert_eq!(refs, vec![Atom::Const("9".to_string())]);
    }

    #[test]
    fn memoization_changes_cost_but_not_the_tree() {
        let q = TreeQuery::new(
            word(&[("Push", 5), ("Push", 7)]),
            vec!["Pop".to_string(), "Pop".to_string()],
        );
        let mut s1 = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut naive = BlackboxTreeOracle::new(QueryBudget::unlimited());
        let t1 = naive.tree_query(&mut s1, &q).unwrap();
        let mut s2 = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut memoized =
            BlackboxTreeOracle::new(QueryBudget::unlimited()).with_memoization(true);
        let t2 = memoized.tree_query(&mut s2, &q).unwrap();
        assert!(t1.isomorphic(&t2));
        assert!(memoized.used().resets < naive.used().resets);
    }

    #[test]
    fn budget_exhaustion_surfaces() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = BlackboxTreeOracle::new(QueryBudget::limited(10, 2));
        let err = oracle
            .tree_query(
                &mut session,
                &TreeQuery::new(word(&[("Push", 5)]), vec!["Pop".to_string(), "Pop".to_string()]),
            )
            .unwrap_err();
        assert!(matches!(err, QueryError::BudgetExceeded { .. }));
    }
}
