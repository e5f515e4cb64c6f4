//! The learning loop: drives a tree oracle and an equivalence oracle to a
//! hypothesis register automaton.
//!
//! The observation structure keeps one row per prefix (short prefixes are
//! the candidate locations, their one-symbol extensions the candidate
//! transitions) and one symbolic decision tree per row and symbolic suffix.
//! Two rows denote the same location when their tree bundles are isomorphic
//! under a renaming of their memorable positions. Counterexamples are
//! processed by adding all their action suffixes to the suffix set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use thiserror::Error;

use crate::automaton::{Location, RegisterAutomaton, Transition};
use crate::canon;
use crate::guard::{Atom, DataValue, Guard, Literal, Structure};
use crate::oracle::{EquivalenceOracle, EquivalenceVerdict, QueryError, TreeOracle, TreeQuery};
use crate::sdt::{SdtNode, SymbolicDecisionTree};
use crate::sut::SutSession;
use crate::word::{ActionDecl, DataSymbol, DataWord};

type Suffix = Vec<String>;

#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub max_rounds: usize,
    /// When set, every hypothesis is written there as `hypothesis_<n>.json`.
    pub dump_hypotheses: Option<PathBuf>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { max_rounds: 60, dump_hypotheses: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnStatus {
    Learned,
    BudgetExhausted,
    Timeout,
    NoConvergence,
}

/// Size of one emitted hypothesis, for progress inspection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundStats {
    pub locations: usize,
    pub transitions: usize,
}

#[derive(Debug)]
pub struct LearnResult {
    pub status: LearnStatus,
    /// The final hypothesis; for `Learned` it passed the equivalence check.
    pub model: Option<RegisterAutomaton>,
    pub rounds: usize,
    pub hypotheses: Vec<RoundStats>,
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("hypothesis construction failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Dump(#[from] crate::format::FormatError),
}

/// Rows indexed by prefix word with their per-suffix decision trees.
pub struct ObservationStructure {
    suffixes: BTreeSet<Suffix>,
    shorts: Vec<DataWord>,
    rows: HashMap<DataWord, BTreeMap<Suffix, SymbolicDecisionTree>>,
    actions: Vec<ActionDecl>,
    structure: Structure,
}

enum BuildStep {
    /// Suffix set or short prefixes changed; re-run the round.
    Refined,
    Hypothesis(RegisterAutomaton),
}

impl ObservationStructure {
    pub fn new(actions: Vec<ActionDecl>, structure: Structure) -> Self {
        let mut suffixes = BTreeSet::new();
        suffixes.insert(Vec::new());
        ObservationStructure {
            suffixes,
            shorts: vec![DataWord::empty()],
            rows: HashMap::new(),
            actions,
            structure,
        }
    }

    pub fn suffixes(&self) -> &BTreeSet<Suffix> {
        &self.suffixes
    }

    pub fn shorts(&self) -> &[DataWord] {
        &self.shorts
    }

    /// Adds every action suffix of a counterexample to the suffix set and
    /// reports how many were new.
    pub fn process_counterexample(&mut self, counterexample: &DataWord) -> usize {
        let actions = counterexample.actions();
        let mut added = 0;
        for i in 0..actions.len() {
            if self.suffixes.insert(actions[i..].to_vec()) {
                added += 1;
            }
        }
        added
    }

    fn tree(
        &mut self,
        session: &mut SutSession,
        oracle: &mut dyn TreeOracle,
        prefix: &DataWord,
        suffix: &Suffix,
    ) -> Result<&SymbolicDecisionTree, QueryError> {
        let row = self.rows.entry(prefix.clone()).or_default();
        if !row.contains_key(suffix) {
            let tree =
                oracle.tree_query(session, &TreeQuery::new(prefix.clone(), suffix.clone()))?;
            row.insert(suffix.clone(), tree);
        }
        Ok(&self.rows[prefix][suffix])
    }

    fn ensure_row(
        &mut self,
        session: &mut SutSession,
        oracle: &mut dyn TreeOracle,
        prefix: &DataWord,
    ) -> Result<(), QueryError> {
        for suffix in self.suffixes.clone() {
            self.tree(session, oracle, prefix, &suffix)?;
        }
        Ok(())
    }

    /// The memorable positions of a row: prefix positions referenced by any
    /// guard across its suffix-set trees.
    fn memorable(&self, prefix: &DataWord) -> BTreeSet<u32> {
        let k = prefix.len() as u32;
        let mut positions = BTreeSet::new();
        if let Some(row) = self.rows.get(prefix) {
            for (suffix, tree) in row {
                if !self.suffixes.contains(suffix) {
                    continue;
                }
                collect_positions(&tree.root, k, &mut positions);
            }
        }
        positions
    }

    /// A register correspondence under which the two rows' tree bundles are
    /// equal, if any.
    fn bundle_iso(&self, a: &DataWord, b: &DataWord) -> Option<BTreeMap<u32, u32>> {
        let mem_a: Vec<u32> = self.memorable(a).into_iter().collect();
        let mem_b: Vec<u32> = self.memorable(b).into_iter().collect();
        if mem_a.len() != mem_b.len() {
            return None;
        }
        let max_suffix = self.suffixes.iter().map(|s| s.len()).max().unwrap_or(0);
        let row_a = self.rows.get(a)?;
        let row_b = self.rows.get(b)?;
        'next: for perm in permutations(&mem_b) {
            let mut rename: BTreeMap<Atom, Atom> = mem_a
                .iter()
                .zip(perm.iter())
                .map(|(x, y)| (Atom::Var(*x), Atom::Var(*y)))
                .collect();
            for j in 1..=max_suffix as u32 {
                rename.insert(
                    Atom::Var(a.len() as u32 + j),
                    Atom::Var(b.len() as u32 + j),
                );
            }
            for suffix in &self.suffixes {
                let (ta, tb) = (row_a.get(suffix)?, row_b.get(suffix)?);
                if ta.root.rename(&rename) != tb.root {
                    continue 'next;
                }
            }
            return Some(mem_a.iter().copied().zip(perm).collect());
        }
        None
    }

    /// The references the first suffix value of `action` is compared
    /// against across the suffix set, read off the tree roots.
    fn outgoing_refs(
        &mut self,
        session: &mut SutSession,
        oracle: &mut dyn TreeOracle,
        prefix: &DataWord,
        action: &str,
    ) -> Result<BTreeSet<Atom>, QueryError> {
        let mut refs = BTreeSet::new();
        for suffix in self.suffixes.clone() {
            let mut extended = vec![action.to_string()];
            extended.extend(suffix.iter().cloned());
            let tree = self.tree(session, oracle, prefix, &extended)?;
            refs.extend(tree.root.potential());
        }
        Ok(refs)
    }

    /// Adds `action`-prepended suffixes whose trees justify the given
    /// references; used to repair guard and register inconsistencies.
    fn demand_suffixes_referencing(
        &mut self,
        prefix: &DataWord,
        action: Option<&str>,
        position: u32,
    ) -> usize {
        let Some(row) = self.rows.get(prefix) else {
            return 0;
        };
        let mut wanted = Vec::new();
        for (suffix, tree) in row {
            let relevant = match action {
                // Roots of action-prepended suffix-set trees.
                Some(action) => {
                    suffix.first().map(String::as_str) == Some(action)
                        && self.suffixes.contains(&suffix[1..].to_vec())
                        && tree.root.potential().contains(&Atom::Var(position))
                }
                // Any suffix-set tree referencing the position.
                None => {
                    self.suffixes.contains(suffix) && {
                        let mut positions = BTreeSet::new();
                        collect_positions(&tree.root, prefix.len() as u32, &mut positions);
                        positions.contains(&position)
                    }
                }
            };
            if relevant {
                wanted.push(suffix.clone());
            }
        }
        let mut added = 0;
        for suffix in wanted {
            if self.suffixes.insert(suffix) {
                added += 1;
            }
        }
        added
    }

    /// Branch list for one action out of a prefix: the equality branches in
    /// reference order, then the fresh branch.
    fn branches(&self, prefix: &DataWord, refs: &BTreeSet<Atom>) -> Vec<(Option<Atom>, DataValue)> {
        let values = prefix.values();
        let mut out: Vec<(Option<Atom>, DataValue)> = refs
            .iter()
            .map(|r| {
                let value = match r {
                    Atom::Var(i) => values[*i as usize - 1],
                    Atom::Const(name) => {
                        self.structure.value_of(name).expect("catalog constant")
                    }
                    other => unreachable!("tree potential holds positions or constants, got {other}"),
                };
                (Some(r.clone()), value)
            })
            .collect();
        out.push((None, canon::fresh_value(&values, &self.structure)));
        out
    }
}

fn collect_positions(node: &SdtNode, max: u32, out: &mut BTreeSet<u32>) {
    if let SdtNode::Branch { children, .. } = node {
        for (guard, sub) in children {
            for atom in guard.atoms() {
                if let Atom::Var(i) = atom {
                    if *i <= max {
                        out.insert(*i);
                    }
                }
            }
            collect_positions(sub, max, out);
        }
    }
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Runs the learning loop until the equivalence oracle is satisfied or a
/// budget, timeout or round limit is hit.
pub fn learn(
    session: &mut SutSession,
    tree_oracle: &mut dyn TreeOracle,
    eq_oracle: &mut dyn EquivalenceOracle,
    config: &LearnerConfig,
) -> Result<LearnResult, LearnError> {
    let mut structure =
        ObservationStructure::new(session.actions().to_vec(), session.structure().clone());
    let mut hypotheses = Vec::new();
    let mut last_model = None;

    for round in 1..=config.max_rounds {
        let hypothesis = loop {
            match build_round(&mut structure, session, tree_oracle) {
                Ok(BuildStep::Refined) => continue,
                Ok(BuildStep::Hypothesis(h)) => break h,
                Err(e) => {
                    return Ok(LearnResult {
                        status: status_of(&e),
                        model: last_model,
                        rounds: round - 1,
                        hypotheses,
                    })
                }
            }
        };
        hypothesis
            .validate(true)
            .map_err(|e| LearnError::Internal(e.to_string()))?;
        hypotheses.push(RoundStats {
            locations: hypothesis.locations.len(),
            transitions: hypothesis.transitions.len(),
        });
        if let Some(dir) = &config.dump_hypotheses {
            std::fs::create_dir_all(dir).map_err(crate::format::FormatError::Io)?;
            crate::format::save(&hypothesis, &dir.join(format!("hypothesis_{round}.json")))?;
        }
        last_model = Some(hypothesis.clone());

        match eq_oracle.check(session, &hypothesis) {
            Ok(EquivalenceVerdict::Yes) => {
                return Ok(LearnResult {
                    status: LearnStatus::Learned,
                    model: Some(hypothesis),
                    rounds: round,
                    hypotheses,
                });
            }
            Ok(EquivalenceVerdict::Counterexample(ce)) => {
                structure.process_counterexample(&ce);
            }
            Err(e) => {
                return Ok(LearnResult {
                    status: status_of(&e),
                    model: last_model,
                    rounds: round,
                    hypotheses,
                });
            }
        }
    }
    Ok(LearnResult {
        status: LearnStatus::NoConvergence,
        model: last_model,
        rounds: config.max_rounds,
        hypotheses,
    })
}

fn status_of(error: &QueryError) -> LearnStatus {
    match error {
        QueryError::BudgetExceeded { .. } => LearnStatus::BudgetExhausted,
        QueryError::Timeout(_) => LearnStatus::Timeout,
    }
}

/// One pass over the structure: close it, then build a hypothesis; reports
/// `Refined` whenever the suffix set or the short prefixes changed.
fn build_round(
    obs: &mut ObservationStructure,
    session: &mut SutSession,
    oracle: &mut dyn TreeOracle,
) -> Result<BuildStep, QueryError> {
    // Rows for all short prefixes first.
    for short in obs.shorts.clone() {
        obs.ensure_row(session, oracle, &short)?;
    }

    // Closedness: every extension must match some short prefix.
    let actions = obs.actions.clone();
    for short in obs.shorts.clone() {
        for action in &actions {
            let refs = obs.outgoing_refs(session, oracle, &short, &action.name)?;
            // Guard consistency: outgoing references must be memorable.
            let memorable = obs.memorable(&short);
            for r in &refs {
                if let Atom::Var(q) = r {
                    if !memorable.contains(q)
                        && obs.demand_suffixes_referencing(&short, Some(&action.name), *q) > 0
                    {
                        return Ok(BuildStep::Refined);
                    }
                }
            }
            for (_, value) in obs.branches(&short, &refs) {
                let extension = short.extended(DataSymbol::new(&action.name, value));
                obs.ensure_row(session, oracle, &extension)?;
                let matched = obs.shorts.iter().any(|s| obs.bundle_iso(&extension, s).is_some());
                if !matched {
                    obs.shorts.push(extension);
                    return Ok(BuildStep::Refined);
                }
            }
        }
    }

    build_hypothesis(obs, session, oracle)
}

fn build_hypothesis(
    obs: &mut ObservationStructure,
    session: &mut SutSession,
    oracle: &mut dyn TreeOracle,
) -> Result<BuildStep, QueryError> {
    let shorts = obs.shorts.clone();
    let actions = obs.actions.clone();

    // Location skeletons: acceptance from the empty-suffix leaf, registers
    // from the memorable positions.
    let mut locations = Vec::with_capacity(shorts.len());
    let mut ranks: Vec<BTreeMap<u32, u32>> = Vec::with_capacity(shorts.len());
    for short in &shorts {
        let accepting = match &obs.rows[short][&Vec::new()].root {
            SdtNode::Leaf { accepting } => *accepting,
            SdtNode::Branch { .. } => unreachable!("empty-suffix tree is a leaf"),
        };
        let memorable = obs.memorable(short);
        let rank: BTreeMap<u32, u32> = memorable
            .iter()
            .enumerate()
            .map(|(i, q)| (*q, i as u32 + 1))
            .collect();
        locations.push(Location {
            name: format!("l{}", locations.len()),
            accepting,
            registers: rank.values().copied().collect(),
        });
        ranks.push(rank);
    }

    let mut transitions = Vec::new();
    for (source, short) in shorts.iter().enumerate() {
        let rank = ranks[source].clone();
        let to_register = |r: &Atom| -> Option<Atom> {
            match r {
                Atom::Var(q) => rank.get(q).map(|i| Atom::Var(*i)),
                other => Some(other.clone()),
            }
        };
        for action in &actions {
            let refs = obs.outgoing_refs(session, oracle, short, &action.name)?;
            for (branch_ref, value) in obs.branches(short, &refs) {
                let extension = short.extended(DataSymbol::new(&action.name, value));
                let (target, sigma) = shorts
                    .iter()
                    .enumerate()
                    .find_map(|(i, s)| obs.bundle_iso(&extension, s).map(|m| (i, m)))
                    .expect("structure was closed");

                // Register consistency: the extension's memorable prefix
                // positions must be memorable in the source row.
                for q in sigma.keys() {
                    if *q <= short.len() as u32
                        && !rank.contains_key(q)
                        && obs.demand_suffixes_referencing(&extension, None, *q) > 0
                    {
                        return Ok(BuildStep::Refined);
                    }
                }

                let guard = match &branch_ref {
                    Some(r) => {
                        let target_ref = to_register(r)
                            .expect("guard references were checked memorable");
                        Guard::new(vec![Literal::eq(Atom::Param, target_ref)])
                    }
                    None => Guard::new(
                        refs.iter()
                            .map(|r| {
                                let target_ref = to_register(r)
                                    .expect("guard references were checked memorable");
                                Literal::neq(Atom::Param, target_ref)
                            })
                            .collect(),
                    ),
                };

                let sigma_inv: BTreeMap<u32, u32> =
                    sigma.iter().map(|(q, p)| (*p, *q)).collect();
                let mut assignment = BTreeMap::new();
                for (position_target, register) in &ranks[target] {
                    let source_position = sigma_inv[position_target];
                    let from = if source_position == short.len() as u32 + 1 {
                        Atom::Param
                    } else {
                        Atom::Var(rank[&source_position])
                    };
                    assignment.insert(*register, from);
                }
                transitions.push(Transition {
                    source,
                    action: action.name.clone(),
                    guard,
                    assignment,
                    target,
                });
            }
        }
    }

    Ok(BuildStep::Hypothesis(RegisterAutomaton {
        name: format!("hypothesis:{}", session.spec()),
        structure: obs.structure.clone(),
        actions: actions.clone(),
        locations,
        initial: 0,
        transitions,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounded::{bounded_equivalent, Equivalence};
    use crate::equiv_oracle::{RandomWalkConfig, RandomWalkOracle, TaintedEqConfig, TaintedEqOracle};
    use crate::oracle::QueryBudget;
    use crate::sut::{catalog, SutSpec};
    use crate::tainted_oracle::TaintedTreeOracle;

    fn learn_with_tainted(
        spec: SutSpec,
        seed: u64,
    ) -> (LearnResult, RegisterAutomaton) {
        let reference = catalog(&spec).reference;
        let mut session = SutSession::new(spec);
        let mut tree = TaintedTreeOracle::new(QueryBudget::unlimited());
        let mut eq = TaintedEqOracle::new(TaintedEqConfig {
            suffix_len: 4,
            max_suffixes: 150,
            ..TaintedEqConfig::new(seed, QueryBudget::unlimited())
        });
        let result =
            learn(&mut session, &mut tree, &mut eq, &LearnerConfig::default()).unwrap();
        (result, reference)
    }

    #[test]
    fn learns_the_accept_all_language() {
        let (result, reference) = learn_with_tainted(SutSpec::AcceptAll, 1);
        assert_eq!(result.status, LearnStatus::Learned);
        let model = result.model.unwrap();
        assert_eq!(model.locations.len(), 1);
        assert_eq!(bounded_equivalent(&model, &reference, 4).unwrap(), Equivalence::Equal);
    }

    #[test]
    fn learns_the_two_place_buffer() {
        let (result, reference) = learn_with_tainted(SutSpec::Fifo { capacity: 2 }, 3);
        assert_eq!(result.status, LearnStatus::Learned);
        let model = result.model.unwrap();
        assert_eq!(
            bounded_equivalent(&model, &reference, 6).unwrap(),
            Equivalence::Equal
        );
        assert_eq!(model.locations.len(), 4);
    }

    #[test]
    fn learns_the_one_place_set() {
        let (result, reference) = learn_with_tainted(SutSpec::Set { capacity: 1 }, 5);
        assert_eq!(result.status, LearnStatus::Learned);
        assert_eq!(
            bounded_equivalent(&result.model.unwrap(), &reference, 6).unwrap(),
            Equivalence::Equal
        );
    }

    #[test]
    fn learns_the_lock_with_the_tainted_oracles() {
        let spec = SutSpec::Lock { code: vec![1, 9, 6, 2] };
        let reference = catalog(&spec).reference;
        let mut session = SutSession::new(spec);
        let mut tree = TaintedTreeOracle::new(QueryBudget::unlimited());
        let mut eq = TaintedEqOracle::new(TaintedEqConfig {
            suffix_len: 5,
            max_suffixes: 400,
            ..TaintedEqConfig::new(17, QueryBudget::unlimited())
        });
        let result =
            learn(&mut session, &mut tree, &mut eq, &LearnerConfig::default()).unwrap();
        assert_eq!(result.status, LearnStatus::Learned);
        assert_eq!(
            bounded_equivalent(&result.model.unwrap(), &reference, 6).unwrap(),
            Equivalence::Equal
        );
    }

    #[test]
    fn counterexample_suffix_processing_adds_all_suffixes() {
        let mut obs = ObservationStructure::new(
            vec![ActionDecl::parameterised("Push"), ActionDecl::parameterised("Pop")],
            Structure::empty(),
        );
        let ce = DataWord::from_pairs(&[("Push", 0), ("Push", 0), ("Pop", 0), ("Pop", 0)]);
        let added = obs.process_counterexample(&ce);
        assert_eq!(added, 4);
        assert!(obs.suffixes().contains(&vec!["Pop".to_string()]));
        assert!(obs
            .suffixes()
            .contains(&vec!["Pop".to_string(), "Pop".to_string()]));
        // Processing the same counterexample again changes nothing.
        assert_eq!(obs.process_counterexample(&ce), 0);
    }

    #[test]
    fn hypotheses_grow_monotonically() {
        let (result, _) = learn_with_tainted(SutSpec::Fifo { capacity: 2 }, 9);
        let sizes: Vec<(usize, usize)> = result
            .hypotheses
            .iter()
            .map(|h| (h.locations, h.transitions))
            .collect();
        for pair in sizes.windows(2) {
            assert!(
                pair[1].0 > pair[0].0 || (pair[1].0 == pair[0].0 && pair[1].1 > pair[0].1),
                "hypotheses did not grow: {sizes:?}"
            );
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut tree = TaintedTreeOracle::new(QueryBudget::limited(20, 4));
        let mut eq = RandomWalkOracle::new(RandomWalkConfig::new(1, QueryBudget::limited(10, 2)));
        let result =
            learn(&mut session, &mut tree, &mut eq, &LearnerConfig::default()).unwrap();
        assert_eq!(result.status, LearnStatus::BudgetExhausted);
    }

    #[test]
    fn random_walk_oracle_learns_the_buffer_too() {
        let spec = SutSpec::Fifo { capacity: 2 };
        let reference = catalog(&spec).reference;
        let mut session = SutSession::new(spec);
        let mut tree = TaintedTreeOracle::new(QueryBudget::unlimited());
        let mut eq = RandomWalkOracle::new(RandomWalkConfig::new(
            2,
            QueryBudget::limited(200_000, 5_000),
        ));
        let result =
            learn(&mut session, &mut tree, &mut eq, &LearnerConfig::default()).unwrap();
        assert_eq!(result.status, LearnStatus::Learned);
        assert_eq!(
            bounded_equivalent(&result.model.unwrap(), &reference, 5).unwrap(),
            Equivalence::Equal
        );
    }
}
