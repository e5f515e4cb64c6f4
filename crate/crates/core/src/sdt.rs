//! Symbolic decision trees: tree-shaped register automata answering tree
//! queries.
//!
//! A tree for a prefix of `k` symbols and a symbolic suffix of `n` actions
//! has depth `n`; the branch at depth `j` splits on the variable `x(k+j+1)`
//! under the convention that register `x<i>` stores the i-th data value.
//! Children are kept sorted by guard so that structural comparison and the
//! textual dump are canonical.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::guard::{Atom, DataValue, Guard, Literal, Structure, Valuation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SdtNode {
    Leaf {
        accepting: bool,
    },
    Branch {
        /// The variable this level splits on.
        var: u32,
        children: Vec<(Guard, SdtNode)>,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SdtError {
    #[error("no branch guard applies at x{0}")]
    NoBranch(u32),
    #[error("value vector has wrong length: expected {0}, got {1}")]
    WrongArity(usize, usize),
    #[error(transparent)]
    Guard(#[from] crate::guard::GuardError),
}

impl SdtNode {
    pub fn leaf(accepting: bool) -> Self {
        SdtNode::Leaf { accepting }
    }

    /// Builds a branch with children sorted by guard.
    pub fn branch(var: u32, mut children: Vec<(Guard, SdtNode)>) -> Self {
        children.sort_by(|a, b| a.0.cmp(&b.0));
        SdtNode::Branch { var, children }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, SdtNode::Leaf { .. })
    }

    /// The refs this node's equality branches compare against.
    pub fn potential(&self) -> Vec<Atom> {
        match self {
            SdtNode::Leaf { .. } => Vec::new(),
            SdtNode::Branch { var, children } => {
                let mut refs = Vec::new();
                for (guard, _) in children {
                    if let [lit] = guard.literals() {
                        if lit.equal && lit.lhs == Atom::Var(*var) {
                            refs.push(lit.rhs.clone());
                        }
                    }
                }
                refs.sort();
                refs
            }
        }
    }

    /// Structural isomorphism: same shape, same guards, same leaf labels.
    /// Children are stored sorted, so this is a plain zip.
    pub fn isomorphic(&self, other: &SdtNode) -> bool {
        match (self, other) {
            (SdtNode::Leaf { accepting: a }, SdtNode::Leaf { accepting: b }) => a == b,
            (
                SdtNode::Branch { var: va, children: ca },
                SdtNode::Branch { var: vb, children: cb },
            ) => {
                va == vb
                    && ca.len() == cb.len()
                    && ca
                        .iter()
                        .zip(cb.iter())
                        .all(|((ga, ta), (gb, tb))| ga == gb && ta.isomorphic(tb))
            }
            _ => false,
        }
    }

    /// Substitutes `from` by `to` throughout the subtree. Children whose
    /// guards become unsatisfiable disappear; children whose guards collide
    /// must have isomorphic subtrees and are merged, otherwise the
    /// relabelling is undefined and `None` is returned.
    pub fn relabel(&self, from: &Atom, to: &Atom) -> Option<SdtNode> {
        match self {
            SdtNode::Leaf { .. } => Some(self.clone()),
            SdtNode::Branch { var, children } => {
                let mut grouped: BTreeMap<Guard, SdtNode> = BTreeMap::new();
                for (guard, sub) in children {
                    let guard = guard.substitute(from, to);
                    if guard.has_reflexive_disequality() {
                        continue;
                    }
                    let sub = sub.relabel(from, to)?;
                    match grouped.entry(guard) {
                        std::collections::btree_map::Entry::Vacant(e) => {
                            e.insert(sub);
                        }
                        std::collections::btree_map::Entry::Occupied(e) => {
                            if !e.get().isomorphic(&sub) {
                                return None;
                            }
                        }
                    }
                }
                Some(SdtNode::branch(*var, grouped.into_iter().collect()))
            }
        }
    }

    /// Simultaneous renaming without any merging; panics in debug builds if
    /// two guards collide. Used for comparing trees of different prefixes
    /// under a register correspondence.
    pub fn rename(&self, map: &BTreeMap<Atom, Atom>) -> SdtNode {
        match self {
            SdtNode::Leaf { .. } => self.clone(),
            SdtNode::Branch { var, children } => {
                let var = match map.get(&Atom::Var(*var)) {
                    Some(Atom::Var(i)) => *i,
                    _ => *var,
                };
                let renamed: Vec<(Guard, SdtNode)> = children
                    .iter()
                    .map(|(g, t)| (g.rename(map), t.rename(map)))
                    .collect();
                debug_assert!(
                    renamed
                        .iter()
                        .enumerate()
                        .all(|(i, (g, _))| renamed[i + 1..].iter().all(|(h, _)| g != h)),
                    "register renaming collided two guards"
                );
                SdtNode::branch(var, renamed)
            }
        }
    }

    fn walk(
        &self,
        values: &mut Valuation,
        suffix_values: &[DataValue],
        structure: &Structure,
    ) -> Result<bool, SdtError> {
        match self {
            SdtNode::Leaf { accepting } => Ok(*accepting),
            SdtNode::Branch { var, children } => {
                let (value, rest) = suffix_values
                    .split_first()
                    .ok_or(SdtError::WrongArity(0, 0))?;
                values.bind(Atom::Var(*var), *value);
                for (guard, sub) in children {
                    if values.satisfies(guard, structure)? {
                        return sub.walk(values, rest, structure);
                    }
                }
                Err(SdtError::NoBranch(*var))
            }
        }
    }

    fn render(&self, indent: usize, out: &mut String) {
        match self {
            SdtNode::Leaf { accepting } => {
                out.push_str(if *accepting { "+\n" } else { "-\n" });
            }
            SdtNode::Branch { var, children } => {
                let refs = self
                    .potential()
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                out.push_str(&format!("x{var} {{{refs}}}\n"));
                for (guard, sub) in children {
                    out.push_str(&" ".repeat(indent + 2));
                    out.push_str(&format!("[{guard}] "));
                    sub.render(indent + 2, out);
                }
            }
        }
    }
}

/// A symbolic decision tree together with the query shape it answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicDecisionTree {
    pub prefix_len: usize,
    /// Action names of the symbolic suffix, one per tree level.
    pub suffix: Vec<String>,
    pub root: SdtNode,
}

impl SymbolicDecisionTree {
    /// Runs one instantiation of the suffix through the tree under the
    /// prefix valuation and reports the verdict.
    pub fn classify(
        &self,
        prefix_values: &[DataValue],
        suffix_values: &[DataValue],
        structure: &Structure,
    ) -> Result<bool, SdtError> {
        if prefix_values.len() != self.prefix_len || suffix_values.len() != self.suffix.len() {
            return Err(SdtError::WrongArity(
                self.prefix_len + self.suffix.len(),
                prefix_values.len() + suffix_values.len(),
            ));
        }
        let mut values = Valuation::of_word_values(prefix_values);
        self.root.walk(&mut values, suffix_values, structure)
    }

    pub fn isomorphic(&self, other: &SymbolicDecisionTree) -> bool {
        self.suffix == other.suffix && self.root.isomorphic(&other.root)
    }

    /// Indented textual rendering for golden-file tests and debugging.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "tree prefix_len={} suffix=[{}]\n",
            self.prefix_len,
            self.suffix.join(",")
        );
        out.push_str("  ");
        self.root.render(2, &mut out);
        out
    }
}

/// Merges the initial branches guarded by `x<j> = …` for the positions in
/// `indices` into the branch of the greatest index, relabelling throughout;
/// `None` when some collision is not isomorphic.
pub fn specialise(tree: &SdtNode, indices: &[u32]) -> Option<SdtNode> {
    let Some(&target) = indices.iter().max() else {
        return Some(tree.clone());
    };
    let mut node = tree.clone();
    for &j in indices {
        if j != target {
            node = node.relabel(&Atom::Var(j), &Atom::Var(target))?;
        }
    }
    Some(node)
}

/// The view a fresh-value branch takes of the world "if the value at
/// position `var` were `target`": positions merge onto the later index,
/// constants absorb the position.
pub fn specialise_onto(fresh_branch: &SdtNode, var: u32, target: &Atom) -> Option<SdtNode> {
    match target {
        Atom::Var(i) => fresh_branch.relabel(&Atom::Var(*i), &Atom::Var(var)),
        Atom::Const(_) => fresh_branch.relabel(&Atom::Var(var), target),
        _ => None,
    }
}

/// Convenience for tests and construction.
pub fn eq_guard(var: u32, target: &Atom) -> Guard {
    Guard::new(vec![Literal::eq(Atom::Var(var), target.clone())])
}

pub fn diseq_guard(var: u32, targets: &[Atom]) -> Guard {
    Guard::new(
        targets
            .iter()
            .map(|t| Literal::neq(Atom::Var(var), t.clone()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> Atom {
        Atom::Var(i)
    }

    /// The two-level tree accepting exactly when the second suffix value
    /// equals the first prefix value, with a redundant split at the first
    /// suffix level.
    fn redundant_tree() -> SdtNode {
        let low = |anchor: u32| {
            SdtNode::branch(
                3,
                vec![
                    (eq_guard(3, &v(anchor)), SdtNode::leaf(true)),
                    (diseq_guard(3, &[v(anchor)]), SdtNode::leaf(false)),
                ],
            )
        };
        SdtNode::branch(
            2,
            vec![
                (eq_guard(2, &v(1)), low(2)),
                (diseq_guard(2, &[v(1)]), low(1)),
            ],
        )
    }

    #[test]
    fn potential_lists_equality_targets() {
        let t = redundant_tree();
        assert_eq!(t.potential(), vec![v(1)]);
    }

    #[test]
    fn relabel_merges_isomorphic_duplicates() {
        // Substituting x1 -> x2 in the disequality child of the redundant
        // tree turns its guards into the equality child's guards.
        let SdtNode::Branch { children, .. } = redundant_tree() else { panic!() };
        let diseq_sub = &children.iter().find(|(g, _)| !g.literals()[0].equal).unwrap().1;
        let eq_sub = &children.iter().find(|(g, _)| g.literals()[0].equal).unwrap().1;
        let relabelled = specialise_onto(diseq_sub, 2, &v(1)).unwrap();
        assert!(relabelled.isomorphic(eq_sub));
    }

    #[test]
    fn relabel_rejects_label_mismatches() {
        // Merging x1 into x2 collides the two equality branches; their
        // subtrees disagree, so the specialisation is undefined.
        let t = SdtNode::branch(
            3,
            vec![
                (eq_guard(3, &v(1)), SdtNode::leaf(true)),
                (eq_guard(3, &v(2)), SdtNode::leaf(false)),
                (diseq_guard(3, &[v(1), v(2)]), SdtNode::leaf(false)),
            ],
        );
        assert_eq!(specialise(&t, &[1, 2]), None);
        // A rejecting fresh branch seen through an equality relabelling
        // stays rejecting, so it cannot merge with an accepting branch.
        let merged = specialise_onto(&SdtNode::leaf(false), 3, &v(1)).unwrap();
        assert!(!merged.isomorphic(&SdtNode::leaf(true)));
    }

    #[test]
    fn specialise_with_a_single_branch_is_identity() {
        let t = SdtNode::branch(2, vec![(eq_guard(2, &v(1)), SdtNode::leaf(true))]);
        assert_eq!(specialise(&t, &[1]), Some(t.clone()));
        assert_eq!(specialise(&t, &[]), Some(t));
    }

    #[test]
    fn classification_follows_guards() {
        let tree = SymbolicDecisionTree {
            prefix_len: 1,
            suffix: vec!["a".to_string(), "a".to_string()],
            root: redundant_tree(),
        };
        let s = Structure::empty();
        // Accept exactly when the last value equals the anchor on its path,
        // which on both paths amounts to equalling the prefix value.
        assert!(tree.classify(&[5], &[5, 5], &s).unwrap());
        assert!(!tree.classify(&[5], &[5, 7], &s).unwrap());
        assert!(tree.classify(&[5], &[7, 5], &s).unwrap());
        assert!(!tree.classify(&[5], &[7, 9], &s).unwrap());
        assert!(!tree.classify(&[5], &[7, 7], &s).unwrap());
    }

    #[test]
    fn dump_is_stable_and_readable() {
        let tree = SymbolicDecisionTree {
            prefix_len: 1,
            suffix: vec!["a".to_string()],
            root: SdtNode::branch(
                2,
                vec![
                    (eq_guard(2, &v(1)), SdtNode::leaf(true)),
                    (diseq_guard(2, &[v(1)]), SdtNode::leaf(false)),
                ],
            ),
        };
        let expected = "\
tree prefix_len=1 suffix=[a]
  x2 {x1}
    [x2 != x1] -
    [x2 == x1] +
";
        assert_eq!(tree.dump(), expected);
    }
}
