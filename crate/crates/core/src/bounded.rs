//! Bounded language-equivalence checking between two register automata.
//!
//! Explores all canonical words up to a maximum length (for each position:
//! every previously used value, every constant, one fresh value — sufficient
//! for the equality theory) and returns the shortest word accepted by
//! exactly one automaton. Joint run states are deduplicated up to value
//! renaming away from constants, which keeps the search polynomial in
//! practice while deciding the same question as plain enumeration.

use std::collections::{BTreeMap, HashSet, VecDeque};

use thiserror::Error;

use crate::automaton::{RaError, RegisterAutomaton, RunStep};
use crate::canon;
use crate::guard::{DataValue, Structure};
use crate::word::{DataSymbol, DataWord};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    Counterexample(DataWord),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundedError {
    #[error("state cap of {0} exceeded during bounded equivalence check")]
    ResourceLimit(usize),
    #[error(transparent)]
    Run(#[from] RaError),
    #[error("automata disagree on their action alphabets")]
    AlphabetMismatch,
}

const DEFAULT_STATE_CAP: usize = 2_000_000;

struct Node {
    left: RunStep,
    right: RunStep,
    witness: DataWord,
}

/// Joint register pattern of a state pair: locations, register indices, and
/// values with constants kept verbatim and all other values numbered by
/// first occurrence. Two states with the same key accept the same suffix
/// lengths up to renaming.
fn canonical_key(node: &Node, structure: &Structure) -> Vec<u64> {
    let mut key = vec![node.left.location as u64, node.right.location as u64];
    let mut ids: BTreeMap<DataValue, u64> = BTreeMap::new();
    let mut encode = |reg: u32, v: DataValue, key: &mut Vec<u64>| {
        key.push(u64::from(reg));
        if structure.is_constant_value(v) {
            key.push(u64::MAX - v);
        } else {
            let next = ids.len() as u64;
            key.push(*ids.entry(v).or_insert(next));
        }
    };
    for (reg, v) in &node.left.registers {
        encode(*reg, *v, &mut key);
    }
    key.push(u64::MAX); // separator between the two register files
    for (reg, v) in &node.right.registers {
        encode(*reg, *v, &mut key);
    }
    key
}

/// Checks language equivalence of two simple, deterministic, completely
/// specified automata on all words up to `max_len` symbols.
pub fn bounded_equivalent(
    left: &RegisterAutomaton,
    right: &RegisterAutomaton,
    max_len: usize,
) -> Result<Equivalence, BoundedError> {
    bounded_equivalent_capped(left, right, max_len, DEFAULT_STATE_CAP)
}

pub fn bounded_equivalent_capped(
    left: &RegisterAutomaton,
    right: &RegisterAutomaton,
    max_len: usize,
    state_cap: usize,
) -> Result<Equivalence, BoundedError> {
    let mut left_actions: Vec<&str> = left.actions.iter().map(|a| a.name.as_str()).collect();
    let mut right_actions: Vec<&str> = right.actions.iter().map(|a| a.name.as_str()).collect();
    left_actions.sort_unstable();
    right_actions.sort_unstable();
    if left_actions != right_actions {
        return Err(BoundedError::AlphabetMismatch);
    }

    // Constants of either automaton matter for both.
    let mut constant_values: Vec<DataValue> = left.structure.constant_values().collect();
    constant_values.extend(right.structure.constant_values());
    constant_values.sort_unstable();
    constant_values.dedup();
    let joint_structure = Structure::from_values(&constant_values);

    let start = Node {
        left: RunStep { location: left.initial, registers: BTreeMap::new() },
        right: RunStep { location: right.initial, registers: BTreeMap::new() },
        witness: DataWord::empty(),
    };
    if left.locations[start.left.location].accepting
        != right.locations[start.right.location].accepting
    {
        return Ok(Equivalence::Counterexample(DataWord::empty()));
    }

    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(canonical_key(&start, &joint_structure));
    let mut queue = VecDeque::from([start]);

    while let Some(node) = queue.pop_front() {
        if node.witness.len() >= max_len {
            continue;
        }
        let used = node.witness.values();
        let mut candidates: Vec<DataValue> = node
            .left
            .registers
            .values()
            .chain(node.right.registers.values())
            .copied()
            .collect();
        candidates.extend(joint_structure.constant_values());
        candidates.push(canon::fresh_value(&used, &joint_structure));
        candidates.sort_unstable();
        candidates.dedup();

        for action in &left.actions {
            let values: &[DataValue] =
                if action.parameterised { &candidates } else { &[0][..] };
            for &value in values {
                let symbol = DataSymbol::new(&action.name, value);
                let single = DataWord(vec![symbol.clone()]);
                let l = left.run_from(&single, node.left.clone())?;
                let r = right.run_from(&single, node.right.clone())?;
                let next = Node {
                    left: l.trace.into_iter().last().unwrap(),
                    right: r.trace.into_iter().last().unwrap(),
                    witness: node.witness.extended(symbol),
                };
                if l.accepted != r.accepted {
                    return Ok(Equivalence::Counterexample(next.witness));
                }
                if seen.len() >= state_cap {
                    return Err(BoundedError::ResourceLimit(state_cap));
                }
                if seen.insert(canonical_key(&next, &joint_structure)) {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(Equivalence::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::{catalog, SutSpec};

    /// Independent oracle: plain enumeration of canonical words by length.
    fn naive_shortest_difference(
        left: &RegisterAutomaton,
        right: &RegisterAutomaton,
        max_len: usize,
    ) -> Option<DataWord> {
        let mut constant_values: Vec<DataValue> =
            left.structure.constant_values().collect();
        constant_values.extend(right.structure.constant_values());
        constant_values.sort_unstable();
        constant_values.dedup();
        let joint = Structure::from_values(&constant_values);
        canon::canonical_words(&left.actions, &joint, max_len)
            .into_iter()
            .find(|w| left.accepts(w).unwrap() != right.accepts(w).unwrap())
    }

    fn fifo(n: usize) -> RegisterAutomaton {
        catalog(&SutSpec::Fifo { capacity: n }).reference
    }

    #[test]
    fn identical_automata_are_equal() {
        assert_eq!(bounded_equivalent(&fifo(2), &fifo(2), 4).unwrap(), Equivalence::Equal);
    }

    #[test]
    fn fifo_capacities_agree_up_to_depth_three() {
        // A capacity-2 and a capacity-1 buffer first differ when two stored
        // values must both be recovered, which takes four symbols; the
        // independent enumeration confirms there is no shorter witness.
        assert_eq!(naive_shortest_difference(&fifo(2), &fifo(1), 3), None);
        assert_eq!(bounded_equivalent(&fifo(2), &fifo(1), 3).unwrap(), Equivalence::Equal);
    }

    #[test]
    fn fifo_capacities_differ_at_depth_four() {
        // First canonical witness: the second push is silently dropped by
        // the capacity-1 buffer, so the second pop finds it empty.
        let frozen =
            DataWord::from_pairs(&[("Push", 0), ("Push", 0), ("Pop", 0), ("Pop", 0)]);
        let expected = naive_shortest_difference(&fifo(2), &fifo(1), 4)
            .expect("depth 4 separates the buffers");
        assert_eq!(expected, frozen);
        assert!(fifo(2).accepts(&frozen).unwrap());
        assert!(!fifo(1).accepts(&frozen).unwrap());
        match bounded_equivalent(&fifo(2), &fifo(1), 4).unwrap() {
            Equivalence::Counterexample(ce) => {
                assert_eq!(ce.len(), 4, "shortest difference has four symbols, got {ce}");
                assert_ne!(fifo(2).accepts(&ce).unwrap(), fifo(1).accepts(&ce).unwrap());
            }
            Equivalence::Equal => panic!("expected a counterexample"),
        }
    }

    #[test]
    fn locks_with_different_last_digit_differ_after_the_unlock_sequence() {
        let a = catalog(&SutSpec::Lock { code: vec![1, 9, 6, 2] }).reference;
        let b = catalog(&SutSpec::Lock { code: vec![1, 9, 6, 3] }).reference;
        let expected = naive_shortest_difference(&a, &b, 5).unwrap();
        // Unlocking the first lock and dialing again separates them: the
        // unlocked automaton sinks on a further dial, the other stays open.
        assert_eq!(
            expected,
            DataWord::from_pairs(&[("a", 1), ("a", 9), ("a", 6), ("a", 2), ("a", 0)])
        );
        assert!(naive_shortest_difference(&a, &b, 4).is_none());
        assert_eq!(
            bounded_equivalent(&a, &b, 5).unwrap(),
            Equivalence::Counterexample(expected)
        );
        // The spelled-out probe word is itself a valid difference witness.
        let probe = DataWord::from_pairs(&[("a", 1), ("a", 9), ("a", 6), ("a", 2), ("b", 0)]);
        assert!(a.accepts(&probe).unwrap());
        assert!(!b.accepts(&probe).unwrap());
    }

    #[test]
    fn state_cap_reports_a_resource_limit() {
        let err = bounded_equivalent_capped(&fifo(3), &fifo(3), 6, 10).unwrap_err();
        assert_eq!(err, BoundedError::ResourceLimit(10));
    }

    #[test]
    fn memoized_search_agrees_with_plain_enumeration() {
        let pairs = [
            (fifo(1), fifo(1)),
            (fifo(1), fifo(2)),
            (fifo(2), fifo(3)),
            (
                catalog(&SutSpec::Set { capacity: 1 }).reference,
                catalog(&SutSpec::Set { capacity: 2 }).reference,
            ),
        ];
        for (a, b) in &pairs {
            for depth in 0..=4 {
                let naive = naive_shortest_difference(a, b, depth);
                match bounded_equivalent(a, b, depth).unwrap() {
                    Equivalence::Equal => assert!(naive.is_none(), "{} vs {}", a.name, b.name),
                    Equivalence::Counterexample(ce) => {
                        let naive = naive.expect("oracle should also find a difference");
                        assert_eq!(ce.len(), naive.len());
                        assert_ne!(a.accepts(&ce).unwrap(), b.accepts(&ce).unwrap());
                    }
                }
            }
        }
    }
}
