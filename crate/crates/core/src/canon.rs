//! Canonical word enumeration for the equality theory.
//!
//! Behaviour is invariant under renaming data values away from constants, so
//! exploring, at every position, each previously used value, each constant,
//! and a single fresh value covers all behaviours up to renaming.

use crate::guard::{DataValue, Structure};
use crate::word::{ActionDecl, DataSymbol, DataWord};

/// Candidate values for the next position after `used` ones: used values,
/// constants, and the smallest fresh natural, deduplicated in ascending
/// order.
pub fn candidate_values(used: &[DataValue], structure: &Structure) -> Vec<DataValue> {
    let mut out: Vec<DataValue> = used.to_vec();
    out.extend(structure.constant_values());
    out.sort_unstable();
    out.dedup();
    out.push(fresh_value(used, structure));
    out.sort_unstable();
    out.dedup();
    out
}

/// The smallest natural not used yet and not equal to any constant.
pub fn fresh_value(used: &[DataValue], structure: &Structure) -> DataValue {
    let mut v = 0;
    while used.contains(&v) || structure.is_constant_value(v) {
        v += 1;
    }
    v
}

/// All canonical words of length at most `max_len`, in breadth-first order
/// (shorter words first, extensions ordered by action declaration and then
/// ascending value). Parameterless actions carry the dummy value 0.
pub fn canonical_words(
    actions: &[ActionDecl],
    structure: &Structure,
    max_len: usize,
) -> Vec<DataWord> {
    let mut all = vec![DataWord::empty()];
    let mut layer = vec![DataWord::empty()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for word in &layer {
            for ext in extensions(word, actions, structure) {
                next.push(ext);
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// One-symbol canonical extensions of a word.
pub fn extensions(
    word: &DataWord,
    actions: &[ActionDecl],
    structure: &Structure,
) -> Vec<DataWord> {
    let used = word.values();
    let mut out = Vec::new();
    for action in actions {
        if action.parameterised {
            for value in candidate_values(&used, structure) {
                out.push(word.extended(DataSymbol::new(&action.name, value)));
            }
        } else {
            out.push(word.extended(DataSymbol::new(&action.name, 0)));
        }
    }
    out
}

/// Canonical value vectors for `len` positions continuing a given prefix of
/// used values; used by oracle tests to instantiate symbolic suffixes.
pub fn canonical_value_vectors(
    prefix_values: &[DataValue],
    parameterised: &[bool],
    structure: &Structure,
) -> Vec<Vec<DataValue>> {
    let mut vectors = vec![Vec::new()];
    for &has_param in parameterised {
        let mut next = Vec::new();
        for v in &vectors {
            if has_param {
                let mut used = prefix_values.to_vec();
                used.extend_from_slice(v);
                for value in candidate_values(&used, structure) {
                    let mut nv = v.clone();
                    nv.push(value);
                    next.push(nv);
                }
            } else {
                let mut nv = v.clone();
                nv.push(0);
                next.push(nv);
            }
        }
        vectors = next;
    }
    vectors
}
