//! Comparison tainting: values wrapped with a marker so that every equality
//! test the program under test performs is recorded as a constraint.
//!
//! Only comparisons actually executed are logged; short-circuit evaluation
//! in the host language therefore suppresses exactly the comparisons it
//! skips, and negations applied outside a comparison are invisible.

use std::cell::RefCell;
use std::rc::Rc;

use crate::guard::{Atom, DataValue, Literal};

/// The per-query comparison log, shared by all values of one query.
#[derive(Clone, Debug, Default)]
pub struct ComparisonLog {
    inner: Rc<RefCell<Vec<Literal>>>,
}

impl ComparisonLog {
    pub fn new() -> Self {
        ComparisonLog::default()
    }

    pub fn record(&self, literal: Literal) {
        self.inner.borrow_mut().push(literal);
    }

    /// Removes and returns everything recorded so far.
    pub fn drain(&self) -> Vec<Literal> {
        self.inner.borrow_mut().drain(..).collect()
    }

    pub fn snapshot(&self) -> Vec<Literal> {
        self.inner.borrow().clone()
    }

    pub fn clear(&self) {
        self.inner.borrow_mut().clear();
    }

    /// True when both handles point at the same log.
    pub fn same_log(&self, other: &ComparisonLog) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

/// A natural number tagged with the marker of the input that produced it and
/// a handle to the query's comparison log.
#[derive(Clone, Debug)]
pub struct TaintedValue {
    base: DataValue,
    marker: u32,
    log: ComparisonLog,
}

impl TaintedValue {
    pub fn new(base: DataValue, marker: u32, log: ComparisonLog) -> Self {
        TaintedValue { base, marker, log }
    }

    pub fn base(&self) -> DataValue {
        self.base
    }

    pub fn marker(&self) -> u32 {
        self.marker
    }

    /// Equality with another tainted value: returns base equality and logs
    /// one literal relating the two markers.
    pub fn eq_tainted(&self, other: &TaintedValue) -> bool {
        let result = self.base == other.base;
        self.log.record(Literal::new(
            Atom::Marker(self.marker),
            Atom::Marker(other.marker),
            result,
        ));
        result
    }

    pub fn ne_tainted(&self, other: &TaintedValue) -> bool {
        !self.eq_tainted(other)
    }

    /// Equality with an untainted named constant: logs a constant literal.
    pub fn eq_constant(&self, name: &str, value: DataValue) -> bool {
        let result = self.base == value;
        self.log.record(Literal::new(
            Atom::Marker(self.marker),
            Atom::Const(name.to_string()),
            result,
        ));
        result
    }

    pub fn ne_constant(&self, name: &str, value: DataValue) -> bool {
        !self.eq_constant(name, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_bases_with_distinct_markers_log_an_equality() {
        let log = ComparisonLog::new();
        let x1 = TaintedValue::new(1, 1, log.clone());
        let x2 = TaintedValue::new(1, 2, log.clone());
        assert!(x1.eq_tainted(&x2));
        assert_eq!(
            log.drain(),
            vec![Literal::eq(Atom::Marker(1), Atom::Marker(2))]
        );
    }

    #[test]
    fn self_comparison_is_recorded_too() {
        let log = ComparisonLog::new();
        let x1 = TaintedValue::new(1, 1, log.clone());
        assert!(x1.eq_tainted(&x1));
        assert_eq!(
            log.drain(),
            vec![Literal::eq(Atom::Marker(1), Atom::Marker(1))]
        );
    }

    #[test]
    fn short_circuit_suppresses_the_second_comparison() {
        // `not (x1 == x2 or x2 != x3)` with equal bases for x1, x2: the
        // second operand is never evaluated, and the outer negation is not
        // a comparison, so only one literal is recorded.
        let log = ComparisonLog::new();
        let x1 = TaintedValue::new(2, 1, log.clone());
        let x2 = TaintedValue::new(2, 2, log.clone());
        let x3 = TaintedValue::new(3, 3, log.clone());
        let _ = !(x1.eq_tainted(&x2) || x2.ne_tainted(&x3));
        assert_eq!(
            log.drain(),
            vec![Literal::eq(Atom::Marker(1), Atom::Marker(2))]
        );
    }

    #[test]
    fn without_short_circuit_both_comparisons_are_recorded() {
        // Same expression with bases 2, 3, 3: the first comparison is
        // false, so the second one runs; the negation is still invisible.
        let log = ComparisonLog::new();
        let x1 = TaintedValue::new(2, 1, log.clone());
        let x2 = TaintedValue::new(3, 2, log.clone());
        let x3 = TaintedValue::new(3, 3, log.clone());
        let _ = !(x1.eq_tainted(&x2) || x2.ne_tainted(&x3));
        let mut logged = log.drain();
        logged.sort();
        let mut expected = vec![
            Literal::neq(Atom::Marker(1), Atom::Marker(2)),
            Literal::eq(Atom::Marker(2), Atom::Marker(3)),
        ];
        expected.sort();
        assert_eq!(logged, expected);
    }

    #[test]
    fn constant_comparison_logs_a_constant_literal() {
        let log = ComparisonLog::new();
        let x = TaintedValue::new(3, 1, log.clone());
        assert!(!x.eq_constant("1", 1));
        assert_eq!(
            log.drain(),
            vec![Literal::neq(Atom::Marker(1), Atom::Const("1".to_string()))]
        );
    }
}
