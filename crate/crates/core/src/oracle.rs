//! Shared oracle machinery: query shapes, budgets, and the traits the
//! learner drives.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::automaton::RegisterAutomaton;
use crate::sdt::SymbolicDecisionTree;
use crate::sut::{Meter, SutSession, TaintedObservation};
use crate::word::DataWord;

/// A tree query: concrete prefix plus a symbolic suffix of action names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeQuery {
    pub prefix: DataWord,
    pub suffix: Vec<String>,
}

impl TreeQuery {
    pub fn new(prefix: DataWord, suffix: Vec<String>) -> Self {
        TreeQuery { prefix, suffix }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("query budget exceeded after {inputs} inputs and {resets} resets")]
    BudgetExceeded { inputs: u64, resets: u64 },
    #[error("per-query timeout of {0:?} exceeded")]
    Timeout(Duration),
}

/// Caps on what one oracle may consume. `per_query_timeout` applies to each
/// tree or equivalence query separately.
#[derive(Clone, Copy, Debug, Default)]
pub struct QueryBudget {
    pub max_inputs: Option<u64>,
    pub max_resets: Option<u64>,
    pub per_query_timeout: Option<Duration>,
}

impl QueryBudget {
    pub fn unlimited() -> Self {
        QueryBudget::default()
    }

    pub fn limited(max_inputs: u64, max_resets: u64) -> Self {
        QueryBudget {
            max_inputs: Some(max_inputs),
            max_resets: Some(max_resets),
            per_query_timeout: None,
        }
    }
}

/// Tracks an oracle's consumption against its budget.
#[derive(Clone, Debug, Default)]
pub struct UsageTracker {
    pub budget: QueryBudget,
    pub used: Meter,
}

impl UsageTracker {
    pub fn new(budget: QueryBudget) -> Self {
        UsageTracker { budget, used: Meter::default() }
    }

    /// Charges one membership query (a reset plus the word's symbols),
    /// failing without issuing it when the budget or deadline is exhausted.
    pub fn charge(&mut self, query_started: Instant, word_len: usize) -> Result<(), QueryError> {
        if let Some(cap) = self.budget.per_query_timeout {
            if query_started.elapsed() > cap {
                return Err(QueryError::Timeout(cap));
            }
        }
        let inputs = self.used.inputs + word_len as u64;
        let resets = self.used.resets + 1;
        if self.budget.max_inputs.is_some_and(|cap| inputs > cap)
            || self.budget.max_resets.is_some_and(|cap| resets > cap)
        {
            return Err(QueryError::BudgetExceeded {
                inputs: self.used.inputs,
                resets: self.used.resets,
            });
        }
        self.used.inputs = inputs;
        self.used.resets = resets;
        Ok(())
    }

    /// A budget-checked membership query against the session.
    pub fn membership(
        &mut self,
        session: &mut SutSession,
        query_started: Instant,
        word: &DataWord,
    ) -> Result<TaintedObservation, QueryError> {
        self.charge(query_started, word.len())?;
        Ok(session.membership_query(word))
    }
}

/// Answers tree queries with symbolic decision trees.
pub trait TreeOracle {
    fn tree_query(
        &mut self,
        session: &mut SutSession,
        query: &TreeQuery,
    ) -> Result<SymbolicDecisionTree, QueryError>;

    /// Inputs and resets this oracle has consumed so far.
    fn used(&self) -> Meter;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivalenceVerdict {
    Yes,
    Counterexample(DataWord),
}

/// Validates hypotheses against the system under test.
pub trait EquivalenceOracle {
    fn check(
        &mut self,
        session: &mut SutSession,
        hypothesis: &RegisterAutomaton,
    ) -> Result<EquivalenceVerdict, QueryError>;

    fn used(&self) -> Meter;
}
