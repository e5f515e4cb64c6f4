//! Grey-box active learning of register automata over the theory of
//! equality with constants.
//!
//! The crate provides the register-automaton data model with standard and
//! tainted run semantics, systems under test with native comparison
//! tainting, two tree-oracle implementations (tainted and black-box), two
//! equivalence oracles, a learner, and a benchmark harness that meters how
//! many inputs each oracle combination needs.

pub mod automaton;
pub mod bench;
pub mod blackbox_oracle;
pub mod bounded;
pub mod canon;
pub mod equiv_oracle;
pub mod format;
pub mod guard;
pub mod learner;
pub mod oracle;
pub mod sdt;
pub mod solver;
pub mod sut;
pub mod taint;
pub mod tainted_oracle;
pub mod word;

pub use automaton::{RegisterAutomaton, RunOutcome, TaintedRunOutcome};
pub use blackbox_oracle::BlackboxTreeOracle;
pub use bounded::{bounded_equivalent, Equivalence};
pub use guard::{Atom, DataValue, Guard, Literal, Structure, Valuation};
pub use oracle::{
    EquivalenceOracle, EquivalenceVerdict, QueryBudget, QueryError, TreeOracle, TreeQuery,
};
pub use sdt::{SdtNode, SymbolicDecisionTree};
pub use solver::DnfPredicate;
pub use sut::{catalog, Meter, SutSession, SutSpec, TaintedObservation};
pub use tainted_oracle::TaintedTreeOracle;
pub use word::{ActionDecl, DataSymbol, DataWord};
