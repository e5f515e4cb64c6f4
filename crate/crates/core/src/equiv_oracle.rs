//! Hypothesis validation: a black-box random-walk oracle and the tainted
//! equivalence oracle that explores the constraint paths of randomly drawn
//! symbolic suffixes.
//!
//! Both oracles verify a candidate counterexample against the system and
//! the hypothesis once more before surfacing it, and both are deterministic
//! functions of their configuration and seed.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::automaton::RegisterAutomaton;
use crate::guard::DataValue;
use crate::oracle::{
    EquivalenceOracle, EquivalenceVerdict, QueryBudget, QueryError, TreeQuery, UsageTracker,
};
use crate::sut::{Meter, SutSession};
use crate::tainted_oracle::explore_characteristic_predicate;
use crate::word::{DataSymbol, DataWord};

/// Configuration of the random-walk oracle.
#[derive(Clone, Debug)]
pub struct RandomWalkConfig {
    pub seed: u64,
    /// Hard cap on sampled word length.
    pub max_word_len: usize,
    /// Probability of ending the word after each symbol (geometric length).
    pub stop_probability: f64,
    /// Probability of reusing a value already in the current word.
    pub reuse_probability: f64,
    /// Fresh values are drawn uniformly from `0..pool_size`, skipping the
    /// system's constants.
    pub pool_size: u64,
    /// Safety cap on the number of sampled words.
    pub max_words: u64,
    pub budget: QueryBudget,
}

impl RandomWalkConfig {
    pub fn new(seed: u64, budget: QueryBudget) -> Self {
        RandomWalkConfig {
            seed,
            max_word_len: 50,
            stop_probability: 0.1,
            reuse_probability: 0.5,
            pool_size: 100,
            max_words: 100_000,
            budget,
        }
    }
}

pub struct RandomWalkOracle {
    config: RandomWalkConfig,
    rng: ChaCha8Rng,
    tracker: UsageTracker,
}

impl RandomWalkOracle {
    pub fn new(config: RandomWalkConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tracker = UsageTracker::new(config.budget);
        RandomWalkOracle { config, rng, tracker }
    }

    fn sample_word(&mut self, session: &SutSession) -> DataWord {
        let actions = session.actions().to_vec();
        let pool: Vec<DataValue> = (0..self.config.pool_size)
            .filter(|v| !session.structure().is_constant_value(*v))
            .collect();
        let mut word = DataWord::empty();
        loop {
            if word.len() >= self.config.max_word_len {
                break;
            }
            if !word.is_empty() && self.rng.random_bool(self.config.stop_probability) {
                break;
            }
            let action = &actions[self.rng.random_range(0..actions.len())];
            let value = if !action.parameterised {
                0
            } else {
                let used = word.values();
                if !used.is_empty() && self.rng.random_bool(self.config.reuse_probability) {
                    used[self.rng.random_range(0..used.len())]
                } else {
                    pool[self.rng.random_range(0..pool.len())]
                }
            };
            word.push(DataSymbol::new(&action.name, value));
        }
        word
    }
}

impl EquivalenceOracle for RandomWalkOracle {
    /// Samples words until one separates hypothesis and system; exhausting
    /// the budget is the `Yes` answer.
    fn check(
        &mut self,
        session: &mut SutSession,
        hypothesis: &RegisterAutomaton,
    ) -> Result<EquivalenceVerdict, QueryError> {
        let started = Instant::now();
        for _ in 0..self.config.max_words {
            let word = self.sample_word(session);
            let sut_accepts = match self.tracker.membership(session, started, &word) {
                Ok(obs) => obs.accepted,
                Err(QueryError::BudgetExceeded { .. }) => return Ok(EquivalenceVerdict::Yes),
                Err(e) => return Err(e),
            };
            let hyp_accepts = hypothesis
                .accepts(&word)
                .expect("hypothesis was validated before the equivalence query");
            if sut_accepts != hyp_accepts {
                if let Some(ce) = self.confirm(session, hypothesis, &word, started)? {
                    return Ok(EquivalenceVerdict::Counterexample(ce));
                }
            }
        }
        Ok(EquivalenceVerdict::Yes)
    }

    fn used(&self) -> Meter {
        self.tracker.used
    }
}

impl RandomWalkOracle {
    fn confirm(
        &mut self,
        session: &mut SutSession,
        hypothesis: &RegisterAutomaton,
        word: &DataWord,
        started: Instant,
    ) -> Result<Option<DataWord>, QueryError> {
        confirm_counterexample(&mut self.tracker, session, hypothesis, word, started)
    }
}

/// Re-runs both sides before a counterexample is surfaced.
fn confirm_counterexample(
    tracker: &mut UsageTracker,
    session: &mut SutSession,
    hypothesis: &RegisterAutomaton,
    word: &DataWord,
    started: Instant,
) -> Result<Option<DataWord>, QueryError> {
    let sut_accepts = match tracker.membership(session, started, word) {
        Ok(obs) => obs.accepted,
        Err(QueryError::BudgetExceeded { .. }) => {
            // No budget left to confirm; do not surface the candidate.
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let hyp_accepts = hypothesis
        .accepts(word)
        .expect("hypothesis was validated before the equivalence query");
    Ok((sut_accepts != hyp_accepts).then(|| word.clone()))
}

/// Configuration of the tainted equivalence oracle.
#[derive(Clone, Debug)]
pub struct TaintedEqConfig {
    pub seed: u64,
    /// Length of each sampled symbolic suffix.
    pub suffix_len: usize,
    /// How many symbolic suffixes to explore before answering `Yes`.
    pub max_suffixes: usize,
    pub budget: QueryBudget,
}

impl TaintedEqConfig {
    pub fn new(seed: u64, budget: QueryBudget) -> Self {
        TaintedEqConfig { seed, suffix_len: 5, max_suffixes: 2_000, budget }
    }
}

pub struct TaintedEqOracle {
    config: TaintedEqConfig,
    rng: ChaCha8Rng,
    tracker: UsageTracker,
}

impl TaintedEqOracle {
    pub fn new(config: TaintedEqConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tracker = UsageTracker::new(config.budget);
        TaintedEqOracle { config, rng, tracker }
    }
}

impl EquivalenceOracle for TaintedEqOracle {
    /// Draws symbolic suffixes uniformly, explores every constraint path of
    /// each with an empty prefix, and compares the hypothesis verdict with
    /// the system verdict on each explored representative word.
    fn check(
        &mut self,
        session: &mut SutSession,
        hypothesis: &RegisterAutomaton,
    ) -> Result<EquivalenceVerdict, QueryError> {
        let started = Instant::now();
        let actions = session.actions().to_vec();
        for _ in 0..self.config.max_suffixes {
            let suffix: Vec<String> = (0..self.config.suffix_len)
                .map(|_| actions[self.rng.random_range(0..actions.len())].name.clone())
                .collect();
            let query = TreeQuery::new(DataWord::empty(), suffix);
            let exploration =
                explore_characteristic_predicate(&mut self.tracker, session, &query, started)?;
            for (word, sut_accepts) in &exploration.transcript {
                let hyp_accepts = hypothesis
                    .accepts(word)
                    .expect("hypothesis was validated before the equivalence query");
                if *sut_accepts != hyp_accepts {
                    if let Some(ce) = confirm_counterexample(
                        &mut self.tracker,
                        session,
                        hypothesis,
                        word,
                        started,
                    )? {
                        return Ok(EquivalenceVerdict::Counterexample(ce));
                    }
                }
            }
        }
        Ok(EquivalenceVerdict::Yes)
    }

    fn used(&self) -> Meter {
        self.tracker.used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::{catalog, SutSpec};

    fn fifo_ref(n: usize) -> RegisterAutomaton {
        catalog(&SutSpec::Fifo { capacity: n }).reference
    }

    #[test]
    fn random_walk_accepts_the_true_model() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = RandomWalkOracle::new(RandomWalkConfig {
            max_words: 200,
            ..RandomWalkConfig::new(7, QueryBudget::unlimited())
        });
        let verdict = oracle.check(&mut session, &fifo_ref(2)).unwrap();
        assert_eq!(verdict, EquivalenceVerdict::Yes);
    }

    #[test]
    fn random_walk_separates_fifo_capacities() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = RandomWalkOracle::new(RandomWalkConfig::new(
            1,
            QueryBudget::limited(100_000, 5_000),
        ));
        match oracle.check(&mut session, &fifo_ref(1)).unwrap() {
            EquivalenceVerdict::Counterexample(ce) => {
                let mut fresh = SutSession::new(SutSpec::Fifo { capacity: 2 });
                assert_ne!(fresh.accepts(&ce), fifo_ref(1).accepts(&ce).unwrap());
            }
            EquivalenceVerdict::Yes => panic!("seeded walk should find a difference"),
        }
    }

    #[test]
    fn random_walk_cannot_open_the_lock() {
        // The value pool avoids the code digits, so no sampled word ever
        // unlocks; a hypothesis that never accepts the probe survives.
        let mut session = SutSession::new(SutSpec::Lock { code: vec![1, 9, 6, 2] });
        let hypothesis = lock_without_the_open_state();
        hypothesis.validate(true).unwrap();
        for seed in 0..3 {
            let mut oracle = RandomWalkOracle::new(RandomWalkConfig::new(
                seed,
                QueryBudget::limited(100_000, 2_000),
            ));
            let verdict = oracle.check(&mut session, &hypothesis).unwrap();
            assert_eq!(verdict, EquivalenceVerdict::Yes, "seed {seed}");
        }
    }

    /// A lock-shaped hypothesis that is wrong exactly on words that unlock.
    fn lock_without_the_open_state() -> RegisterAutomaton {
        use crate::automaton::{Location, Transition};
        use crate::guard::{Guard, Structure};
        use crate::word::ActionDecl;
        RegisterAutomaton {
            name: "never-open".to_string(),
            structure: Structure::from_values(&[1, 9, 6, 2]),
            actions: vec![ActionDecl::parameterised("a"), ActionDecl::plain("b")],
            locations: vec![
                Location {
                    name: "l0".to_string(),
                    accepting: true,
                    registers: Default::default(),
                },
                Location {
                    name: "sink".to_string(),
                    accepting: false,
                    registers: Default::default(),
                },
            ],
            initial: 0,
            transitions: vec![
                Transition {
                    source: 0,
                    action: "a".to_string(),
                    guard: Guard::top(),
                    assignment: Default::default(),
                    target: 0,
                },
                Transition {
                    source: 0,
                    action: "b".to_string(),
                    guard: Guard::top(),
                    assignment: Default::default(),
                    target: 1,
                },
                Transition {
                    source: 1,
                    action: "a".to_string(),
                    guard: Guard::top(),
                    assignment: Default::default(),
                    target: 1,
                },
                Transition {
                    source: 1,
                    action: "b".to_string(),
                    guard: Guard::top(),
                    assignment: Default::default(),
                    target: 1,
                },
            ],
        }
    }

    #[test]
    fn tainted_oracle_opens_the_lock() {
        // Path exploration dials every recorded constant comparison, so the
        // unlocking word is reached regardless of its rarity.
        let mut session = SutSession::new(SutSpec::Lock { code: vec![1, 9, 6, 2] });
        let hypothesis = lock_without_the_open_state();
        let mut oracle = TaintedEqOracle::new(TaintedEqConfig::new(
            3,
            QueryBudget::limited(1_000_000, 50_000),
        ));
        match oracle.check(&mut session, &hypothesis).unwrap() {
            EquivalenceVerdict::Counterexample(ce) => {
                let mut fresh = SutSession::new(SutSpec::Lock { code: vec![1, 9, 6, 2] });
                assert_ne!(fresh.accepts(&ce), hypothesis.accepts(&ce).unwrap());
                // Only words that dial the full code can disagree.
                let values = ce.values();
                assert_eq!(&values[..4], &[1, 9, 6, 2]);
            }
            EquivalenceVerdict::Yes => panic!("tainted exploration should open the lock"),
        }
    }

    #[test]
    fn tainted_oracle_accepts_the_true_model() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = TaintedEqOracle::new(TaintedEqConfig {
            suffix_len: 4,
            max_suffixes: 40,
            ..TaintedEqConfig::new(11, QueryBudget::unlimited())
        });
        let verdict = oracle.check(&mut session, &fifo_ref(2)).unwrap();
        assert_eq!(verdict, EquivalenceVerdict::Yes);
    }

    #[test]
    fn tainted_oracle_separates_fifo_capacities_at_depth_four() {
        let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
        let mut oracle = TaintedEqOracle::new(TaintedEqConfig {
            suffix_len: 4,
            max_suffixes: 200,
            ..TaintedEqConfig::new(5, QueryBudget::unlimited())
        });
        match oracle.check(&mut session, &fifo_ref(1)).unwrap() {
            EquivalenceVerdict::Counterexample(ce) => {
                assert_eq!(ce.len(), 4);
                let mut fresh = SutSession::new(SutSpec::Fifo { capacity: 2 });
                assert_ne!(fresh.accepts(&ce), fifo_ref(1).accepts(&ce).unwrap());
            }
            EquivalenceVerdict::Yes => panic!("depth-4 suffixes separate the buffers"),
        }
    }

    #[test]
    fn identical_configuration_gives_identical_query_sequences() {
        let run = || {
            let mut session = SutSession::new(SutSpec::Fifo { capacity: 2 });
            let mut oracle = RandomWalkOracle::new(RandomWalkConfig {
                max_words: 50,
                ..RandomWalkConfig::new(42, QueryBudget::unlimited())
            });
            oracle.check(&mut session, &fifo_ref(2)).unwrap();
            (session.transcript().to_vec(), oracle.used())
        };
        assert_eq!(run(), run());
    }
}
