//! The benchmark harness: runs learner × oracle-configuration × system
//! grids, meters inputs and resets per phase, and emits CSV.
//!
//! Outcomes: `learned` means the equivalence oracle was satisfied *and* the
//! model checks out against the catalog reference; a run whose final "yes"
//! came from an exhausted testing budget but whose model is wrong is
//! reported as `budget-exhausted`, since the separating word exists and the
//! budget ran out before finding it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::automaton::RegisterAutomaton;
use crate::bounded::{bounded_equivalent, Equivalence};
use crate::equiv_oracle::{RandomWalkConfig, RandomWalkOracle, TaintedEqConfig, TaintedEqOracle};
use crate::learner::{learn, LearnStatus, LearnerConfig};
use crate::oracle::{EquivalenceOracle, QueryBudget, TreeOracle};
use crate::sut::{catalog, Meter, SutError, SutSpec};
use crate::tainted_oracle::TaintedTreeOracle;
use crate::blackbox_oracle::BlackboxTreeOracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeOracleKind {
    Tainted,
    Blackbox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EqOracleKind {
    Tainted,
    RandomWalk,
}

/// One of the four oracle pairings: `tto+teo`, `tto+neo`, `nto+teo`,
/// `nto+neo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleConfig {
    pub tree: TreeOracleKind,
    pub eq: EqOracleKind,
}

impl OracleConfig {
    pub const TTO_TEO: OracleConfig =
        OracleConfig { tree: TreeOracleKind::Tainted, eq: EqOracleKind::Tainted };
    pub const TTO_NEO: OracleConfig =
        OracleConfig { tree: TreeOracleKind::Tainted, eq: EqOracleKind::RandomWalk };
    pub const NTO_TEO: OracleConfig =
        OracleConfig { tree: TreeOracleKind::Blackbox, eq: EqOracleKind::Tainted };
    pub const NTO_NEO: OracleConfig =
        OracleConfig { tree: TreeOracleKind::Blackbox, eq: EqOracleKind::RandomWalk };

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        match text.to_ascii_lowercase().as_str() {
            "tto+teo" => Ok(Self::TTO_TEO),
            "tto+neo" => Ok(Self::TTO_NEO),
            "nto+teo" => Ok(Self::NTO_TEO),
            "nto+neo" => Ok(Self::NTO_NEO),
            other => Err(BenchError::UnknownOracleConfig(other.to_string())),
        }
    }
}

impl fmt::Display for OracleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tree = match self.tree {
            TreeOracleKind::Tainted => "tto",
            TreeOracleKind::Blackbox => "nto",
        };
        let eq = match self.eq {
            EqOracleKind::Tainted => "teo",
            EqOracleKind::RandomWalk => "neo",
        };
        write!(f, "{tree}+{eq}")
    }
}

/// Phase budgets and testing parameters, desk-scaled.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub learn_inputs: u64,
    pub learn_resets: u64,
    pub test_inputs: u64,
    pub test_resets: u64,
    /// Longest word the random walk may send.
    pub max_test_word_len: usize,
    /// Symbolic suffix length of the tainted equivalence oracle.
    pub teo_suffix_len: usize,
    /// Per-query timeout in seconds; 0 disables it.
    pub timeout_secs: u64,
    pub max_rounds: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            learn_inputs: 1_000_000,
            learn_resets: 50_000,
            test_inputs: 100_000,
            test_resets: 5_000,
            max_test_word_len: 20,
            teo_suffix_len: 5,
            timeout_secs: 60,
            max_rounds: 60,
        }
    }
}

impl Budgets {
    fn learn_budget(&self) -> QueryBudget {
        QueryBudget {
            max_inputs: Some(self.learn_inputs),
            max_resets: Some(self.learn_resets),
            per_query_timeout: self.timeout(),
        }
    }

    fn test_budget(&self) -> QueryBudget {
        QueryBudget {
            max_inputs: Some(self.test_inputs),
            max_resets: Some(self.test_resets),
            per_query_timeout: self.timeout(),
        }
    }

    fn timeout(&self) -> Option<Duration> {
        (self.timeout_secs > 0).then(|| Duration::from_secs(self.timeout_secs))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub sut: String,
    pub oracles: OracleConfig,
    pub seed: u64,
    pub budgets: Budgets,
    pub dump_hypotheses: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Learned,
    BudgetExhausted,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Learned => write!(f, "learned"),
            Outcome::BudgetExhausted => write!(f, "budget-exhausted"),
            Outcome::Timeout => write!(f, "timeout"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricsRecord {
    pub outcome: Outcome,
    /// Whether the final model is bounded-equivalent to the reference.
    pub model_correct: bool,
    pub rounds: usize,
    pub locations: usize,
    pub learning: Meter,
    pub testing: Meter,
    pub wall: Duration,
}

impl MetricsRecord {
    pub fn inputs(&self) -> u64 {
        self.learning.inputs + self.testing.inputs
    }

    pub fn resets(&self) -> u64 {
        self.learning.resets + self.testing.resets
    }

    /// Every reset counts as one input.
    pub fn symbols(&self) -> u64 {
        self.inputs() + self.resets()
    }
}

pub struct ExperimentOutput {
    pub metrics: MetricsRecord,
    pub model: Option<RegisterAutomaton>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sut(#[from] SutError),
    #[error("unknown oracle configuration `{0}` (expected tto+teo, tto+neo, nto+teo or nto+neo)")]
    UnknownOracleConfig(String),
    #[error("grid file error: {0}")]
    Grid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("learner error: {0}")]
    Learner(String),
}

/// Depth used when validating learned models against the reference.
pub const VALIDATION_DEPTH: usize = 6;

/// Runs one learning experiment; deterministic given the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let spec = SutSpec::parse(&config.sut)?;
    let entry = catalog(&spec);
    let mut session = entry.session;
    let reference = entry.reference;

    let mut tree_oracle: Box<dyn TreeOracle> = match config.oracles.tree {
        TreeOracleKind::Tainted => {
            Box::new(TaintedTreeOracle::new(config.budgets.learn_budget()))
        }
        TreeOracleKind::Blackbox => {
            Box::new(BlackboxTreeOracle::new(config.budgets.learn_budget()))
        }
    };
    let mut eq_oracle: Box<dyn EquivalenceOracle> = match config.oracles.eq {
        EqOracleKind::Tainted => Box::new(TaintedEqOracle::new(TaintedEqConfig {
            suffix_len: config.budgets.teo_suffix_len,
            ..TaintedEqConfig::new(config.seed, config.budgets.test_budget())
        })),
        EqOracleKind::RandomWalk => Box::new(RandomWalkOracle::new(RandomWalkConfig {
            max_word_len: config.budgets.max_test_word_len,
            ..RandomWalkConfig::new(config.seed, config.budgets.test_budget())
        })),
    };

    let learner_config = LearnerConfig {
        max_rounds: config.budgets.max_rounds,
        dump_hypotheses: config.dump_hypotheses.clone(),
    };

    let started = std::time::Instant::now();
    let result = learn(&mut session, tree_oracle.as_mut(), eq_oracle.as_mut(), &learner_config)
        .map_err(|e| BenchError::Learner(e.to_string()))?;
    let wall = started.elapsed();

    let model_correct = match &result.model {
        Some(model) => {
            matches!(
                bounded_equivalent(model, &reference, VALIDATION_DEPTH),
                Ok(Equivalence::Equal)
            )
        }
        None => false,
    };
    let outcome = match result.status {
        // A satisfied equivalence oracle only counts as learned when the
        // model is right; its "yes" is otherwise a budget artifact.
        LearnStatus::Learned if model_correct => Outcome::Learned,
        LearnStatus::Learned => Outcome::BudgetExhausted,
        LearnStatus::BudgetExhausted | LearnStatus::NoConvergence => Outcome::BudgetExhausted,
        LearnStatus::Timeout => Outcome::Timeout,
    };

    let metrics = MetricsRecord {
        outcome,
        model_correct,
        rounds: result.rounds,
        locations: result.model.as_ref().map_or(0, |m| m.locations.len()),
        learning: tree_oracle.used(),
        testing: eq_oracle.used(),
        wall,
    };
    Ok(ExperimentOutput { metrics, model: result.model })
}

/// A benchmark grid: the cartesian product of systems, oracle
/// configurations, and seeds.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub suts: Vec<String>,
    pub oracles: Vec<OracleConfig>,
    pub seeds: Vec<u64>,
    pub budgets: Budgets,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    grid: GridAxes,
    #[serde(default)]
    budgets: Budgets,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridAxes {
    suts: Vec<String>,
    oracles: Vec<String>,
    seeds: Vec<u64>,
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let file: GridFile = toml::from_str(text).map_err(|e| BenchError::Grid(e.to_string()))?;
        let oracles = file
            .grid
            .oracles
            .iter()
            .map(|o| OracleConfig::parse(o))
            .collect::<Result<_, _>>()?;
        // Fail on config errors before any system interaction.
        for sut in &file.grid.suts {
            SutSpec::parse(sut)?;
        }
        Ok(GridSpec {
            suts: file.grid.suts,
            oracles,
            seeds: file.grid.seeds,
            budgets: file.budgets,
        })
    }

    fn cells(&self) -> Vec<ExperimentConfig> {
        let mut cells = Vec::new();
        for sut in &self.suts {
            for oracles in &self.oracles {
                for seed in &self.seeds {
                    cells.push(ExperimentConfig {
                        sut: sut.clone(),
                        oracles: *oracles,
                        seed: *seed,
                        budgets: self.budgets.clone(),
                        dump_hypotheses: None,
                    });
                }
            }
        }
        cells
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "sut",
    "oracles",
    "seed",
    "outcome",
    "model_correct",
    "rounds",
    "locations",
    "learn_inputs",
    "learn_resets",
    "test_inputs",
    "test_resets",
    "inputs",
    "resets",
    "symbols",
    "wall_ms",
];

#[derive(Clone, Debug)]
pub struct GridReport {
    pub rows: usize,
    pub crashed: usize,
    /// Median total symbols per (sut, oracle configuration).
    pub medians: BTreeMap<(String, String), u64>,
}

/// Runs every grid cell in a worker pool and streams CSV rows in grid
/// order, flushing row by row so partial results survive interruption.
/// Summary rows with the median symbol count per configuration follow the
/// per-run rows.
pub fn run_grid(grid: &GridSpec, out: &mut dyn Write) -> Result<GridReport, BenchError> {
    let cells = grid.cells();
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    writer.flush()?;

    let (tx, rx) = mpsc::channel::<(usize, Result<MetricsRecord, String>)>();
    let pool_cells = cells.clone();
    let worker = std::thread::spawn(move || {
        pool_cells.into_par_iter().enumerate().for_each_with(tx, |tx, (i, cell)| {
            let result = std::panic::catch_unwind(|| run_experiment(&cell))
                .map_err(|p| format!("panic: {p:?}"))
                .and_then(|r| r.map(|o| o.metrics).map_err(|e| e.to_string()));
            // The receiver outlives all senders.
            let _ = tx.send((i, result));
        });
    });

    let mut pending: BTreeMap<usize, Result<MetricsRecord, String>> = BTreeMap::new();
    let mut next = 0;
    let mut crashed = 0;
    let mut per_config: BTreeMap<(String, String), Vec<u64>> = BTreeMap::new();

    for (i, result) in rx {
        pending.insert(i, result);
        while let Some(result) = pending.remove(&next) {
            let cell = &cells[next];
            match result {
                Ok(metrics) => {
                    per_config
                        .entry((cell.sut.clone(), cell.oracles.to_string()))
                        .or_default()
                        .push(metrics.symbols());
                    writer.write_record(row_fields(cell, &metrics))?;
                }
                Err(message) => {
                    crashed += 1;
                    let mut fields = vec![
                        cell.sut.clone(),
                        cell.oracles.to_string(),
                        cell.seed.to_string(),
                        format!("crashed: {message}"),
                    ];
                    fields.extend(std::iter::repeat_n(String::new(), CSV_HEADER.len() - 4));
                    writer.write_record(&fields)?;
                }
            }
            writer.flush()?;
            next += 1;
        }
    }
    worker.join().map_err(|_| BenchError::Grid("worker pool panicked".to_string()))?;

    let mut medians = BTreeMap::new();
    for ((sut, oracles), mut symbols) in per_config {
        symbols.sort_unstable();
        let median = median_of(&symbols);
        let mut fields = vec![
            sut.clone(),
            oracles.clone(),
            "median".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            median.to_string(),
            String::new(),
        ];
        debug_assert_eq!(fields.len(), CSV_HEADER.len());
        fields.truncate(CSV_HEADER.len());
        writer.write_record(&fields)?;
        medians.insert((sut, oracles), median);
    }
    writer.flush()?;
    Ok(GridReport { rows: cells.len(), crashed, medians })
}

fn median_of(sorted: &[u64]) -> u64 {
    let n = sorted.len();
    if n == 0 {
        return 0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

fn row_fields(cell: &ExperimentConfig, m: &MetricsRecord) -> Vec<String> {
    vec![
        cell.sut.clone(),
        cell.oracles.to_string(),
        cell.seed.to_string(),
        m.outcome.to_string(),
        m.model_correct.to_string(),
        m.rounds.to_string(),
        m.locations.to_string(),
        m.learning.inputs.to_string(),
        m.learning.resets.to_string(),
        m.testing.inputs.to_string(),
        m.testing.resets.to_string(),
        m.inputs().to_string(),
        m.resets().to_string(),
        m.symbols().to_string(),
        m.wall.as_millis().to_string(),
    ]
}
