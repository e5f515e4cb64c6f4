//! Data words: sequences of actions carrying one natural-number value each.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::guard::DataValue;

/// An action declaration. Every symbol carries exactly one value; actions
/// declared `parameterised: false` take a dummy value 0 that no guard may
/// reference, which keeps word enumeration from branching on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecl {
    pub name: String,
    #[serde(default = "default_true")]
    pub parameterised: bool,
}

fn default_true() -> bool {
    true
}

impl ActionDecl {
    pub fn parameterised(name: &str) -> Self {
        ActionDecl { name: name.to_string(), parameterised: true }
    }

    pub fn plain(name: &str) -> Self {
        ActionDecl { name: name.to_string(), parameterised: false }
    }
}

/// One action instance with its data value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataSymbol {
    pub action: String,
    pub value: DataValue,
}

impl DataSymbol {
    pub fn new(action: &str, value: DataValue) -> Self {
        DataSymbol { action: action.to_string(), value }
    }
}

impl fmt::Display for DataSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.action, self.value)
    }
}

/// A finite sequence of data symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataWord(pub Vec<DataSymbol>);

impl DataWord {
    pub fn empty() -> Self {
        DataWord(Vec::new())
    }

    pub fn from_pairs(pairs: &[(&str, DataValue)]) -> Self {
        DataWord(pairs.iter().map(|(a, v)| DataSymbol::new(a, *v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[DataSymbol] {
        &self.0
    }

    pub fn push(&mut self, symbol: DataSymbol) {
        self.0.push(symbol);
    }

    pub fn extended(&self, symbol: DataSymbol) -> DataWord {
        let mut w = self.clone();
        w.push(symbol);
        w
    }

    pub fn concat(&self, other: &DataWord) -> DataWord {
        let mut w = self.clone();
        w.0.extend(other.0.iter().cloned());
        w
    }

    /// The action sequence of the word.
    pub fn actions(&self) -> Vec<String> {
        self.0.iter().map(|s| s.action.clone()).collect()
    }

    /// The value sequence of the word.
    pub fn values(&self) -> Vec<DataValue> {
        self.0.iter().map(|s| s.value).collect()
    }
}

impl fmt::Display for DataWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}
