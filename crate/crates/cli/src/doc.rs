//! JSON documents for systems and partitions.
//!
//! Grammar (informal; `?` marks optional keys, `|` alternatives):
//!
//! ```text
//! system    := { metadata?: any, states?: [label], stationary?: [real],
//!                ( transition: [[real]] | bernoulli: [real] | map: [state] ) }
//! partition := { metadata?: any, labels?: [label],
//!                ( response: [[real]] | cells: [[state]] | uniform: int ) }
//! state     := label | int
//! ```
//!
//! `states` defaults to `"0"`, `"1"`, ... . A `map` system is deterministic
//! with `x -> map[x]`. A missing `stationary` is computed and any failure to
//! find a unique one is reported as a validation error.

use std::fmt;
use std::fs;
use std::path::Path;

use entropy_lab::dynsys::{default_labels, make_bernoulli, make_deterministic, make_markov, StochasticSystem};
use entropy_lab::entcore::{ProbVector, StochasticMatrix};
use entropy_lab::pou::{sharp_partition, uniform_unsharp, PartitionOfUnity};
use serde::{Deserialize, Serialize};

/// A document that failed to load.
#[derive(Debug)]
pub enum DocError {
    Io { path: String, message: String },
    Syntax { path: String, line: usize, column: usize, message: String },
    Invalid { path: String, field: &'static str, message: String },
}

impl DocError {
    pub fn is_validation(&self) -> bool {
        matches!(self, DocError::Invalid { .. })
    }
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocError::Io { path, message } => write!(f, "{path}: {message}"),
            DocError::Syntax { path, line, column, message } => {
                write!(f, "{path}:{line}:{column}: syntax error: {message}")
            }
            DocError::Invalid { path, field, message } => write!(f, "{path}: field `{field}`: {message}"),
        }
    }
}

impl std::error::Error for DocError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Label(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernoulli: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<StateRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Vec<StateRef>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<usize>,
}

fn read(path: &Path) -> Result<String, DocError> {
    fs::read_to_string(path).map_err(|e| DocError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &str) -> Result<T, DocError> {
    serde_json::from_str(text).map_err(|e| DocError::Syntax {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn resolve(sys_states: &[String], r: &StateRef) -> Result<usize, String> {
    match r {
        StateRef::Index(i) if *i < sys_states.len() => Ok(*i),
        StateRef::Index(i) => Err(format!("state index {i} outside {} states", sys_states.len())),
        StateRef::Label(l) => sys_states
            .iter()
            .position(|s| s == l)
            .ok_or_else(|| format!("unknown state label {l:?}")),
    }
}

impl SystemDocument {
    pub fn parse(text: &str, path: &str) -> Result<Self, DocError> {
        parse_json(text, path)
    }

    pub fn to_system(&self, path: &str) -> Result<StochasticSystem, DocError> {
        let invalid = |field: &'static str, message: String| DocError::Invalid {
            path: path.to_string(),
            field,
            message,
        };
        let given = [self.transition.is_some(), self.bernoulli.is_some(), self.map.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(invalid(
                "transition",
                "exactly one of `transition`, `bernoulli`, `map` is required".into(),
            ));
        }
        let stationary = self
            .stationary
            .as_ref()
            .map(|mu| ProbVector::new(mu.clone()))
            .transpose()
            .map_err(|e| invalid("stationary", e.to_string()))?;

        let (field, n): (&'static str, usize) = if let Some(rows) = &self.transition {
            ("transition", rows.len())
        } else if let Some(p) = &self.bernoulli {
            ("bernoulli", p.len())
        } else {
            ("map", self.map.as_ref().map_or(0, Vec::len))
        };
        let states = match &self.states {
            Some(s) => {
                if s.len() != n {
                    return Err(invalid("states", format!("{} labels for {n} states", s.len())));
                }
                let mut sorted = s.clone();
                sorted.sort();
                if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                    return Err(invalid("states", format!("duplicate label {:?}", w[0])));
                }
                s.clone()
            }
            None => default_labels(n),
        };

        let built = if let Some(rows) = &self.transition {
            let p = StochasticMatrix::from_rows(rows).map_err(|e| invalid(field, e.to_string()))?;
            make_markov(states, p, stationary)
        } else if let Some(p) = &self.bernoulli {
            let p = ProbVector::new(p.clone()).map_err(|e| invalid(field, e.to_string()))?;
            if self.states.is_none() && stationary.is_none() {
                make_bernoulli(&p)
            } else {
                let rows = vec![p.as_slice().to_vec(); n];
                let m = StochasticMatrix::from_rows(&rows).map_err(|e| invalid(field, e.to_string()))?;
                make_markov(states, m, Some(stationary.unwrap_or(p)))
            }
        } else {
            let targets = self
                .map
                .as_ref()
                .expect("checked above")
                .iter()
                .map(|r| resolve(&states, r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| invalid(field, m))?;
            match stationary {
                Some(mu) => make_deterministic(states, &targets, mu),
                None => {
                    let m = nalgebra::DMatrix::from_fn(n, n, |x, y| if targets[x] == y { 1.0 } else { 0.0 });
                    let p = StochasticMatrix::new(m).map_err(|e| invalid(field, e.to_string()))?;
                    make_markov(states, p, None)
                }
            }
        };
        built.map_err(|e| {
            let field = match e {
                entropy_lab::Error::NotInvariant { .. } | entropy_lab::Error::ZeroMassState { .. } => "stationary",
                _ => field,
            };
            invalid(field, e.to_string())
        })
    }

    /// The explicit form of `sys` (always `states`, `transition`, `stationary`).
    pub fn from_system(sys: &StochasticSystem) -> Self {
        let n = sys.n_states();
        Self {
            metadata: None,
            states: Some(sys.states().to_vec()),
            transition: Some((0..n).map(|x| sys.transition().row(x)).collect()),
            bernoulli: None,
            map: None,
            stationary: Some(sys.stationary().as_slice().to_vec()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}

impl PartitionDocument {
    pub fn parse(text: &str, path: &str) -> Result<Self, DocError> {
        parse_json(text, path)
    }

    pub fn to_partition(&self, sys: &StochasticSystem, path: &str) -> Result<PartitionOfUnity, DocError> {
        let invalid = |field: &'static str, message: String| DocError::Invalid {
            path: path.to_string(),
            field,
            message,
        };
        let given = [self.response.is_some(), self.cells.is_some(), self.uniform.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(invalid(
                "response",
                "exactly one of `response`, `cells`, `uniform` is required".into(),
            ));
        }
        let n = sys.n_states();
        let (field, f) = if let Some(rows) = &self.response {
            if rows.len() != n {
                return Err(invalid("response", format!("{} rows for {n} states", rows.len())));
            }
            ("response", PartitionOfUnity::from_rows(rows))
        } else if let Some(cells) = &self.cells {
            let cells = cells
                .iter()
                .map(|c| c.iter().map(|r| resolve(sys.states(), r)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| invalid("cells", m))?;
            ("cells", sharp_partition(n, &cells))
        } else {
            ("uniform", uniform_unsharp(n, self.uniform.expect("checked above")))
        };
        let f = f.map_err(|e| invalid(field, e.to_string()))?;
        match &self.labels {
            Some(labels) => f.with_labels(labels.clone()).map_err(|e| invalid("labels", e.to_string())),
            None => Ok(f),
        }
    }

    /// The explicit `response` form of `f`, with labels.
    pub fn from_partition(f: &PartitionOfUnity) -> Self {
        Self {
            metadata: None,
            labels: Some(f.labels()),
            response: Some((0..f.n_states()).map(|x| f.row(x)).collect()),
            cells: None,
            uniform: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}

pub fn parse_system(path: &Path) -> Result<StochasticSystem, DocError> {
    let name = path.display().to_string();
    SystemDocument::parse(&read(path)?, &name)?.to_system(&name)
}

pub fn parse_partition(path: &Path, sys: &StochasticSystem) -> Result<PartitionOfUnity, DocError> {
    let name = path.display().to_string();
    PartitionDocument::parse(&read(path)?, &name)?.to_partition(sys, &name)
}
