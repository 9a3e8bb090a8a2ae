//! Buyer-side decision policies.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("decision script exhausted at round {round} ({len} decisions available)")]
    ScriptExhausted { round: u64, len: usize },
    #[error("cannot read decision script: {0}")]
    Script(String),
    #[error("external decision source failed: {0}")]
    External(String),
}

/// A decision channel outside the engine (a remote program, a queue fed by
/// a live session).
pub trait DecisionSource: Send {
    fn decide(&mut self, price: f64, round: u64) -> Result<bool, PolicyError>;
}

impl<F> DecisionSource for F
where
    F: FnMut(f64, u64) -> Result<bool, PolicyError> + Send,
{
    fn decide(&mut self, price: f64, round: u64) -> Result<bool, PolicyError> {
        self(price, round)
    }
}

/// Serializable policy description; instantiate with [`CookPolicy::from`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    /// Accept iff `price <= threshold`.
    Naive { threshold: f64 },
    /// Replays a fixed decision list.
    Scripted { decisions: Vec<bool> },
}

pub enum CookPolicy {
    Naive { threshold: f64 },
    Scripted { decisions: Vec<bool>, cursor: usize },
    External(Box<dyn DecisionSource>),
}

impl fmt::Debug for CookPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CookPolicy::Naive { threshold } => write!(f, "Naive({threshold})"),
            CookPolicy::Scripted { decisions, cursor } => {
                write!(f, "Scripted({cursor}/{})", decisions.len())
            }
            CookPolicy::External(_) => f.write_str("External"),
        }
    }
}

impl CookPolicy {
    pub fn naive(threshold: f64) -> Self {
        CookPolicy::Naive { threshold }
    }

    pub fn scripted(decisions: Vec<bool>) -> Self {
        CookPolicy::Scripted {
            decisions,
            cursor: 0,
        }
    }

    pub fn external(source: impl DecisionSource + 'static) -> Self {
        CookPolicy::External(Box::new(source))
    }

    pub fn decide(&mut self, price: f64, round: u64) -> Result<bool, PolicyError> {
        match self {
            CookPolicy::Naive { threshold } => Ok(price <= *threshold),
            CookPolicy::Scripted { decisions, cursor } => {
                let decision = decisions.get(*cursor).copied().ok_or(
                    PolicyError::ScriptExhausted {
                        round,
                        len: decisions.len(),
                    },
                )?;
                *cursor += 1;
                Ok(decision)
            }
            CookPolicy::External(source) => source.decide(price, round),
        }
    }
}

impl From<&PolicySpec> for CookPolicy {
    fn from(spec: &PolicySpec) -> Self {
        match spec {
            PolicySpec::Naive { threshold } => CookPolicy::naive(*threshold),
            PolicySpec::Scripted { decisions } => CookPolicy::scripted(decisions.clone()),
        }
    }
}

/// Parses a decision script: one `0` or `1` per line, blank lines ignored.
pub fn parse_script(text: &str) -> Result<Vec<bool>, PolicyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(PolicyError::Script(format!(
                "line {}: expected 0 or 1, found {other:?}",
                i + 1
            ))),
        })
        .collect()
}

pub fn load_script(path: &Path) -> Result<Vec<bool>, PolicyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PolicyError::Script(format!("{}: {e}", path.display())))?;
    parse_script(&text)
}
