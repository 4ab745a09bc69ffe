use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetError, TaskId};

/// How forward-transfer links and head copying are chosen for a new task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferStrategy {
    /// Links from every previous task, random init, no copy.
    AllRandomInit,
    /// Links from tasks with similarity above `alpha`; copy the head of the
    /// most similar task when it clears `alpha`.
    OneSimilar { alpha: f64 },
    /// Links as `OneSimilar(0.5)`; copy from a uniformly random previous task.
    OneRandom,
    /// Link and copy from the least similar task only.
    OneWorst,
    /// Links as `OneSimilar(0.5)`; always copy from the most similar task.
    OneAlways,
}

/// Threshold shared by the strategies that gate intermediate links like
/// `OneSimilar`.
pub const DEFAULT_ALPHA: f64 = 0.5;

impl Default for TransferStrategy {
    fn default() -> Self {
        TransferStrategy::OneSimilar {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl fmt::Display for TransferStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferStrategy::AllRandomInit => write!(f, "all-random-init"),
            TransferStrategy::OneSimilar { alpha } if *alpha == DEFAULT_ALPHA => {
                write!(f, "one-similar")
            }
            TransferStrategy::OneSimilar { alpha } => write!(f, "one-similar:{alpha}"),
            TransferStrategy::OneRandom => write!(f, "one-random"),
            TransferStrategy::OneWorst => write!(f, "one-worst"),
            TransferStrategy::OneAlways => write!(f, "one-always"),
        }
    }
}

impl FromStr for TransferStrategy {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let (name, arg) = match norm.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (norm.clone(), None),
        };
        let strategy = match name.as_str() {
            "all-random-init" | "allrandominit" => TransferStrategy::AllRandomInit,
            "one-similar" | "onesimilar" => {
                let alpha = match arg.as_deref() {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| NetError::Parse(format!("bad alpha in {s:?}")))?,
                    None => DEFAULT_ALPHA,
                };
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(NetError::Parse(format!("alpha {alpha} outside [0, 1]")));
                }
                TransferStrategy::OneSimilar { alpha }
            }
            "one-random" | "onerandom" => TransferStrategy::OneRandom,
            "one-worst" | "oneworst" => TransferStrategy::OneWorst,
            "one-always" | "onealways" => TransferStrategy::OneAlways,
            _ => return Err(NetError::Parse(format!("unknown transfer strategy {s:?}"))),
        };
        Ok(strategy)
    }
}

/// How many hidden units per layer a new task receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionPolicy {
    Constant(usize),
    /// `round(n_max · (1 − max similarity))`, `n_max` for the first task.
    SimilarityScaled(usize),
}

/// Outcome of [`decide_transfer`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferDecision {
    pub enabled_sources: BTreeSet<TaskId>,
    pub copy_source: Option<TaskId>,
}

pub fn expansion_size(policy: ExpansionPolicy, sims: &[f64]) -> Result<usize, NetError> {
    if let Some(&bad) = sims.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(NetError::InvalidSimilarity(bad));
    }
    Ok(match policy {
        ExpansionPolicy::Constant(n) => n,
        ExpansionPolicy::SimilarityScaled(n_max) => match max_similarity(sims) {
            None => n_max,
            // Round half up; the small slack absorbs representation error
            // in products like 25 · 0.5.
            Some(max) => (n_max as f64 * (1.0 - max) + 0.5 + 1e-9).floor() as usize,
        },
    })
}

fn max_similarity(sims: &[f64]) -> Option<f64> {
    sims.iter().copied().reduce(f64::max)
}

/// Index of the largest value, ties to the lowest index.
fn argmax(sims: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in sims.iter().enumerate() {
        if best.is_none_or(|b| s > sims[b]) {
            best = Some(i);
        }
    }
    best
}

/// Index of the smallest value, ties to the lowest index.
fn argmin(sims: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in sims.iter().enumerate() {
        if best.is_none_or(|b| s < sims[b]) {
            best = Some(i);
        }
    }
    best
}

fn above(sims: &[f64], alpha: f64) -> BTreeSet<TaskId> {
    sims.iter()
        .enumerate()
        .filter(|(_, &s)| s > alpha)
        .map(|(i, _)| TaskId(i))
        .collect()
}

/// Chooses enabled link sources and the head to copy. `sims[i]` is the
/// similarity of previous task `i` to the new task.
pub fn decide_transfer<R: Rng + ?Sized>(
    strategy: TransferStrategy,
    sims: &[f64],
    rng: &mut R,
) -> TransferDecision {
    match strategy {
        TransferStrategy::AllRandomInit => TransferDecision {
            enabled_sources: (0..sims.len()).map(TaskId).collect(),
            copy_source: None,
        },
        TransferStrategy::OneSimilar { alpha } => TransferDecision {
            enabled_sources: above(sims, alpha),
            copy_source: argmax(sims).filter(|&i| sims[i] > alpha).map(TaskId),
        },
        TransferStrategy::OneRandom => TransferDecision {
            enabled_sources: above(sims, DEFAULT_ALPHA),
            copy_source: (!sims.is_empty()).then(|| TaskId(rng.gen_range(0..sims.len()))),
        },
        TransferStrategy::OneWorst => {
            let worst = argmin(sims).map(TaskId);
            TransferDecision {
                enabled_sources: worst.into_iter().collect(),
                copy_source: worst,
            }
        }
        TransferStrategy::OneAlways => TransferDecision {
            enabled_sources: above(sims, DEFAULT_ALPHA),
            copy_source: argmax(sims).map(TaskId),
        },
    }
}
