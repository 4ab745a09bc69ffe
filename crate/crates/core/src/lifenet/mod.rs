//! The columnar lifelong network: one column of hidden units and one sigmoid
//! head per task, forward-transfer link groups from earlier columns, optional
//! backward links into earlier heads, and consolidation selectors over those
//! groups.

mod network;
mod transfer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nncore::NnError;

pub use network::{Column, Head, Layer, LifelongNetwork, LinkGroup, LinkKind, Selector, HIDDEN_DEPTH};
pub use transfer::{
    decide_transfer, expansion_size, ExpansionPolicy, TransferDecision, TransferStrategy,
    DEFAULT_ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("input dimension must be positive")]
    InvalidInputDim,
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("similarity {0} outside [0, 1]")]
    InvalidSimilarity(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no samples supplied")]
    EmptySamples,
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
