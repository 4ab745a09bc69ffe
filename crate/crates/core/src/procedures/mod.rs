//! Training and the lifelong procedures built on it.

mod eval;
mod ops;
mod train;
#[cfg(test)]
mod toy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::lifenet::{LifelongNetwork, NetError, TaskId};
use crate::metrics::MetricsError;
use crate::nncore::{AdamConfig, NnError};

pub use eval::{EvalSet, EvalTask, Evaluator};
pub use ops::{
    backward_transfer, confusion_from_probs, graceful_forget, learn_new_task, measure_confusion,
    reduce_confusion, refine_all, ConfusionLogs, ConfusionReport, LearnOutcome,
};
pub use train::{train, EpochRecord, TrainData};

#[derive(Debug, Error)]
pub enum ProcError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training samples")]
    EmptyData,
    #[error("no active tasks")]
    NoActiveTasks,
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Called after each epoch; returns test AUC per task.
pub type EvalHook<'a> =
    &'a mut dyn FnMut(&LifelongNetwork) -> Result<BTreeMap<TaskId, f64>, ProcError>;

fn default_batch() -> usize {
    64
}

fn default_epochs() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: default_batch(),
            epochs: default_epochs(),
            adam: AdamConfig::default(),
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ProcError> {
        if self.batch_size == 0 {
            return Err(ProcError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(ProcError::InvalidConfig("epochs must be positive".into()));
        }
        self.adam.validate()?;
        Ok(())
    }
}
