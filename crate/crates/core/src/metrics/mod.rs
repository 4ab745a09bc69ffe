//! Evaluation: ROC-AUC, single-head task prediction, run logs and their CSV
//! and aggregate JSON exports.

mod auc;
mod log;

use std::path::PathBuf;

use thiserror::Error;

use crate::lifenet::{LifelongNetwork, NetError, TaskId};

pub use auc::auc;
pub use log::{mean_std, Aggregate, Metric, Record, RunLog, SeriesPoint, CSV_HEADER};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("auc needs at least one positive and one negative label")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score is NaN")]
    NanScore,
    #[error("network has no tasks")]
    EmptyNetwork,
    #[error("malformed log: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Index of the largest probability, ties to the lowest index.
pub fn argmax_task(probs: &[f64]) -> Option<TaskId> {
    let mut best: Option<usize> = None;
    for (i, &p) in probs.iter().enumerate() {
        if best.is_none_or(|b| p > probs[b]) {
            best = Some(i);
        }
    }
    best.map(TaskId)
}

/// The task whose head is most confident on `x`.
pub fn predict_task(net: &LifelongNetwork, x: &[f64]) -> Result<TaskId, MetricsError> {
    let probs = net.forward_all(x)?;
    argmax_task(&probs).ok_or(MetricsError::EmptyNetwork)
}
