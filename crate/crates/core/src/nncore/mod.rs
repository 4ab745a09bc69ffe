//! Dense-network numerics: weight blocks with per-entry consolidation,
//! activations, binary cross-entropy, the consolidation penalty, Adam, and a
//! small DAG engine with exact reverse-mode gradients.
//!
//! The total loss minimized during training is
//! `L_task(θ) + Σ_i b_i (θ_i − θ_i^target)²`, where `b_i = ∞` marks a frozen
//! entry that is masked out of the update altogether.

mod activation;
mod adam;
mod block;
mod graph;

pub use activation::{activate, bce_loss, sigmoid, ActivationKind, PROB_CLAMP};
pub use adam::{adam_step, AdamConfig};
pub use block::{
    consolidation_penalty, consolidation_penalty_grad, is_valid_consolidation, WeightBlock,
    FROZEN,
};
pub use graph::{DenseGraph, Edge, Gradients, Node, Source, Tape, Workspace};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid consolidation value {0} (must be >= 0 or frozen)")]
    InvalidConsolidation(f64),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no active outputs")]
    NoActiveOutputs,
    #[error("invalid topology: {0}")]
    Topology(String),
}

/// `W·x + bias` for a single block.
pub fn affine_forward(x: &[f64], block: &WeightBlock) -> Result<Vec<f64>, NnError> {
    block.affine_forward(x)
}
