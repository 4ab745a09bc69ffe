//! Lifelong learning with per-weight consolidation.

pub mod data;
pub mod experiments;
pub mod lifenet;
pub mod metrics;
pub mod nncore;
pub mod procedures;
