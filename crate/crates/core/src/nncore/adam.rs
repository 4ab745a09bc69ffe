use serde::{Deserialize, Serialize};

use super::{NnError, WeightBlock, FROZEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate > 0.0
            && self.epsilon > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// One Adam update on `block` given the task-loss gradient.
///
/// The consolidation penalty gradient `2·b·(θ − θ_target)` is added per
/// entry. Frozen entries keep their value and moments untouched.
pub fn adam_step(
    block: &mut WeightBlock,
    task_grads: &[f64],
    cfg: &AdamConfig,
) -> Result<(), NnError> {
    if task_grads.len() != block.len() {
        return Err(NnError::DimensionMismatch {
            what: "gradient",
            expected: block.len(),
            actual: task_grads.len(),
        });
    }
    let (values, consolidation, targets, m1, m2, step) = block.optimizer_parts();
    *step += 1;
    let t = *step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..values.len() {
        let b = consolidation[i];
        if b == FROZEN {
            continue;
        }
        let mut g = task_grads[i];
        if b != 0.0 {
            g += 2.0 * b * (values[i] - targets[i]);
        }
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m1[i] / bc1;
        let v_hat = m2[i] / bc2;
        values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}
