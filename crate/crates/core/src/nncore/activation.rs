use serde::{Deserialize, Serialize};

/// Probability clamp used by [`bce_loss`].
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    ReLU,
    Sigmoid,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::ReLU => z.max(0.0),
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            ActivationKind::ReLU => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => a * (1.0 - a),
            ActivationKind::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn activate(z: &[f64], kind: ActivationKind) -> Vec<f64> {
    z.iter().map(|&v| kind.apply(v)).collect()
}

/// Binary cross-entropy of probability `p` against label `y`, with `p`
/// clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}
