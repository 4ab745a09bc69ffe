use super::NnError;

/// Consolidation value marking an entry as frozen (masked from every update).
pub const FROZEN: f64 = f64::INFINITY;

/// Returns true when `b` is a legal consolidation value: a finite non-negative
/// real or the frozen marker.
pub fn is_valid_consolidation(b: f64) -> bool {
    b == FROZEN || (b.is_finite() && b >= 0.0)
}

/// A dense weight matrix together with its per-entry consolidation values,
/// anchor targets and Adam state.
///
/// Layout is row-major with one row per output unit. When the block carries a
/// bias, the bias of row `r` is stored in the last column of that row, so a
/// row has `inputs + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBlock {
    rows: usize,
    inputs: usize,
    has_bias: bool,
    values: Vec<f64>,
    consolidation: Vec<f64>,
    targets: Vec<f64>,
    moment1: Vec<f64>,
    moment2: Vec<f64>,
    step: u64,
}

impl WeightBlock {
    /// All-zero block, fully unfrozen (b = 0).
    pub fn zeros(rows: usize, inputs: usize, has_bias: bool) -> Self {
        let len = rows * (inputs + usize::from(has_bias));
        Self {
            rows,
            inputs,
            has_bias,
            values: vec![0.0; len],
            consolidation: vec![0.0; len],
            targets: vec![0.0; len],
            moment1: vec![0.0; len],
            moment2: vec![0.0; len],
            step: 0,
        }
    }

    /// Builds a block from row-major weights (`rows x inputs`) and an optional
    /// bias vector. Targets are anchored at the given values.
    pub fn from_parts(
        rows: usize,
        inputs: usize,
        weights: &[f64],
        bias: Option<&[f64]>,
    ) -> Result<Self, NnError> {
        if weights.len() != rows * inputs {
            return Err(NnError::DimensionMismatch {
                what: "weight matrix",
                expected: rows * inputs,
                actual: weights.len(),
            });
        }
        if let Some(b) = bias {
            if b.len() != rows {
                return Err(NnError::DimensionMismatch {
                    what: "bias vector",
                    expected: rows,
                    actual: b.len(),
                });
            }
        }
        let mut block = Self::zeros(rows, inputs, bias.is_some());
        let stride = block.stride();
        for r in 0..rows {
            block.values[r * stride..r * stride + inputs]
                .copy_from_slice(&weights[r * inputs..(r + 1) * inputs]);
            if let Some(b) = bias {
                block.values[r * stride + inputs] = b[r];
            }
        }
        block.targets.clone_from(&block.values);
        Ok(block)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of inputs, not counting the implicit bias input.
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    /// Entries per row, including the bias entry when present.
    pub fn stride(&self) -> usize {
        self.inputs + usize::from(self.has_bias)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values. Callers are responsible for honoring
    /// the frozen contract; the optimizer never touches frozen entries.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn consolidation(&self) -> &[f64] {
        &self.consolidation
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn moment1(&self) -> &[f64] {
        &self.moment1
    }

    pub fn moment2(&self) -> &[f64] {
        &self.moment2
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn weight(&self, row: usize, input: usize) -> f64 {
        self.values[row * self.stride() + input]
    }

    pub fn bias(&self, row: usize) -> Option<f64> {
        self.has_bias
            .then(|| self.values[row * self.stride() + self.inputs])
    }

    /// Sets the bias of `row`; a no-op on bias-free blocks.
    pub fn set_bias(&mut self, row: usize, value: f64) {
        if self.has_bias {
            let idx = row * self.stride() + self.inputs;
            self.values[idx] = value;
        }
    }

    /// Sets every consolidation entry to `b`. A finite value re-anchors the
    /// targets at the current weights.
    pub fn set_consolidation(&mut self, b: f64) -> Result<(), NnError> {
        if !is_valid_consolidation(b) {
            return Err(NnError::InvalidConsolidation(b));
        }
        self.consolidation.fill(b);
        if b != FROZEN {
            self.targets.clone_from(&self.values);
        }
        Ok(())
    }

    /// Sets a single entry's consolidation and target.
    pub fn set_entry_consolidation(
        &mut self,
        idx: usize,
        b: f64,
        target: f64,
    ) -> Result<(), NnError> {
        if !is_valid_consolidation(b) {
            return Err(NnError::InvalidConsolidation(b));
        }
        self.consolidation[idx] = b;
        self.targets[idx] = target;
        Ok(())
    }

    pub fn is_frozen(&self, idx: usize) -> bool {
        self.consolidation[idx] == FROZEN
    }

    /// True when every entry is frozen (vacuously true for empty blocks).
    pub fn fully_frozen(&self) -> bool {
        self.consolidation.iter().all(|&b| b == FROZEN)
    }

    pub fn trainable_entries(&self) -> usize {
        self.consolidation.iter().filter(|&&b| b != FROZEN).count()
    }

    /// Clears Adam moments and the step counter of non-frozen entries.
    pub fn reset_optimizer(&mut self) {
        for i in 0..self.values.len() {
            if self.consolidation[i] != FROZEN {
                self.moment1[i] = 0.0;
                self.moment2[i] = 0.0;
            }
        }
        if !self.fully_frozen() {
            self.step = 0;
        }
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn optimizer_parts(
        &mut self,
    ) -> (&mut [f64], &[f64], &[f64], &mut [f64], &mut [f64], &mut u64) {
        (
            &mut self.values,
            &self.consolidation,
            &self.targets,
            &mut self.moment1,
            &mut self.moment2,
            &mut self.step,
        )
    }

    /// `W·x + bias` for an input of length `inputs()`.
    pub fn affine_forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.inputs {
            return Err(NnError::DimensionMismatch {
                what: "affine input",
                expected: self.inputs,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        self.accumulate_forward(x, &mut out);
        Ok(out)
    }

    /// `out += W·x + bias`, unchecked lengths (debug asserted).
    #[inline]
    pub(crate) fn accumulate_forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        debug_assert_eq!(out.len(), self.rows);
        let stride = self.stride();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.values[r * stride..(r + 1) * stride];
            let mut acc = dot(&row[..self.inputs], x);
            if self.has_bias {
                acc += row[self.inputs];
            }
            *o += acc;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Sum over non-frozen entries of `b·(θ − θ_target)²`.
pub fn consolidation_penalty(block: &WeightBlock) -> f64 {
    block
        .values
        .iter()
        .zip(&block.consolidation)
        .zip(&block.targets)
        .filter(|((_, &b), _)| b != FROZEN && b != 0.0)
        .map(|((&v, &b), &t)| b * (v - t) * (v - t))
        .sum()
}

/// Closed-form gradient of [`consolidation_penalty`]: `2·b·(θ − θ_target)`,
/// zero for frozen entries.
pub fn consolidation_penalty_grad(block: &WeightBlock) -> Vec<f64> {
    block
        .values
        .iter()
        .zip(&block.consolidation)
        .zip(&block.targets)
        .map(|((&v, &b), &t)| {
            if b == FROZEN || b == 0.0 {
                0.0
            } else {
                2.0 * b * (v - t)
            }
        })
        .collect()
}
