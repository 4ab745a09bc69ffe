use std::collections::{BTreeMap, HashMap};

use super::{confusion_from_probs, ProcError};
use crate::data::TaskDataset;
use crate::lifenet::{LifelongNetwork, TaskId};
use crate::metrics::auc;
use crate::nncore::{Source, Tape};

/// Test samples of a task, as rows of an [`EvalSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalTask {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

/// A deduplicated pool of test inputs shared by a task sequence. Task `k`
/// added here must be the network's `TaskId(k)`.
#[derive(Debug, Clone, Default)]
pub struct EvalSet {
    pub inputs: Vec<Vec<f64>>,
    pub tasks: Vec<EvalTask>,
    rows: HashMap<usize, usize>,
}

impl EvalSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn row(&mut self, idx: usize, x: &[f64]) -> usize {
        *self.rows.entry(idx).or_insert_with(|| {
            self.inputs.push(x.to_vec());
            self.inputs.len() - 1
        })
    }

    /// Appends a task's test split. Samples are keyed by their source index,
    /// so every dataset must come from the same corpus.
    pub fn add_task(&mut self, ds: &TaskDataset) -> TaskId {
        let pos = ds
            .test_pos
            .iter()
            .zip(&ds.test_pos_idx)
            .map(|(x, &i)| self.row(i, x))
            .collect();
        let neg = ds
            .test_neg
            .iter()
            .zip(&ds.test_neg_idx)
            .map(|(x, &i)| self.row(i, x))
            .collect();
        self.tasks.push(EvalTask { pos, neg });
        TaskId(self.tasks.len() - 1)
    }
}

/// Evaluates every head on an [`EvalSet`], recomputing only nodes whose
/// inputs changed since the previous call.
#[derive(Debug, Clone)]
pub struct Evaluator {
    set: EvalSet,
    tapes: Vec<Tape>,
    snapshot: Vec<(bool, Vec<f64>)>,
    widths: Vec<usize>,
    probs: Vec<Vec<f64>>,
}

impl Evaluator {
    pub fn new(set: EvalSet) -> Self {
        Self {
            set,
            tapes: Vec::new(),
            snapshot: Vec::new(),
            widths: Vec::new(),
            probs: Vec::new(),
        }
    }

    pub fn set(&self) -> &EvalSet {
        &self.set
    }

    pub fn set_mut(&mut self) -> &mut EvalSet {
        &mut self.set
    }

    /// Brings cached head outputs up to date with `net`.
    pub fn refresh(&mut self, net: &LifelongNetwork) -> Result<(), ProcError> {
        let g = net.graph();
        let n_nodes = g.nodes().len();
        let mut dirty = vec![false; n_nodes];
        for &n in g.order() {
            let mut d = self.widths.get(n) != Some(&g.nodes()[n].width);
            for &e in g.incoming(n) {
                let edge = g.edge(e);
                let changed = match self.snapshot.get(e) {
                    Some((en, vals)) => *en != edge.enabled || vals.as_slice() != edge.block.values(),
                    None => true,
                };
                let src_dirty = matches!(edge.src, Source::Node(s) if dirty[s]) && edge.enabled;
                d |= changed || src_dirty;
            }
            dirty[n] = d;
        }
        let fresh = self.tapes.len() != self.set.inputs.len();
        if fresh {
            self.tapes = vec![Tape::default(); self.set.inputs.len()];
            dirty.fill(true);
        }
        if dirty.iter().any(|&d| d) || self.probs.len() != self.set.inputs.len() {
            let skip: Vec<bool> = dirty.iter().map(|&d| !d).collect();
            self.probs.clear();
            for (x, tape) in self.set.inputs.iter().zip(&mut self.tapes) {
                g.forward_into(x, tape, Some(&skip))?;
                self.probs.push(net.head_probs(tape));
            }
        }
        self.snapshot = g
            .edges()
            .iter()
            .map(|e| (e.enabled, e.block.values().to_vec()))
            .collect();
        self.widths = g.nodes().iter().map(|n| n.width).collect();
        Ok(())
    }

    /// Head probabilities per pool row, as of the last refresh.
    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Outputs of head `t` on task `t`'s test positives then negatives.
    pub fn task_scores(&mut self, net: &LifelongNetwork, t: TaskId) -> Result<Vec<f64>, ProcError> {
        self.refresh(net)?;
        let task = self.eval_task(t)?;
        Ok(task
            .pos
            .iter()
            .chain(&task.neg)
            .map(|&r| self.probs[r][t.0])
            .collect())
    }

    fn eval_task(&self, t: TaskId) -> Result<&EvalTask, ProcError> {
        self.set
            .tasks
            .get(t.0)
            .ok_or_else(|| ProcError::Precondition(format!("no test data registered for {t}")))
    }

    pub fn task_auc(&mut self, net: &LifelongNetwork, t: TaskId) -> Result<f64, ProcError> {
        let scores = self.task_scores(net, t)?;
        let task = self.eval_task(t)?;
        let labels: Vec<bool> = std::iter::repeat_n(true, task.pos.len())
            .chain(std::iter::repeat_n(false, task.neg.len()))
            .collect();
        Ok(auc(&scores, &labels)?)
    }

    /// Test AUC of every learned task that has registered test data.
    pub fn all_aucs(&mut self, net: &LifelongNetwork) -> Result<BTreeMap<TaskId, f64>, ProcError> {
        let n = net.num_tasks().min(self.set.tasks.len());
        (0..n)
            .map(|k| Ok((TaskId(k), self.task_auc(net, TaskId(k))?)))
            .collect()
    }

    /// Confusion between tasks `i` and `j` on their test positives.
    pub fn confusion(&mut self, net: &LifelongNetwork, i: TaskId, j: TaskId) -> Result<f64, ProcError> {
        self.refresh(net)?;
        let pi: Vec<&[f64]> = self.eval_task(i)?.pos.iter().map(|&r| self.probs[r].as_slice()).collect();
        let pj: Vec<&[f64]> = self.eval_task(j)?.pos.iter().map(|&r| self.probs[r].as_slice()).collect();
        confusion_from_probs(&pi, &pj, i, j)
    }
}
