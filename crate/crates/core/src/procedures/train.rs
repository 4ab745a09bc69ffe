use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalHook, ProcError, TrainConfig};
use crate::data::TaskDataset;
use crate::lifenet::{LifelongNetwork, TaskId};
use crate::nncore::{adam_step, bce_loss, Gradients, Workspace};

/// Inputs with one binary target per active head.
#[derive(Debug, Clone, Default)]
pub struct TrainData<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub targets: Vec<Vec<f64>>,
}

impl<'a> TrainData<'a> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// A single task's training split.
    pub fn single(ds: &'a TaskDataset) -> Self {
        let (inputs, ys) = ds.train_set();
        Self {
            inputs,
            targets: ys.into_iter().map(|y| vec![y]).collect(),
        }
    }

    /// Training splits of several tasks pooled, target `k` being 1 exactly
    /// for the positives of `datasets[k]`. Shared negatives appear once.
    pub fn joint(datasets: &[&'a TaskDataset]) -> Self {
        let m = datasets.len();
        let mut out = Self::default();
        for (k, ds) in datasets.iter().enumerate() {
            for x in &ds.train_pos {
                let mut t = vec![0.0; m];
                t[k] = 1.0;
                out.inputs.push(x);
                out.targets.push(t);
            }
        }
        let mut seen = HashSet::new();
        for ds in datasets {
            for (x, &idx) in ds.train_neg.iter().zip(&ds.train_neg_idx) {
                if seen.insert(idx) {
                    out.inputs.push(x);
                    out.targets.push(vec![0.0; m]);
                }
            }
        }
        out
    }
}

/// Per-epoch outcome of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: String,
    /// Mean per-sample training loss over the epoch, measured before each
    /// step's update.
    pub loss: f64,
    pub per_task_auc: BTreeMap<TaskId, f64>,
}

/// Minimizes the summed BCE of `active` heads plus the consolidation penalty.
///
/// Blocks whose entries are all frozen are skipped, and nodes with no
/// trainable block upstream are computed once per sample and reused across
/// epochs. Adam state of every trainable block is reset at the start.
pub fn train(
    net: &mut LifelongNetwork,
    active: &[TaskId],
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    phase: &str,
    mut eval: Option<EvalHook<'_>>,
) -> Result<Vec<EpochRecord>, ProcError> {
    cfg.validate()?;
    if active.is_empty() {
        return Err(ProcError::NoActiveTasks);
    }
    if data.is_empty() {
        return Err(ProcError::EmptyData);
    }
    if let Some(bad) = data.targets.iter().find(|t| t.len() != active.len()) {
        return Err(ProcError::Precondition(format!(
            "{} targets per sample for {} active heads",
            bad.len(),
            active.len()
        )));
    }
    let heads: Vec<usize> = active
        .iter()
        .map(|&t| net.head(t).map(|h| h.node))
        .collect::<Result<_, _>>()?;

    let graph = net.graph_mut();
    let trainable: Vec<bool> = graph
        .edges()
        .iter()
        .map(|e| e.enabled && !e.block.is_empty() && !e.block.fully_frozen())
        .collect();
    for (e, &t) in trainable.iter().enumerate() {
        if t {
            graph.edge_mut(e).block.reset_optimizer();
        }
    }
    let upstream = graph.upstream_trainable(&trainable);
    let skip: Vec<bool> = upstream.iter().map(|&u| !u).collect();
    let static_nodes: Vec<usize> = (0..skip.len()).filter(|&n| skip[n]).collect();

    // Activations of static nodes, per sample, concatenated.
    let mut tape = graph.new_tape();
    let mut cache: Vec<Vec<f64>> = Vec::with_capacity(data.len());
    for x in &data.inputs {
        graph.forward_into(x, &mut tape, None)?;
        cache.push(
            static_nodes
                .iter()
                .flat_map(|&n| tape.acts[n].iter().copied())
                .collect(),
        );
    }

    let mut grads = Gradients {
        per_edge: graph
            .edges()
            .iter()
            .zip(&trainable)
            .map(|(e, &t)| if t { vec![0.0; e.block.len()] } else { Vec::new() })
            .collect(),
    };
    let mut ws = Workspace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut seeds = Vec::with_capacity(heads.len());
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        {
            let graph = net.graph_mut();
            for batch in order.chunks(cfg.batch_size) {
                for (g, &t) in grads.per_edge.iter_mut().zip(&trainable) {
                    if t {
                        g.fill(0.0);
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let x = data.inputs[i];
                    let mut off = 0;
                    for &n in &static_nodes {
                        let w = tape.acts[n].len();
                        tape.acts[n].copy_from_slice(&cache[i][off..off + w]);
                        off += w;
                    }
                    graph.forward_into(x, &mut tape, Some(&skip))?;
                    seeds.clear();
                    for (&node, &y) in heads.iter().zip(&data.targets[i]) {
                        let p = tape.acts[node][0];
                        loss_sum += bce_loss(p, y);
                        seeds.push((node, (p - y) * scale));
                    }
                    graph.accumulate_backward(x, &tape, &seeds, &trainable, &upstream, &mut grads, &mut ws);
                }
                for (e, &t) in trainable.iter().enumerate() {
                    if t {
                        adam_step(&mut graph.edge_mut(e).block, &grads.per_edge[e], &cfg.adam)?;
                    }
                }
            }
        }
        let per_task_auc = match eval.as_mut() {
            Some(hook) => hook(net)?,
            None => BTreeMap::new(),
        };
        records.push(EpochRecord {
            epoch,
            phase: phase.to_string(),
            loss: loss_sum / data.len() as f64,
            per_task_auc,
        });
    }
    Ok(records)
}
