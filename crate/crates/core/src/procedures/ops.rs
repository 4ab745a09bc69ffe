use std::collections::BTreeSet;

use super::{train, EpochRecord, EvalHook, ProcError, TrainConfig, TrainData};
use crate::data::TaskDataset;
use crate::lifenet::{
    decide_transfer, expansion_size, ExpansionPolicy, LifelongNetwork, Selector, TaskId,
    TransferDecision, TransferStrategy,
};
use crate::metrics::argmax_task;
use crate::nncore::FROZEN;

/// What [`learn_new_task`] decided and observed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub task: TaskId,
    pub similarities: Vec<f64>,
    pub units: usize,
    pub decision: TransferDecision,
    pub records: Vec<EpochRecord>,
}

/// Adds and trains a column for a new task.
///
/// With `freeze_previous`, every pre-existing block is frozen first, so
/// earlier tasks' outputs cannot change.
#[allow(clippy::too_many_arguments)]
pub fn learn_new_task(
    net: &mut LifelongNetwork,
    data: &TaskDataset,
    strategy: TransferStrategy,
    policy: ExpansionPolicy,
    cfg: &TrainConfig,
    freeze_previous: bool,
    phase: &str,
    eval: Option<EvalHook<'_>>,
) -> Result<LearnOutcome, ProcError> {
    if data.train_pos.is_empty() || data.train_neg.is_empty() {
        return Err(ProcError::EmptyData);
    }
    cfg.validate()?;
    let similarities = net.similarities(&data.train_pos)?;
    let units = expansion_size(policy, &similarities)?;
    let decision = decide_transfer(strategy, &similarities, net.rng_mut());
    if freeze_previous {
        net.set_consolidation(Selector::All, FROZEN)?;
    }
    let task = net.add_task(units, &decision)?;
    let records = train(net, &[task], &TrainData::single(data), cfg, phase, eval)?;
    Ok(LearnOutcome {
        task,
        similarities,
        units,
        decision,
        records,
    })
}

/// Fraction of the two positive sets routed to the other task under
/// argmax-over-heads prediction. Rows are per-sample head probabilities.
pub fn confusion_from_probs(
    pos_i: &[&[f64]],
    pos_j: &[&[f64]],
    i: TaskId,
    j: TaskId,
) -> Result<f64, ProcError> {
    if i == j {
        return Err(ProcError::Precondition(format!("confusion of {i} with itself")));
    }
    if pos_i.is_empty() || pos_j.is_empty() {
        return Err(ProcError::EmptyData);
    }
    let to_j = pos_i.iter().filter(|p| argmax_task(p) == Some(j)).count();
    let to_i = pos_j.iter().filter(|p| argmax_task(p) == Some(i)).count();
    Ok((to_j + to_i) as f64 / (pos_i.len() + pos_j.len()) as f64)
}

pub fn measure_confusion(
    net: &LifelongNetwork,
    i: TaskId,
    j: TaskId,
    pos_i: &[Vec<f64>],
    pos_j: &[Vec<f64>],
) -> Result<f64, ProcError> {
    net.head(i)?;
    net.head(j)?;
    let pi = net.forward_batch(pos_i)?;
    let pj = net.forward_batch(pos_j)?;
    let ri: Vec<&[f64]> = pi.iter().map(Vec::as_slice).collect();
    let rj: Vec<&[f64]> = pj.iter().map(Vec::as_slice).collect();
    confusion_from_probs(&ri, &rj, i, j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionReport {
    pub initial: f64,
    pub post_stage1: f64,
    pub post_stage2: f64,
    pub stage1_ran: bool,
    pub stage2_ran: bool,
}

/// Per-stage training logs of [`reduce_confusion`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfusionLogs {
    pub stage1: Vec<EpochRecord>,
    pub stage2: Vec<EpochRecord>,
}

fn unfreeze_pair(net: &mut LifelongNetwork, i: TaskId, j: TaskId) -> Result<(), ProcError> {
    for sel in [
        Selector::Head(i),
        Selector::Column(j),
        Selector::TransferInto(j),
        Selector::Head(j),
    ] {
        net.set_consolidation(sel, 0.0)?;
    }
    Ok(())
}

/// Two-stage confusion reduction between an earlier task `i` and a later
/// task `j`: joint fine-tuning of both heads and `j`'s column, then, if the
/// confusion is still at or above `gamma`, the same with `expansion` extra
/// units per layer in `j`'s column wired to both heads.
///
/// Everything is frozen on return. Tasks other than `i` and `j` are
/// unaffected, which requires that `j`'s column feeds no other task.
#[allow(clippy::too_many_arguments)]
pub fn reduce_confusion(
    net: &mut LifelongNetwork,
    i: TaskId,
    j: TaskId,
    gamma: f64,
    expansion: usize,
    data_i: &TaskDataset,
    data_j: &TaskDataset,
    cfg: &TrainConfig,
    mut measure: impl FnMut(&LifelongNetwork) -> Result<f64, ProcError>,
) -> Result<(ConfusionReport, ConfusionLogs), ProcError> {
    net.head(i)?;
    net.head(j)?;
    if i.0 >= j.0 {
        return Err(ProcError::Precondition(format!("need {i} < {j}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ProcError::Precondition(format!("gamma {gamma} outside [0, 1]")));
    }
    cfg.validate()?;
    if let Some(l) = net
        .links()
        .iter()
        .find(|l| l.source == j && l.dest != i && l.dest != j)
    {
        return Err(ProcError::Precondition(format!(
            "{j} feeds {}; reducing its confusion would alter that task",
            l.dest
        )));
    }
    let data = TrainData::joint(&[data_i, data_j]);
    let initial = measure(net)?;
    let mut report = ConfusionReport {
        initial,
        post_stage1: initial,
        post_stage2: initial,
        stage1_ran: false,
        stage2_ran: false,
    };
    let mut logs = ConfusionLogs::default();
    if initial < gamma {
        return Ok((report, logs));
    }

    net.set_consolidation(Selector::All, FROZEN)?;
    unfreeze_pair(net, i, j)?;
    logs.stage1 = train(net, &[i, j], &data, cfg, "confusion:stage1", None)?;
    net.set_consolidation(Selector::All, FROZEN)?;
    report.stage1_ran = true;
    report.post_stage1 = measure(net)?;
    report.post_stage2 = report.post_stage1;
    if report.post_stage1 < gamma {
        return Ok((report, logs));
    }

    net.expand_column(j, expansion, &[i])?;
    unfreeze_pair(net, i, j)?;
    logs.stage2 = train(net, &[i, j], &data, cfg, "confusion:stage2", None)?;
    net.set_consolidation(Selector::All, FROZEN)?;
    report.stage2_ran = true;
    report.post_stage2 = measure(net)?;
    Ok((report, logs))
}

/// Releases the columns, heads and outgoing transfer groups of `forget`
/// (consolidation 0). Weight values are untouched.
pub fn graceful_forget(net: &mut LifelongNetwork, forget: &BTreeSet<TaskId>) -> Result<(), ProcError> {
    if forget.is_empty() {
        return Err(ProcError::Precondition("nothing to forget".into()));
    }
    for &t in forget {
        net.head(t)?;
    }
    for &t in forget {
        net.set_consolidation(Selector::Column(t), 0.0)?;
        net.set_consolidation(Selector::Head(t), 0.0)?;
        net.set_consolidation(Selector::TransferOutOf(t), 0.0)?;
    }
    Ok(())
}

/// Fine-tunes `old`'s head, optionally after linking `new`'s last hidden
/// layer into it. Only `old`'s head blocks are trainable. When `eval` is
/// given, an epoch-0 record is taken after linking and before tuning.
pub fn backward_transfer(
    net: &mut LifelongNetwork,
    old: TaskId,
    new: TaskId,
    old_data: &TaskDataset,
    cfg: &TrainConfig,
    with_links: bool,
    mut eval: Option<EvalHook<'_>>,
) -> Result<Vec<EpochRecord>, ProcError> {
    net.head(old)?;
    net.head(new)?;
    if new.0 <= old.0 {
        return Err(ProcError::Precondition(format!("need {new} after {old}")));
    }
    cfg.validate()?;
    if with_links {
        net.add_backward_links(new, old)?;
    }
    net.set_consolidation(Selector::All, FROZEN)?;
    net.set_consolidation(Selector::Head(old), 0.0)?;
    let phase = "backward";
    let mut records = Vec::with_capacity(cfg.epochs + 1);
    if let Some(hook) = eval.as_mut() {
        records.push(EpochRecord {
            epoch: 0,
            phase: phase.to_string(),
            loss: f64::NAN,
            per_task_auc: hook(net)?,
        });
    }
    records.extend(train(net, &[old], &TrainData::single(old_data), cfg, phase, eval)?);
    net.set_consolidation(Selector::All, FROZEN)?;
    Ok(records)
}

/// Unfreezes everything and trains all heads jointly on pooled data.
/// `datasets[k]` must belong to `TaskId(k)`.
pub fn refine_all(
    net: &mut LifelongNetwork,
    datasets: &[&TaskDataset],
    cfg: &TrainConfig,
    eval: Option<EvalHook<'_>>,
) -> Result<Vec<EpochRecord>, ProcError> {
    cfg.validate()?;
    if net.num_tasks() == 0 {
        return Err(ProcError::Precondition("no tasks learned".into()));
    }
    if datasets.len() != net.num_tasks() {
        return Err(ProcError::Precondition(format!(
            "data for {} of {} tasks",
            datasets.len(),
            net.num_tasks()
        )));
    }
    net.set_consolidation(Selector::All, 0.0)?;
    let active: Vec<TaskId> = (0..net.num_tasks()).map(TaskId).collect();
    train(net, &active, &TrainData::joint(datasets), cfg, "refine", eval)
}
