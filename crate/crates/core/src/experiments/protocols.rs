use std::collections::{BTreeMap, BTreeSet};

use super::{ExpError, ExperimentConfig, ExperimentId};
use crate::data::{build_task, Corpus, TaskDataset, TaskSpec, PIXELS};
use crate::lifenet::{ExpansionPolicy, LifelongNetwork, TaskId, TransferStrategy};
use crate::metrics::{Metric, RunLog};
use crate::procedures::{
    backward_transfer, graceful_forget, learn_new_task, reduce_confusion, train, EpochRecord, EvalSet,
    Evaluator, LearnOutcome, ProcError, TrainConfig, TrainData,
};

/// Test-set head outputs of one task, taken when a later phase ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub variant: String,
    /// Sequence position of the task whose learning phase just ended.
    pub after: usize,
    pub task: TaskId,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub log: RunLog,
    /// Filled by e1 only.
    pub snapshots: Vec<Snapshot>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(splitmix(a) ^ b)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

const NET_STREAM: u64 = 0x006E_6574_776F_726B;

struct Session<'a> {
    cfg: &'a ExperimentConfig,
    corpus: &'a Corpus,
    seed: u64,
    log: RunLog,
    snapshots: Vec<Snapshot>,
}

impl Session<'_> {
    /// Task data for sequence slot `slot`. Samples depend on the seed and
    /// the slot, not on the variant.
    fn dataset(&self, spec: &TaskSpec, slot: usize) -> Result<TaskDataset, ExpError> {
        Ok(build_task(self.corpus, spec, mix(self.seed, slot as u64))?)
    }

    /// Training settings whose shuffle order depends on the seed and on
    /// `key`, so variants replay identical batches for the same phase.
    fn train_cfg(&self, key: &str) -> TrainConfig {
        let mut t = self.cfg.train.clone();
        t.shuffle_seed = mix(mix(self.cfg.train.shuffle_seed, self.seed), fnv1a(key));
        t
    }

    fn push(&mut self, phase: &str, epoch: usize, task: &str, metric: Metric, value: f64) {
        self.log.push(phase, epoch, task, metric, value);
    }
}

/// One network with its evaluator and the data of every task it learned.
#[derive(Clone)]
struct Track {
    prefix: String,
    net: LifelongNetwork,
    eval: Evaluator,
    data: Vec<TaskDataset>,
}

impl Track {
    fn new(sess: &Session<'_>, variant: &str, tagged: bool) -> Result<Self, ExpError> {
        Ok(Self {
            prefix: if tagged { format!("{variant}/") } else { String::new() },
            net: LifelongNetwork::new(PIXELS, mix(sess.seed, NET_STREAM))?,
            eval: Evaluator::new(EvalSet::new()),
            data: Vec::new(),
        })
    }

    fn phase(&self, p: &str) -> String {
        format!("{}{p}", self.prefix)
    }

    fn log_records(&self, sess: &mut Session<'_>, phase: &str, records: &[EpochRecord], offset: usize, loss_task: &str) {
        let phase = self.phase(phase);
        for r in records {
            for (t, &auc) in &r.per_task_auc {
                sess.push(&phase, r.epoch + offset, &t.to_string(), Metric::Auc, auc);
            }
            if r.loss.is_finite() {
                sess.push(&phase, r.epoch + offset, loss_task, Metric::Loss, r.loss);
            }
        }
    }

    fn log_aucs(&mut self, sess: &mut Session<'_>, phase: &str, epoch: usize) -> Result<(), ExpError> {
        let aucs = self.eval.all_aucs(&self.net)?;
        let phase = self.phase(phase);
        for (t, auc) in aucs {
            sess.push(&phase, epoch, &t.to_string(), Metric::Auc, auc);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn learn(
        &mut self,
        sess: &mut Session<'_>,
        ds: TaskDataset,
        strategy: TransferStrategy,
        policy: ExpansionPolicy,
        freeze: bool,
        phase: Option<&str>,
    ) -> Result<LearnOutcome, ExpError> {
        let k = self.data.len();
        let default_phase = format!("learn:T{k}");
        let phase = phase.unwrap_or(&default_phase);
        self.eval.set_mut().add_task(&ds);
        let tcfg = sess.train_cfg(phase);
        let Track { net, eval, .. } = self;
        let mut hook = |n: &LifelongNetwork| eval.all_aucs(n);
        let out = learn_new_task(net, &ds, strategy, policy, &tcfg, freeze, phase, Some(&mut hook))?;
        self.log_records(sess, phase, &out.records, 0, &out.task.to_string());
        self.data.push(ds);
        Ok(out)
    }

    fn learn_sequence(
        &mut self,
        sess: &mut Session<'_>,
        specs: &[TaskSpec],
        strategy: TransferStrategy,
        policy: ExpansionPolicy,
        freeze: bool,
    ) -> Result<(), ExpError> {
        for spec in specs {
            let ds = sess.dataset(spec, self.data.len())?;
            self.learn(sess, ds, strategy, policy, freeze, None)?;
        }
        Ok(())
    }
}

/// Runs one seed of `cfg`'s experiment.
pub fn run_seed(cfg: &ExperimentConfig, corpus: &Corpus, seed: u64) -> Result<SeedOutcome, ExpError> {
    let mut sess = Session {
        cfg,
        corpus,
        seed,
        log: RunLog::new(seed),
        snapshots: Vec::new(),
    };
    match cfg.experiment {
        ExperimentId::E1 => e1(&mut sess)?,
        ExperimentId::E2 => e2(&mut sess)?,
        ExperimentId::E3 => e3(&mut sess)?,
        ExperimentId::E4 => e4(&mut sess)?,
        ExperimentId::E5 => e5(&mut sess)?,
        ExperimentId::E6 => e6(&mut sess)?,
    }
    Ok(SeedOutcome {
        log: sess.log,
        snapshots: sess.snapshots,
    })
}

fn e1(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    for &freeze in &cfg.freeze {
        let variant = if freeze { "freeze" } else { "nofreeze" };
        let mut tr = Track::new(sess, variant, cfg.freeze.len() > 1)?;
        for (k, spec) in cfg.sequence.iter().enumerate() {
            let ds = sess.dataset(spec, k)?;
            tr.learn(sess, ds, cfg.strategy, cfg.expansion, freeze, None)?;
            for t in 0..=k {
                let scores = tr.eval.task_scores(&tr.net, TaskId(t))?;
                sess.snapshots.push(Snapshot {
                    variant: variant.to_string(),
                    after: k,
                    task: TaskId(t),
                    scores,
                });
            }
        }
    }
    Ok(())
}

fn e2(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    for strategy in &cfg.strategies {
        let mut tr = Track::new(sess, &strategy.to_string(), cfg.strategies.len() > 1)?;
        tr.learn_sequence(sess, &cfg.sequence, *strategy, cfg.expansion, true)?;
    }
    Ok(())
}

fn e3(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    let sweep = cfg.sweep_chars(sess.corpus.classes.chars());
    let negatives = &cfg.sequence[0].negative_chars;
    let per_negative = cfg.sequence[0].n_neg_train_per_char;
    let slot = cfg.sequence.len();
    let mut finals: BTreeMap<char, Vec<f64>> = BTreeMap::new();
    for strategy in &cfg.strategies {
        let mut prefix = Track::new(sess, &strategy.to_string(), true)?;
        prefix.learn_sequence(sess, &cfg.sequence, *strategy, cfg.expansion, true)?;
        for &c in &sweep {
            let mut spec = TaskSpec::new(c).with_positives(cfg.sweep_positives);
            spec.negative_chars = negatives.clone();
            spec.n_neg_train_per_char = per_negative;
            let ds = sess.dataset(&spec, slot)?;
            let mut tr = prefix.clone();
            let out = tr.learn(sess, ds, *strategy, cfg.expansion, true, Some(&format!("sweep:{c}")))?;
            let last = out.records.last().and_then(|r| r.per_task_auc.get(&out.task).copied());
            finals.entry(c).or_default().push(last.unwrap_or(f64::NAN));
        }
    }
    if cfg.strategies.len() >= 2 {
        for (c, v) in finals {
            sess.push("delta", 0, &c.to_string(), Metric::Auc, v[0] - v[1]);
        }
    }
    Ok(())
}

fn e4(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    let epochs = cfg.train.epochs;
    let targets: BTreeSet<usize> = cfg.confusion_tasks.iter().copied().collect();
    for &extra in &cfg.confusion_expansion {
        let mut tr = Track::new(sess, &format!("expand:{extra}"), cfg.confusion_expansion.len() > 1)?;
        for (k, spec) in cfg.sequence.iter().enumerate() {
            let ds = sess.dataset(spec, k)?;
            tr.learn(sess, ds, cfg.strategy, cfg.expansion, true, None)?;
            if !targets.contains(&k) {
                continue;
            }
            let j = TaskId(k);
            // Reduce against the earlier task that j is most confused with.
            let mut i = TaskId(0);
            let mut worst = f64::NEG_INFINITY;
            for p in 0..k {
                let c = tr.eval.confusion(&tr.net, TaskId(p), j)?;
                if c > worst {
                    worst = c;
                    i = TaskId(p);
                }
            }
            let tcfg = sess.train_cfg(&format!("confusion:{j}"));
            let Track { net, eval, data, .. } = &mut tr;
            let mut seen: Vec<(f64, BTreeMap<TaskId, f64>)> = Vec::new();
            let (report, logs) = reduce_confusion(net, i, j, cfg.gamma, extra, &data[i.0], &data[j.0], &tcfg, |n| {
                let c = eval.confusion(n, i, j)?;
                seen.push((c, eval.all_aucs(n)?));
                Ok::<_, ProcError>(c)
            })?;
            let label = j.to_string();
            let pair = format!("{i}+{j}");
            let stages = [
                ("initial", report.initial, epochs, true),
                ("stage1", report.post_stage1, 2 * epochs, report.stage1_ran),
                ("stage2", report.post_stage2, 3 * epochs, report.stage2_ran),
            ];
            let mut measured = seen.iter();
            let mut aucs = None;
            for (name, value, epoch, ran) in stages {
                let phase = tr.phase(&format!("confusion:{j}:{name}"));
                sess.push(&phase, epoch, &label, Metric::Confusion, value);
                if ran {
                    aucs = measured.next().map(|(_, a)| a.clone());
                }
                for (t, auc) in aucs.iter().flatten() {
                    sess.push(&phase, epoch, &t.to_string(), Metric::Auc, *auc);
                }
            }
            tr.log_records(sess, &format!("confusion:{j}:stage1"), &logs.stage1, epochs, &pair);
            tr.log_records(sess, &format!("confusion:{j}:stage2"), &logs.stage2, 2 * epochs, &pair);
        }
    }
    Ok(())
}

fn e5(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    let (head, last) = cfg.sequence.split_at(cfg.sequence.len() - 1);
    for set in &cfg.forget_sets {
        let names: Vec<String> = set.iter().map(|t| t.to_string()).collect();
        let mut tr = Track::new(sess, &format!("forget:{}", names.join("+")), cfg.forget_sets.len() > 1)?;
        tr.learn_sequence(sess, head, cfg.strategy, cfg.expansion, true)?;
        let ds = sess.dataset(&last[0], head.len())?;
        let out = tr.learn(
            sess,
            ds,
            cfg.strategy,
            ExpansionPolicy::Constant(cfg.reduced_units),
            true,
            Some("pre-forget"),
        )?;
        let forget: BTreeSet<TaskId> = set.iter().map(|&t| TaskId(t)).collect();
        graceful_forget(&mut tr.net, &forget)?;
        let tcfg = sess.train_cfg("post-forget");
        let Track { net, eval, data, .. } = &mut tr;
        let mut hook = |n: &LifelongNetwork| eval.all_aucs(n);
        let data = TrainData::single(&data[out.task.0]);
        let records = train(net, &[out.task], &data, &tcfg, "post-forget", Some(&mut hook))?;
        tr.log_records(sess, "post-forget", &records, cfg.train.epochs, &out.task.to_string());
    }
    Ok(())
}

fn e6(sess: &mut Session<'_>) -> Result<(), ExpError> {
    let cfg = sess.cfg;
    let tagged = cfg.backward_pairs.len() * cfg.backward_links.len() > 1;
    for second in &cfg.backward_pairs {
        for &links in &cfg.backward_links {
            let kind = if links { "links" } else { "nolinks" };
            let mut tr = Track::new(sess, &format!("{}:{kind}", second.positive_char), tagged)?;
            tr.learn_sequence(sess, &cfg.sequence, cfg.strategy, cfg.expansion, true)?;
            let ds = sess.dataset(second, cfg.sequence.len())?;
            let new = tr.learn(sess, ds, cfg.strategy, cfg.expansion, true, None)?.task;
            let old = TaskId(0);
            tr.log_aucs(sess, "pre-link", 0)?;
            let tcfg = sess.train_cfg("backward");
            let Track { net, eval, data, .. } = &mut tr;
            let mut hook = |n: &LifelongNetwork| eval.all_aucs(n);
            let records = backward_transfer(net, old, new, &data[0], &tcfg, links, Some(&mut hook))?;
            tr.log_records(sess, "backward", &records, 0, &old.to_string());
        }
    }
    Ok(())
}
