//! Independent reference computations shared by the integration and
//! acceptance targets. Nothing here calls the library's forward pass, loss
//! or optimizer; the library is only used to build structures and read
//! their parameters.

#![allow(clippy::excessive_precision, clippy::needless_range_loop)]

#![allow(dead_code)]

use llnn::lifenet::{LifelongNetwork, TaskId, TransferDecision};
use llnn::nncore::{
    adam_step, consolidation_penalty, consolidation_penalty_grad, ActivationKind, AdamConfig, DenseGraph, Source,
    WeightBlock, FROZEN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_block(r: &mut ChaCha8Rng, rows: usize, inputs: usize, bias: bool) -> WeightBlock {
    let w: Vec<f64> = (0..rows * inputs).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..rows).map(|_| r.gen_range(-0.5..0.5)).collect();
    WeightBlock::from_parts(rows, inputs, &w, bias.then_some(&b[..])).unwrap()
}

/// A small DAG: two hidden nodes with a skip connection and two sigmoid
/// heads, one of them fed by both hidden nodes.
pub fn small_graph(seed: u64) -> (DenseGraph, Vec<usize>) {
    let mut r = rng(seed);
    let mut g = DenseGraph::new(3);
    let a = g.add_node(4, ActivationKind::ReLU);
    let b = g.add_node(3, ActivationKind::ReLU);
    let h0 = g.add_node(1, ActivationKind::Sigmoid);
    let h1 = g.add_node(1, ActivationKind::Sigmoid);
    g.add_edge(Source::Input, 0..3, a, 0..4, random_block(&mut r, 4, 3, true)).unwrap();
    g.add_edge(Source::Node(a), 0..4, b, 0..3, random_block(&mut r, 3, 4, true)).unwrap();
    g.add_edge(Source::Input, 1..3, b, 1..3, random_block(&mut r, 2, 2, false)).unwrap();
    g.add_edge(Source::Node(a), 0..4, h0, 0..1, random_block(&mut r, 1, 4, true)).unwrap();
    g.add_edge(Source::Node(b), 0..3, h1, 0..1, random_block(&mut r, 1, 3, true)).unwrap();
    g.add_edge(Source::Node(a), 2..4, h1, 0..1, random_block(&mut r, 1, 2, false)).unwrap();
    (g, vec![h0, h1])
}

/// Pre-activations of every node, by direct summation over the edge list.
/// Nodes are visited in creation order, which the test graphs keep
/// topological.
fn reference_preacts(g: &DenseGraph, x: &[f64]) -> Vec<Vec<f64>> {
    let n = g.nodes().len();
    let mut z: Vec<Vec<f64>> = g.nodes().iter().map(|nd| vec![0.0; nd.width]).collect();
    let mut a: Vec<Vec<f64>> = vec![Vec::new(); n];
    for node in 0..n {
        for e in g.edges().iter().filter(|e| e.dst == node && e.enabled) {
            let src: &[f64] = match e.src {
                Source::Input => x,
                Source::Node(s) => &a[s],
            };
            for (r, d) in e.dst_range.clone().enumerate() {
                let mut acc = e.block.bias(r).unwrap_or(0.0);
                for (i, s) in e.src_range.clone().enumerate() {
                    acc += e.block.weight(r, i) * src[s];
                }
                z[node][d] += acc;
            }
        }
        a[node] = z[node]
            .iter()
            .map(|&v| match g.nodes()[node].activation {
                ActivationKind::ReLU => v.max(0.0),
                ActivationKind::Sigmoid => 1.0 / (1.0 + (-v).exp()),
                ActivationKind::Identity => v,
            })
            .collect();
    }
    z
}

fn reference_loss(g: &DenseGraph, xs: &[Vec<f64>], ys: &[Vec<f64>], heads: &[usize]) -> f64 {
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let z = reference_preacts(g, x);
        for (&h, &t) in heads.iter().zip(y) {
            let p = 1.0 / (1.0 + (-z[h][0]).exp());
            total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
    }
    total / xs.len() as f64
}

/// Largest relative error between backprop and central differences
/// (h = 1e-4) over every parameter of [`small_graph`]. Relative errors use
/// `max(|a|, |n|, 1e-4)` as denominator so entries with vanishing gradients
/// are judged on absolute error.
pub fn backprop_fd_error(seed: u64) -> f64 {
    let (mut g, heads) = small_graph(seed);
    let mut r = rng(seed ^ 0xFD);
    // Inputs are redrawn until no ReLU pre-activation sits within 1e-2 of
    // its kink, where a finite difference is meaningless.
    let mut xs = Vec::new();
    while xs.len() < 6 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.5..1.5)).collect();
        let z = reference_preacts(&g, &x);
        let safe = (0..g.nodes().len())
            .filter(|&n| g.nodes()[n].activation == ActivationKind::ReLU)
            .all(|n| z[n].iter().all(|v| v.abs() > 1e-2));
        if safe {
            xs.push(x);
        }
    }
    let ys: Vec<Vec<f64>> = (0..xs.len())
        .map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64])
        .collect();
    let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (grads, _) = g.backprop(&inputs, &ys, &heads).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for e in 0..g.edges().len() {
        for k in 0..g.edge(e).block.len() {
            let orig = g.edge(e).block.values()[k];
            g.edge_mut(e).block.values_mut()[k] = orig + h;
            let up = reference_loss(&g, &xs, &ys, &heads);
            g.edge_mut(e).block.values_mut()[k] = orig - h;
            let down = reference_loss(&g, &xs, &ys, &heads);
            g.edge_mut(e).block.values_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.per_edge[e][k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

/// Largest relative error between the closed-form penalty gradient and
/// central differences of the penalty on a random block with mixed
/// consolidation values. Frozen entries must report a zero gradient.
pub fn penalty_fd_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut block = random_block(&mut r, 4, 5, true);
    for k in 0..block.len() {
        let b = match r.gen_range(0..4) {
            0 => 0.0,
            1 => FROZEN,
            _ => r.gen_range(0.1..10.0),
        };
        let target = r.gen_range(-1.0..1.0);
        block.set_entry_consolidation(k, b, target).unwrap();
    }
    let grad = consolidation_penalty_grad(&block);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for k in 0..block.len() {
        if block.is_frozen(k) {
            if grad[k] != 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let orig = block.values()[k];
        block.values_mut()[k] = orig + h;
        let up = consolidation_penalty(&block);
        block.values_mut()[k] = orig - h;
        let down = consolidation_penalty(&block);
        block.values_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = grad[k].abs().max(numeric.abs()).max(1e-4);
        worst = worst.max((grad[k] - numeric).abs() / denom);
    }
    worst
}

pub const ADAM_GRADS: [f64; 10] = [1.0, -0.5, 0.25, 2.0, -1.0, 0.0, 0.3, -0.7, 1.5, -0.2];

/// θ after each step from θ = 0.5 with the default config, computed in
/// 50-digit decimal arithmetic outside this code base. The second trace
/// adds a consolidation of 0.5 toward a target of 0.1.
pub const ADAM_TRACE_FREE: [f64; 10] = [
    4.99000000099999990e-1,
    4.98733663094033907e-1,
    4.98393233997311136e-1,
    4.97750342132107297e-1,
    4.97469178868523405e-1,
    4.97226852508211105e-1,
    4.96956587456818034e-1,
    4.96859444318742977e-1,
    4.96541686590667828e-1,
    4.96290765543424378e-1,
];
pub const ADAM_TRACE_ANCHORED: [f64; 10] = [
    4.99000000071428566e-1,
    4.98385252175175651e-1,
    4.97685820060290136e-1,
    4.96887034450151047e-1,
    4.96339419682310289e-1,
    4.95801346458256680e-1,
    4.95227381191001780e-1,
    4.94773780689974727e-1,
    4.94173255191558548e-1,
    4.93611801054610470e-1,
];

/// Largest absolute deviation of the library's scalar Adam trajectory from
/// both reference traces.
pub fn adam_trace_error() -> f64 {
    let cfg = AdamConfig::default();
    let mut worst: f64 = 0.0;
    for (b, target, trace) in [(0.0, 0.5, &ADAM_TRACE_FREE), (0.5, 0.1, &ADAM_TRACE_ANCHORED)] {
        let mut block = WeightBlock::from_parts(1, 1, &[0.5], None).unwrap();
        block.set_entry_consolidation(0, b, target).unwrap();
        for (g, want) in ADAM_GRADS.iter().zip(trace.iter()) {
            adam_step(&mut block, &[*g], &cfg).unwrap();
            worst = worst.max((block.values()[0] - want).abs());
        }
    }
    worst
}

/// Pairwise AUC by definition.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    credit += 1.0;
                } else if si == sj {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs
}

/// Number of random score sets (with heavy ties) on which the library AUC
/// differs from [`brute_auc`] at all.
pub fn auc_mismatches(trials: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let n = r.gen_range(2..60);
        let mut labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let levels = r.gen_range(1..8);
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..levels) as f64 / levels as f64).collect();
        if llnn::metrics::auc(&scores, &labels).unwrap() != brute_auc(&scores, &labels) {
            bad += 1;
        }
    }
    bad
}

/// Runs `steps` Adam updates with random gradients on a block whose
/// entries are frozen at random, and counts frozen entries whose value or
/// moments changed in any bit.
pub fn frozen_violations(steps: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut block = random_block(&mut r, 6, 7, true);
    // One free step first gives every entry nonzero moments, so "untouched"
    // is observable for the entries frozen afterwards.
    let n = block.len();
    adam_step(&mut block, &vec![0.3; n], &AdamConfig::default()).unwrap();
    for k in 0..n {
        let b = if r.gen_bool(0.4) { FROZEN } else { r.gen_range(0.0..2.0) };
        let t = block.values()[k];
        block.set_entry_consolidation(k, b, t).unwrap();
    }
    let frozen: Vec<usize> = (0..block.len()).filter(|&k| block.is_frozen(k)).collect();
    let snapshot = |b: &WeightBlock| -> Vec<(u64, u64, u64)> {
        frozen
            .iter()
            .map(|&k| (b.values()[k].to_bits(), b.moment1()[k].to_bits(), b.moment2()[k].to_bits()))
            .collect()
    };
    let before = snapshot(&block);
    let cfg = AdamConfig::default();
    for _ in 0..steps {
        let g: Vec<f64> = (0..block.len()).map(|_| r.gen_range(-5.0..5.0)).collect();
        adam_step(&mut block, &g, &cfg).unwrap();
    }
    let after = snapshot(&block);
    before.iter().zip(&after).filter(|(a, b)| a != b).count()
}

fn random_inputs(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| r.gen_range(0.0..1.0)).collect()).collect()
}

/// Maximum |head1 − head0| on random inputs right after adding a task that
/// copies head 0 with no hidden units of its own.
pub fn copy_fidelity_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut net = LifelongNetwork::new(20, seed).unwrap();
    net.add_task(6, &TransferDecision::default()).unwrap();
    // Move the head away from its initial state so the copy is not trivial.
    for &e in &net.head(TaskId(0)).unwrap().own_edges.clone() {
        for v in net.graph_mut().edge_mut(e).block.values_mut() {
            *v += r.gen_range(-0.3..0.3);
        }
    }
    let decision = TransferDecision {
        enabled_sources: Default::default(),
        copy_source: Some(TaskId(0)),
    };
    net.add_task(0, &decision).unwrap();
    random_inputs(&mut r, 50, 20)
        .iter()
        .map(|x| {
            let p = net.forward_all(x).unwrap();
            (p[1] - p[0]).abs()
        })
        .fold(0.0, f64::max)
}

/// Number of forward outputs (over random inputs) that change in any bit
/// when the stored weights of a disabled link group are overwritten.
pub fn disabled_link_changes(seed: u64) -> usize {
    let mut r = rng(seed);
    let mut net = LifelongNetwork::new(12, seed).unwrap();
    net.add_task(4, &TransferDecision::default()).unwrap();
    let decision = TransferDecision {
        enabled_sources: [TaskId(0)].into_iter().collect(),
        copy_source: None,
    };
    net.add_task(3, &decision).unwrap();
    let xs = random_inputs(&mut r, 30, 12);
    let mut changed = 0;
    for link in 0..net.links().len() {
        net.set_link_enabled(link, false).unwrap();
        let before: Vec<Vec<f64>> = xs.iter().map(|x| net.forward_all(x).unwrap()).collect();
        let edge = net.links()[link].edge;
        for v in net.graph_mut().edge_mut(edge).block.values_mut() {
            *v = r.gen_range(-100.0..100.0);
        }
        let after: Vec<Vec<f64>> = xs.iter().map(|x| net.forward_all(x).unwrap()).collect();
        for (a, b) in before.iter().flatten().zip(after.iter().flatten()) {
            if a.to_bits() != b.to_bits() {
                changed += 1;
            }
        }
        net.set_link_enabled(link, true).unwrap();
    }
    changed
}
