//! Small Gaussian-blob tasks for fast procedure tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{TaskDataset, TaskSpec};
use crate::lifenet::{ExpansionPolicy, LifelongNetwork, TaskId, TransferStrategy};

use super::{learn_new_task, TrainConfig};

pub const DIM: usize = 6;
const NEG_CENTER: usize = DIM - 1;

fn blob(center: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..DIM)
                .map(|d| if d == center { 1.0 } else { 0.0 } + rng.gen_range(-0.35..0.35))
                .collect()
        })
        .collect()
}

/// Task `k` separates blob `k` from a negative blob shared by all tasks
/// (same vectors and indices for equal `seed`).
pub fn task(k: usize, seed: u64) -> TaskDataset {
    assert!(k < NEG_CENTER);
    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64 + 1) * 7919));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(seed);
    let train_neg = blob(NEG_CENTER, 40, &mut neg_rng);
    let test_neg = blob(NEG_CENTER, 20, &mut neg_rng);
    TaskDataset {
        spec: TaskSpec {
            positive_char: char::from(b'a' + k as u8),
            negative_chars: vec!['z'],
            n_pos_train: 20,
            n_neg_train_per_char: 40,
        },
        seed,
        train_pos: blob(k, 20, &mut pos_rng),
        test_pos: blob(k, 10, &mut pos_rng),
        train_neg,
        test_neg,
        train_pos_idx: (0..20).collect(),
        train_neg_idx: (1000..1040).collect(),
        test_pos_idx: (0..10).collect(),
        test_neg_idx: (1000..1020).collect(),
    }
}

pub fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        epochs,
        shuffle_seed: 5,
        ..TrainConfig::default()
    }
}

/// A network that has learned tasks `0..n` with freezing and all links.
pub fn learned(n: usize, seed: u64) -> (LifelongNetwork, Vec<TaskDataset>) {
    let mut net = LifelongNetwork::new(DIM, seed).unwrap();
    let data: Vec<TaskDataset> = (0..n).map(|k| task(k, seed)).collect();
    for ds in &data {
        learn_new_task(
            &mut net,
            ds,
            TransferStrategy::AllRandomInit,
            ExpansionPolicy::Constant(4),
            &cfg(3),
            true,
            "learn",
            None,
        )
        .unwrap();
    }
    (net, data)
}

pub fn outputs(net: &LifelongNetwork, t: TaskId, data: &[TaskDataset]) -> Vec<u64> {
    let xs: Vec<Vec<f64>> = data.iter().flat_map(|d| d.test_pos.iter().chain(&d.test_neg).cloned()).collect();
    net.head_outputs(t, &xs).unwrap().iter().map(|p| p.to_bits()).collect()
}
