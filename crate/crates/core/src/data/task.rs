use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, DataError, LabeledImages};

pub const DEFAULT_NEGATIVES: [char; 4] = ['P', 'Q', 'R', 'S'];

fn default_negatives() -> Vec<char> {
    DEFAULT_NEGATIVES.to_vec()
}

fn default_count() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub positive_char: char,
    #[serde(default = "default_negatives")]
    pub negative_chars: Vec<char>,
    #[serde(default = "default_count")]
    pub n_pos_train: usize,
    #[serde(default = "default_count")]
    pub n_neg_train_per_char: usize,
}

impl TaskSpec {
    /// Positive `c` against the shared negative pool, 100 samples each.
    pub fn new(c: char) -> Self {
        Self {
            positive_char: c,
            negative_chars: default_negatives(),
            n_pos_train: default_count(),
            n_neg_train_per_char: default_count(),
        }
    }

    pub fn with_positives(mut self, n: usize) -> Self {
        self.n_pos_train = n;
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.negative_chars.contains(&self.positive_char) {
            return Err(DataError::Spec(format!(
                "positive {:?} is also a negative",
                self.positive_char
            )));
        }
        if self.negative_chars.is_empty() {
            return Err(DataError::Spec("no negative characters".into()));
        }
        if self.n_pos_train == 0 || self.n_neg_train_per_char == 0 {
            return Err(DataError::Spec("sample counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// One binary task. Inputs are flattened pixels in `[0, 1]`. The `*_idx`
/// vectors hold the source index of each sample within its split.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub spec: TaskSpec,
    pub seed: u64,
    pub train_pos: Vec<Vec<f64>>,
    pub train_neg: Vec<Vec<f64>>,
    pub test_pos: Vec<Vec<f64>>,
    pub test_neg: Vec<Vec<f64>>,
    pub train_pos_idx: Vec<usize>,
    pub train_neg_idx: Vec<usize>,
    pub test_pos_idx: Vec<usize>,
    pub test_neg_idx: Vec<usize>,
}

impl TaskDataset {
    /// Training inputs (positives first) with their binary labels.
    pub fn train_set(&self) -> (Vec<&[f64]>, Vec<f64>) {
        let xs = self
            .train_pos
            .iter()
            .chain(&self.train_neg)
            .map(Vec::as_slice)
            .collect();
        let ys = std::iter::repeat_n(1.0, self.train_pos.len())
            .chain(std::iter::repeat_n(0.0, self.train_neg.len()))
            .collect();
        (xs, ys)
    }
}

fn draw(
    split: &LabeledImages,
    class: u32,
    ch: char,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, DataError> {
    let pool = split.indices_of(class);
    if pool.len() < n {
        return Err(DataError::Insufficient {
            ch,
            split: "train",
            needed: n,
            available: pool.len(),
        });
    }
    Ok(sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect())
}

fn all_of(split: &LabeledImages, class: u32, ch: char) -> Result<Vec<usize>, DataError> {
    let idx = split.indices_of(class);
    if idx.is_empty() {
        return Err(DataError::Insufficient {
            ch,
            split: "test",
            needed: 1,
            available: 0,
        });
    }
    Ok(idx)
}

/// Samples a task's training set without replacement from the train split;
/// the test set is every test-split sample of the relevant characters.
pub fn build_task(corpus: &Corpus, spec: &TaskSpec, seed: u64) -> Result<TaskDataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_class = corpus.classes.class_of(spec.positive_char)?;
    let train_pos_idx = draw(&corpus.train, pos_class, spec.positive_char, spec.n_pos_train, &mut rng)?;
    let test_pos_idx = all_of(&corpus.test, pos_class, spec.positive_char)?;
    let mut train_neg_idx = Vec::new();
    let mut test_neg_idx = Vec::new();
    for &c in &spec.negative_chars {
        let class = corpus.classes.class_of(c)?;
        train_neg_idx.extend(draw(&corpus.train, class, c, spec.n_neg_train_per_char, &mut rng)?);
        test_neg_idx.extend(all_of(&corpus.test, class, c)?);
    }
    let load = |split: &LabeledImages, idx: &[usize]| idx.iter().map(|&i| split.input(i)).collect();
    Ok(TaskDataset {
        spec: spec.clone(),
        seed,
        train_pos: load(&corpus.train, &train_pos_idx),
        train_neg: load(&corpus.train, &train_neg_idx),
        test_pos: load(&corpus.test, &test_pos_idx),
        test_neg: load(&corpus.test, &test_neg_idx),
        train_pos_idx,
        train_neg_idx,
        test_pos_idx,
        test_neg_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_corpus;

    fn corpus() -> Corpus {
        synthetic_corpus(&['0', 'O', 'P', 'Q', 'R', 'S'], 120, 30, 5).unwrap()
    }

    #[test]
    fn counts_follow_spec() {
        let c = corpus();
        let t = build_task(&c, &TaskSpec::new('0'), 1).unwrap();
        assert_eq!(t.train_pos.len(), 100);
        assert_eq!(t.train_neg.len(), 400);
        assert_eq!(t.test_pos.len(), 30);
        assert_eq!(t.test_neg.len(), 120);
        let few = build_task(&c, &TaskSpec::new('O').with_positives(10), 1).unwrap();
        assert_eq!(few.train_pos.len(), 10);
    }

    #[test]
    fn deterministic_and_without_replacement() {
        let c = corpus();
        let a = build_task(&c, &TaskSpec::new('0'), 9).unwrap();
        let b = build_task(&c, &TaskSpec::new('0'), 9).unwrap();
        assert_eq!(a.train_pos_idx, b.train_pos_idx);
        assert_eq!(a.train_neg_idx, b.train_neg_idx);
        let mut idx = a.train_pos_idx.clone();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), a.train_pos_idx.len());
        let other = build_task(&c, &TaskSpec::new('0'), 10).unwrap();
        assert_ne!(a.train_pos_idx, other.train_pos_idx);
    }

    #[test]
    fn inputs_in_unit_range() {
        let t = build_task(&corpus(), &TaskSpec::new('O'), 2).unwrap();
        for x in t.train_pos.iter().chain(&t.test_neg) {
            assert_eq!(x.len(), 784);
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn shortfall_is_reported() {
        let c = corpus();
        match build_task(&c, &TaskSpec::new('0').with_positives(500), 1) {
            Err(DataError::Insufficient {
                ch,
                needed,
                available,
                ..
            }) => {
                assert_eq!((ch, needed, available), ('0', 500, 120));
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = TaskSpec::new('P');
        assert!(build_task(&c, &bad, 1).is_err());
        bad.positive_char = 'K';
        assert!(matches!(build_task(&c, &bad, 1), Err(DataError::UnknownChar('K'))));
    }
}
