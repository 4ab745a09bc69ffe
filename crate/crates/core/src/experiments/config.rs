use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExpError;
use crate::data::{TaskSpec, SYNTH_ALPHABET};
use crate::lifenet::{ExpansionPolicy, TransferStrategy, HIDDEN_DEPTH};
use crate::procedures::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5, Self::E6];

    pub fn name(self) -> &'static str {
        match self {
            Self::E1 => "e1",
            Self::E2 => "e2",
            Self::E3 => "e3",
            Self::E4 => "e4",
            Self::E5 => "e5",
            Self::E6 => "e6",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| ExpError::config("experiment", format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Emnist,
    Synthetic,
}

impl FromStr for DataSource {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "emnist" => Ok(Self::Emnist),
            "synthetic" => Ok(Self::Synthetic),
            _ => Err(ExpError::config("data.source", format!("expected emnist or synthetic, got {s:?}"))),
        }
    }
}

fn default_synth_train() -> usize {
    300
}

fn default_synth_test() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory of the EMNIST files.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Synthetic glyphs per character in each split.
    #[serde(default = "default_synth_train")]
    pub synthetic_train: usize,
    #[serde(default = "default_synth_test")]
    pub synthetic_test: usize,
    #[serde(default)]
    pub synthetic_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Emnist,
            dir: None,
            synthetic_train: default_synth_train(),
            synthetic_test: default_synth_test(),
            synthetic_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden_layers: usize,
}

/// Everything one experiment run needs. Fields an experiment does not use
/// are carried but ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub data: DataConfig,
    pub sequence: Vec<TaskSpec>,
    pub architecture: Architecture,
    pub expansion: ExpansionPolicy,
    /// Strategy for single-strategy experiments (e1, e4, e5, e6).
    pub strategy: TransferStrategy,
    /// Strategies compared side by side (e2, e3).
    pub strategies: Vec<TransferStrategy>,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// e1: run with and/or without freezing.
    pub freeze: Vec<bool>,
    /// e3: characters tried as the task after `sequence`; empty means every
    /// mapped character outside the negative pool.
    pub sweep: Vec<char>,
    pub sweep_positives: usize,
    /// e4: confusion threshold.
    pub gamma: f64,
    /// e4: units per layer added by the second stage, one run per value.
    pub confusion_expansion: Vec<usize>,
    /// e4: sequence positions whose confusion is reduced right after they
    /// are learned.
    pub confusion_tasks: Vec<usize>,
    /// e5: the last task of `sequence` gets this many units per layer.
    pub reduced_units: usize,
    /// e5: sets of sequence positions released before the second half of
    /// training, one run per set.
    pub forget_sets: Vec<Vec<usize>>,
    /// e6: second tasks; backward links run from each into the first task.
    pub backward_pairs: Vec<TaskSpec>,
    /// e6: run with and/or without backward links.
    pub backward_links: Vec<bool>,
}

fn seq(chars: &str, positives: &[usize]) -> Vec<TaskSpec> {
    chars
        .chars()
        .zip(positives)
        .map(|(c, &n)| TaskSpec::new(c).with_positives(n))
        .collect()
}

impl ExperimentConfig {
    /// The protocol of experiment `id` with default data and seeds 0..15.
    pub fn preset(id: ExperimentId) -> Self {
        let full = [100; 6];
        let mut cfg = Self {
            experiment: id,
            data: DataConfig::default(),
            sequence: seq("0123OZ", &full),
            architecture: Architecture {
                hidden_layers: HIDDEN_DEPTH,
            },
            expansion: ExpansionPolicy::Constant(25),
            strategy: TransferStrategy::AllRandomInit,
            strategies: Vec::new(),
            train: TrainConfig::default(),
            seeds: (0..15).collect(),
            output_dir: PathBuf::from("results"),
            freeze: Vec::new(),
            sweep: Vec::new(),
            sweep_positives: 10,
            gamma: 0.1,
            confusion_expansion: Vec::new(),
            confusion_tasks: Vec::new(),
            reduced_units: 1,
            forget_sets: Vec::new(),
            backward_pairs: Vec::new(),
            backward_links: Vec::new(),
        };
        match id {
            ExperimentId::E1 => cfg.freeze = vec![true, false],
            ExperimentId::E2 => {
                cfg.sequence = seq("0123OZ", &[100, 100, 100, 100, 10, 10]);
                cfg.expansion = ExpansionPolicy::SimilarityScaled(25);
                cfg.strategies = vec![
                    TransferStrategy::AllRandomInit,
                    TransferStrategy::default(),
                    TransferStrategy::OneRandom,
                    TransferStrategy::OneWorst,
                ];
            }
            ExperimentId::E3 => {
                cfg.sequence = seq("0123", &full);
                cfg.expansion = ExpansionPolicy::SimilarityScaled(25);
                cfg.strategies = vec![TransferStrategy::OneAlways, TransferStrategy::AllRandomInit];
            }
            ExperimentId::E4 => {
                cfg.expansion = ExpansionPolicy::SimilarityScaled(25);
                cfg.strategy = TransferStrategy::default();
                cfg.confusion_expansion = vec![5, 10];
                cfg.confusion_tasks = vec![4, 5];
            }
            ExperimentId::E5 => {
                cfg.sequence = seq("0123", &full);
                cfg.forget_sets = vec![vec![0], vec![0, 1, 2]];
            }
            ExperimentId::E6 => {
                cfg.sequence = seq("0", &[10]);
                cfg.backward_pairs = seq("OZ", &[50, 50]);
                cfg.backward_links = vec![true, false];
            }
        }
        cfg
    }

    /// Parses a JSON config. Only `experiment` is required; every other
    /// top-level field falls back to the experiment's preset.
    pub fn from_json(text: &str) -> Result<Self, ExpError> {
        let user: Value = serde_json::from_str(text).map_err(|e| ExpError::config("<root>", e.to_string()))?;
        let Value::Object(fields) = user else {
            return Err(ExpError::config("<root>", "expected a JSON object"));
        };
        let id: ExperimentId = match fields.get("experiment") {
            Some(Value::String(s)) => s.parse()?,
            Some(_) => return Err(ExpError::config("experiment", "expected a string")),
            None => return Err(ExpError::config("experiment", "missing")),
        };
        let mut merged = serde_json::to_value(Self::preset(id)).expect("presets serialize");
        let slots = merged.as_object_mut().expect("config is an object");
        for (k, v) in fields {
            if !slots.contains_key(&k) {
                return Err(ExpError::config(&k, "unknown field"));
            }
            slots.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(merged).map_err(|e| ExpError::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExpError> {
        let err = |field: &str, msg: String| Err(ExpError::config(field, msg));
        if self.sequence.is_empty() {
            return err("sequence", "must not be empty".into());
        }
        for (k, spec) in self.sequence.iter().chain(&self.backward_pairs).enumerate() {
            if let Err(e) = spec.validate() {
                let field = if k < self.sequence.len() {
                    format!("sequence[{k}]")
                } else {
                    format!("backward_pairs[{}]", k - self.sequence.len())
                };
                return err(&field, e.to_string());
            }
        }
        if self.seeds.is_empty() {
            return err("seeds", "must not be empty".into());
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return err("seeds", "must be distinct".into());
        }
        if self.architecture.hidden_layers != HIDDEN_DEPTH {
            return err(
                "architecture.hidden_layers",
                format!("only {HIDDEN_DEPTH} hidden layers are supported"),
            );
        }
        if let Err(e) = self.train.validate() {
            return err("train", e.to_string());
        }
        if let TransferStrategy::OneSimilar { alpha } = self.strategy {
            if !(0.0..=1.0).contains(&alpha) {
                return err("strategy", format!("alpha {alpha} outside [0, 1]"));
            }
        }
        if self.data.source == DataSource::Synthetic && (self.data.synthetic_train == 0 || self.data.synthetic_test == 0) {
            return err("data", "synthetic split sizes must be positive".into());
        }
        let n = self.sequence.len();
        match self.experiment {
            ExperimentId::E1 if self.freeze.is_empty() => err("freeze", "must not be empty".into()),
            ExperimentId::E2 | ExperimentId::E3 if self.strategies.is_empty() => {
                err("strategies", "must not be empty".into())
            }
            ExperimentId::E3 if self.sweep_positives == 0 => err("sweep_positives", "must be positive".into()),
            ExperimentId::E4 => {
                if !(0.0..=1.0).contains(&self.gamma) {
                    return err("gamma", format!("{} outside [0, 1]", self.gamma));
                }
                if self.confusion_expansion.is_empty() {
                    return err("confusion_expansion", "must not be empty".into());
                }
                if let Some(&k) = self.confusion_tasks.iter().find(|&&k| k == 0 || k >= n) {
                    return err("confusion_tasks", format!("position {k} has no earlier task in a sequence of {n}"));
                }
                Ok(())
            }
            ExperimentId::E5 => {
                if n < 2 {
                    return err("sequence", "needs at least two tasks".into());
                }
                if self.forget_sets.is_empty() {
                    return err("forget_sets", "must not be empty".into());
                }
                for (k, set) in self.forget_sets.iter().enumerate() {
                    if set.is_empty() {
                        return err(&format!("forget_sets[{k}]"), "must not be empty".into());
                    }
                    if let Some(&t) = set.iter().find(|&&t| t >= n - 1) {
                        return err(&format!("forget_sets[{k}]"), format!("position {t} is not an earlier task"));
                    }
                }
                Ok(())
            }
            ExperimentId::E6 => {
                if self.backward_pairs.is_empty() {
                    return err("backward_pairs", "must not be empty".into());
                }
                if self.backward_links.is_empty() {
                    return err("backward_links", "must not be empty".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The e3 sweep, resolved against the characters a corpus maps.
    pub fn sweep_chars(&self, mapped: impl Iterator<Item = char>) -> Vec<char> {
        if !self.sweep.is_empty() {
            return self.sweep.clone();
        }
        let negatives: BTreeSet<char> = self
            .sequence
            .iter()
            .flat_map(|s| s.negative_chars.iter().copied())
            .collect();
        mapped.filter(|c| !negatives.contains(c)).collect()
    }

    /// Characters the synthetic corpus has to render.
    pub fn required_chars(&self) -> Vec<char> {
        let mut chars: BTreeSet<char> = BTreeSet::new();
        for s in self.sequence.iter().chain(&self.backward_pairs) {
            chars.insert(s.positive_char);
            chars.extend(s.negative_chars.iter().copied());
        }
        if self.experiment == ExperimentId::E3 {
            if self.sweep.is_empty() {
                chars.extend(SYNTH_ALPHABET.chars());
            } else {
                chars.extend(self.sweep.iter().copied());
            }
        }
        chars.into_iter().collect()
    }
}
