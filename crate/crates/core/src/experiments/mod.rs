//! Seeded experiment runs and their on-disk outputs.

mod config;
mod protocols;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{load_emnist_dir, synthetic_corpus, Corpus, DataError};
use crate::metrics::{Aggregate, MetricsError, RunLog};
use crate::procedures::ProcError;

pub use config::{Architecture, DataConfig, DataSource, ExperimentConfig, ExperimentId};
pub use protocols::{run_seed, SeedOutcome, Snapshot};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Proc(#[from] ProcError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl ExpError {
    pub fn config(field: &str, msg: impl Into<String>) -> Self {
        ExpError::Config {
            field: field.to_string(),
            msg: msg.into(),
        }
    }
}

impl From<crate::lifenet::NetError> for ExpError {
    fn from(e: crate::lifenet::NetError) -> Self {
        ExpError::Proc(e.into())
    }
}

/// Loads the corpus a config asks for.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus, ExpError> {
    match cfg.data.source {
        DataSource::Emnist => {
            let dir = cfg
                .data
                .dir
                .as_ref()
                .ok_or_else(|| ExpError::config("data.dir", "required for EMNIST data"))?;
            Ok(load_emnist_dir(dir)?)
        }
        DataSource::Synthetic => Ok(synthetic_corpus(
            &cfg.required_chars(),
            cfg.data.synthetic_train,
            cfg.data.synthetic_test,
            cfg.data.synthetic_seed,
        )?),
    }
}

/// Per-seed outcomes in seed order, plus their aggregate.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcomes: Vec<SeedOutcome>,
    pub aggregate: Aggregate,
}

impl RunSummary {
    pub fn logs(&self) -> Vec<RunLog> {
        self.outcomes.iter().map(|o| o.log.clone()).collect()
    }
}

/// Runs every seed of `cfg` on `corpus`, at most `jobs` at a time.
pub fn run_on(cfg: &ExperimentConfig, corpus: &Corpus, jobs: usize) -> Result<RunSummary, ExpError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExpError::Pool(e.to_string()))?;
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| run_seed(cfg, corpus, s))
            .collect::<Result<_, _>>()
    })?;
    let logs: Vec<RunLog> = outcomes.iter().map(|o| o.log.clone()).collect();
    let aggregate = Aggregate::from_logs(cfg.experiment.name(), &logs);
    Ok(RunSummary { outcomes, aggregate })
}

/// Where [`run`] writes: `<output_dir>/<experiment>/`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(cfg.experiment.name())
}

fn create_dir(dir: &Path) -> Result<(), ExpError> {
    fs::create_dir_all(dir).map_err(|source| ExpError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Loads data, runs all seeds and writes `seed_<k>.csv`, `aggregate.json`
/// and the resolved `config.json`.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<RunSummary, ExpError> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let summary = run_on(cfg, &corpus, jobs)?;
    let dir = output_dir(cfg);
    create_dir(&dir)?;
    for o in &summary.outcomes {
        o.log.write_csv(&dir.join(format!("seed_{}.csv", o.log.seed)))?;
    }
    summary.aggregate.write_json(&dir.join("aggregate.json"))?;
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json() + "\n").map_err(|source| ExpError::Io { path, source })?;
    Ok(summary)
}
