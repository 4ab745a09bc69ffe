use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use llnn::data::{synthetic_corpus, write_emnist_dir, TaskSpec, SYNTH_ALPHABET};
use llnn::experiments::{load_corpus, run, DataSource, ExperimentConfig, ExperimentId};
use llnn::lifenet::TransferStrategy;

#[derive(Parser)]
#[command(name = "llnn", version, about = "Lifelong learning experiments on EMNIST or synthetic glyphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sequence 0,1,2,3,O,Z with and without freezing.
    #[command(name = "e1-nonforgetting")]
    E1(RunArgs),
    /// Forward-transfer strategies with two 10-shot tasks.
    #[command(name = "e2-forward")]
    E2(RunArgs),
    /// Always copying a head, swept over the fifth task's character.
    #[command(name = "e3-onealways-sweep")]
    E3(RunArgs),
    /// Two-stage confusion reduction for O and Z.
    #[command(name = "e4-confusion")]
    E4(RunArgs),
    /// Learning a one-unit task before and after releasing earlier tasks.
    #[command(name = "e5-graceful")]
    E5(RunArgs),
    /// Fine-tuning a 10-shot "0" with backward links from O or Z.
    #[command(name = "e6-backward")]
    E6(RunArgs),
    /// Loads a dataset and reports per-character sample counts.
    #[command(name = "data-validate")]
    DataValidate(DataArgs),
    /// Writes a synthetic corpus in the EMNIST balanced file layout.
    #[command(name = "synth-gen")]
    SynthGen(SynthArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset: emnist or synthetic.
    #[arg(long = "data", value_name = "SOURCE")]
    source: Option<DataSource>,
    /// Directory with the EMNIST balanced files.
    #[arg(long, env = "LLNN_DATA_DIR", value_name = "PATH")]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; only `experiment` is required, the rest defaults to
    /// the experiment's preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Output root; files go to <out>/<experiment>/.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run seeds 0..N.
    #[arg(long, value_name = "N", conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Run exactly these seeds.
    #[arg(long, value_name = "A,B,..", value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Seeds run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Training epochs per phase.
    #[arg(long)]
    epochs: Option<usize>,
    /// e4: confusion threshold.
    #[arg(long)]
    gamma: Option<f64>,
    /// e4: second-stage units per layer, one run per value.
    #[arg(long, value_name = "N,..", value_delimiter = ',')]
    confusion_expansion: Option<Vec<usize>>,
    /// e5: sequence positions to forget, e.g. 0 or 0,1,2.
    #[arg(long, value_name = "T,..", value_delimiter = ',')]
    forget: Option<Vec<usize>>,
    /// e6: the second task's character.
    #[arg(long, value_name = "CHAR")]
    second: Option<char>,
    /// Transfer strategy: all-random-init, one-similar[:alpha], one-random,
    /// one-worst or one-always. In e2 it replaces the compared set; in e3 it
    /// replaces the strategy compared against all-random-init.
    #[arg(long)]
    strategy: Option<TransferStrategy>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the IDX and mapping files.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Characters to render.
    #[arg(long, default_value = SYNTH_ALPHABET)]
    chars: String,
    #[arg(long, default_value_t = 300)]
    train: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn experiment_config(id: ExperimentId, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            if cfg.experiment != id {
                bail!("{} configures {}, not {id}", path.display(), cfg.experiment);
            }
            cfg
        }
        None => ExperimentConfig::preset(id),
    };
    if let Some(s) = a.data.source {
        cfg.data.source = s;
    }
    if let Some(d) = &a.data.data_dir {
        cfg.data.dir = Some(d.clone());
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = a.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(list) = &a.seed_list {
        cfg.seeds = list.clone();
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(c) = &a.confusion_expansion {
        cfg.confusion_expansion = c.clone();
    }
    if let Some(f) = &a.forget {
        let set: BTreeSet<usize> = f.iter().copied().collect();
        cfg.forget_sets = vec![set.into_iter().collect()];
    }
    if let Some(c) = a.second {
        let positives = cfg.backward_pairs.first().map_or(50, |s| s.n_pos_train);
        cfg.backward_pairs = vec![TaskSpec::new(c).with_positives(positives)];
    }
    if let Some(s) = a.strategy {
        match id {
            ExperimentId::E2 => cfg.strategies = vec![s],
            ExperimentId::E3 => match cfg.strategies.first_mut() {
                Some(first) => *first = s,
                None => cfg.strategies = vec![s],
            },
            _ => cfg.strategy = s,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(id: ExperimentId, a: &RunArgs) -> Result<()> {
    let cfg = experiment_config(id, a)?;
    let summary = run(&cfg, a.jobs)?;
    let dir = llnn::experiments::output_dir(&cfg);
    println!(
        "{id}: {} seeds, {} series -> {}",
        summary.outcomes.len(),
        summary.aggregate.series.len(),
        dir.display()
    );
    Ok(())
}

fn data_validate(a: &DataArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentId::E3);
    cfg.data.source = a.source.unwrap_or(DataSource::Emnist);
    cfg.data.dir = a.data_dir.clone();
    let corpus = load_corpus(&cfg)?;
    println!(
        "{} train and {} test images, {} classes",
        corpus.train.len(),
        corpus.test.len(),
        corpus.classes.chars().count()
    );
    let mut thin = Vec::new();
    for c in corpus.classes.chars() {
        let class = corpus.classes.class_of(c)?;
        let (tr, te) = (corpus.train.indices_of(class).len(), corpus.test.indices_of(class).len());
        println!("{c}\t{tr}\t{te}");
        if tr == 0 || te == 0 {
            thin.push(c);
        }
    }
    let needed: Vec<char> = ExperimentId::ALL
        .iter()
        .flat_map(|&id| {
            let p = ExperimentConfig::preset(id);
            p.sequence
                .iter()
                .chain(&p.backward_pairs)
                .flat_map(|s| std::iter::once(s.positive_char).chain(s.negative_chars.clone()))
                .collect::<Vec<_>>()
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let missing = corpus.classes.missing(&needed);
    if !missing.is_empty() {
        bail!("experiment characters missing from the mapping: {missing:?}");
    }
    if !thin.is_empty() {
        bail!("characters without train or test samples: {thin:?}");
    }
    Ok(())
}

fn synth_gen(a: &SynthArgs) -> Result<()> {
    let chars: Vec<char> = a.chars.chars().collect();
    let corpus = synthetic_corpus(&chars, a.train, a.test, a.seed)?;
    let files = write_emnist_dir(&corpus, &a.out)?;
    println!(
        "{} train and {} test images of {} characters -> {}",
        corpus.train.len(),
        corpus.test.len(),
        chars.len(),
        files.mapping.parent().unwrap_or(&a.out).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::E1(a) => run_experiment(ExperimentId::E1, a),
        Cmd::E2(a) => run_experiment(ExperimentId::E2, a),
        Cmd::E3(a) => run_experiment(ExperimentId::E3, a),
        Cmd::E4(a) => run_experiment(ExperimentId::E4, a),
        Cmd::E5(a) => run_experiment(ExperimentId::E5, a),
        Cmd::E6(a) => run_experiment(ExperimentId::E6, a),
        Cmd::DataValidate(a) => data_validate(a),
        Cmd::SynthGen(a) => synth_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
