use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const CSV_HEADER: &str = "seed,phase,epoch,task,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Confusion,
    Loss,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Auc => "auc",
            Metric::Confusion => "confusion",
            Metric::Loss => "loss",
        })
    }
}

impl FromStr for Metric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auc" => Ok(Metric::Auc),
            "confusion" => Ok(Metric::Confusion),
            "loss" => Ok(Metric::Loss),
            _ => Err(MetricsError::Format(format!("unknown metric {s:?}"))),
        }
    }
}

/// One measurement. `task` is a display label: a character for per-task
/// metrics, `"a|b"` for pairwise confusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub seed: u64,
    pub phase: String,
    pub epoch: usize,
    pub task: String,
    pub metric: Metric,
    pub value: f64,
}

/// Measurements of one seed, in the order they were taken.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<Record>,
}

fn check_field(field: &str) -> Result<(), MetricsError> {
    if field.contains([',', '\n', '\r', '"']) {
        Err(MetricsError::Format(format!(
            "field {field:?} cannot be written unquoted"
        )))
    } else {
        Ok(())
    }
}

impl RunLog {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, phase: &str, epoch: usize, task: &str, metric: Metric, value: f64) {
        self.records.push(Record {
            seed: self.seed,
            phase: phase.to_string(),
            epoch,
            task: task.to_string(),
            metric,
            value,
        });
    }

    /// Value of the last record matching the key, if any.
    pub fn last(&self, phase: &str, task: &str, metric: Metric) -> Option<f64> {
        self.records
            .iter()
            .rev()
            .find(|r| r.phase == phase && r.task == task && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            check_field(&r.phase)?;
            check_field(&r.task)?;
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.seed, r.phase, r.epoch, r.task, r.metric, r.value
            )
            .expect("writing to a String cannot fail");
        }
        Ok(out)
    }

    pub fn parse_csv(text: &str) -> Result<Vec<Record>, MetricsError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(MetricsError::Format(format!(
                    "expected header {CSV_HEADER:?}, found {other:?}"
                )))
            }
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, line)| {
                let bad = |what: &str| MetricsError::Format(format!("line {}: bad {what}", i + 2));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 6 {
                    return Err(bad("field count"));
                }
                Ok(Record {
                    seed: f[0].parse().map_err(|_| bad("seed"))?,
                    phase: f[1].to_string(),
                    epoch: f[2].parse().map_err(|_| bad("epoch"))?,
                    task: f[3].to_string(),
                    metric: f[4].parse().map_err(|_| bad("metric"))?,
                    value: f[5].parse().map_err(|_| bad("value"))?,
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let text = self.to_csv()?;
        fs::write(path, text).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub phase: String,
    pub epoch: usize,
    pub task: String,
    pub metric: Metric,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    pub n_seeds: usize,
    pub series: Vec<SeriesPoint>,
}

impl Aggregate {
    /// Mean and sample standard deviation across seeds of every
    /// `(phase, epoch, task, metric)` key.
    ///
    /// Logs are sorted by seed first, so both the series order (first
    /// appearance) and the summation order are independent of the order the
    /// logs are supplied in.
    pub fn from_logs(experiment: &str, logs: &[RunLog]) -> Self {
        let mut sorted: Vec<&RunLog> = logs.iter().collect();
        sorted.sort_by_key(|l| l.seed);
        let mut keys: Vec<(String, usize, String, Metric)> = Vec::new();
        let mut values: HashMap<(String, usize, String, Metric), Vec<f64>> = HashMap::new();
        for log in &sorted {
            for r in &log.records {
                let key = (r.phase.clone(), r.epoch, r.task.clone(), r.metric);
                let slot = values.entry(key.clone()).or_insert_with(|| {
                    keys.push(key);
                    Vec::new()
                });
                slot.push(r.value);
            }
        }
        let series = keys
            .into_iter()
            .map(|key| {
                let v = &values[&key];
                let (mean, stddev) = mean_std(v);
                SeriesPoint {
                    phase: key.0,
                    epoch: key.1,
                    task: key.2,
                    metric: key.3,
                    mean,
                    stddev,
                }
            })
            .collect();
        Self {
            experiment: experiment.to_string(),
            n_seeds: sorted.len(),
            series,
        }
    }

    /// Seed-mean of the last point matching the key.
    pub fn mean(&self, phase: &str, task: &str, metric: Metric) -> Option<f64> {
        self.series
            .iter()
            .rev()
            .find(|p| p.phase == phase && p.task == task && p.metric == metric)
            .map(|p| p.mean)
    }

    pub fn mean_at(&self, phase: &str, epoch: usize, task: &str, metric: Metric) -> Option<f64> {
        self.series
            .iter()
            .find(|p| p.phase == phase && p.epoch == epoch && p.task == task && p.metric == metric)
            .map(|p| p.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregate is always serializable")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), MetricsError> {
        fs::write(path, self.to_json() + "\n").map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_is_header_only() {
        assert_eq!(RunLog::new(3).to_csv().unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_record_two_lines() {
        let mut log = RunLog::new(3);
        log.push("learn:0", 1, "0", Metric::Auc, 0.5);
        let csv = log.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap(), "3,learn:0,1,0,auc,0.500000");
        assert_eq!(csv, log.to_csv().unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let mut log = RunLog::new(11);
        log.push("a", 0, "O|0", Metric::Confusion, 0.125);
        log.push("b", 4, "Z", Metric::Loss, 1.5);
        let parsed = RunLog::parse_csv(&log.to_csv().unwrap()).unwrap();
        assert_eq!(parsed, log.records);
        assert!(RunLog::parse_csv("nope\n").is_err());
    }

    #[test]
    fn commas_rejected() {
        let mut log = RunLog::new(0);
        log.push("a,b", 0, "0", Metric::Auc, 0.5);
        assert!(log.to_csv().is_err());
    }

    #[test]
    fn aggregate_is_order_independent() {
        let mk = |seed, v| {
            let mut l = RunLog::new(seed);
            l.push("p", 1, "0", Metric::Auc, v);
            l
        };
        let logs = vec![mk(0, 0.1), mk(1, 0.7), mk(2, 0.4)];
        let rev: Vec<RunLog> = logs.iter().rev().cloned().collect();
        let a = Aggregate::from_logs("e1", &logs);
        let b = Aggregate::from_logs("e1", &rev);
        assert_eq!(a, b);
        assert_eq!(a.n_seeds, 3);
        assert!((a.series[0].mean - 0.4).abs() < 1e-12);
        assert!((a.series[0].stddev - 0.3).abs() < 1e-12);
        let json: Aggregate = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json, a);
    }
}
