//! Experiment harness: parameter sweeps over the synthetic environments,
//! multi-seed aggregation, CSV emission and pinned trend checks.
//!
//! Every `run_*` function is a pure function of its [`SweepPlan`]: runs are
//! spread over a thread pool but results are collected in plan order, so
//! re-running a plan produces byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::RegularizerSpec;

mod bias;
mod mixing;
mod plan;
mod room;
mod variance;
mod walk;

pub use bias::run_bias;
pub use mixing::run_mixing;
pub use plan::{BiasPlan, MixingPlan, RoomPlan, SweepPlan, VariancePlan, WalkPlan};
pub use room::run_room;
pub use variance::run_variance;
pub use walk::run_noisy_walk;

pub const CSV_HEADER: [&str; 10] = [
    "experiment", "seed", "step", "metric", "value", "beta", "lambda", "sigma2", "n_smooth", "method",
];

/// One CSV row. Parameters that do not apply to an experiment are left
/// empty; an empty `seed` marks an aggregate over seeds or runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub seed: Option<u64>,
    pub step: u64,
    pub metric: String,
    pub value: f64,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub sigma2: Option<f64>,
    pub n_smooth: Option<usize>,
    pub method: Option<String>,
}

impl ExperimentRecord {
    pub fn new(experiment: &str, seed: Option<u64>, step: u64, metric: impl Into<String>, value: f64) -> Self {
        ExperimentRecord {
            experiment: experiment.to_string(),
            seed,
            step,
            metric: metric.into(),
            value,
            beta: None,
            lambda: None,
            sigma2: None,
            n_smooth: None,
            method: None,
        }
    }

    /// Echoes the regularizer: method name, `beta`, and `lambda` when used.
    pub fn spec(mut self, spec: &RegularizerSpec) -> Self {
        self.method = Some(spec.kind.as_str().to_string());
        self.beta = Some(spec.effective_beta());
        self.lambda = Some(spec.effective_lambda());
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    pub fn n_smooth(mut self, n: usize) -> Self {
        self.n_smooth = Some(n);
        self
    }

    pub fn method(mut self, method: &str) -> Self {
        self.method = Some(method.to_string());
        self
    }
}

/// A pinned trend assertion and the statistics it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub experiment: String,
    pub passed: bool,
    pub description: String,
    pub measured: BTreeMap<String, f64>,
}

impl Check {
    pub fn new(name: &str, experiment: &str, passed: bool, description: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            experiment: experiment.to_string(),
            passed,
            description: description.into(),
            measured: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.measured.insert(key.into(), value);
        self
    }
}

/// Records destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub records: Vec<ExperimentRecord>,
}

/// Tables and checks produced by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
    pub plan: SweepPlan,
}

pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| with_path(e, path))?;
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| with_path(e, path))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn with_path(e: csv::Error, path: &Path) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Csv(e)
    }
}

/// Writes each table of `output` as `<dir>/<name>.csv` and returns the paths.
pub fn write_output(dir: &Path, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    output
        .tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", t.name));
            write_csv(&path, &t.records)?;
            Ok(path)
        })
        .collect()
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs the five experiments, writes six CSV files and `summary.json`.
pub fn run_all(plan: &SweepPlan, dir: &Path) -> Result<Summary> {
    plan.validate()?;
    let outputs = [
        run_mixing(plan)?,
        run_bias(plan)?,
        run_variance(plan)?,
        run_room(plan)?,
        run_noisy_walk(plan)?,
    ];
    let mut files = Vec::new();
    for out in &outputs {
        for path in write_output(dir, out)? {
            files.push(path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
        }
    }
    let summary = summarize(plan, outputs.iter(), files);
    write_summary(dir, &summary)?;
    Ok(summary)
}

pub fn summarize<'a>(
    plan: &SweepPlan,
    outputs: impl IntoIterator<Item = &'a ExperimentOutput>,
    files: Vec<String>,
) -> Summary {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for out in outputs {
        checks.extend(out.checks.iter().cloned());
        notes.extend(out.notes.iter().cloned());
    }
    Summary {
        seed: plan.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        notes,
        files,
        plan: plan.clone(),
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Least-squares slope of `ys` on `xs`.
pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
