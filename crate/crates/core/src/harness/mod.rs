//! Experiment orchestration and on-disk artifacts.
//!
//! `run_experiment` writes, for every (architecture, seed) pair of a
//! config, into `<output root>/<name>/`:
//!
//! | file                        | contents                                           |
//! |-----------------------------|----------------------------------------------------|
//! | `trace_<run>.csv`           | `iter,l2_error,h2_error,zygmund_error,seconds`     |
//! | `loss_<run>.csv`            | `iter,loss` minibatch loss per iteration           |
//! | `checkpoint_<run>.json`     | final parameters, see [`Checkpoint`]               |
//! | `error_field_<run>.csv`     | `x,y,value` with `value = |F - f|`                 |
//! | `summary_<run>.json`        | final metrics and localization ratio               |
//!
//! plus `config.json` (the resolved config) and `summary.json` (all runs and
//! per-architecture medians). `<run>` is e.g. `mmlp64_seed0`.

pub mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ArchField, ConfigError, ExperimentConfig, MetricsConfig, RunSpec};

use crate::fdgrid::GridError;
use crate::metrics::{localization_ratio, ErrorField, ErrorMetrics, Localization, MetricError, MetricEvaluator};
use crate::network::NetworkError;
use crate::training::{train, TrainError, TrainingTrace};
use crate::{Activation, Architecture, Grid2D, Network, ParamVector};

/// Environment variable overriding the config's `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "MMLP_LAB_OUTPUT_ROOT";

pub const CHECKPOINT_FORMAT: &str = "mmlp-lab/checkpoint-v1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("checkpoint {path}: unsupported format `{found}`")]
    Format { path: String, found: String },
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: String, source: NetworkError },
    #[error("stale config: checkpoint digest {stored} does not match config digest {actual}")]
    StaleConfig { stored: String, actual: String },
    #[error("training failed for {run}: {source}")]
    Train { run: String, source: TrainError },
    #[error("{0} run(s) diverged; partial artifacts are flagged in summary.json")]
    Diverged(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl HarnessError {
    /// Short machine-readable category for CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Json { .. } => "json",
            Self::Csv { .. } => "csv",
            Self::Format { .. } | Self::Checkpoint { .. } => "checkpoint",
            Self::StaleConfig { .. } => "stale_config",
            Self::Train { .. } => "train",
            Self::Diverged(_) => "diverged",
            Self::Grid(_) => "grid",
            Self::Metric(_) => "metric",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| HarnessError::Json {
        path: path.display().to_string(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|source| HarnessError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Final (or intermediate) network state with enough context to recompute
/// every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub arch: Architecture,
    pub activation: Activation,
    pub iteration: usize,
    pub seed: u64,
    pub config_digest: String,
    pub config: serde_json::Value,
    pub params: ParamVector,
}

impl Checkpoint {
    pub fn new(cfg: &ExperimentConfig, net: &Network, iteration: usize, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            arch: net.architecture(),
            activation: net.activation(),
            iteration,
            seed,
            config_digest: cfg.digest(),
            config: cfg.to_json_value(),
            params: net.params().clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        write_json(path, self)
    }

    /// Loads and validates a checkpoint: format tag, parameter length, and
    /// that the embedded config still hashes to the stored digest.
    pub fn load(path: &Path) -> Result<(Self, ExperimentConfig, Network), HarnessError> {
        let ckpt: Self = read_json(path)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(HarnessError::Format {
                path: path.display().to_string(),
                found: ckpt.format,
            });
        }
        let net = Network::new(ckpt.arch, ckpt.activation, ckpt.params.clone()).map_err(|source| {
            HarnessError::Checkpoint {
                path: path.display().to_string(),
                source,
            }
        })?;
        let cfg = ExperimentConfig::from_value(ckpt.config.clone())?;
        let actual = cfg.digest();
        if actual != ckpt.config_digest {
            return Err(HarnessError::StaleConfig {
                stored: ckpt.config_digest,
                actual,
            });
        }
        Ok((ckpt, cfg, net))
    }
}

/// Final-state metrics of one trained network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub grid_h: f64,
    #[serde(flatten)]
    pub metrics: ErrorMetrics,
    /// Over the target's singular region.
    pub localization: Localization,
}

fn evaluate_network(
    cfg: &ExperimentConfig,
    evaluator: &MetricEvaluator,
    net: &Network,
) -> Result<(EvalSummary, ErrorField), HarnessError> {
    let field = evaluator.error_field(net);
    let target = cfg.target;
    let localization = localization_ratio(&field, |p| target.in_singular_region(p))?;
    let summary = EvalSummary {
        grid_h: evaluator.grid().spacing(),
        metrics: evaluator.evaluate(net),
        localization,
    };
    Ok((summary, field))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub arch: Architecture,
    pub param_count: usize,
    pub activation: Activation,
    pub seed: u64,
    pub status: RunStatus,
    /// Iteration at which training aborted, when it did.
    pub diverged_at: Option<usize>,
    pub config_digest: String,
    pub initial: Option<ErrorMetrics>,
    #[serde(rename = "final")]
    pub final_eval: Option<EvalSummary>,
    pub near_zero_factor_weights: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchMedians {
    pub arch: Architecture,
    pub completed_runs: usize,
    pub l2_error: Option<f64>,
    pub h2_error: Option<f64>,
    pub zygmund_error: Option<f64>,
    pub localization_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config_digest: String,
    /// Not serialized, so artifacts do not depend on where they are written.
    #[serde(skip)]
    pub directory: PathBuf,
    pub runs: Vec<RunSummary>,
    pub medians: Vec<ArchMedians>,
}

impl ExperimentReport {
    pub fn diverged(&self) -> usize {
        self.runs.iter().filter(|r| r.status == RunStatus::Diverged).count()
    }
}

/// Median of the values present; `None` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Output root: `$MMLP_LAB_OUTPUT_ROOT` if set, else the config's
/// `output_dir`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

pub struct RunPaths {
    pub trace: PathBuf,
    pub losses: PathBuf,
    pub checkpoint: PathBuf,
    pub error_field: PathBuf,
    pub summary: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path, run: &RunSpec) -> Self {
        let stem = run.stem();
        Self {
            trace: dir.join(format!("trace_{stem}.csv")),
            losses: dir.join(format!("loss_{stem}.csv")),
            checkpoint: dir.join(format!("checkpoint_{stem}.json")),
            error_field: dir.join(format!("error_field_{stem}.csv")),
            summary: dir.join(format!("summary_{stem}.json")),
        }
    }
}

fn write_trace(paths: &RunPaths, trace: &TrainingTrace) -> Result<(), HarnessError> {
    trace.write_csv(create(&paths.trace)?).map_err(csv_err(&paths.trace))?;
    trace
        .write_losses_csv(create(&paths.losses)?)
        .map_err(csv_err(&paths.losses))
}

fn execute_run(
    cfg: &ExperimentConfig,
    evaluator: &MetricEvaluator,
    dir: &Path,
    run: &RunSpec,
) -> Result<RunSummary, HarnessError> {
    let paths = RunPaths::new(dir, run);
    let outcome = train(
        run.arch,
        cfg.activation,
        &cfg.target,
        &cfg.loss,
        &cfg.train_config(run.seed),
        evaluator,
    );
    let mut summary = RunSummary {
        run: run.stem(),
        arch: run.arch,
        param_count: run.arch.param_count(),
        activation: cfg.activation,
        seed: run.seed,
        status: RunStatus::Completed,
        diverged_at: None,
        config_digest: cfg.digest(),
        initial: None,
        final_eval: None,
        near_zero_factor_weights: 0,
    };
    match outcome {
        Ok(out) => {
            write_trace(&paths, &out.trace)?;
            Checkpoint::new(cfg, &out.network, cfg.train.iterations, run.seed).save(&paths.checkpoint)?;
            let (eval, field) = evaluate_network(cfg, evaluator, &out.network)?;
            field.field().write_csv(create(&paths.error_field)?)?;
            summary.initial = out.trace.first().map(|r| r.metrics);
            summary.final_eval = Some(eval);
            summary.near_zero_factor_weights = out.network.near_zero_factor_weights(1e-8);
        }
        Err(TrainError::Diverged { iteration, trace }) => {
            write_trace(&paths, &trace)?;
            summary.status = RunStatus::Diverged;
            summary.diverged_at = Some(iteration);
            summary.initial = trace.first().map(|r| r.metrics);
        }
        Err(source) => {
            return Err(HarnessError::Train {
                run: run.stem(),
                source,
            })
        }
    }
    write_json(&paths.summary, &summary)?;
    Ok(summary)
}

/// Runs every (architecture, seed) pair of `cfg` under `out_root/<name>`.
///
/// Runs execute concurrently; each one is deterministic, so the artifact
/// set depends only on the config. Diverged runs keep their partial trace
/// and are flagged in the summaries rather than failing the whole
/// experiment.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<ExperimentReport, HarnessError> {
    let name = if cfg.name.is_empty() { "experiment" } else { &cfg.name };
    let dir = out_root.join(name);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_json(&dir.join("config.json"), &cfg.to_json_value())?;

    let evaluator = MetricEvaluator::new(&cfg.target, cfg.metrics.grid(), cfg.metrics.zygmund);
    let runs = cfg.runs();
    let summaries: Vec<RunSummary> = runs
        .par_iter()
        .map(|run| execute_run(cfg, &evaluator, &dir, run))
        .collect::<Result<_, _>>()?;

    let medians = cfg
        .architectures()
        .into_iter()
        .map(|arch| {
            let finals: Vec<&EvalSummary> = summaries
                .iter()
                .filter(|s| s.arch == arch)
                .filter_map(|s| s.final_eval.as_ref())
                .collect();
            ArchMedians {
                arch,
                completed_runs: finals.len(),
                l2_error: median(finals.iter().map(|e| e.metrics.l2_error)),
                h2_error: median(finals.iter().map(|e| e.metrics.h2_error)),
                zygmund_error: median(finals.iter().map(|e| e.metrics.zygmund_error)),
                localization_ratio: median(finals.iter().filter_map(|e| e.localization.ratio())),
            }
        })
        .collect();

    let report = ExperimentReport {
        name: name.to_string(),
        config_digest: cfg.digest(),
        directory: dir.clone(),
        runs: summaries,
        medians,
    };
    write_json(&dir.join("summary.json"), &report)?;
    Ok(report)
}

/// Recomputes the final-state metrics of a checkpoint.
///
/// `grid` overrides the evaluation grid stored in the checkpoint's config;
/// `expected` is an optional config the checkpoint must have been produced
/// from.
pub fn eval_checkpoint(
    path: &Path,
    grid: Option<Grid2D>,
    expected: Option<&ExperimentConfig>,
) -> Result<EvalSummary, HarnessError> {
    let (ckpt, cfg, net) = Checkpoint::load(path)?;
    if let Some(exp) = expected {
        let actual = exp.digest();
        if actual != ckpt.config_digest {
            return Err(HarnessError::StaleConfig {
                stored: ckpt.config_digest,
                actual,
            });
        }
    }
    let grid = grid.unwrap_or_else(|| cfg.metrics.grid());
    let evaluator = MetricEvaluator::new(&cfg.target, grid, cfg.metrics.zygmund);
    Ok(evaluate_network(&cfg, &evaluator, &net)?.0)
}

/// Writes the `|F - f|` field of a checkpoint as `x,y,value` CSV.
pub fn export_field(path: &Path, grid: Option<Grid2D>, out: &Path) -> Result<ErrorField, HarnessError> {
    let (_, cfg, net) = Checkpoint::load(path)?;
    let grid = grid.unwrap_or_else(|| cfg.metrics.grid());
    let field = crate::metrics::error_field(&net, &cfg.target, grid);
    field.field().write_csv(create(out)?)?;
    Ok(field)
}

/// Reads an `x,y,value` CSV written by this crate.
pub fn read_field_csv(path: &Path) -> Result<crate::ScalarField, HarnessError> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(crate::ScalarField::read_csv(BufReader::new(f))?)
}

/// Reads a trace CSV written by [`run_experiment`].
pub fn read_trace_csv(path: &Path) -> Result<TrainingTrace, HarnessError> {
    let f = File::open(path).map_err(io_err(path))?;
    TrainingTrace::read_csv(BufReader::new(f)).map_err(csv_err(path))
}

pub fn read_run_summary(path: &Path) -> Result<RunSummary, HarnessError> {
    read_json(path)
}
