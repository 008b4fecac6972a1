//! Experiment configuration files.
//!
//! A config is a JSON object. Only `target`, `arch`, `activation` and
//! `loss` are required; everything else falls back to the defaults of the
//! reference setup (10 000 iterations, batch 2048, 50 000 samples, learning
//! rate 1e-3, `h = 1/128`, `lambda = 1e-2`):
//!
//! ```json
//! {
//!   "name": "cone_l2",
//!   "target": "cone",
//!   "arch": { "mmlp": 256 },
//!   "matched_pair": true,
//!   "activation": "gaussian",
//!   "loss": { "kind": "h2", "lambda": 0.01, "h": 0.0078125 },
//!   "train": { "iterations": 2000, "batch_size": 512, "samples": 10000 },
//!   "metrics": { "grid_h": 0.03125, "zygmund": { "alpha": 0.8, "max_multiple": 8 } },
//!   "seeds": [0, 1, 2],
//!   "output_dir": "runs"
//! }
//! ```
//!
//! A resolved config serializes back into the same schema with every field
//! present, so it can be fed to [`ExperimentConfig::from_json_str`] again.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::ZygmundSpec;
use crate::training::{LossKind, LossSpec, TrainConfig};
use crate::{Activation, Architecture, Grid2D, TargetFunction};

/// Input dimension of every preset; both targets live on the plane.
pub const INPUT_DIM: usize = 2;

const KNOWN_KEYS: &[&str] = &[
    "name",
    "target",
    "arch",
    "matched_pair",
    "activation",
    "loss",
    "train",
    "metrics",
    "seeds",
    "output_dir",
];

const REQUIRED_KEYS: &[&str] = &["target", "arch", "activation", "loss"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Parse(serde_json::Error),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("unknown key `{0}` in config")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field_err(field: &'static str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Field {
        field,
        message: e.to_string(),
    }
}

/// Architecture as written in configs: `{"mlp": n}` or `{"mmlp": n_b}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ArchField {
    Mlp(usize),
    Mmlp(usize),
}

impl ArchField {
    pub fn to_architecture(self) -> Result<Architecture, crate::network::NetworkError> {
        match self {
            Self::Mlp(n) => Architecture::mlp(INPUT_DIM, n),
            Self::Mmlp(n) => Architecture::mmlp(INPUT_DIM, n),
        }
    }

    pub fn from_architecture(a: Architecture) -> Self {
        match a {
            Architecture::Mlp { neurons, .. } => Self::Mlp(neurons),
            Architecture::Mmlp { blocks, .. } => Self::Mmlp(blocks),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetField {
    Preset(String),
    Full(TargetFunction),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LossField {
    Preset(LossKind),
    Full(LossSpecField),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LossSpecField {
    kind: LossKind,
    lambda: Option<f64>,
    h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Spacing of the evaluation grid.
    pub grid_h: f64,
    pub zygmund: ZygmundSpec,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            grid_h: Grid2D::DEFAULT_SPACING,
            zygmund: ZygmundSpec::default(),
        }
    }
}

impl MetricsConfig {
    pub fn grid(&self) -> Grid2D {
        Grid2D::from_spacing(self.grid_h).expect("validated at load time")
    }
}

/// A validated experiment with all defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub target: TargetFunction,
    pub arch: ArchField,
    pub matched_pair: bool,
    pub activation: Activation,
    pub loss: LossSpec,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
    pub seeds: Vec<u64>,
    pub output_dir: String,
}

/// One training run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub arch: Architecture,
    pub seed: u64,
}

impl RunSpec {
    /// File stem shared by all artifacts of this run, e.g. `mmlp64_seed2`.
    pub fn stem(&self) -> String {
        format!("{}_seed{}", self.arch.label(), self.seed)
    }
}

fn take<T: DeserializeOwned>(
    obj: &mut serde_json::Map<String, Value>,
    key: &'static str,
) -> Result<Option<T>, ConfigError> {
    match obj.remove(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| field_err(key, e)),
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_json_str(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".into());
        }
        Ok(cfg)
    }

    /// Parses and validates a config. A missing `name` is left empty here;
    /// [`ExperimentConfig::load`] fills it from the file name.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(ConfigError::Parse)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let Value::Object(mut obj) = value else {
            return Err(ConfigError::NotAnObject);
        };
        if let Some(k) = obj.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        if let Some(k) = REQUIRED_KEYS.iter().find(|k| !obj.contains_key(**k)) {
            return Err(ConfigError::MissingKey(k));
        }

        let name: String = take(&mut obj, "name")?.unwrap_or_default();
        if name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(field_err("name", "must be a plain directory name"));
        }

        let target = match take::<TargetField>(&mut obj, "target")?.expect("required") {
            TargetField::Preset(p) => match p.as_str() {
                "circle" => TargetFunction::default_circle(),
                "cone" => TargetFunction::default_cone(),
                other => {
                    return Err(field_err(
                        "target",
                        format!("unknown preset `{other}`, expected `circle` or `cone`"),
                    ))
                }
            },
            TargetField::Full(t) => t,
        };
        target.validate().map_err(|e| field_err("target", e))?;

        let arch: ArchField = take(&mut obj, "arch")?.expect("required");
        let primary = arch.to_architecture().map_err(|e| field_err("arch", e))?;

        let matched_pair: bool = take(&mut obj, "matched_pair")?.unwrap_or(false);
        if matched_pair && primary.matched_counterpart().is_none() {
            return Err(field_err(
                "arch",
                format!(
                    "{} has {} parameters; no architecture of the other kind matches (need (m+2)n+1 = (2m+1)n_b+1)",
                    primary.label(),
                    primary.param_count()
                ),
            ));
        }

        let activation: Activation = take(&mut obj, "activation")?.expect("required");

        let loss = match take::<LossField>(&mut obj, "loss")?.expect("required") {
            LossField::Preset(kind) => LossSpec { kind, ..LossSpec::l2() },
            LossField::Full(f) => {
                let d = LossSpec::l2();
                LossSpec {
                    kind: f.kind,
                    lambda: f.lambda.unwrap_or(d.lambda),
                    h: f.h.unwrap_or(d.h),
                }
            }
        };
        loss.validate().map_err(|e| field_err("loss", e))?;

        let train: TrainConfig = take(&mut obj, "train")?.unwrap_or_default();
        train.validate().map_err(|e| field_err("train", e))?;

        let metrics: MetricsConfig = take(&mut obj, "metrics")?.unwrap_or_default();
        Grid2D::from_spacing(metrics.grid_h).map_err(|e| field_err("metrics", e))?;
        metrics.zygmund.validate().map_err(|e| field_err("metrics", e))?;

        let seeds: Vec<u64> = take(&mut obj, "seeds")?.unwrap_or_else(|| vec![0, 1, 2]);
        if seeds.is_empty() {
            return Err(field_err("seeds", "at least one seed is required"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(field_err("seeds", "seeds must be distinct"));
        }

        let output_dir: String = take(&mut obj, "output_dir")?.unwrap_or_else(|| "runs".into());

        Ok(Self {
            name,
            target,
            arch,
            matched_pair,
            activation,
            loss,
            train,
            metrics,
            seeds,
            output_dir,
        })
    }

    pub fn primary_architecture(&self) -> Architecture {
        self.arch.to_architecture().expect("validated at load time")
    }

    /// Architectures trained by this experiment: the configured one, or
    /// MLP then MMLP for a matched pair.
    pub fn architectures(&self) -> Vec<Architecture> {
        let primary = self.primary_architecture();
        if !self.matched_pair {
            return vec![primary];
        }
        let other = primary.matched_counterpart().expect("validated at load time");
        if primary.is_multiplicative() {
            vec![other, primary]
        } else {
            vec![primary, other]
        }
    }

    pub fn runs(&self) -> Vec<RunSpec> {
        self.architectures()
            .into_iter()
            .flat_map(|arch| self.seeds.iter().map(move |&seed| RunSpec { arch, seed }))
            .collect()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train }
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}
