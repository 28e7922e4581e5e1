//! Run configuration: a TOML file plus `key=value` overrides.
//!
//! Relative paths in the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::GenerationConfig;
use crate::ingest::{RecordFormat, DEFAULT_IDEOLOGY_THRESHOLD, DEFAULT_MIN_PER_GROUP};
use crate::pipeline::{ExperimentSpec, Mode, ModelSpec, SignificanceSettings};
use crate::prompts::ModelType;
use crate::scoring::ScorerDescriptor;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub model_type: ModelType,
    pub backend: BackendKind,
    /// Replay fixture, for `backend = "replay"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<PathBuf>,
    /// `model_name` defaults to `name`.
    #[serde(default)]
    pub generation: GenerationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub records: PathBuf,
    /// `jsonl` or `csv`; inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    pub topics: PathBuf,
    /// `domain,score` csv used to label authors without an ideology.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_bias: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub ideology_threshold: f64,
    #[serde(default = "default_min_per_group")]
    pub min_per_group: usize,
    #[serde(default = "default_true")]
    pub drop_duplicates: bool,
}

fn default_threshold() -> f64 {
    DEFAULT_IDEOLOGY_THRESHOLD
}

fn default_min_per_group() -> usize {
    DEFAULT_MIN_PER_GROUP
}

fn default_true() -> bool {
    true
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("work")
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_taxonomies() -> Vec<Taxonomy> {
    Taxonomy::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_taxonomies")]
    pub taxonomies: Vec<Taxonomy>,
    /// Alternative prompt catalog (json); the built-in one otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub significance: SignificanceSettings,
    pub models: Vec<ModelConfig>,
    pub scorers: Vec<ScorerDescriptor>,
}

/// A parsed config and the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot-separated; numeric segments index arrays) in `root`.
/// Values are parsed as TOML where possible and taken as strings otherwise.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let err = |m: String| ConfigError::Override(assignment.to_string(), m);
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| err("expected key=value".into()))?;
    let segments: Vec<&str> = key.trim().split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(err("empty key segment".into()));
    }
    let mut wrapped = toml::Value::Table(std::mem::take(root));
    let outcome = set_path(&mut wrapped, &segments, parse_scalar(raw.trim()));
    if let toml::Value::Table(t) = wrapped {
        *root = t;
    }
    outcome.map_err(err)
}

fn set_path(slot: &mut toml::Value, segments: &[&str], value: toml::Value) -> Result<(), String> {
    let (seg, rest) = segments.split_first().expect("non-empty path");
    let child = match slot {
        toml::Value::Table(t) => {
            if rest.is_empty() {
                t.insert(seg.to_string(), value);
                return Ok(());
            }
            t.entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        }
        toml::Value::Array(a) => {
            let i: usize = seg.parse().map_err(|_| format!("`{seg}` is not an array index"))?;
            let len = a.len();
            let item = a
                .get_mut(i)
                .ok_or_else(|| format!("index {i} out of range (length {len})"))?;
            if rest.is_empty() {
                *item = value;
                return Ok(());
            }
            item
        }
        _ => return Err(format!("`{seg}` is inside a scalar")),
    };
    set_path(child, rest, value)
}

impl Config {
    pub fn parse(content: &str, origin: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let parse_err = |message: String| ConfigError::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let mut table: toml::Table = content.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig, ConfigError> {
        let content = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config = Self::parse(&content, path, overrides)?;
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn record_format(&self) -> Result<RecordFormat, ConfigError> {
        match &self.data.format {
            Some(f) => f.parse().map_err(ConfigError::Invalid),
            None => RecordFormat::from_path(&self.data.records).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.record_format()?;
        if self.models.is_empty() {
            return bad("at least one [[models]] entry is required".into());
        }
        for m in &self.models {
            if m.backend == BackendKind::Replay && m.replay.is_none() {
                return bad(format!("models.{}: replay backend needs `replay`", m.name));
            }
            if m.backend == BackendKind::Http && m.generation.endpoint.is_none() {
                return bad(format!("models.{}: http backend needs `generation.endpoint`", m.name));
            }
        }
        for t in &self.taxonomies {
            match self.scorers.iter().filter(|s| s.taxonomy == *t).count() {
                0 => return bad(format!("no scorer for taxonomy `{t}`")),
                1 => {}
                _ => return bad(format!("more than one scorer for taxonomy `{t}`")),
            }
        }
        for s in &self.scorers {
            s.validate()
                .map_err(|e| ConfigError::Invalid(format!("scorer for {}: {e}", s.taxonomy)))?;
        }
        self.experiment_spec()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            models: self
                .models
                .iter()
                .map(|m| {
                    let mut generation = m.generation.clone();
                    if generation.model_name.is_empty() {
                        generation.model_name = m.name.clone();
                    }
                    ModelSpec {
                        name: m.name.clone(),
                        model_type: m.model_type,
                        generation,
                    }
                })
                .collect(),
            modes: self.modes.clone(),
            taxonomies: self.taxonomies.clone(),
            seed: self.seed,
            significance: self.significance,
        }
    }
}
