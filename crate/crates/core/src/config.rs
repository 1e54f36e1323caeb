use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Tunables shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Similarity threshold of both personalization and causal-accuracy metrics.
    pub tau: f64,
    /// Minimum query/label similarity for a node to count as a goal match.
    pub tau_node: f64,
    /// Below this query/intent similarity the generic hypothesis schema is used.
    pub tau_schema: f64,
    /// Fewer matches than this triggers commonsense hypothesis generation.
    pub min_matches: usize,
    pub max_hypotheses: usize,
    /// Maximum number of edges in an enumerated causal path.
    pub hop_limit: usize,
    /// Top-ranked paths used for factor extraction and textualization.
    pub k_paths: usize,
    pub max_reflections: usize,
    /// Weight of hypothesized edges.
    pub hypothesis_weight: f64,
    /// Per-extra-edge score decay of the heuristic path scorer.
    pub length_decay: f64,
    pub embed_dim: usize,
    /// Memory excerpts retrieved per query.
    pub memory_k: usize,
    pub graph_path: Option<PathBuf>,
    pub schema_path: Option<PathBuf>,
    pub rules_path: Option<PathBuf>,
    pub transcript_path: Option<PathBuf>,
    pub system_prompt_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tau: 0.7,
            tau_node: 0.3,
            tau_schema: 0.35,
            min_matches: 2,
            max_hypotheses: 3,
            hop_limit: 3,
            k_paths: 5,
            max_reflections: 2,
            hypothesis_weight: crate::graph::DEFAULT_HYPOTHESIS_WEIGHT,
            length_decay: 0.9,
            embed_dim: crate::embed::DEFAULT_DIM,
            memory_k: 8,
            graph_path: None,
            schema_path: None,
            rules_path: None,
            transcript_path: None,
            system_prompt_path: None,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("tau", self.tau),
            ("tau_node", self.tau_node),
            ("tau_schema", self.tau_schema),
            ("length_decay", self.length_decay),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.hypothesis_weight) {
            return Err(ConfigError::Invalid(format!(
                "hypothesis_weight = {} must lie in [0, 1]",
                self.hypothesis_weight
            )));
        }
        if self.hop_limit < 1 {
            return Err(ConfigError::Invalid("hop_limit must be at least 1".into()));
        }
        if self.embed_dim < 16 {
            return Err(ConfigError::Invalid("embed_dim must be at least 16".into()));
        }
        if self.k_paths < 1 || self.memory_k < 1 {
            return Err(ConfigError::Invalid("k_paths and memory_k must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}
