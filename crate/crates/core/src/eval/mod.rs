//! Personalization and causal-accuracy metrics, scenario files and corpus
//! reports.

mod report;
mod scenario;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{run_corpus, Aggregate, EvalReport, ReportRow};
pub use scenario::{load_corpus, Scenario, ScenarioEvent, ScenarioGraph};

use crate::embed::{cosine, EmbedError, Embedder};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation context is empty")]
    EmptyContext,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid scenario `{id}`: {message}")]
    InvalidScenario { id: String, message: String },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
}

/// Context items a response should reflect, with the match threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub items: Vec<String>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseChunks {
    pub chunks: Vec<String>,
    pub full_text: String,
}

/// Splits on `.`, `!`, `?` and newlines, trimming and dropping empty pieces.
pub fn split_sentences(text: &str) -> ResponseChunks {
    ResponseChunks {
        chunks: text
            .split(['.', '!', '?', '\n'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect(),
        full_text: text.to_owned(),
    }
}

/// Fraction of context items whose best-matching response chunk reaches `tau`.
pub fn pss(ctx: &EvalContext, response: &ResponseChunks, embedder: &dyn Embedder) -> Result<f64, EvalError> {
    if ctx.items.is_empty() {
        return Err(EvalError::EmptyContext);
    }
    let chunks = embedder.embed_batch(&response.chunks.iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut matched = 0usize;
    for item in &ctx.items {
        let c = embedder.embed(item)?;
        let mut best = f64::NEG_INFINITY;
        for r in &chunks {
            best = best.max(cosine(&c, r)?);
        }
        if best >= ctx.tau {
            matched += 1;
        }
    }
    Ok(matched as f64 / ctx.items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cra {
    pub score: f64,
    /// No factors to check; the score is reported as 0.
    pub undefined: bool,
}

/// Fraction of factor texts at least `tau` similar to the whole response.
pub fn cra(
    factors: &[String],
    response: &ResponseChunks,
    embedder: &dyn Embedder,
    tau: f64,
) -> Result<Cra, EvalError> {
    if factors.is_empty() {
        return Ok(Cra {
            score: 0.0,
            undefined: true,
        });
    }
    let whole = embedder.embed(&response.full_text)?;
    let mut hits = 0usize;
    for f in factors {
        if cosine(&embedder.embed(f)?, &whole)? >= tau {
            hits += 1;
        }
    }
    Ok(Cra {
        score: hits as f64 / factors.len() as f64,
        undefined: false,
    })
}
