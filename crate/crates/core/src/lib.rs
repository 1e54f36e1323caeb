//! Personal causal memory for explainable, personalized recommendations.
//!
//! A [`graph::PersonalGraph`] holds a user's events and weighted cause-effect
//! links. The [`reasoner`] maps a query onto it and extracts counterfactually
//! labelled factors, the [`planner`] turns them into a verified plan, and the
//! [`orchestrator`] assembles the prompt and the traced answer. [`eval`]
//! scores answers for personalization and causal accuracy.

pub mod agent;
pub mod cli;
pub mod config;
pub mod embed;
pub mod eval;
pub mod generation;
pub mod graph;
mod http;
pub mod orchestrator;
pub mod planner;
pub mod reasoner;
pub mod text;

pub use agent::{Agent, AgentKind, AgentRun};
pub use config::Config;
pub use embed::{Embedder, HashEmbedder, VectorIndex};
pub use generation::{GenerationClient, TranscriptClient};
pub use graph::{CausalEdge, EventNode, PersonalGraph};
