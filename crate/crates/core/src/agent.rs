//! End-to-end answering: the full pipeline and the two ablation baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::embed::{EmbedError, Embedder, VectorIndex};
use crate::generation::GenerationClient;
use crate::graph::PersonalGraph;
use crate::orchestrator::{assemble_context, AgentResponse, Orchestrator, PromptContext, DEFAULT_SYSTEM_TEMPLATE};
use crate::planner::{PlanDraft, PlanError, PlanStep, Planner, RuleSet, SchemaLibrary};
use crate::reasoner::{Analysis, ReasonError, Reasoner};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Retrieval, causal reasoning and schema planning.
    Csm,
    /// Retrieval only.
    MemoryOnly,
    /// Retrieval and causal reasoning without the planner.
    AblatedCsm,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Csm, AgentKind::MemoryOnly, AgentKind::AblatedCsm];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Csm => "csm",
            AgentKind::MemoryOnly => "memory_only",
            AgentKind::AblatedCsm => "ablated_csm",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const MEMORY_ONLY_SUGGESTION: &str =
    "Keep noting how you feel and what you did each day, and look for patterns over the next week.";

fn generic_advice(i: usize) -> String {
    format!("For cause {}, try one small change for a week and note any difference.", i + 1)
}

/// Everything an agent needs besides the user's data.
#[derive(Clone, Copy)]
pub struct Agent<'a> {
    pub embedder: &'a dyn Embedder,
    pub config: &'a Config,
    pub library: &'a SchemaLibrary,
    pub rules: &'a RuleSet,
    /// Hypotheses, chain completion, reflection and hypothesis plans.
    pub reasoning: Option<&'a dyn GenerationClient>,
    /// Final answer text; the template renderer answers when absent.
    pub responder: Option<&'a dyn GenerationClient>,
    pub template: &'a str,
}

/// One answered query with its intermediate results.
#[derive(Debug, Clone)]
pub struct AgentRun {
    pub kind: AgentKind,
    pub analysis: Analysis,
    pub plan: Option<PlanDraft>,
    pub context: PromptContext,
    pub response: AgentResponse,
    /// Factor texts of the full reasoner, the reference for every agent.
    pub reference_factors: Vec<String>,
}

impl AgentRun {
    pub fn degraded(&self) -> bool {
        self.response.degraded || self.analysis.degraded || self.plan.as_ref().is_some_and(|p| p.degraded)
    }
}

impl<'a> Agent<'a> {
    pub fn new(
        embedder: &'a dyn Embedder,
        config: &'a Config,
        library: &'a SchemaLibrary,
        rules: &'a RuleSet,
    ) -> Self {
        Self {
            embedder,
            config,
            library,
            rules,
            reasoning: None,
            responder: None,
            template: DEFAULT_SYSTEM_TEMPLATE,
        }
    }

    pub fn with_reasoning(mut self, gen: &'a dyn GenerationClient) -> Self {
        self.reasoning = Some(gen);
        self
    }

    pub fn with_responder(mut self, gen: &'a dyn GenerationClient) -> Self {
        self.responder = Some(gen);
        self
    }

    pub fn with_template(mut self, template: &'a str) -> Self {
        self.template = template;
        self
    }

    pub fn analyze(&self, graph: &PersonalGraph, query: &str) -> Result<Analysis, ReasonError> {
        let mut reasoner = Reasoner::new(self.embedder, self.config);
        if let Some(gen) = self.reasoning {
            reasoner = reasoner.with_generator(gen);
        }
        reasoner.analyze(graph, query)
    }

    pub fn answer(
        &self,
        kind: AgentKind,
        graph: &PersonalGraph,
        index: &VectorIndex,
        profile: &BTreeMap<String, String>,
        query: &str,
    ) -> Result<AgentRun, AgentError> {
        let analysis = self.analyze(graph, query)?;
        let reference_factors = analysis.factor_texts();
        let retrieved = index.top_k(self.embedder, query, self.config.memory_k)?;

        let (factors, plan, steps) = match kind {
            AgentKind::Csm => {
                let mut planner = Planner::new(self.library, self.rules, self.embedder, self.config);
                if let Some(gen) = self.reasoning {
                    planner = planner.with_generator(gen);
                }
                let plan = planner.plan(query, &analysis, profile)?;
                let steps = plan.steps.clone();
                (reference_factors.clone(), Some(plan), steps)
            }
            AgentKind::AblatedCsm => {
                let steps = (0..reference_factors.len())
                    .map(|i| PlanStep {
                        text: generic_advice(i),
                        addresses: None,
                        experimental: false,
                    })
                    .collect();
                (reference_factors.clone(), None, steps)
            }
            AgentKind::MemoryOnly => {
                let step = PlanStep {
                    text: MEMORY_ONLY_SUGGESTION.into(),
                    addresses: None,
                    experimental: false,
                };
                (Vec::new(), None, vec![step])
            }
        };
        let draft = PlanDraft {
            steps,
            schema_id: String::new(),
            verified: false,
            hypothesis_mode: false,
            degraded: false,
        };
        let context = assemble_context(query, &retrieved, &factors, &draft);
        let orchestrator = Orchestrator::new(self.embedder, self.config.tau).with_template(self.template);
        let response = orchestrator.respond(&context, self.responder)?;
        Ok(AgentRun {
            kind,
            analysis,
            plan,
            context,
            response,
            reference_factors,
        })
    }
}
