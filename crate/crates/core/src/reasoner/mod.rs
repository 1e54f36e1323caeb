//! Causal reasoning over the personal graph: goal mapping, path enumeration
//! and scoring, counterfactual factor labelling and a bounded reflection pass.

mod counterfactual;
mod goal;
mod paths;
mod scoring;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use counterfactual::{counterfactual_factors, Criticality, Factor};
pub use goal::{cause_prompt, hypothesis_prompt, insert_hypothesized_link, map_goal, rank_nodes, GoalMapping};
pub use paths::{enumerate_paths, explanatory, is_complete, surviving_explanations, CausalPath};
pub use scoring::{score_paths, GenerationScorer, HeuristicScorer, PathScorer};

use crate::config::Config;
use crate::embed::{EmbedError, Embedder};
use crate::generation::{parse_list, GenerationClient, GenerationError, UnavailableClient};
use crate::graph::{GraphError, PersonalGraph};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{source}")]
    GenerationUnavailable {
        #[source]
        source: GenerationError,
        partial: Box<GoalMapping>,
    },
    #[error("path scorer protocol error: {0}")]
    ScorerProtocol(String),
}

/// Scored explanations of the target nodes and the factors drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSet {
    pub target_nodes: Vec<String>,
    /// Best first.
    pub paths: Vec<CausalPath>,
    pub factors: Vec<Factor>,
    pub reflection_notes: Option<String>,
    /// Set when reflection could not reach the generation client.
    pub degraded: bool,
    pub hop_limit: usize,
    pub k_paths: usize,
}

impl FactorSet {
    pub fn empty(targets: Vec<String>, cfg: &Config) -> Self {
        Self {
            target_nodes: targets,
            paths: Vec::new(),
            factors: Vec::new(),
            reflection_notes: None,
            degraded: false,
            hop_limit: cfg.hop_limit,
            k_paths: cfg.k_paths,
        }
    }

    pub fn critical(&self) -> impl Iterator<Item = &Factor> {
        self.factors.iter().filter(|f| f.criticality == Criticality::Critical)
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.factors.iter().any(|f| f.node_id == node_id)
    }

    /// Top explanations: complete chains starting outside the targets.
    pub fn top_paths<'a>(&'a self, graph: &'a PersonalGraph) -> impl Iterator<Item = &'a CausalPath> + 'a {
        explanatory(graph, &self.paths, &self.target_nodes, self.hop_limit).take(self.k_paths)
    }

    fn note(&mut self, text: impl AsRef<str>) {
        let text = text.as_ref();
        match &mut self.reflection_notes {
            Some(notes) => {
                notes.push('\n');
                notes.push_str(text);
            }
            None => self.reflection_notes = Some(text.to_owned()),
        }
    }
}

/// Arrow-joined labels of the top explanations; the factor texts fed to the
/// prompt and to the causal-accuracy metric.
pub fn textualize_factors(set: &FactorSet, graph: &PersonalGraph) -> Vec<String> {
    set.top_paths(graph).map(|p| p.describe(graph)).collect()
}

/// Result of [`Reasoner::analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    /// The input graph plus any hypothesized nodes and links.
    pub graph: PersonalGraph,
    pub mapping: GoalMapping,
    pub factors: FactorSet,
    /// Some generation call failed and a fallback was taken.
    pub degraded: bool,
}

impl Analysis {
    pub fn factor_texts(&self) -> Vec<String> {
        textualize_factors(&self.factors, &self.graph)
    }
}

/// The reasoning pipeline. Without a generator no hypotheses are produced
/// and reflection is skipped; without a scorer the heuristic scorer is used.
pub struct Reasoner<'a> {
    embedder: &'a dyn Embedder,
    generator: Option<&'a dyn GenerationClient>,
    scorer: Option<&'a dyn PathScorer>,
    config: &'a Config,
}

impl<'a> Reasoner<'a> {
    pub fn new(embedder: &'a dyn Embedder, config: &'a Config) -> Self {
        Self {
            embedder,
            generator: None,
            scorer: None,
            config,
        }
    }

    pub fn with_generator(mut self, generator: &'a dyn GenerationClient) -> Self {
        self.generator = Some(generator);
        self
    }

    pub fn with_scorer(mut self, scorer: &'a dyn PathScorer) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn analyze(&self, graph: &PersonalGraph, query: &str) -> Result<Analysis, ReasonError> {
        let cfg = self.config;
        let gen: &dyn GenerationClient = self.generator.unwrap_or(&UnavailableClient);
        let mut degraded = false;
        let (mut graph, mapping) = match map_goal(graph, self.embedder, query, cfg, gen) {
            Ok(pair) => pair,
            Err(ReasonError::GenerationUnavailable { partial, .. }) => {
                degraded = self.generator.is_some();
                (graph.clone(), *partial)
            }
            Err(e) => return Err(e),
        };
        let targets = mapping.targets();
        if targets.is_empty() {
            return Ok(Analysis {
                graph,
                mapping,
                factors: FactorSet::empty(targets, cfg),
                degraded,
            });
        }

        let paths = enumerate_paths(&graph, &targets, cfg.hop_limit)?;
        if explanatory(&graph, &paths, &targets, cfg.hop_limit).next().is_none() {
            if let Some(gen) = self.generator {
                match self.complete_chain(&graph, &targets[0], gen) {
                    Ok(next) => graph = next,
                    Err(ReasonError::GenerationUnavailable { .. }) => degraded = true,
                    Err(e) => return Err(e),
                }
            }
        }

        let mut factors = self.extract(&graph, query, targets, cfg.hop_limit, cfg.k_paths)?;
        if let Some(gen) = self.generator {
            factors = self.reflect(&graph, factors, query, gen)?;
            degraded |= factors.degraded;
        }
        Ok(Analysis {
            graph,
            mapping,
            factors,
            degraded,
        })
    }

    /// Enumerates, scores and labels factors for `targets`.
    pub fn extract(
        &self,
        graph: &PersonalGraph,
        query: &str,
        targets: Vec<String>,
        hop_limit: usize,
        k_paths: usize,
    ) -> Result<FactorSet, ReasonError> {
        let heuristic = HeuristicScorer::new(self.embedder, self.config.length_decay);
        let scorer: &dyn PathScorer = self.scorer.unwrap_or(&heuristic);
        let paths = score_paths(enumerate_paths(graph, &targets, hop_limit)?, query, graph, scorer)?;
        let factors = counterfactual_factors(graph, &paths, &targets, hop_limit, k_paths)?;
        Ok(FactorSet {
            target_nodes: targets,
            paths,
            factors,
            reflection_notes: None,
            degraded: false,
            hop_limit,
            k_paths,
        })
    }

    // Asks for causes of an unexplained target and links them in.
    fn complete_chain(
        &self,
        graph: &PersonalGraph,
        target: &str,
        gen: &dyn GenerationClient,
    ) -> Result<PersonalGraph, ReasonError> {
        let label = graph.node(target).map_or(target, |n| n.label.as_str());
        let reply = gen
            .generate(&cause_prompt(label, self.config.max_hypotheses))
            .map_err(|source| ReasonError::GenerationUnavailable {
                source,
                partial: Box::new(GoalMapping {
                    query: label.to_owned(),
                    matched_nodes: Vec::new(),
                    fallback_used: false,
                    hypothesized_nodes: Vec::new(),
                    query_node: None,
                }),
            })?;
        let mut out = graph.clone();
        for cause in parse_list(&reply).into_iter().take(self.config.max_hypotheses) {
            if !crate::text::slug(&cause).is_empty() {
                out = insert_hypothesized_link(&out, &cause, target, self.config)?.0;
            }
        }
        Ok(out)
    }

    /// Asks whether addressing the factors would resolve the concern. A NO
    /// widens the search (first one more hop, then twice as many paths) and
    /// re-extracts; at most `max_reflections` questions are asked.
    pub fn reflect(
        &self,
        graph: &PersonalGraph,
        mut set: FactorSet,
        query: &str,
        gen: &dyn GenerationClient,
    ) -> Result<FactorSet, ReasonError> {
        for widenings in 0..self.config.max_reflections {
            if set.factors.is_empty() {
                break;
            }
            let reply = match gen.generate(&reflection_prompt(&set, graph, query)) {
                Ok(reply) => reply,
                Err(e) => {
                    set.degraded = true;
                    set.note(format!("reflection skipped: {e}"));
                    break;
                }
            };
            let verdict = Verdict::parse(&reply);
            match reply.trim() {
                "" => set.note("no verdict returned"),
                text => set.note(format!("verdict: {text}")),
            }
            if verdict != Verdict::Reject {
                break;
            }
            let (hops, k) = if widenings == 0 {
                (set.hop_limit + 1, set.k_paths)
            } else {
                (set.hop_limit, set.k_paths * 2)
            };
            let notes = set.reflection_notes.take();
            let degraded = set.degraded;
            set = self.extract(graph, query, set.target_nodes, hops, k)?;
            set.reflection_notes = notes;
            set.degraded = degraded;
            set.note(format!("widened search to {hops} hops and {k} paths"));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Affirm,
    Reject,
    Unclear,
}

impl Verdict {
    fn parse(reply: &str) -> Self {
        let first: String = reply
            .trim_start()
            .chars()
            .take_while(|c| c.is_alphabetic())
            .collect::<String>()
            .to_ascii_lowercase();
        match first.as_str() {
            "yes" => Verdict::Affirm,
            "no" => Verdict::Reject,
            _ => Verdict::Unclear,
        }
    }
}

pub fn reflection_prompt(set: &FactorSet, graph: &PersonalGraph, query: &str) -> String {
    let mut prompt = format!("User concern: \"{query}\"\nProposed causal factors:\n");
    for f in &set.factors {
        let label = graph.node(&f.node_id).map_or(f.node_id.as_str(), |n| n.label.as_str());
        let kind = match f.criticality {
            Criticality::Critical => "critical",
            Criticality::Contributory => "contributory",
        };
        prompt.push_str(&format!("- {label} ({kind})\n"));
    }
    prompt.push_str(
        "Would addressing these factors indeed alleviate the user's stated issue? \
         Answer YES or NO first, then give one sentence of reasoning.\n",
    );
    prompt
}
