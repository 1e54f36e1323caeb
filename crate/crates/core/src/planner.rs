//! Schema-based planning: pick a plan template for the query, bind its
//! cause slots to reasoner factors, and check the plan by intervention.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::embed::{cosine, EmbedError, Embedder};
use crate::generation::{parse_list, GenerationClient, UnavailableClient};
use crate::graph::PersonalGraph;
use crate::reasoner::{surviving_explanations, Analysis, FactorSet};
use crate::text::normalize_key;

/// Hard cap on plan length.
pub const MAX_PLAN_STEPS: usize = 7;
pub const MAX_HYPOTHESIS_STEPS: usize = 5;
pub const GENERIC_SCHEMA_ID: &str = "generic_hypothesis";

const BUNDLED_SCHEMAS: &str = include_str!("../data/schemas.json");
const BUNDLED_RULES: &str = include_str!("../data/rules.json");

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("schema library is empty")]
    EmptyLibrary,
    #[error("invalid schema `{id}`: {message}")]
    InvalidSchema { id: String, message: String },
    #[error("duplicate action rule for category `{0}`")]
    DuplicateRule(String),
    #[error("unresolved placeholder in `{0}`")]
    UnresolvedPlaceholder(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {what} at line {line}, column {column}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    CauseBound,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTemplate {
    pub template_text: String,
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause_category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub intent_description: String,
    #[serde(default)]
    pub domain_tags: Vec<String>,
    pub steps: Vec<StepTemplate>,
    pub max_steps: usize,
}

impl Schema {
    fn validate(&self) -> Result<(), PlanError> {
        let bad = |message: &str| PlanError::InvalidSchema {
            id: self.id.clone(),
            message: message.to_owned(),
        };
        if self.id.trim().is_empty() {
            return Err(bad("empty id"));
        }
        if self.steps.is_empty() {
            return Err(bad("no steps"));
        }
        if self.max_steps == 0 {
            return Err(bad("max_steps must be positive"));
        }
        for step in &self.steps {
            let has_slot = step.template_text.contains('{');
            match step.kind {
                StepKind::CauseBound if !has_slot => return Err(bad("cause-bound step without placeholder")),
                StepKind::Fixed if has_slot || step.template_text.contains('}') => {
                    return Err(bad("fixed step with placeholder"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Built-in open-ended schema used when nothing in a library fits.
    pub fn generic() -> Self {
        SchemaLibrary::bundled()
            .get(GENERIC_SCHEMA_ID)
            .cloned()
            .expect("bundled library has the generic schema")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaLibrary {
    pub schemas: Vec<Schema>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(what: &'static str, text: &str) -> Result<T, PlanError> {
    serde_json::from_str(text).map_err(|e| PlanError::Parse {
        what,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String, PlanError> {
    std::fs::read_to_string(path).map_err(|source| PlanError::Io {
        path: path.to_owned(),
        source,
    })
}

impl SchemaLibrary {
    pub fn new(schemas: Vec<Schema>) -> Result<Self, PlanError> {
        let mut ids = BTreeSet::new();
        for s in &schemas {
            s.validate()?;
            if !ids.insert(s.id.as_str()) {
                return Err(PlanError::InvalidSchema {
                    id: s.id.clone(),
                    message: "duplicate id".into(),
                });
            }
        }
        Ok(Self { schemas })
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let lib: SchemaLibrary = parse_json("schema library", text)?;
        Self::new(lib.schemas)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        Self::from_json(&read(path.as_ref())?)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_SCHEMAS).expect("bundled schemas are valid")
    }

    pub fn get(&self, id: &str) -> Option<&Schema> {
        self.schemas.iter().find(|s| s.id == id)
    }

    /// The schema whose intent best matches `query`; below `tau_schema` the
    /// generic hypothesis schema is used instead.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        tau_schema: f64,
    ) -> Result<(Schema, f64), PlanError> {
        let q = embedder.embed(query)?;
        let mut best: Option<(&Schema, f64)> = None;
        for s in &self.schemas {
            let sim = cosine(&q, &embedder.embed(&s.intent_description)?)?;
            let better = match best {
                None => true,
                Some((b, bs)) => sim > bs || (sim == bs && s.id < b.id),
            };
            if better {
                best = Some((s, sim));
            }
        }
        let (schema, sim) = best.ok_or(PlanError::EmptyLibrary)?;
        if sim < tau_schema {
            let generic = self.get(GENERIC_SCHEMA_ID).cloned().unwrap_or_else(Schema::generic);
            return Ok((generic, sim));
        }
        Ok((schema.clone(), sim))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRule {
    pub cause_category: String,
    pub action_text_template: String,
    /// Extra label words that also select this category.
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl ActionRule {
    fn matches(&self, label: &str) -> bool {
        let label = label.to_lowercase();
        std::iter::once(&self.cause_category)
            .chain(&self.keywords)
            .any(|k| label.contains(&k.to_lowercase()))
    }
}

/// Action rules keyed by their unique category.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    rules: BTreeMap<String, ActionRule>,
}

#[derive(Deserialize)]
struct RulesFile {
    rules: Vec<ActionRule>,
}

impl RuleSet {
    pub fn new(rules: impl IntoIterator<Item = ActionRule>) -> Result<Self, PlanError> {
        let mut map = BTreeMap::new();
        for r in rules {
            let key = r.cause_category.to_lowercase();
            if map.insert(key.clone(), r).is_some() {
                return Err(PlanError::DuplicateRule(key));
            }
        }
        Ok(Self { rules: map })
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        Self::new(parse_json::<RulesFile>("action rules", text)?.rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        Self::from_json(&read(path.as_ref())?)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_RULES).expect("bundled rules are valid")
    }

    pub fn get(&self, category: &str) -> Option<&ActionRule> {
        self.rules.get(&category.to_lowercase())
    }

    /// First rule, in category order, that matches `label`.
    pub fn matching(&self, label: &str) -> Option<&ActionRule> {
        self.rules.values().find(|r| r.matches(label))
    }

    pub fn rules(&self) -> impl Iterator<Item = &ActionRule> {
        self.rules.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub text: String,
    /// Factor node this step acts on.
    pub addresses: Option<String>,
    pub experimental: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDraft {
    pub steps: Vec<PlanStep>,
    pub schema_id: String,
    pub verified: bool,
    pub hypothesis_mode: bool,
    /// Set when a generation fallback produced this plan.
    pub degraded: bool,
}

impl PlanDraft {
    pub fn addressed(&self) -> BTreeSet<String> {
        self.steps.iter().filter_map(|s| s.addresses.clone()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }
}

/// Replaces `{name}` and `{name|default}` using `lookup`, then the default.
/// Unknown names without a default are left in place.
pub fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let Some(len) = rest[open..].find('}') else {
            out.push_str(&rest[open..]);
            return out;
        };
        let inner = &rest[open + 1..open + len];
        let (name, default) = match inner.split_once('|') {
            Some((n, d)) => (n.trim(), Some(d)),
            None => (inner.trim(), None),
        };
        match lookup(name).or_else(|| default.map(str::to_owned)) {
            Some(value) => out.push_str(&value),
            None => out.push_str(&rest[open..=open + len]),
        }
        rest = &rest[open + len + 1..];
    }
    out.push_str(rest);
    out
}

fn unresolved(text: &str) -> Result<(), PlanError> {
    if text.contains('{') || text.contains('}') {
        Err(PlanError::UnresolvedPlaceholder(text.to_owned()))
    } else {
        Ok(())
    }
}

fn label<'g>(graph: &'g PersonalGraph, id: &'g str) -> &'g str {
    graph.node(id).map_or(id, |n| n.label.as_str())
}

/// A factor as it reads inside a step. Logged events are whole sentences,
/// so they are quoted.
fn cause_phrase(graph: &PersonalGraph, id: &str) -> String {
    let lbl = label(graph, id);
    if lbl.starts_with(char::is_uppercase) {
        format!("\"{lbl}\"")
    } else {
        lbl.to_owned()
    }
}

fn is_hypothesized(graph: &PersonalGraph, id: &str) -> bool {
    graph.node(id).is_some_and(|n| n.is_hypothesized())
}

/// Rule action for a factor, with the factor's attributes and the profile
/// filling its placeholders.
fn action_for(
    rule: &ActionRule,
    graph: &PersonalGraph,
    factor: &str,
    profile: &BTreeMap<String, String>,
) -> String {
    let profile: BTreeMap<String, &String> = profile.iter().map(|(k, v)| (normalize_key(k), v)).collect();
    fill(&rule.action_text_template, |name| {
        let key = normalize_key(name);
        graph
            .node(factor)
            .and_then(|n| n.attributes.iter().find(|(k, _)| normalize_key(k) == key))
            .map(|(_, v)| v.to_string())
            .or_else(|| profile.get(&key).map(|v| (*v).clone()))
    })
}

/// Binds each cause-bound step to the most critical unbound factor whose
/// label matches the step's category. Unmatched cause-bound steps are
/// dropped; fixed steps pass through.
pub fn instantiate(
    schema: &Schema,
    factors: &FactorSet,
    graph: &PersonalGraph,
    rules: &RuleSet,
    profile: &BTreeMap<String, String>,
) -> Result<PlanDraft, PlanError> {
    // Factors are already ordered critical first.
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut steps = Vec::new();
    for template in &schema.steps {
        if template.kind == StepKind::Fixed {
            steps.push(PlanStep {
                text: template.template_text.clone(),
                addresses: None,
                experimental: false,
            });
            continue;
        }
        let needs_action = template.template_text.contains("{action");
        let choice = factors.factors.iter().find_map(|f| {
            let id = f.node_id.as_str();
            if bound.contains(id) {
                return None;
            }
            let lbl = label(graph, id);
            let rule = match &template.cause_category {
                Some(cat) => {
                    let rule = rules.get(cat);
                    let hit = match rule {
                        Some(r) => r.matches(lbl),
                        None => lbl.to_lowercase().contains(&cat.to_lowercase()),
                    };
                    if !hit {
                        return None;
                    }
                    rule
                }
                None => rules.matching(lbl),
            };
            if needs_action && rule.is_none() {
                return None;
            }
            Some((id, rule))
        });
        let Some((id, rule)) = choice else { continue };
        let action = rule.map(|r| action_for(r, graph, id, profile));
        let cause = cause_phrase(graph, id);
        let text = fill(&template.template_text, |name| match name {
            "cause" => Some(cause.clone()),
            "action" => action.clone(),
            _ => None,
        });
        unresolved(&text)?;
        bound.insert(id);
        steps.push(PlanStep {
            text,
            addresses: Some(id.to_owned()),
            experimental: is_hypothesized(graph, id),
        });
    }
    steps.truncate(schema.max_steps.min(MAX_PLAN_STEPS));
    if steps.is_empty() {
        steps.push(PlanStep {
            text: "Keep a short daily log of how you feel and what you did, so the causes can be pinned down."
                .into(),
            addresses: None,
            experimental: false,
        });
    }
    Ok(PlanDraft {
        steps,
        schema_id: schema.id.clone(),
        verified: false,
        hypothesis_mode: false,
        degraded: false,
    })
}

/// Whether the plan disconnects the targets, and the factors that still
/// carry an explanation: those on every surviving one, then any originally
/// critical factor the plan ignores.
fn verify_once(
    plan: &PlanDraft,
    factors: &FactorSet,
    graph: &PersonalGraph,
) -> Result<(bool, Vec<String>), PlanError> {
    let addressed = plan.addressed();
    let survivors = surviving_explanations(graph, &factors.target_nodes, factors.hop_limit, &addressed)?;
    let mut missing: Vec<String> = factors
        .factors
        .iter()
        .filter(|f| !addressed.contains(&f.node_id))
        .filter(|f| !survivors.is_empty() && survivors.iter().all(|p| p.contains(&f.node_id)))
        .map(|f| f.node_id.clone())
        .collect();
    for f in factors.critical() {
        if !addressed.contains(&f.node_id) && !missing.contains(&f.node_id) {
            missing.push(f.node_id.clone());
        }
    }
    Ok((survivors.is_empty() && missing.is_empty(), missing))
}

/// Removes every addressed factor and checks that no explanation of the
/// targets survives. On failure, steps for the factors that would still
/// carry an explanation are appended (up to the step cap) and the check is
/// repeated once.
pub fn verify_plan(
    mut plan: PlanDraft,
    factors: &FactorSet,
    graph: &PersonalGraph,
    rules: &RuleSet,
    profile: &BTreeMap<String, String>,
) -> Result<PlanDraft, PlanError> {
    let (verified, missing) = verify_once(&plan, factors, graph)?;
    if verified {
        plan.verified = true;
        return Ok(plan);
    }
    for id in missing {
        if plan.steps.len() >= MAX_PLAN_STEPS {
            break;
        }
        let lbl = label(graph, &id);
        let text = match rules.matching(lbl) {
            Some(rule) => format!("{} to address {}.", action_for(rule, graph, &id, profile), cause_phrase(graph, &id)),
            None => format!("Also address the pattern behind {}.", cause_phrase(graph, &id)),
        };
        unresolved(&text)?;
        plan.steps.push(PlanStep {
            text,
            experimental: is_hypothesized(graph, &id),
            addresses: Some(id),
        });
    }
    plan.verified = verify_once(&plan, factors, graph)?.0;
    Ok(plan)
}

pub fn hypothesis_prompt(query: &str) -> String {
    format!(
        "The user asked: \"{query}\"\n\
         There is little personal data to go on. Reason abductively about the most likely situation \
         and propose up to {MAX_HYPOTHESIS_STEPS} short experimental action steps, one per line."
    )
}

/// Experimental plan drafted by the generation client when the graph holds
/// no usable causes.
pub fn hypothesis_plan(query: &str, gen: &dyn GenerationClient) -> PlanDraft {
    let steps: Vec<PlanStep> = gen
        .generate(&hypothesis_prompt(query))
        .map(|reply| parse_list(&reply))
        .unwrap_or_default()
        .into_iter()
        .filter(|s| !s.contains('{') && !s.contains('}'))
        .take(MAX_HYPOTHESIS_STEPS)
        .map(|text| PlanStep {
            text,
            addresses: None,
            experimental: true,
        })
        .collect();
    if steps.is_empty() {
        return PlanDraft {
            steps: vec![PlanStep {
                text: "Share a bit more about your situation, such as recent events, habits or preferences, so the advice can be tailored."
                    .into(),
                addresses: None,
                experimental: true,
            }],
            schema_id: GENERIC_SCHEMA_ID.into(),
            verified: false,
            hypothesis_mode: true,
            degraded: true,
        };
    }
    PlanDraft {
        steps,
        schema_id: GENERIC_SCHEMA_ID.into(),
        verified: false,
        hypothesis_mode: true,
        degraded: false,
    }
}

/// Chooses between schema planning and hypothesis planning for an analysis.
pub struct Planner<'a> {
    library: &'a SchemaLibrary,
    rules: &'a RuleSet,
    embedder: &'a dyn Embedder,
    config: &'a Config,
    generator: Option<&'a dyn GenerationClient>,
}

impl<'a> Planner<'a> {
    pub fn new(library: &'a SchemaLibrary, rules: &'a RuleSet, embedder: &'a dyn Embedder, config: &'a Config) -> Self {
        Self {
            library,
            rules,
            embedder,
            config,
            generator: None,
        }
    }

    pub fn with_generator(mut self, generator: &'a dyn GenerationClient) -> Self {
        self.generator = Some(generator);
        self
    }

    pub fn plan(
        &self,
        query: &str,
        analysis: &Analysis,
        profile: &BTreeMap<String, String>,
    ) -> Result<PlanDraft, PlanError> {
        let graph = &analysis.graph;
        let logged = analysis
            .factors
            .factors
            .iter()
            .any(|f| !is_hypothesized(graph, &f.node_id));
        if analysis.mapping.fallback_used && !logged {
            return Ok(hypothesis_plan(query, self.generator.unwrap_or(&UnavailableClient)));
        }
        let (schema, _) = self.library.retrieve(self.embedder, query, self.config.tau_schema)?;
        let draft = instantiate(&schema, &analysis.factors, graph, self.rules, profile)?;
        verify_plan(draft, &analysis.factors, graph, self.rules, profile)
    }
}
