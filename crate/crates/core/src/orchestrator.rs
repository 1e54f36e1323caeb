//! Prompt assembly, response generation and trace links.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, EmbedError, Embedder, Hit};
use crate::generation::GenerationClient;
use crate::planner::{PlanDraft, PlanStep};

/// Bare context block: query line followed by the three sections.
pub const CONTEXT_BLOCK_TEMPLATE: &str =
    "User query: \"{query}\"\n\n[Retrieved memory]\n{memory}\n\n[Causal factors]\n{factors}\n\n[Plan]\n{plan}\n";

/// Default system template: instructions plus the context block.
pub const DEFAULT_SYSTEM_TEMPLATE: &str = include_str!("../data/system_prompt.txt");

const SLOTS: [&str; 4] = ["{query}", "{memory}", "{factors}", "{plan}"];

#[derive(Debug, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("template lacks the {0} slot")]
    TemplateSlotMissing(&'static str),
    #[error("template slots must appear in the order query, memory, factors, plan")]
    TemplateSlotOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryExcerpt {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub query: String,
    /// In retrieval rank order.
    pub memory_excerpts: Vec<MemoryExcerpt>,
    /// In path score order.
    pub causal_factor_texts: Vec<String>,
    pub plan_steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLink {
    pub step_index: usize,
    pub factor_ids: Vec<String>,
    pub memory_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub text: String,
    pub trace: Vec<TraceLink>,
    /// An external client failed and the template renderer answered.
    pub degraded: bool,
}

pub fn assemble_context(query: &str, retrieved: &[Hit<'_>], factors: &[String], plan: &PlanDraft) -> PromptContext {
    PromptContext {
        query: query.to_owned(),
        memory_excerpts: retrieved
            .iter()
            .map(|h| MemoryExcerpt {
                id: h.item.id.clone(),
                text: h.item.text.clone(),
            })
            .collect(),
        causal_factor_texts: factors.to_vec(),
        plan_steps: plan.steps.clone(),
    }
}

fn with_period(text: &str) -> String {
    if text.ends_with(['.', '!', '?']) {
        text.to_owned()
    } else {
        format!("{text}.")
    }
}

fn numbered(steps: &[PlanStep]) -> Vec<String> {
    steps.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s.text)).collect()
}

/// Fills the four slots of `template` in one pass, so slot-like text inside
/// the context is never expanded.
pub fn render_prompt(ctx: &PromptContext, template: &str) -> Result<String, OrchestratorError> {
    let mut last = 0;
    for slot in SLOTS {
        let at = template.find(slot).ok_or(OrchestratorError::TemplateSlotMissing(slot))?;
        if at < last {
            return Err(OrchestratorError::TemplateSlotOrder);
        }
        last = at;
    }
    let memory: Vec<String> = ctx.memory_excerpts.iter().map(|m| format!("-- {}", m.text)).collect();
    let factors: Vec<String> = ctx.causal_factor_texts.iter().map(|f| format!("-- {}", with_period(f))).collect();
    let values = [
        ctx.query.clone(),
        memory.join("\n"),
        factors.join("\n"),
        numbered(&ctx.plan_steps).join("\n"),
    ];

    let mut out = String::with_capacity(template.len() + values.iter().map(String::len).sum::<usize>());
    let mut rest = template;
    loop {
        let next = SLOTS
            .iter()
            .enumerate()
            .filter_map(|(i, s)| rest.find(s).map(|at| (at, i)))
            .min();
        let Some((at, i)) = next else { break };
        out.push_str(&rest[..at]);
        out.push_str(&values[i]);
        rest = &rest[at + SLOTS[i].len()..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Deterministic answer without a language model: a recap of the retrieved
/// notes, one sentence per causal factor, then the numbered plan. Empty
/// sections are left out.
pub fn fallback_render(ctx: &PromptContext) -> String {
    let mut sections = Vec::new();
    if !ctx.memory_excerpts.is_empty() {
        let mut s = String::from("From your notes:");
        for m in &ctx.memory_excerpts {
            s.push_str("\n- ");
            s.push_str(&m.text);
        }
        sections.push(s);
    }
    if !ctx.causal_factor_texts.is_empty() {
        let lines: Vec<String> = ctx
            .causal_factor_texts
            .iter()
            .map(|f| format!("Because {f}, this is worth addressing."))
            .collect();
        sections.push(lines.join("\n"));
    }
    if !ctx.plan_steps.is_empty() {
        sections.push(numbered(&ctx.plan_steps).join("\n"));
    }
    let mut text = sections.join("\n\n");
    text.push('\n');
    text
}

/// Renders prompts, calls the generator and links plan steps to evidence.
pub struct Orchestrator<'a> {
    embedder: &'a dyn Embedder,
    template: &'a str,
    tau: f64,
}

impl<'a> Orchestrator<'a> {
    pub fn new(embedder: &'a dyn Embedder, tau: f64) -> Self {
        Self {
            embedder,
            template: DEFAULT_SYSTEM_TEMPLATE,
            tau,
        }
    }

    pub fn with_template(mut self, template: &'a str) -> Self {
        self.template = template;
        self
    }

    pub fn prompt(&self, ctx: &PromptContext) -> Result<String, OrchestratorError> {
        render_prompt(ctx, self.template)
    }

    /// Step `i` links to the factor it addresses and to every memory
    /// excerpt at least `tau` similar to its text.
    pub fn trace(&self, ctx: &PromptContext) -> Result<Vec<TraceLink>, EmbedError> {
        let memory = ctx
            .memory_excerpts
            .iter()
            .map(|m| Ok((m.id.as_str(), self.embedder.embed(&m.text)?)))
            .collect::<Result<Vec<_>, EmbedError>>()?;
        ctx.plan_steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let v = self.embedder.embed(&step.text)?;
                let mut memory_ids = Vec::new();
                for (id, m) in &memory {
                    if cosine(&v, m)? >= self.tau {
                        memory_ids.push((*id).to_owned());
                    }
                }
                Ok(TraceLink {
                    step_index: i,
                    factor_ids: step.addresses.iter().cloned().collect(),
                    memory_ids,
                })
            })
            .collect()
    }

    /// Answers with `gen` when given; without one, or when it fails or
    /// returns nothing, the template renderer answers (flagged degraded in
    /// the failure case).
    pub fn respond(
        &self,
        ctx: &PromptContext,
        gen: Option<&dyn GenerationClient>,
    ) -> Result<AgentResponse, EmbedError> {
        let trace = self.trace(ctx)?;
        let generated = gen.map(|g| {
            self.prompt(ctx)
                .ok()
                .and_then(|p| g.generate(&p).ok())
                .filter(|t| !t.trim().is_empty())
        });
        let (text, degraded) = match generated {
            None => (fallback_render(ctx), false),
            Some(None) => (fallback_render(ctx), true),
            Some(Some(text)) => (text, false),
        };
        Ok(AgentResponse { text, trace, degraded })
    }
}
