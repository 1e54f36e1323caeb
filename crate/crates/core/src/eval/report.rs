use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{cra, pss, split_sentences, EvalError, Scenario};
use crate::agent::{Agent, AgentKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub agent: AgentKind,
    pub pss: f64,
    pub cra: f64,
    pub cra_undefined: bool,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub agent: AgentKind,
    pub runs: usize,
    pub pss_min: f64,
    pub pss_max: f64,
    pub pss_mean: f64,
    pub cra_min: f64,
    pub cra_max: f64,
    pub cra_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

fn score(agent: &Agent<'_>, scenario: &Scenario, kind: AgentKind) -> Result<ReportRow, EvalError> {
    let graph = scenario.build_graph()?;
    let index = scenario.build_index(agent.embedder)?;
    let run = agent.answer(kind, &graph, &index, &scenario.profile_map(), &scenario.query)?;
    let chunks = split_sentences(&run.response.text);
    let ctx = scenario.eval_context(agent.config.tau);
    let p = pss(&ctx, &chunks, agent.embedder)?;
    let c = cra(&run.reference_factors, &chunks, agent.embedder, agent.config.tau)?;
    Ok(ReportRow {
        scenario_id: scenario.id.clone(),
        agent: kind,
        pss: p,
        cra: c.score,
        cra_undefined: c.undefined,
        degraded: run.degraded(),
        error: None,
    })
}

/// Every scenario against every agent. A failing run becomes an error row
/// and the rest continue.
pub fn run_corpus(corpus: &[Scenario], agents: &[AgentKind], agent: &Agent<'_>) -> Result<EvalReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut rows = Vec::with_capacity(corpus.len() * agents.len());
    for scenario in corpus {
        for &kind in agents {
            rows.push(score(agent, scenario, kind).unwrap_or_else(|e| ReportRow {
                scenario_id: scenario.id.clone(),
                agent: kind,
                pss: 0.0,
                cra: 0.0,
                cra_undefined: true,
                degraded: false,
                error: Some(e.to_string()),
            }));
        }
    }
    rows.sort_by(|a, b| {
        a.scenario_id
            .cmp(&b.scenario_id)
            .then_with(|| a.agent.name().cmp(b.agent.name()))
    });
    Ok(EvalReport::from_rows(rows))
}

impl EvalReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let mut by_agent: BTreeMap<&str, (AgentKind, Vec<&ReportRow>)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.error.is_none()) {
            by_agent.entry(r.agent.name()).or_insert((r.agent, Vec::new())).1.push(r);
        }
        let aggregates = by_agent
            .into_values()
            .map(|(agent, rs)| {
                let n = rs.len() as f64;
                let fold = |f: fn(&ReportRow) -> f64| {
                    let vals: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                    (
                        vals.iter().copied().fold(f64::INFINITY, f64::min),
                        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        vals.iter().sum::<f64>() / n,
                    )
                };
                let (pss_min, pss_max, pss_mean) = fold(|r| r.pss);
                let (cra_min, cra_max, cra_mean) = fold(|r| r.cra);
                Aggregate {
                    agent,
                    runs: rs.len(),
                    pss_min,
                    pss_max,
                    pss_mean,
                    cra_min,
                    cra_max,
                    cra_mean,
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn row(&self, scenario_id: &str, agent: AgentKind) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scenario_id == scenario_id && r.agent == agent)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// Scenarios breaking CRA(csm) ≥ CRA(ablated) ≥ CRA(memory only) = 0,
    /// or missing one of the three rows.
    pub fn ordering_violations(&self) -> Vec<String> {
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.scenario_id.as_str()).collect();
        ids.dedup();
        ids.into_iter()
            .filter(|id| {
                let get = |k| self.row(id, k).filter(|r| r.error.is_none()).map(|r| r.cra);
                match (get(AgentKind::Csm), get(AgentKind::AblatedCsm), get(AgentKind::MemoryOnly)) {
                    (Some(c), Some(a), Some(m)) => !(c >= a && a >= m && m == 0.0),
                    _ => true,
                }
            })
            .map(str::to_owned)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Aligned plain-text table followed by per-agent aggregates.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.scenario_id.len()).max().unwrap_or(8).max(8);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:<12}  {:>6}  {:>6}  note", "scenario", "agent", "PSS", "CRA").unwrap();
        for r in &self.rows {
            let note = match (&r.error, r.cra_undefined, r.degraded) {
                (Some(e), _, _) => format!("error: {e}"),
                (None, true, _) => "cra undefined".to_owned(),
                (None, false, true) => "degraded".to_owned(),
                _ => String::new(),
            };
            writeln!(
                out,
                "{:<width$}  {:<12}  {:>6.3}  {:>6.3}  {note}",
                r.scenario_id,
                r.agent.name(),
                r.pss,
                r.cra
            )
            .unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "{:<12}  {:>4}  {:>17}  {:>17}", "agent", "runs", "PSS min/mean/max", "CRA min/mean/max").unwrap();
        for a in &self.aggregates {
            writeln!(
                out,
                "{:<12}  {:>4}  {:.2}/{:.2}/{:.2}    {:.2}/{:.2}/{:.2}",
                a.agent.name(),
                a.runs,
                a.pss_min,
                a.pss_mean,
                a.pss_max,
                a.cra_min,
                a.cra_mean,
                a.cra_max
            )
            .unwrap();
        }
        out
    }
}
