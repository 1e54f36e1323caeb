use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalContext, EvalError};
use crate::embed::{Embedder, MemoryKind, VectorIndex};
use crate::graph::{AttrValue, CausalEdge, EventNode, Modality, PersonalGraph};
use crate::text::{normalize_key, slug};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    #[serde(rename = "type")]
    pub kind: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, AttrValue>,
}

/// Extra nodes and edges; edges may point at event and profile nodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioGraph {
    #[serde(default)]
    pub nodes: Vec<EventNode>,
    #[serde(default)]
    pub edges: Vec<CausalEdge>,
}

/// A user's profile, logs and one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub profile: BTreeMap<String, AttrValue>,
    #[serde(default)]
    pub event_log: Vec<ScenarioEvent>,
    #[serde(default)]
    pub vector_log: Vec<String>,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<ScenarioGraph>,
}

fn parse_error(path: &str, e: serde_json::Error) -> EvalError {
    EvalError::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| parse_error("<scenario>", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: shown.clone(),
            source,
        })?;
        let s: Scenario = serde_json::from_str(&text).map_err(|e| parse_error(&shown, e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |message: String| EvalError::InvalidScenario {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.query.trim().is_empty() {
            return Err(bad("empty query".into()));
        }
        if self.event_log.iter().any(|e| e.content.trim().is_empty()) || self.vector_log.iter().any(|v| v.trim().is_empty()) {
            return Err(bad("empty log entry".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, _) in self.event_log.iter().enumerate() {
            let id = self.event_id(i);
            if !seen.insert(id.clone()) {
                return Err(bad(format!("duplicate event id `{id}`")));
            }
        }
        Ok(())
    }

    pub fn event_id(&self, index: usize) -> String {
        self.event_log[index]
            .id
            .clone()
            .unwrap_or_else(|| format!("event-{}", index + 1))
    }

    pub fn profile_id(key: &str) -> String {
        format!("profile-{}", slug(key))
    }

    /// Profile entries as `key: value` with normalized keys.
    pub fn profile_lines(&self) -> Vec<(String, String)> {
        self.profile
            .iter()
            .map(|(k, v)| (Self::profile_id(k), format!("{}: {v}", normalize_key(k))))
            .collect()
    }

    /// Profile as plain strings, the planner's placeholder source.
    pub fn profile_map(&self) -> BTreeMap<String, String> {
        self.profile.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
    }

    /// Profile nodes, one node per event, then the authored graph section.
    pub fn build_graph(&self) -> Result<PersonalGraph, EvalError> {
        let mut g = PersonalGraph::new();
        for ((key, value), (id, line)) in self.profile.iter().zip(self.profile_lines()) {
            g.add_event(EventNode::new(id, line, Modality::Profile).with_attribute(normalize_key(key), value.clone()))?;
        }
        for (i, ev) in self.event_log.iter().enumerate() {
            let mut node = EventNode::new(self.event_id(i), ev.content.trim(), Modality::from_event_type(&ev.kind));
            node.attributes = ev.attributes.clone();
            node.timestamp = ev.timestamp.clone();
            g.add_event(node)?;
        }
        if let Some(extra) = &self.graph {
            for n in &extra.nodes {
                g.add_event(n.clone())?;
            }
            for e in &extra.edges {
                g.add_edge(e.clone())?;
            }
        }
        Ok(g)
    }

    /// Retrievable memory `(id, text, kind)`: vector log then profile lines.
    /// Logged events live in the graph and are not indexed.
    pub fn retrieval_entries(&self) -> Vec<(String, String, MemoryKind)> {
        let mut out: Vec<(String, String, MemoryKind)> = self
            .vector_log
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("log-{}", i + 1), t.clone(), MemoryKind::VectorLog))
            .collect();
        out.extend(self.profile_lines().into_iter().map(|(id, t)| (id, t, MemoryKind::ProfileEntry)));
        out
    }

    /// Retrievable memory followed by the event contents.
    pub fn memory_entries(&self) -> Vec<(String, String, MemoryKind)> {
        let mut out = self.retrieval_entries();
        out.extend(
            self.event_log
                .iter()
                .enumerate()
                .map(|(i, e)| (self.event_id(i), e.content.trim().to_owned(), MemoryKind::EventLog)),
        );
        out
    }

    pub fn build_index(&self, embedder: &dyn Embedder) -> Result<VectorIndex, EvalError> {
        Ok(VectorIndex::build(self.retrieval_entries(), embedder)?)
    }

    /// Everything the answer should reflect.
    pub fn eval_context(&self, tau: f64) -> EvalContext {
        EvalContext {
            items: self.memory_entries().into_iter().map(|(_, t, _)| t).collect(),
            tau,
        }
    }
}

/// Scenarios from a directory of `*.json` files (sorted by name), a file
/// holding an array, or a single-scenario file. Ids must be unique.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Scenario>, EvalError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let io = |source| EvalError::Io {
        path: shown.clone(),
        source,
    };
    let mut scenarios = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            scenarios.push(Scenario::load(&f)?);
        }
    } else {
        let text = std::fs::read_to_string(path).map_err(io)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_error(&shown, e))?;
        scenarios = if value.is_array() {
            serde_json::from_value(value).map_err(|e| parse_error(&shown, e))?
        } else {
            vec![serde_json::from_value(value).map_err(|e| parse_error(&shown, e))?]
        };
        for s in &scenarios {
            s.validate()?;
        }
    }
    if scenarios.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut ids = BTreeSet::new();
    for s in &scenarios {
        if !ids.insert(s.id.as_str()) {
            return Err(EvalError::InvalidScenario {
                id: s.id.clone(),
                message: "duplicate scenario id".into(),
            });
        }
    }
    Ok(scenarios)
}
