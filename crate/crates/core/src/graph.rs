//! Personal causal knowledge graph.
//!
//! Nodes are events or states from the user's life; directed edges carry a
//! relation label and a weight in `[0, 1]` expressing the strength of the
//! causal influence. The graph is the agent's long-term memory: it is mutated
//! through [`PersonalGraph::add_event`] / [`PersonalGraph::add_edge`] and read
//! through immutable snapshots. Counterfactual questions are answered by
//! [`PersonalGraph::apply_intervention`], which returns a new graph and never
//! touches its input.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight given to hypothesized edges unless the caller overrides it.
pub const DEFAULT_HYPOTHESIS_WEIGHT: f64 = 0.3;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node id `{0}` already exists")]
    DuplicateNodeId(String),
    #[error("invalid node: {0}")]
    InvalidNode(String),
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(String),
    #[error("edge weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("edge `{0}` -> `{1}` already exists")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}` is not allowed")]
    SelfLoop(String),
    #[error("unknown graph element: {0}")]
    UnknownElement(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at line {line}, column {column}: {message}")]
    SchemaViolation {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Sleep,
    Mood,
    Activity,
    Intake,
    Journal,
    Profile,
    Hypothesized,
    Other,
}

impl Modality {
    /// Maps a free-form event type ("Sleep", "Coffee", ...) to a modality.
    pub fn from_event_type(kind: &str) -> Self {
        match kind.trim().to_lowercase().as_str() {
            "sleep" | "nap" => Modality::Sleep,
            "mood" | "emotion" | "stress" | "energy" => Modality::Mood,
            "activity" | "exercise" | "work" | "workout" | "study" | "screen" => Modality::Activity,
            "coffee" | "caffeine" | "food" | "meal" | "drink" | "intake" | "diet" | "alcohol" => {
                Modality::Intake
            }
            "journal" | "note" => Modality::Journal,
            "profile" => Modality::Profile,
            "hypothesized" => Modality::Hypothesized,
            _ => Modality::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Causes,
    LeadsTo,
    Aggravates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    UserInput,
    Learned,
    Hypothesized,
}

/// Scalar or string attribute value. Units live in the attribute name
/// (`sleep_hours`), media in URI strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl std::fmt::Display for AttrValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventNode {
    pub id: String,
    pub label: String,
    pub modality: Modality,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl EventNode {
    pub fn new(id: impl Into<String>, label: impl Into<String>, modality: Modality) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            modality,
            attributes: BTreeMap::new(),
            timestamp: None,
        }
    }

    /// A node proposed by commonsense hypothesis generation rather than logged.
    pub fn hypothesized(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self::new(id, label, Modality::Hypothesized)
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: AttrValue) -> Self {
        self.attributes.insert(key.into(), value);
        self
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }

    pub fn is_hypothesized(&self) -> bool {
        self.modality == Modality::Hypothesized
    }

    fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(GraphError::InvalidNode("empty id".into()));
        }
        if self.label.trim().is_empty() {
            return Err(GraphError::InvalidNode(format!("node `{}` has an empty label", self.id)));
        }
        if let Some(ts) = &self.timestamp {
            chrono::DateTime::parse_from_rfc3339(ts).map_err(|e| {
                GraphError::InvalidNode(format!("node `{}` timestamp `{ts}`: {e}", self.id))
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalEdge {
    pub source: String,
    pub target: String,
    pub relation: Relation,
    pub weight: f64,
    pub provenance: Provenance,
}

impl CausalEdge {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        relation: Relation,
        weight: f64,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            relation,
            weight,
            provenance: Provenance::UserInput,
        }
    }

    /// Hypothesized link carrying the configured default weight.
    pub fn hypothesized(source: impl Into<String>, target: impl Into<String>, weight: f64) -> Self {
        Self {
            provenance: Provenance::Hypothesized,
            ..Self::new(source, target, Relation::Causes, weight)
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn key(&self) -> (String, String) {
        (self.source.clone(), self.target.clone())
    }
}

/// Nodes or edges to delete for a counterfactual query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Intervention {
    pub removed_nodes: BTreeSet<String>,
    pub removed_edges: BTreeSet<(String, String)>,
}

impl Intervention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn remove_node(mut self, id: impl Into<String>) -> Self {
        self.removed_nodes.insert(id.into());
        self
    }

    pub fn remove_edge(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.removed_edges.insert((source.into(), target.into()));
        self
    }

    pub fn removing_nodes<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            removed_nodes: ids.into_iter().map(Into::into).collect(),
            removed_edges: BTreeSet::new(),
        }
    }
}

/// Directed graph of events and weighted causal edges.
///
/// Nodes and edges are kept in id order so iteration, export and traversal
/// are deterministic. `version` is bumped on every mutation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersonalGraph {
    version: u64,
    nodes: BTreeMap<String, EventNode>,
    edges: BTreeMap<(String, String), CausalEdge>,
}

impl PersonalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&EventNode> {
        self.nodes.get(id)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&CausalEdge> {
        self.edges.get(&(source.to_owned(), target.to_owned()))
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &EventNode> {
        self.nodes.values()
    }

    /// Edges in ascending `(source, target)` order.
    pub fn edges(&self) -> impl Iterator<Item = &CausalEdge> {
        self.edges.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    /// Edges pointing into `id`, ordered by source id.
    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a CausalEdge> + 'a {
        self.edges.values().filter(move |e| e.target == id)
    }

    /// Edges leaving `id`, ordered by target id.
    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a CausalEdge> + 'a {
        let start = (id.to_owned(), String::new());
        self.edges
            .range(start..)
            .take_while(move |((s, _), _)| s == id)
            .map(|(_, e)| e)
    }

    /// Records a no-op mutation (e.g. an idempotent re-insert).
    pub(crate) fn touch(&mut self) {
        self.version += 1;
    }

    pub fn add_event(&mut self, node: EventNode) -> Result<()> {
        node.validate()?;
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNodeId(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        self.version += 1;
        Ok(())
    }

    pub fn add_edge(&mut self, edge: CausalEdge) -> Result<()> {
        self.check_edge(&edge)?;
        let key = edge.key();
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(key.0, key.1));
        }
        self.edges.insert(key, edge);
        self.version += 1;
        Ok(())
    }

    /// Inserts `edge`, overwriting relation, weight and provenance of an
    /// existing edge between the same endpoints. This is the only way edge
    /// weights are revised.
    pub fn set_edge(&mut self, edge: CausalEdge) -> Result<Option<CausalEdge>> {
        self.check_edge(&edge)?;
        let previous = self.edges.insert(edge.key(), edge);
        self.version += 1;
        Ok(previous)
    }

    fn check_edge(&self, edge: &CausalEdge) -> Result<()> {
        if edge.source == edge.target {
            return Err(GraphError::SelfLoop(edge.source.clone()));
        }
        for end in [&edge.source, &edge.target] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::MissingEndpoint(end.clone()));
            }
        }
        if !(0.0..=1.0).contains(&edge.weight) {
            return Err(GraphError::WeightOutOfRange(edge.weight));
        }
        Ok(())
    }

    /// Returns a copy of the graph with the intervention's nodes (and their
    /// incident edges) and edges deleted. The copy's version is one past the
    /// input's.
    pub fn apply_intervention(&self, iv: &Intervention) -> Result<PersonalGraph> {
        for id in &iv.removed_nodes {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownElement(format!("node `{id}`")));
            }
        }
        for (s, t) in &iv.removed_edges {
            if !self.edges.contains_key(&(s.clone(), t.clone())) {
                return Err(GraphError::UnknownElement(format!("edge `{s}` -> `{t}`")));
            }
        }
        Ok(self.without(iv))
    }

    /// Like [`apply_intervention`](Self::apply_intervention) but silently
    /// ignores elements that are absent.
    pub(crate) fn without(&self, iv: &Intervention) -> PersonalGraph {
        let nodes = self
            .nodes
            .iter()
            .filter(|(id, _)| !iv.removed_nodes.contains(*id))
            .map(|(id, n)| (id.clone(), n.clone()))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|((s, t), _)| {
                !iv.removed_nodes.contains(s)
                    && !iv.removed_nodes.contains(t)
                    && !iv.removed_edges.contains(&(s.clone(), t.clone()))
            })
            .map(|(k, e)| (k.clone(), e.clone()))
            .collect();
        PersonalGraph {
            version: self.version + 1,
            nodes,
            edges,
        }
    }

    /// True iff a directed path of at least one edge leads from `from` to
    /// `to`. `reachable(a, a)` is true only through a cycle.
    pub fn reachable(&self, from: &str, to: &str) -> Result<bool> {
        for id in [from, to] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownElement(format!("node `{id}`")));
            }
        }
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&str> = self.outgoing(from).map(|e| e.target.as_str()).collect();
        while let Some(id) = queue.pop_front() {
            if id == to {
                return Ok(true);
            }
            if seen.insert(id) {
                queue.extend(self.outgoing(id).map(|e| e.target.as_str()));
            }
        }
        Ok(false)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            version: self.version,
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        };
        // Going through `Value` sorts object keys.
        let value = serde_json::to_value(&file).expect("graph serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<PersonalGraph> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::SchemaViolation {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut graph = PersonalGraph::new();
        for node in file.nodes {
            graph.add_event(node).map_err(|e| GraphError::InvariantViolation(e.to_string()))?;
        }
        for edge in file.edges {
            graph.add_edge(edge).map_err(|e| GraphError::InvariantViolation(e.to_string()))?;
        }
        graph.version = file.version;
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| GraphError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PersonalGraph> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Graphviz rendering; hypothesized elements are dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph personal_graph {\n  rankdir=LR;\n");
        for node in self.nodes.values() {
            let style = if node.is_hypothesized() { ", style=dashed" } else { "" };
            out.push_str(&format!(
                "  {} [label={}{}];\n",
                dot_quote(&node.id),
                dot_quote(&node.label),
                style
            ));
        }
        for edge in self.edges.values() {
            let style = if edge.provenance == Provenance::Hypothesized {
                ", style=dashed"
            } else {
                ""
            };
            let relation = serde_json::to_value(edge.relation).expect("relation serializes");
            out.push_str(&format!(
                "  {} -> {} [label=\"{} ({})\"{}];\n",
                dot_quote(&edge.source),
                dot_quote(&edge.target),
                relation.as_str().unwrap_or_default(),
                edge.weight,
                style
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    version: u64,
    nodes: Vec<EventNode>,
    edges: Vec<CausalEdge>,
}
