use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{CausalEdge, GraphError, Intervention, PersonalGraph, Provenance};

/// A simple directed path ending at a target node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalPath {
    pub nodes: Vec<String>,
    pub edges: Vec<CausalEdge>,
    pub score: f64,
    pub contains_hypothesis: bool,
}

impl CausalPath {
    fn from_edges(edges: Vec<CausalEdge>) -> Self {
        let mut nodes: Vec<String> = edges.iter().map(|e| e.source.clone()).collect();
        nodes.push(edges.last().expect("non-empty path").target.clone());
        let contains_hypothesis = edges.iter().any(|e| e.provenance == Provenance::Hypothesized);
        Self {
            nodes,
            edges,
            score: 0.0,
            contains_hypothesis,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn strength(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).product()
    }

    pub fn first(&self) -> &str {
        &self.nodes[0]
    }

    pub fn last(&self) -> &str {
        self.nodes.last().expect("non-empty path")
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n == id)
    }

    /// Node labels joined by arrows.
    pub fn describe(&self, graph: &PersonalGraph) -> String {
        self.labels(graph).join(" → ")
    }

    pub fn labels<'g>(&'g self, graph: &'g PersonalGraph) -> Vec<&'g str> {
        self.nodes
            .iter()
            .map(|id| graph.node(id).map_or(id.as_str(), |n| n.label.as_str()))
            .collect()
    }
}

/// All simple paths of `1..=hop_limit` edges that end at one of `targets`,
/// in lexicographic order of their node-id sequences.
pub fn enumerate_paths(
    graph: &PersonalGraph,
    targets: &[String],
    hop_limit: usize,
) -> Result<Vec<CausalPath>, GraphError> {
    for t in targets {
        if !graph.contains_node(t) {
            return Err(GraphError::UnknownElement(format!("node `{t}`")));
        }
    }
    let mut preds: BTreeMap<&str, Vec<&CausalEdge>> = BTreeMap::new();
    for e in graph.edges() {
        preds.entry(e.target.as_str()).or_default().push(e);
    }
    let unique: BTreeSet<&str> = targets.iter().map(String::as_str).collect();

    let mut found = Vec::new();
    for target in unique {
        let mut on_path = BTreeSet::from([target]);
        let mut stack = Vec::new();
        walk_back(&preds, target, hop_limit, &mut on_path, &mut stack, &mut found);
    }
    let mut paths: Vec<CausalPath> = found.into_iter().map(CausalPath::from_edges).collect();
    paths.sort_by(|a, b| a.nodes.cmp(&b.nodes));
    Ok(paths)
}

// `stack` holds edges from the current head back to the target.
fn walk_back<'g>(
    preds: &BTreeMap<&'g str, Vec<&'g CausalEdge>>,
    head: &'g str,
    budget: usize,
    on_path: &mut BTreeSet<&'g str>,
    stack: &mut Vec<&'g CausalEdge>,
    out: &mut Vec<Vec<CausalEdge>>,
) {
    if budget == 0 {
        return;
    }
    let Some(incoming) = preds.get(head) else {
        return;
    };
    for edge in incoming {
        let source = edge.source.as_str();
        if !on_path.insert(source) {
            continue;
        }
        stack.push(edge);
        out.push(stack.iter().rev().map(|e| (*e).clone()).collect());
        walk_back(preds, source, budget - 1, on_path, stack, out);
        stack.pop();
        on_path.remove(source);
    }
}

/// Whether `path` is a complete chain in `graph`: it cannot be extended
/// backwards without exceeding `hop_limit` or revisiting one of its nodes.
pub fn is_complete(graph: &PersonalGraph, path: &CausalPath, hop_limit: usize) -> bool {
    path.edge_count() >= hop_limit || graph.incoming(path.first()).all(|e| path.contains(&e.source))
}

/// Explanations among `paths`: complete chains (judged against `graph`)
/// whose first node is not itself a target.
pub fn explanatory<'p>(
    graph: &'p PersonalGraph,
    paths: &'p [CausalPath],
    targets: &'p [String],
    hop_limit: usize,
) -> impl Iterator<Item = &'p CausalPath> + 'p {
    paths
        .iter()
        .filter(move |p| !targets.iter().any(|t| t == p.first()) && is_complete(graph, p, hop_limit))
}

/// Explanations that remain after deleting `removed` from `graph`: paths are
/// re-enumerated in the cut graph, completeness is still judged against the
/// original graph so a truncated chain does not count as a new explanation.
pub fn surviving_explanations(
    graph: &PersonalGraph,
    targets: &[String],
    hop_limit: usize,
    removed: &BTreeSet<String>,
) -> Result<Vec<CausalPath>, GraphError> {
    let cut = graph.without(&Intervention::removing_nodes(removed.iter().cloned()));
    let kept: Vec<String> = targets.iter().filter(|t| !removed.contains(*t)).cloned().collect();
    let paths = enumerate_paths(&cut, &kept, hop_limit)?;
    Ok(explanatory(graph, &paths, &kept, hop_limit).cloned().collect())
}
