use serde::{Deserialize, Serialize};

use super::ReasonError;
use crate::config::Config;
use crate::embed::{cosine, Embedder};
use crate::generation::{parse_list, GenerationClient};
use crate::graph::{CausalEdge, EventNode, GraphError, Modality, PersonalGraph, Provenance, Relation};
use crate::text::slug;

/// Query matched onto graph nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalMapping {
    pub query: String,
    /// Nodes at or above the match threshold, best first.
    pub matched_nodes: Vec<(String, f64)>,
    pub fallback_used: bool,
    pub hypothesized_nodes: Vec<String>,
    /// Synthetic node standing in for the query when nothing matched.
    pub query_node: Option<String>,
}

impl GoalMapping {
    /// Problem nodes that causal paths must end at.
    pub fn targets(&self) -> Vec<String> {
        if self.matched_nodes.is_empty() {
            self.query_node.iter().cloned().collect()
        } else {
            self.matched_nodes.iter().map(|(id, _)| id.clone()).collect()
        }
    }
}

pub fn hypothesis_prompt(query: &str, limit: usize) -> String {
    format!(
        "The user asked: \"{query}\"\n\
         Their personal records contain little that relates to this. Using common sense, \
         list up to {limit} plausible underlying causes or considerations, one short phrase per line."
    )
}

pub fn cause_prompt(effect: &str, limit: usize) -> String {
    format!(
        "The user reports: \"{effect}\"\n\
         No recorded cause explains it. List up to {limit} plausible causes, one short phrase per line."
    )
}

/// Node similarities to the query, best first with id tie-break.
pub fn rank_nodes(
    graph: &PersonalGraph,
    embedder: &dyn Embedder,
    query: &str,
) -> Result<Vec<(String, f64)>, ReasonError> {
    let q = embedder.embed(query)?;
    let mut ranked = Vec::with_capacity(graph.node_count());
    for node in graph.nodes() {
        ranked.push((node.id.clone(), cosine(&q, &embedder.embed(&node.label)?)?));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Matches `query` against node labels. With fewer than `min_matches`
/// matches, asks `gen` for commonsense causes and links them as hypothesized
/// nodes to the best match, or to a synthetic query node.
///
/// Returns the (possibly extended) graph alongside the mapping. When
/// generation fails the error carries the mapping computed so far.
pub fn map_goal(
    graph: &PersonalGraph,
    embedder: &dyn Embedder,
    query: &str,
    cfg: &Config,
    gen: &dyn GenerationClient,
) -> Result<(PersonalGraph, GoalMapping), ReasonError> {
    if query.trim().is_empty() {
        return Err(ReasonError::EmptyQuery);
    }
    let matched: Vec<(String, f64)> = rank_nodes(graph, embedder, query)?
        .into_iter()
        .filter(|(_, s)| *s >= cfg.tau_node)
        .collect();
    let mut mapping = GoalMapping {
        query: query.to_owned(),
        fallback_used: matched.len() < cfg.min_matches,
        matched_nodes: matched,
        hypothesized_nodes: Vec::new(),
        query_node: None,
    };
    if !mapping.fallback_used {
        return Ok((graph.clone(), mapping));
    }

    let reply = match gen.generate(&hypothesis_prompt(query, cfg.max_hypotheses)) {
        Ok(reply) => reply,
        Err(source) => {
            return Err(ReasonError::GenerationUnavailable {
                source,
                partial: Box::new(mapping),
            })
        }
    };
    let mut out = graph.clone();
    let anchor = match mapping.matched_nodes.first() {
        Some((id, _)) => id.clone(),
        None => {
            let id = format!("query:{}", slug(query));
            if !out.contains_node(&id) {
                out.add_event(EventNode::new(id.clone(), query.trim(), Modality::Other))?;
            }
            mapping.query_node = Some(id.clone());
            id
        }
    };
    for label in parse_list(&reply).into_iter().take(cfg.max_hypotheses) {
        if slug(&label).is_empty() {
            continue;
        }
        let (next, edge) = insert_hypothesized_link(&out, &label, &anchor, cfg)?;
        out = next;
        if !mapping.hypothesized_nodes.contains(&edge.source) {
            mapping.hypothesized_nodes.push(edge.source);
        }
    }
    Ok((out, mapping))
}

/// Adds (when absent) a hypothesized node labelled `from_label` and a
/// hypothesized edge from it to `to`. Repeating the call only bumps the
/// version. An existing node with the same label is reused.
pub fn insert_hypothesized_link(
    graph: &PersonalGraph,
    from_label: &str,
    to: &str,
    cfg: &Config,
) -> Result<(PersonalGraph, CausalEdge), GraphError> {
    if !graph.contains_node(to) {
        return Err(GraphError::UnknownElement(format!("node `{to}`")));
    }
    let label = from_label.trim();
    let mut out = graph.clone();
    let source = match graph.nodes().find(|n| n.label.eq_ignore_ascii_case(label)) {
        Some(existing) => existing.id.clone(),
        None => {
            let id = format!("hyp:{}", slug(label));
            out.add_event(EventNode::hypothesized(id.clone(), label))?;
            id
        }
    };
    if let Some(edge) = out.edge(&source, to) {
        let edge = edge.clone();
        out.touch();
        return Ok((out, edge));
    }
    let edge = CausalEdge::new(source, to, Relation::Causes, cfg.hypothesis_weight)
        .with_provenance(Provenance::Hypothesized);
    out.add_edge(edge.clone())?;
    Ok((out, edge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::generation::{ScriptedClient, UnavailableClient};
    use crate::graph::Intervention;

    fn fatigue_graph() -> PersonalGraph {
        let mut g = PersonalGraph::new();
        g.add_event(EventNode::new("late", "late bedtime", Modality::Sleep)).unwrap();
        g.add_event(EventNode::new("fatigue", "afternoon fatigue and low energy", Modality::Mood))
            .unwrap();
        g.add_event(EventNode::new("drained", "feeling drained in the afternoon", Modality::Mood))
            .unwrap();
        g.add_edge(CausalEdge::new("late", "fatigue", Relation::Causes, 0.8)).unwrap();
        g
    }

    #[test]
    fn strong_matches_skip_fallback() {
        let e = HashEmbedder::default();
        let gen = ScriptedClient::new().otherwise("should not be asked");
        let (g, m) = map_goal(
            &fatigue_graph(),
            &e,
            "low energy and feeling drained in the afternoon",
            &Config::default(),
            &gen,
        )
        .unwrap();
        assert!(!m.fallback_used);
        assert_eq!(m.matched_nodes.len(), 2);
        assert!(m.matched_nodes[0].1 >= m.matched_nodes[1].1);
        assert!(m.hypothesized_nodes.is_empty());
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn empty_graph_gets_hypotheses_on_query_node() {
        let e = HashEmbedder::default();
        let gen = ScriptedClient::new().otherwise("- diet\n- hydration\n");
        let (g, m) =
            map_goal(&PersonalGraph::new(), &e, "why am I tired?", &Config::default(), &gen).unwrap();
        assert!(m.fallback_used);
        assert_eq!(m.hypothesized_nodes, ["hyp:diet", "hyp:hydration"]);
        for id in &m.hypothesized_nodes {
            assert_eq!(g.node(id).unwrap().modality, Modality::Hypothesized);
        }
        let q = m.query_node.clone().unwrap();
        assert_eq!(m.targets(), std::slice::from_ref(&q));
        let edge = g.edge("hyp:diet", &q).unwrap();
        assert_eq!(edge.provenance, Provenance::Hypothesized);
        assert_eq!(edge.weight, 0.3);
    }

    #[test]
    fn hypotheses_are_capped() {
        let e = HashEmbedder::default();
        let gen = ScriptedClient::new().otherwise("a\nb\nc\nd\ne");
        let (_, m) = map_goal(&PersonalGraph::new(), &e, "q", &Config::default(), &gen).unwrap();
        assert_eq!(m.hypothesized_nodes.len(), 3);
    }

    #[test]
    fn failed_generation_carries_partial_mapping() {
        let e = HashEmbedder::default();
        let err = map_goal(&fatigue_graph(), &e, "What should I name my dog?", &Config::default(), &UnavailableClient)
            .unwrap_err();
        match err {
            ReasonError::GenerationUnavailable { partial, .. } => {
                assert!(partial.fallback_used);
                assert!(partial.hypothesized_nodes.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_query_is_rejected() {
        let e = HashEmbedder::default();
        assert!(matches!(
            map_goal(&PersonalGraph::new(), &e, "  ", &Config::default(), &UnavailableClient),
            Err(ReasonError::EmptyQuery)
        ));
    }

    #[test]
    fn hypothesized_link_is_idempotent_and_removable() {
        let cfg = Config::default();
        let mut g = PersonalGraph::new();
        g.add_event(EventNode::new("sleep", "poor sleep", Modality::Sleep)).unwrap();
        g.add_event(EventNode::new("tired", "daytime fatigue", Modality::Mood)).unwrap();
        g.add_edge(CausalEdge::new("sleep", "tired", Relation::Causes, 0.8)).unwrap();

        let (once, edge) = insert_hypothesized_link(&g, "late screen time", "sleep", &cfg).unwrap();
        assert_eq!(edge.source, "hyp:late-screen-time");
        assert_eq!(edge.weight, cfg.hypothesis_weight);
        assert!(once.reachable("hyp:late-screen-time", "tired").unwrap());

        let (twice, again) = insert_hypothesized_link(&once, "late screen time", "sleep", &cfg).unwrap();
        assert_eq!(again, edge);
        assert_eq!(twice.version(), once.version() + 1);
        assert_eq!(twice.to_json().replace(&format!("\"version\": {}", twice.version()), ""),
                   once.to_json().replace(&format!("\"version\": {}", once.version()), ""));

        let restored = once
            .apply_intervention(&Intervention::new().remove_node("hyp:late-screen-time"))
            .unwrap();
        for a in ["sleep", "tired"] {
            for b in ["sleep", "tired"] {
                assert_eq!(restored.reachable(a, b).unwrap(), g.reachable(a, b).unwrap());
            }
        }
    }
}
