use std::collections::BTreeMap;

use super::paths::CausalPath;
use super::ReasonError;
use crate::embed::{cosine, Embedder};
use crate::generation::GenerationClient;
use crate::graph::PersonalGraph;

/// Assigns each candidate path a plausibility score in `[0, 1]`.
pub trait PathScorer {
    fn score(
        &self,
        query: &str,
        paths: &[CausalPath],
        graph: &PersonalGraph,
    ) -> Result<Vec<f64>, ReasonError>;
}

/// `relevance × strength × decay^(edges − 1)` where relevance is the cosine
/// between the query and the path's joined labels and strength is the
/// product of edge weights.
pub struct HeuristicScorer<'a> {
    embedder: &'a dyn Embedder,
    decay: f64,
}

impl<'a> HeuristicScorer<'a> {
    pub fn new(embedder: &'a dyn Embedder, decay: f64) -> Self {
        Self { embedder, decay }
    }
}

impl PathScorer for HeuristicScorer<'_> {
    fn score(
        &self,
        query: &str,
        paths: &[CausalPath],
        graph: &PersonalGraph,
    ) -> Result<Vec<f64>, ReasonError> {
        let q = self.embedder.embed(query)?;
        paths
            .iter()
            .map(|p| {
                let text = p.labels(graph).join(" ");
                let relevance = cosine(&q, &self.embedder.embed(&text)?)?.clamp(0.0, 1.0);
                let penalty = self.decay.powi(p.edge_count() as i32 - 1);
                Ok((relevance * p.strength() * penalty).clamp(0.0, 1.0))
            })
            .collect()
    }
}

/// Asks a generation client to judge the numbered chains. The reply must
/// contain exactly one `index: score` line per chain.
pub struct GenerationScorer<'a> {
    client: &'a dyn GenerationClient,
}

impl<'a> GenerationScorer<'a> {
    pub fn new(client: &'a dyn GenerationClient) -> Self {
        Self { client }
    }

    pub fn prompt(query: &str, paths: &[CausalPath], graph: &PersonalGraph) -> String {
        let mut prompt = format!(
            "Rate how plausibly each causal chain explains the user's concern, from 0 (implausible) to 1 (very plausible).\n\
             Concern: \"{query}\"\nChains:\n"
        );
        for (i, p) in paths.iter().enumerate() {
            prompt.push_str(&format!("{}. {}\n", i + 1, p.describe(graph)));
        }
        prompt.push_str("Reply with one line per chain, formatted \"index: score\".\n");
        prompt
    }
}

impl PathScorer for GenerationScorer<'_> {
    fn score(
        &self,
        query: &str,
        paths: &[CausalPath],
        graph: &PersonalGraph,
    ) -> Result<Vec<f64>, ReasonError> {
        if paths.is_empty() {
            return Ok(Vec::new());
        }
        let reply = self
            .client
            .generate(&Self::prompt(query, paths, graph))
            .map_err(|e| ReasonError::ScorerProtocol(e.to_string()))?;
        parse_scores(&reply, paths.len())
    }
}

pub(crate) fn parse_scores(reply: &str, expected: usize) -> Result<Vec<f64>, ReasonError> {
    let mut scores = BTreeMap::new();
    for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let bad = || ReasonError::ScorerProtocol(format!("malformed score line `{line}`"));
        let (idx, value) = line.split_once(':').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if !(1..=expected).contains(&idx) || !(0.0..=1.0).contains(&value) {
            return Err(bad());
        }
        if scores.insert(idx, value).is_some() {
            return Err(ReasonError::ScorerProtocol(format!("duplicate score for chain {idx}")));
        }
    }
    if scores.len() != expected {
        return Err(ReasonError::ScorerProtocol(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    Ok(scores.into_values().collect())
}

/// Scores `paths` and sorts them best first; ties keep lexicographic
/// node-id order.
pub fn score_paths(
    mut paths: Vec<CausalPath>,
    query: &str,
    graph: &PersonalGraph,
    scorer: &dyn PathScorer,
) -> Result<Vec<CausalPath>, ReasonError> {
    let scores = scorer.score(query, &paths, graph)?;
    if scores.len() != paths.len() {
        return Err(ReasonError::ScorerProtocol(format!(
            "scorer returned {} scores for {} paths",
            scores.len(),
            paths.len()
        )));
    }
    for (p, s) in paths.iter_mut().zip(scores) {
        if !(0.0..=1.0).contains(&s) {
            return Err(ReasonError::ScorerProtocol(format!("score {s} outside [0, 1]")));
        }
        p.score = s;
    }
    paths.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.nodes.cmp(&b.nodes)));
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::generation::ScriptedClient;
    use crate::graph::{CausalEdge, EventNode, Modality, Relation};
    use crate::reasoner::paths::enumerate_paths;

    fn sleep_graph() -> PersonalGraph {
        let mut g = PersonalGraph::new();
        g.add_event(EventNode::new("late", "late bedtime", Modality::Sleep)).unwrap();
        g.add_event(EventNode::new("fatigue", "fatigue next day", Modality::Mood)).unwrap();
        g.add_event(EventNode::new("fog", "afternoon brain fog", Modality::Mood)).unwrap();
        g.add_edge(CausalEdge::new("late", "fatigue", Relation::Causes, 0.8)).unwrap();
        g.add_edge(CausalEdge::new("fatigue", "fog", Relation::LeadsTo, 0.5)).unwrap();
        g
    }

    #[test]
    fn single_edge_score_is_weight_times_relevance() {
        let e = HashEmbedder::default();
        let g = sleep_graph();
        let paths = enumerate_paths(&g, &["fatigue".into()], 3).unwrap();
        let query = "why am I so tired the day after a late bedtime";
        let scored = score_paths(paths, query, &g, &HeuristicScorer::new(&e, 0.9)).unwrap();
        let r = e.similarity(query, "late bedtime fatigue next day").unwrap();
        assert!(r > 0.0);
        assert!((scored[0].score - 0.8 * r).abs() < 1e-12);
    }

    #[test]
    fn two_edge_strength_and_decay() {
        let e = HashEmbedder::default();
        let g = sleep_graph();
        let paths = enumerate_paths(&g, &["fog".into()], 3).unwrap();
        let long = paths.iter().find(|p| p.edge_count() == 2).unwrap();
        assert!((long.strength() - 0.40).abs() < 1e-12);
        let query = "brain fog";
        let scored = score_paths(paths.clone(), query, &g, &HeuristicScorer::new(&e, 0.9)).unwrap();
        let long = scored.iter().find(|p| p.edge_count() == 2).unwrap();
        let r = e.similarity(query, "late bedtime fatigue next day afternoon brain fog").unwrap();
        assert!((long.score - r * 0.40 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_relevance_falls_back_to_lexicographic_order() {
        let e = HashEmbedder::default();
        let g = sleep_graph();
        let paths = enumerate_paths(&g, &["fog".into(), "fatigue".into()], 3).unwrap();
        let scored = score_paths(paths.clone(), "", &g, &HeuristicScorer::new(&e, 0.9)).unwrap();
        assert!(scored.iter().all(|p| p.score == 0.0));
        let order: Vec<_> = scored.iter().map(|p| p.nodes.clone()).collect();
        let mut expected: Vec<_> = paths.iter().map(|p| p.nodes.clone()).collect();
        expected.sort();
        assert_eq!(order, expected);
    }

    #[test]
    fn generation_scorer_parses_strictly() {
        let g = sleep_graph();
        let paths = enumerate_paths(&g, &["fog".into()], 3).unwrap();
        assert_eq!(paths.len(), 2);
        let ok = ScriptedClient::new().otherwise("2: 0.25\n1: 0.75\n");
        let scored = score_paths(paths.clone(), "q", &g, &GenerationScorer::new(&ok)).unwrap();
        assert_eq!(scored[0].nodes, ["fatigue", "fog"]);
        assert_eq!(scored[0].score, 0.75);

        for reply in ["1: 0.5", "1: 0.5\n2: high", "1: 0.5\n2: 1.5", "1: 0.5\n1: 0.5", "0: 1\n1: 1"] {
            let bad = ScriptedClient::new().otherwise(reply);
            assert!(
                matches!(
                    score_paths(paths.clone(), "q", &g, &GenerationScorer::new(&bad)),
                    Err(ReasonError::ScorerProtocol(_))
                ),
                "{reply}"
            );
        }
    }

    #[test]
    fn generation_scorer_prompt_numbers_chains() {
        let g = sleep_graph();
        let paths = enumerate_paths(&g, &["fog".into()], 3).unwrap();
        let prompt = GenerationScorer::prompt("q", &paths, &g);
        assert!(prompt.contains("1. fatigue next day → afternoon brain fog\n"));
        assert!(prompt.contains("2. late bedtime → fatigue next day → afternoon brain fog\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn chain_graph(weights: &[f64]) -> PersonalGraph {
            let mut g = PersonalGraph::new();
            let labels = ["late bedtime", "poor sleep", "fatigue", "brain fog", "low focus"];
            for (i, label) in labels.iter().enumerate().take(weights.len() + 1) {
                g.add_event(EventNode::new(format!("n{i}"), *label, Modality::Other)).unwrap();
            }
            for (i, w) in weights.iter().enumerate() {
                g.add_edge(CausalEdge::new(format!("n{i}"), format!("n{}", i + 1), Relation::Causes, *w))
                    .unwrap();
            }
            g
        }

        proptest! {
            #[test]
            fn raising_a_weight_never_lowers_the_score(
                weights in proptest::collection::vec(0.0f64..=1.0, 1..=4),
                which in 0usize..4,
                bump in 0.0f64..=1.0,
            ) {
                let e = HashEmbedder::default();
                let scorer = HeuristicScorer::new(&e, 0.9);
                let which = which % weights.len();
                let mut raised = weights.clone();
                raised[which] = (raised[which] + bump).min(1.0);
                let target = format!("n{}", weights.len());
                let score_of = |w: &[f64]| {
                    let g = chain_graph(w);
                    let paths = enumerate_paths(&g, std::slice::from_ref(&target), 4).unwrap();
                    let full = paths.into_iter().find(|p| p.edge_count() == w.len()).unwrap();
                    scorer.score("tired and foggy", &[full], &g).unwrap()[0]
                };
                prop_assert!(score_of(&raised) >= score_of(&weights));
            }

            #[test]
            fn uniform_scaling_keeps_ranking_within_length_class(lambda in 0.01f64..=1.0) {
                let e = HashEmbedder::default();
                let scorer = HeuristicScorer::new(&e, 0.9);
                let mut g = PersonalGraph::new();
                for (id, label) in [("a", "late bedtime"), ("b", "coffee at 4pm"), ("c", "screen time"), ("t", "tired")] {
                    g.add_event(EventNode::new(id, label, Modality::Other)).unwrap();
                }
                let base = [("a", 0.8), ("b", 0.5), ("c", 0.6)];
                let mut scaled = g.clone();
                for (s, w) in base {
                    g.add_edge(CausalEdge::new(s, "t", Relation::Causes, w)).unwrap();
                    scaled.add_edge(CausalEdge::new(s, "t", Relation::Causes, w * lambda)).unwrap();
                }
                let rank = |g: &PersonalGraph| -> Vec<Vec<String>> {
                    let paths = enumerate_paths(g, &["t".into()], 1).unwrap();
                    score_paths(paths, "tired after a late bedtime", g, &scorer)
                        .unwrap()
                        .into_iter()
                        .map(|p| p.nodes)
                        .collect()
                };
                prop_assert_eq!(rank(&g), rank(&scaled));
            }
        }
    }
}
