use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::paths::{explanatory, surviving_explanations, CausalPath};
use crate::graph::{GraphError, PersonalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    /// Removing the node leaves no explanation of any target.
    Critical,
    Contributory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub node_id: String,
    pub criticality: Criticality,
}

/// Labels the non-target nodes on the top `k_paths` scored explanations by
/// deleting each one and re-enumerating.
///
/// When a removal leaves explanations behind, the best surviving scored one
/// is the fallback and its new nodes join as secondary factors. Critical
/// factors come first; otherwise the order is discovery order along the
/// ranked paths.
pub fn counterfactual_factors(
    graph: &PersonalGraph,
    scored: &[CausalPath],
    targets: &[String],
    hop_limit: usize,
    k_paths: usize,
) -> Result<Vec<Factor>, GraphError> {
    let target_set: BTreeSet<&str> = targets.iter().map(String::as_str).collect();
    for id in scored.iter().flat_map(|p| &p.nodes) {
        if !graph.contains_node(id) {
            return Err(GraphError::UnknownElement(format!("node `{id}`")));
        }
    }
    let fresh = |id: &String, seen: &[String]| !target_set.contains(id.as_str()) && !seen.contains(id);

    let mut order: Vec<String> = Vec::new();
    for path in explanatory(graph, scored, targets, hop_limit).take(k_paths) {
        for id in &path.nodes {
            if fresh(id, &order) {
                order.push(id.clone());
            }
        }
    }

    let mut factors = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let id = order[i].clone();
        let removed = BTreeSet::from([id.clone()]);
        let critical = surviving_explanations(graph, targets, hop_limit, &removed)?.is_empty();
        if !critical {
            let fallback = explanatory(graph, scored, targets, hop_limit).find(|p| !p.contains(&id));
            for n in fallback.into_iter().flat_map(|p| &p.nodes) {
                if fresh(n, &order) {
                    order.push(n.clone());
                }
            }
        }
        factors.push(Factor {
            node_id: id,
            criticality: if critical {
                Criticality::Critical
            } else {
                Criticality::Contributory
            },
        });
        i += 1;
    }
    factors.sort_by_key(|f| f.criticality);
    Ok(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CausalEdge, EventNode, Intervention, Modality, Relation};
    use crate::reasoner::paths::enumerate_paths;

    fn graph(ids: &[&str], edges: &[(&str, &str, f64)]) -> PersonalGraph {
        let mut g = PersonalGraph::new();
        for id in ids {
            g.add_event(EventNode::new(*id, *id, Modality::Other)).unwrap();
        }
        for (s, t, w) in edges {
            g.add_edge(CausalEdge::new(*s, *t, Relation::Causes, *w)).unwrap();
        }
        g
    }

    /// Scores paths by strength only, so tests control the ranking.
    fn ranked(g: &PersonalGraph, targets: &[String], hops: usize) -> Vec<CausalPath> {
        let mut paths = enumerate_paths(g, targets, hops).unwrap();
        for p in &mut paths {
            p.score = p.strength();
        }
        paths.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.nodes.cmp(&b.nodes)));
        paths
    }

    fn sorted(factors: &[Factor]) -> Vec<(String, Criticality)> {
        let mut v: Vec<_> = factors.iter().map(|f| (f.node_id.clone(), f.criticality)).collect();
        v.sort();
        v
    }

    /// Independent check: a node is critical iff every maximal backward chain
    /// of the original graph that starts outside the targets passes through
    /// it. Chains are grown edge by edge from each target.
    fn oracle(g: &PersonalGraph, t: &[String], hops: usize, id: &str) -> Criticality {
        let mut chains: Vec<Vec<String>> = t.iter().map(|x| vec![x.clone()]).collect();
        let mut maximal = Vec::new();
        while let Some(chain) = chains.pop() {
            let head = chain[0].clone();
            let preds: Vec<String> = g
                .incoming(&head)
                .map(|e| e.source.clone())
                .filter(|s| !chain.contains(s))
                .collect();
            let stuck = chain.len() > hops || g.incoming(&head).all(|e| chain.contains(&e.source));
            if chain.len() > 1 && stuck && !t.contains(&head) {
                maximal.push(chain.clone());
            }
            if chain.len() <= hops {
                for p in preds {
                    let mut c = vec![p];
                    c.extend(chain.iter().cloned());
                    chains.push(c);
                }
            }
        }
        if maximal.iter().all(|c| c.iter().any(|n| n == id)) {
            Criticality::Critical
        } else {
            Criticality::Contributory
        }
    }

    #[test]
    fn sole_chain_is_all_critical() {
        let g = graph(&["a", "b", "c"], &[("a", "b", 0.8), ("b", "c", 0.5)]);
        let t = vec!["c".to_string()];
        let f = counterfactual_factors(&g, &ranked(&g, &t, 3), &t, 3, 5).unwrap();
        assert_eq!(
            sorted(&f),
            [("a".into(), Criticality::Critical), ("b".into(), Criticality::Critical)]
        );
    }

    #[test]
    fn diamond_root_is_critical_and_branches_contributory() {
        let g = graph(
            &["a", "b", "c", "d"],
            &[("a", "b", 0.8), ("a", "c", 0.8), ("b", "d", 0.8), ("c", "d", 0.8)],
        );
        let t = vec!["d".to_string()];
        let f = counterfactual_factors(&g, &ranked(&g, &t, 3), &t, 3, 5).unwrap();
        assert_eq!(f[0], Factor { node_id: "a".into(), criticality: Criticality::Critical });
        assert_eq!(
            sorted(&f),
            [
                ("a".into(), Criticality::Critical),
                ("b".into(), Criticality::Contributory),
                ("c".into(), Criticality::Contributory),
            ]
        );
        for (id, c) in sorted(&f) {
            assert_eq!(oracle(&g, &t, 3, &id), c, "{id}");
        }
    }

    #[test]
    fn no_paths_no_factors() {
        let g = graph(&["a", "b"], &[]);
        let t = vec!["b".to_string()];
        assert!(counterfactual_factors(&g, &[], &t, 3, 5).unwrap().is_empty());
    }

    #[test]
    fn secondary_factor_surfaces_after_removal() {
        // poor sleep dominates; lack of exercise is a weaker separate cause
        // outside the top-1 path.
        let g = graph(
            &["sleep", "exercise", "fatigue"],
            &[("sleep", "fatigue", 0.9), ("exercise", "fatigue", 0.4)],
        );
        let t = vec!["fatigue".to_string()];
        let f = counterfactual_factors(&g, &ranked(&g, &t, 3), &t, 3, 1).unwrap();
        let ids: Vec<_> = f.iter().map(|f| (f.node_id.as_str(), f.criticality)).collect();
        assert_eq!(
            ids,
            [("sleep", Criticality::Contributory), ("exercise", Criticality::Contributory)]
        );
    }

    #[test]
    fn critical_removal_disconnects() {
        let g = graph(
            &["late", "caffeine", "sleep", "fatigue"],
            &[("late", "sleep", 0.8), ("caffeine", "sleep", 0.5), ("sleep", "fatigue", 0.9)],
        );
        let t = vec!["fatigue".to_string()];
        let f = counterfactual_factors(&g, &ranked(&g, &t, 3), &t, 3, 5).unwrap();
        for factor in &f {
            let cut = g.without(&Intervention::new().remove_node(factor.node_id.clone()));
            let left = enumerate_paths(&cut, &t, 3).unwrap();
            if factor.criticality == Criticality::Critical {
                assert!(left.is_empty(), "{}", factor.node_id);
            }
            assert_eq!(oracle(&g, &t, 3, &factor.node_id), factor.criticality);
        }
        assert_eq!(f[0].node_id, "sleep");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn labels_match_oracle(
                n in 2usize..=7,
                raw in proptest::collection::vec((0usize..7, 0usize..7, 0.05f64..=1.0), 0..=14),
                hops in 1usize..=3,
            ) {
                let mut g = PersonalGraph::new();
                for i in 0..n {
                    g.add_event(EventNode::new(format!("n{i}"), format!("n{i}"), Modality::Other)).unwrap();
                }
                for (s, t, w) in raw {
                    let (s, t) = (s % n, t % n);
                    if s != t {
                        let _ = g.add_edge(CausalEdge::new(format!("n{s}"), format!("n{t}"), Relation::Causes, w));
                    }
                }
                let t = vec![format!("n{}", n - 1)];
                let scored = ranked(&g, &t, hops);
                let f = counterfactual_factors(&g, &scored, &t, hops, usize::MAX).unwrap();
                for factor in &f {
                    prop_assert_eq!(oracle(&g, &t, hops, &factor.node_id), factor.criticality);
                }
                let mut ids: Vec<_> = f.iter().map(|f| f.node_id.clone()).collect();
                ids.dedup();
                prop_assert_eq!(ids.len(), f.len());
            }
        }
    }
}
