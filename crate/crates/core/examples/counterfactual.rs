//! Counterfactual labelling on a diamond: a root feeding two parallel
//! branches is critical, each branch alone is only contributory.

use std::collections::BTreeSet;

use csm::graph::{Modality, Relation};
use csm::reasoner::{counterfactual_factors, enumerate_paths, surviving_explanations};
use csm::{CausalEdge, EventNode, PersonalGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = PersonalGraph::new();
    for (id, label) in [("stress", "work stress"), ("snacks", "late snacks"), ("screens", "late screens"), ("sleep", "poor sleep")] {
        g.add_event(EventNode::new(id, label, Modality::Other))?;
    }
    for (s, t, w) in [("stress", "snacks", 0.6), ("stress", "screens", 0.7), ("snacks", "sleep", 0.5), ("screens", "sleep", 0.8)] {
        g.add_edge(CausalEdge::new(s, t, Relation::Causes, w))?;
    }

    let targets = vec!["sleep".to_owned()];
    let paths = enumerate_paths(&g, &targets, 3)?;
    for f in counterfactual_factors(&g, &paths, &targets, 3, 5)? {
        let removed = BTreeSet::from([f.node_id.clone()]);
        let left = surviving_explanations(&g, &targets, 3, &removed)?.len();
        println!("{:<8} {:?}, {left} explanation(s) survive its removal", f.node_id, f.criticality);
    }
    Ok(())
}
