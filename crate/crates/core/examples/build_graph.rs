//! Builds a small personal causal graph by hand, queries reachability,
//! applies a counterfactual intervention and prints the DOT export.

use csm::graph::{Intervention, Modality, Provenance, Relation};
use csm::{CausalEdge, EventNode, PersonalGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = PersonalGraph::new();
    g.add_event(EventNode::new("coffee", "Had a cappuccino at 3 PM", Modality::Intake).with_timestamp("2025-03-04T15:00:00Z"))?;
    g.add_event(EventNode::new("late-sleep", "Slept from 1:30 AM to 7:00 AM", Modality::Sleep))?;
    g.add_event(EventNode::new("fog", "Felt mentally foggy at 2 PM", Modality::Mood))?;
    g.add_edge(CausalEdge::new("coffee", "late-sleep", Relation::Aggravates, 0.5))?;
    g.add_edge(CausalEdge::new("late-sleep", "fog", Relation::Causes, 0.8).with_provenance(Provenance::Learned))?;

    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    println!("coffee reaches fog: {}", g.reachable("coffee", "fog")?);

    let without_sleep = g.apply_intervention(&Intervention::new().remove_node("late-sleep"))?;
    println!("after removing late-sleep: {}", without_sleep.reachable("coffee", "fog")?);

    println!("\n{}", g.to_dot());
    Ok(())
}
