//! Full reasoner run on the afternoon-fatigue scenario: goal mapping, path
//! enumeration and scoring, counterfactual labels and reflection.

use csm::eval::Scenario;
use csm::reasoner::Reasoner;
use csm::{Config, HashEmbedder, TranscriptClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus/afternoon_fatigue.json"))?;
    let graph = scenario.build_graph()?;
    let embedder = HashEmbedder::default();
    let config = Config::default();
    let transcript = TranscriptClient::bundled();

    let analysis = Reasoner::new(&embedder, &config).with_generator(&transcript).analyze(&graph, &scenario.query)?;

    println!("query: {}", scenario.query);
    for (id, sim) in &analysis.mapping.matched_nodes {
        println!("target {id} ({sim:.3})");
    }
    for path in analysis.factors.top_paths(&analysis.graph) {
        println!("{:.3}  {}", path.score, path.describe(&analysis.graph));
    }
    for f in &analysis.factors.factors {
        println!("{:?}: {}", f.criticality, f.node_id);
    }
    if let Some(notes) = &analysis.factors.reflection_notes {
        println!("reflection: {notes}");
    }
    Ok(())
}
