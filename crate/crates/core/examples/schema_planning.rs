//! Retrieves a plan schema for a query, instantiates it from the reasoner's
//! factors and verifies it by simulated intervention.

use csm::eval::Scenario;
use csm::planner::{Planner, RuleSet, SchemaLibrary};
use csm::reasoner::Reasoner;
use csm::{Config, HashEmbedder, TranscriptClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus/screen_sleep.json"))?;
    let graph = scenario.build_graph()?;
    let embedder = HashEmbedder::default();
    let config = Config::default();
    let library = SchemaLibrary::bundled();
    let rules = RuleSet::bundled();
    let transcript = TranscriptClient::bundled();

    let (schema, sim) = library.retrieve(&embedder, &scenario.query, config.tau_schema)?;
    println!("schema {} (similarity {sim:.3})", schema.id);

    let analysis = Reasoner::new(&embedder, &config).with_generator(&transcript).analyze(&graph, &scenario.query)?;
    let plan = Planner::new(&library, &rules, &embedder, &config)
        .with_generator(&transcript)
        .plan(&scenario.query, &analysis, &scenario.profile_map())?;
    println!("verified: {}", plan.verified);
    for (i, step) in plan.steps.iter().enumerate() {
        let target = step.addresses.as_deref().unwrap_or("-");
        println!("{}. {}  [{target}]", i + 1, step.text);
    }
    Ok(())
}
