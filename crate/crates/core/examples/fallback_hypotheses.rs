//! A query the personal graph knows nothing about: goal mapping falls back
//! to generated hypotheses and the planner drafts an experimental plan.
//! Replies come from the bundled transcript, so no service is needed.

use csm::agent::{Agent, AgentKind};
use csm::eval::Scenario;
use csm::planner::{RuleSet, SchemaLibrary};
use csm::{Config, HashEmbedder, TranscriptClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus/dog_name.json"))?;
    let embedder = HashEmbedder::default();
    let config = Config::default();
    let library = SchemaLibrary::bundled();
    let rules = RuleSet::bundled();
    let transcript = TranscriptClient::bundled();
    let agent = Agent::new(&embedder, &config, &library, &rules).with_reasoning(&transcript);

    let graph = scenario.build_graph()?;
    let index = scenario.build_index(&embedder)?;
    let run = agent.answer(AgentKind::Csm, &graph, &index, &scenario.profile_map(), &scenario.query)?;

    let mapping = &run.analysis.mapping;
    println!("fallback used: {}", mapping.fallback_used);
    println!("hypotheses: {:?}", mapping.hypothesized_nodes);
    if let Some(plan) = &run.plan {
        println!("hypothesis mode: {}", plan.hypothesis_mode);
        for (i, step) in plan.steps.iter().enumerate() {
            println!("{}. {}{}", i + 1, step.text, if step.experimental { " (experimental)" } else { "" });
        }
    }
    Ok(())
}
