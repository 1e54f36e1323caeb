//! Assembles the generation prompt for a query and shows the deterministic
//! answer with its trace links.

use csm::agent::{Agent, AgentKind};
use csm::eval::Scenario;
use csm::orchestrator::{render_prompt, CONTEXT_BLOCK_TEMPLATE};
use csm::planner::{RuleSet, SchemaLibrary};
use csm::{Config, HashEmbedder, TranscriptClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus/afternoon_fatigue.json"))?;
    let embedder = HashEmbedder::default();
    let config = Config::default();
    let library = SchemaLibrary::bundled();
    let rules = RuleSet::bundled();
    let transcript = TranscriptClient::bundled();
    let agent = Agent::new(&embedder, &config, &library, &rules).with_reasoning(&transcript);

    let graph = scenario.build_graph()?;
    let index = scenario.build_index(&embedder)?;
    let run = agent.answer(AgentKind::Csm, &graph, &index, &scenario.profile_map(), &scenario.query)?;

    println!("{}", render_prompt(&run.context, CONTEXT_BLOCK_TEMPLATE)?);
    println!("---- answer\n{}", run.response.text);
    for link in &run.response.trace {
        println!("step {} <- factors {:?}, memory {:?}", link.step_index + 1, link.factor_ids, link.memory_ids);
    }
    Ok(())
}
