//! Records the bundled replay transcript: every corpus scenario is answered
//! by every agent against a scripted client, and each exchange is saved
//! under its prompt hash.
//!
//! `cargo run --example scripted_transcript -- [out.json]`

use csm::agent::{Agent, AgentKind};
use csm::eval::load_corpus;
use csm::generation::{RecordingClient, ScriptedClient};
use csm::planner::{RuleSet, SchemaLibrary};
use csm::{Config, HashEmbedder};

const DOG_QUERY: &str = "\"What should I name my dog?\"";

const DOG_CAUSES: &str = "\
- the dog's personality and behaviour
- the dog's appearance and breed
- names everyone in the household likes";

const DOG_PLAN: &str = "\
1. Observe and connect: spend two or three days noting your dog's personality, looks and quirks.
2. Brainstorm name categories that fit, such as appearance, personality, food or nature names.
3. Generate and shortlist: say each idea aloud, drop names that sound like commands, keep three to five.
4. Test the names for a day and watch which one your dog responds to.
5. Finalize and commit: use the chosen name consistently and tell family and friends.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let out = std::env::args().nth(1).unwrap_or_else(|| format!("{root}/data/transcript.json"));

    let script = ScriptedClient::new()
        .on("Answer YES or NO", "YES. Addressing these factors targets the recorded causes directly.")
        .on(format!("{DOG_QUERY}\nTheir personal records"), DOG_CAUSES)
        .on(format!("{DOG_QUERY}\nThere is little personal data"), DOG_PLAN)
        .otherwise("");
    let recorder = RecordingClient::new(script);

    let embedder = HashEmbedder::default();
    let config = Config::default();
    let library = SchemaLibrary::bundled();
    let rules = RuleSet::bundled();
    let agent = Agent::new(&embedder, &config, &library, &rules).with_reasoning(&recorder);

    let corpus = load_corpus(format!("{root}/data/corpus"))?;
    for scenario in &corpus {
        let graph = scenario.build_graph()?;
        let index = scenario.build_index(&embedder)?;
        for kind in AgentKind::ALL {
            agent.answer(kind, &graph, &index, &scenario.profile_map(), &scenario.query)?;
        }
    }

    let transcript = recorder.to_transcript();
    std::fs::write(&out, transcript.to_json())?;
    println!("recorded {} exchanges from {} scenarios into {out}", transcript.len(), corpus.len());
    Ok(())
}
