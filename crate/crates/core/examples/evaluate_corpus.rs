//! Scores all three agents on the bundled corpus and prints the report.
//!
//! `cargo run --example evaluate_corpus -- [corpus-dir]`

use csm::agent::{Agent, AgentKind};
use csm::eval::{load_corpus, run_corpus};
use csm::planner::{RuleSet, SchemaLibrary};
use csm::{Config, HashEmbedder, TranscriptClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus").to_owned());
    let corpus = load_corpus(&dir)?;

    let embedder = HashEmbedder::default();
    let config = Config::default();
    let library = SchemaLibrary::bundled();
    let rules = RuleSet::bundled();
    let transcript = TranscriptClient::bundled();
    let agent = Agent::new(&embedder, &config, &library, &rules).with_reasoning(&transcript);

    let report = run_corpus(&corpus, &AgentKind::ALL, &agent)?;
    print!("{}", report.to_table());
    let violations = report.ordering_violations();
    if violations.is_empty() {
        println!("\nCRA ordering csm >= ablated_csm >= memory_only = 0 holds on every scenario");
    } else {
        println!("\nCRA ordering fails on: {}", violations.join(", "));
    }
    Ok(())
}
