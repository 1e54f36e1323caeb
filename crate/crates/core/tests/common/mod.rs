#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use csm::agent::{Agent, AgentKind, AgentRun};
use csm::eval::{load_corpus, Scenario};
use csm::graph::{Modality, Relation};
use csm::planner::{RuleSet, SchemaLibrary};
use csm::{CausalEdge, Config, EventNode, HashEmbedder, PersonalGraph, TranscriptClient};
use rand::rngs::StdRng;
use rand::RngExt;

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn corpus() -> Vec<Scenario> {
    load_corpus(data("corpus")).unwrap()
}

pub fn scenario(id: &str) -> Scenario {
    Scenario::load(data(&format!("corpus/{id}.json"))).unwrap()
}

/// Embedder, configuration, bundled planner data and the replay transcript.
pub struct Fixture {
    pub embedder: HashEmbedder,
    pub config: Config,
    pub library: SchemaLibrary,
    pub rules: RuleSet,
    pub transcript: TranscriptClient,
}

impl Fixture {
    pub fn new() -> Self {
        Self {
            embedder: HashEmbedder::default(),
            config: Config::default(),
            library: SchemaLibrary::bundled(),
            rules: RuleSet::bundled(),
            transcript: TranscriptClient::bundled(),
        }
    }

    pub fn agent(&self) -> Agent<'_> {
        Agent::new(&self.embedder, &self.config, &self.library, &self.rules).with_reasoning(&self.transcript)
    }

    pub fn run(&self, s: &Scenario, kind: AgentKind) -> AgentRun {
        let graph = s.build_graph().unwrap();
        let index = s.build_index(&self.embedder).unwrap();
        self.agent().answer(kind, &graph, &index, &s.profile_map(), &s.query).unwrap()
    }
}

/// Random graph over `n0..n{k}` with up to `max_edges` directed edges;
/// cycles are allowed, self-loops are not.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize, max_edges: usize) -> PersonalGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut g = PersonalGraph::new();
    for i in 0..n {
        g.add_event(EventNode::new(format!("n{i}"), format!("node {i}"), Modality::Other)).unwrap();
    }
    for _ in 0..rng.random_range(0..=max_edges) {
        let (s, t) = (rng.random_range(0..n), rng.random_range(0..n));
        if s != t && g.edge(&format!("n{s}"), &format!("n{t}")).is_none() {
            let w = rng.random_range(1..=100) as f64 / 100.0;
            g.add_edge(CausalEdge::new(format!("n{s}"), format!("n{t}"), Relation::Causes, w)).unwrap();
        }
    }
    g
}

/// Every simple path of 1..=hops edges ending at a target, found by growing
/// all node sequences forwards; sorted by node ids.
pub fn brute_force_paths(g: &PersonalGraph, targets: &[String], hops: usize) -> Vec<Vec<String>> {
    let ids: Vec<String> = g.node_ids().map(str::to_owned).collect();
    let mut frontier: Vec<Vec<String>> = ids.iter().map(|i| vec![i.clone()]).collect();
    let mut out = Vec::new();
    for _ in 0..hops {
        let mut next = Vec::new();
        for seq in &frontier {
            for id in &ids {
                if !seq.contains(id) && g.edge(seq.last().unwrap(), id).is_some() {
                    let mut s = seq.clone();
                    s.push(id.clone());
                    if targets.contains(id) {
                        out.push(s.clone());
                    }
                    next.push(s);
                }
            }
        }
        frontier = next;
    }
    out.sort();
    out.dedup();
    out
}

/// Random words drawn from a small vocabulary, so texts overlap often.
pub fn random_text(rng: &mut StdRng) -> String {
    const WORDS: [&str; 24] = [
        "sleep", "coffee", "late", "tired", "afternoon", "energy", "walk", "stress", "work", "bedtime", "screen",
        "lunch", "focus", "fog", "night", "owl", "meeting", "deadline", "water", "snack", "run", "morning", "dog",
        "name",
    ];
    let n = rng.random_range(1..=8);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn profile(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
