mod common;

use common::{corpus, scenario, Fixture};
use csm::agent::AgentKind;
use csm::eval::run_corpus;

#[test]
fn fatigue_graph_is_fully_ingested() {
    let g = scenario("afternoon_fatigue").build_graph().unwrap();
    assert!(g.node_count() >= 9, "{} nodes", g.node_count());
    assert!(g.node("irregular-sleep").is_some());
    assert!(g.node("afternoon-fatigue").is_some());
}

#[test]
fn full_agent_names_bedtime_and_caffeine() {
    let fx = Fixture::new();
    let run = fx.run(&scenario("afternoon_fatigue"), AgentKind::Csm);
    let text = run.response.text.to_lowercase();
    assert!(text.contains("bedtime"));
    assert!(text.contains("caffeine"));
    let plan = run.plan.unwrap();
    assert_eq!(plan.schema_id, "fatigue_reduction");
    assert!(plan.verified);
    for step in plan.texts() {
        assert!(run.response.text.contains(step), "missing step {step:?}");
    }
    assert_eq!(run.response.trace.len(), plan.steps.len());
}

#[test]
fn memory_only_agent_skips_reasoning() {
    let fx = Fixture::new();
    let run = fx.run(&scenario("afternoon_fatigue"), AgentKind::MemoryOnly);
    assert!(!run.response.text.contains("→"));
    assert!(run.plan.is_none());
    assert!(!run.reference_factors.is_empty());
}

#[test]
fn ablated_agent_names_causes_without_schema_plan() {
    let fx = Fixture::new();
    let run = fx.run(&scenario("afternoon_fatigue"), AgentKind::AblatedCsm);
    assert!(run.response.text.contains("Because"));
    assert!(!run.response.text.contains("consistent bedtime before"));
}

#[test]
fn dog_query_falls_back_to_experiments() {
    let fx = Fixture::new();
    let run = fx.run(&scenario("dog_name"), AgentKind::Csm);
    assert!(run.analysis.mapping.fallback_used);
    let plan = run.plan.unwrap();
    assert!(plan.hypothesis_mode);
    assert!(plan.steps.len() <= 5);
}

#[test]
fn two_scenarios_three_agents_six_rows() {
    let fx = Fixture::new();
    let picked: Vec<_> = corpus().into_iter().filter(|s| s.id == "afternoon_fatigue" || s.id == "dog_name").collect();
    let report = run_corpus(&picked, &AgentKind::ALL, &fx.agent()).unwrap();
    assert_eq!(report.rows.len(), 6);
    assert!(report.ordering_violations().is_empty());
}
