//! The `csm` command line. [`run`] takes its streams as arguments, so the
//! whole interface can be driven from tests.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentKind, AgentRun};
use crate::config::{Config, ConfigError};
use crate::embed::{embedder_from_env, Embedder, MemoryKind, VectorIndex};
use crate::eval::{load_corpus, run_corpus, EvalError, Scenario};
use crate::generation::{GenerationClient, HttpGenerationClient, TranscriptClient};
use crate::graph::{GraphError, PersonalGraph};
use crate::orchestrator::DEFAULT_SYSTEM_TEMPLATE;
use crate::planner::{PlanError, RuleSet, SchemaLibrary};
use crate::reasoner::Criticality;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISSING_STATE: i32 = 3;

const GRAPH_FILE: &str = "graph.json";
const MEMORY_FILE: &str = "memory.json";
const BUNDLED_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    MissingState(String),
    #[error("{0}")]
    Assertion(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::MissingState(_) => EXIT_MISSING_STATE,
            CliError::Assertion(_) | CliError::Failed(_) => EXIT_ASSERTION,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Parse { .. } | EvalError::Io { .. } | EvalError::InvalidScenario { .. } | EvalError::EmptyCorpus => {
                CliError::Input(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "csm", version, about = "Personal causal memory assistant")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding the ingested graph and memory.
    #[arg(long, global = true, default_value = ".csm")]
    pub state: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the graph and memory index from a scenario file.
    Ingest { scenario: PathBuf },
    /// Answer one query.
    Ask {
        query: String,
        /// Print factors, path scores and plan bindings after the answer.
        #[arg(long)]
        trace: bool,
        /// Emit the response structure as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long, value_enum, default_value_t = AgentArg::Csm)]
        agent: AgentArg,
    },
    /// Answer queries read line by line.
    Repl {
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value_t = AgentArg::Csm)]
        agent: AgentArg,
    },
    /// Score every agent on a scenario corpus.
    Eval {
        /// Directory of scenario files or a JSON file; defaults to the bundled corpus.
        corpus: Option<PathBuf>,
        /// Directory receiving report.json and report.txt.
        #[arg(long, default_value = "eval-report")]
        out: PathBuf,
        /// Fail when CRA(csm) >= CRA(ablated_csm) >= CRA(memory_only) = 0 breaks anywhere.
        #[arg(long)]
        assert_ordering: bool,
    },
    /// Inspect the ingested graph.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Inspect the plan schema library.
    Schema {
        #[command(subcommand)]
        command: SchemaCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    Export {
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SchemaCommand {
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum AgentArg {
    Csm,
    MemoryOnly,
    AblatedCsm,
}

impl From<AgentArg> for AgentKind {
    fn from(a: AgentArg) -> Self {
        match a {
            AgentArg::Csm => AgentKind::Csm,
            AgentArg::MemoryOnly => AgentKind::MemoryOnly,
            AgentArg::AblatedCsm => AgentKind::AblatedCsm,
        }
    }
}

/// Retrievable memory and profile as saved by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMemory {
    pub profile: BTreeMap<String, String>,
    pub entries: Vec<StoredEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEntry {
    pub id: String,
    pub text: String,
    pub kind: MemoryKind,
}

/// Resources resolved from the configuration and environment.
struct Settings {
    config: Config,
    embedder: Box<dyn Embedder>,
    library: SchemaLibrary,
    rules: RuleSet,
    reasoning: Box<dyn GenerationClient>,
    responder: Option<HttpGenerationClient>,
    template: String,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let plan_input = |e: PlanError| input(e);
        let library = match &config.schema_path {
            Some(p) => SchemaLibrary::load(p).map_err(plan_input)?,
            None => SchemaLibrary::bundled(),
        };
        let rules = match &config.rules_path {
            Some(p) => RuleSet::load(p).map_err(plan_input)?,
            None => RuleSet::bundled(),
        };
        let responder = HttpGenerationClient::from_env();
        let reasoning: Box<dyn GenerationClient> = match (&responder, &config.transcript_path) {
            (Some(http), _) => Box::new(http.clone()),
            (None, Some(p)) => Box::new(
                TranscriptClient::load(p).map_err(|e| CliError::Input(format!("transcript {}: {e}", p.display())))?,
            ),
            (None, None) => Box::new(TranscriptClient::bundled()),
        };
        let template = match &config.system_prompt_path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("system prompt {}: {e}", p.display())))?,
            None => DEFAULT_SYSTEM_TEMPLATE.to_owned(),
        };
        Ok(Self {
            embedder: embedder_from_env(config.embed_dim),
            config,
            library,
            rules,
            reasoning,
            responder,
            template,
        })
    }

    fn agent(&self) -> Agent<'_> {
        let agent = Agent::new(self.embedder.as_ref(), &self.config, &self.library, &self.rules)
            .with_reasoning(self.reasoning.as_ref())
            .with_template(&self.template);
        match &self.responder {
            Some(r) => agent.with_responder(r),
            None => agent,
        }
    }
}

/// Loaded state of a previous `ingest`.
struct State {
    graph: PersonalGraph,
    memory: StoredMemory,
}

impl State {
    fn load(dir: &Path, settings: &Settings) -> Result<Self, CliError> {
        let graph_path = settings.config.graph_path.clone().unwrap_or_else(|| dir.join(GRAPH_FILE));
        let memory_path = dir.join(MEMORY_FILE);
        if !graph_path.exists() || !memory_path.exists() {
            return Err(CliError::MissingState(format!(
                "no ingested data in {}; run `csm ingest <scenario.json>` first",
                dir.display()
            )));
        }
        let graph = PersonalGraph::load(&graph_path).map_err(|e: GraphError| input(format!("{}: {e}", graph_path.display())))?;
        let text = std::fs::read_to_string(&memory_path)?;
        let memory = serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", memory_path.display())))?;
        Ok(Self { graph, memory })
    }

    fn index(&self, embedder: &dyn Embedder) -> Result<VectorIndex, CliError> {
        VectorIndex::build(
            self.memory.entries.iter().map(|e| (e.id.clone(), e.text.clone(), e.kind)),
            embedder,
        )
        .map_err(failed)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, stdin, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdin: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { scenario } => ingest(&scenario, &cli.state, out),
        Command::Ask {
            query,
            trace,
            json,
            agent,
        } => {
            let state = State::load(&cli.state, &settings)?;
            let index = state.index(settings.embedder.as_ref())?;
            let run = answer(&settings, &state, &index, agent.into(), &query)?;
            if json {
                let text = serde_json::to_string_pretty(&run.response).map_err(failed)?;
                writeln!(out, "{text}")?;
            } else {
                write_answer(out, &run, trace)?;
            }
            Ok(())
        }
        Command::Repl { trace, agent } => {
            let state = State::load(&cli.state, &settings)?;
            repl(&settings, &state, agent.into(), trace, stdin, out)
        }
        Command::Eval {
            corpus,
            out: dir,
            assert_ordering,
        } => eval(&settings, corpus.as_deref(), &dir, assert_ordering, out),
        Command::Graph {
            command: GraphCommand::Export { format, output },
        } => {
            let state = State::load(&cli.state, &settings)?;
            let text = match format {
                GraphFormat::Json => state.graph.to_json(),
                GraphFormat::Dot => state.graph.to_dot(),
            };
            match output {
                Some(path) => std::fs::write(path, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Schema {
            command: SchemaCommand::List,
        } => {
            for s in &settings.library.schemas {
                writeln!(out, "{}  ({} steps max)  {}", s.id, s.max_steps, s.intent_description)?;
            }
            Ok(())
        }
    }
}

fn ingest(path: &Path, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = Scenario::load(path)?;
    let graph = scenario.build_graph()?;
    let memory = StoredMemory {
        profile: scenario.profile_map(),
        entries: scenario
            .retrieval_entries()
            .into_iter()
            .map(|(id, text, kind)| StoredEntry { id, text, kind })
            .collect(),
    };
    std::fs::create_dir_all(dir)?;
    graph.save(dir.join(GRAPH_FILE)).map_err(failed)?;
    let mut text = serde_json::to_string_pretty(&memory).map_err(failed)?;
    text.push('\n');
    std::fs::write(dir.join(MEMORY_FILE), text)?;
    writeln!(
        out,
        "ingested `{}`: {} nodes, {} edges, {} memory items into {}",
        scenario.id,
        graph.node_count(),
        graph.edge_count(),
        memory.entries.len(),
        dir.display()
    )?;
    Ok(())
}

fn answer(settings: &Settings, state: &State, index: &VectorIndex, kind: AgentKind, query: &str) -> Result<AgentRun, CliError> {
    if query.trim().is_empty() {
        return Err(CliError::Input("query is empty".into()));
    }
    settings
        .agent()
        .answer(kind, &state.graph, index, &state.memory.profile, query)
        .map_err(failed)
}

fn write_answer(out: &mut dyn Write, run: &AgentRun, trace: bool) -> Result<(), CliError> {
    out.write_all(run.response.text.as_bytes())?;
    if !run.response.text.ends_with('\n') {
        writeln!(out)?;
    }
    if trace {
        write_trace(out, run)?;
    }
    Ok(())
}

fn write_trace(out: &mut dyn Write, run: &AgentRun) -> Result<(), CliError> {
    let a = &run.analysis;
    let label = |id: &str| a.graph.node(id).map_or(id.to_owned(), |n| n.label.clone());
    writeln!(out, "--- trace ({})", run.kind)?;
    if a.mapping.matched_nodes.is_empty() {
        writeln!(out, "targets: none matched; commonsense fallback")?;
    } else {
        let targets: Vec<String> = a.mapping.matched_nodes.iter().map(|(id, s)| format!("{id} ({s:.3})")).collect();
        writeln!(out, "targets: {}", targets.join(", "))?;
    }
    if !a.mapping.hypothesized_nodes.is_empty() {
        writeln!(out, "hypotheses: {}", a.mapping.hypothesized_nodes.join(", "))?;
    }
    writeln!(out, "factors:")?;
    for f in &a.factors.factors {
        let kind = match f.criticality {
            Criticality::Critical => "critical",
            Criticality::Contributory => "contributory",
        };
        writeln!(out, "  {kind:<12} {}  {}", f.node_id, label(&f.node_id))?;
    }
    writeln!(out, "paths:")?;
    for p in a.factors.top_paths(&a.graph) {
        writeln!(out, "  {:.3}  {}", p.score, p.describe(&a.graph))?;
    }
    if let Some(notes) = &a.factors.reflection_notes {
        writeln!(out, "reflection: {notes}")?;
    }
    if let Some(plan) = &run.plan {
        writeln!(
            out,
            "plan: schema {}, {}{}",
            plan.schema_id,
            if plan.verified { "verified" } else { "unverified" },
            if plan.hypothesis_mode { ", hypothesis mode" } else { "" }
        )?;
    }
    for link in &run.response.trace {
        writeln!(
            out,
            "  step {}: factors [{}] memory [{}]",
            link.step_index + 1,
            link.factor_ids.join(", "),
            link.memory_ids.join(", ")
        )?;
    }
    if run.degraded() {
        writeln!(out, "degraded: a generation call failed and a fallback was used")?;
    }
    Ok(())
}

fn repl(
    settings: &Settings,
    state: &State,
    kind: AgentKind,
    mut trace: bool,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let index = state.index(settings.embedder.as_ref())?;
    writeln!(out, "Ask a question, or :help for commands.")?;
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        let input = line.trim();
        match input {
            "" => continue,
            ":quit" | ":q" | ":exit" => return Ok(()),
            ":trace on" => {
                trace = true;
                writeln!(out, "trace on")?;
            }
            ":trace off" => {
                trace = false;
                writeln!(out, "trace off")?;
            }
            ":graph" => {
                let g = &state.graph;
                writeln!(out, "{} nodes, {} edges", g.node_count(), g.edge_count())?;
                for e in g.edges() {
                    writeln!(out, "  {} -> {}  ({:?}, {:.2})", e.source, e.target, e.relation, e.weight)?;
                }
            }
            ":help" => writeln!(out, ":trace on|off  :graph  :quit")?,
            meta if meta.starts_with(':') => writeln!(out, "unknown command `{meta}`; try :help")?,
            query => match answer(settings, state, &index, kind, query) {
                Ok(run) => write_answer(out, &run, trace)?,
                Err(e) => writeln!(out, "error: {e}")?,
            },
        }
    }
}

fn eval(
    settings: &Settings,
    corpus: Option<&Path>,
    dir: &Path,
    assert_ordering: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus.unwrap_or(Path::new(BUNDLED_CORPUS)))?;
    let report = run_corpus(&corpus, &AgentKind::ALL, &settings.agent())?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    let table = report.to_table();
    std::fs::write(dir.join("report.txt"), &table)?;
    out.write_all(table.as_bytes())?;
    if report.errors().count() == report.rows.len() {
        return Err(CliError::Failed("every scenario run failed".into()));
    }
    if assert_ordering {
        let violations = report.ordering_violations();
        if !violations.is_empty() {
            return Err(CliError::Assertion(format!(
                "CRA ordering violated on: {}",
                violations.join(", ")
            )));
        }
        writeln!(out, "CRA ordering holds on all {} scenarios", corpus.len())?;
    }
    Ok(())
}
