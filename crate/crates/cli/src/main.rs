use clap::{Args, Parser, Subcommand, ValueEnum};
use mdpi::bisim::{check_weak_bisim, BisimVerdict};
use mdpi::compile::{compile, compile_mig_nested, CompileError, CtxInit, Placement, Strategy};
use mdpi::filter::{Filter, FilterError, FilteredLts};
use mdpi::simulate::{simulate, SimOptions};
use mdpi::verify::{verify_contract, STRATEGIES};
use mdpi::{explore, parse_contract, parse_system, ClockMap, Contract, EngineOptions, ExploreBounds, LtsGraph, Name, ParseError, System};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

const EXIT_DISTINGUISHED: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_UNSOUND: u8 = 4;
const EXIT_USAGE: u8 = 5;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => EXIT_PARSE,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Parser)]
#[command(name = "mdpi", version, about = "Explore, compare and monitor located process systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the reachable transition system and summarise it.
    Explore {
        system: PathBuf,
        /// Builtin filter name (ntg, prc, ltr, ltr-strict) or a JSON filter file.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the graph here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Decide weak bisimilarity of two filtered systems.
    Check {
        left: PathBuf,
        right: PathBuf,
        /// Filter applied to both sides unless overridden.
        #[arg(long, default_value = "ntg")]
        filter: String,
        #[arg(long)]
        filter_left: Option<String>,
        #[arg(long)]
        filter_right: Option<String>,
        /// Write the verdict, witness and distinguishing trace as JSON.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Follow one seeded random path.
    Simulate {
        system: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, env = "MDPI_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        halt_on_first_fail: bool,
        /// Unfoldings per replication; unbounded when absent.
        #[arg(long)]
        unfold: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        clocks: ClockArgs,
    },
    /// Compile a contract into a monitor network.
    Compile {
        contract: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Single migrating monitor for sequence-only contracts.
        #[arg(long)]
        nested: bool,
        /// Skip the sync after each move of a nested migrating monitor.
        #[arg(long)]
        no_align: bool,
        #[command(flatten)]
        placement: PlacementArgs,
        #[command(flatten)]
        clocks: ClockArgs,
    },
    /// Compile, compose with a system, explore and check every fail verdict.
    VerifyContract {
        contract: PathBuf,
        system: PathBuf,
        /// One strategy, or all three when absent.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        placement: PlacementArgs,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Orch,
    Chor,
    Mig,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Orch => Strategy::Orchestration,
            StrategyArg::Chor => Strategy::Choreography,
            StrategyArg::Mig => Strategy::Migration,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CtxInitArg {
    Literal,
    Clock,
}

#[derive(Args)]
struct ClockArgs {
    /// Initial clock, e.g. `--clock l=5,k=9`; unlisted locations start at 0.
    #[arg(long = "clock", value_parser = parse_assignment::<u64>, value_delimiter = ',')]
    clocks: Vec<(String, u64)>,
}

impl ClockArgs {
    fn map(&self) -> ClockMap {
        self.clocks.iter().map(|(l, t)| (Name::id(l), *t)).collect()
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Only internal steps: no unmatched outputs towards the environment.
    #[arg(long)]
    closed: bool,
    /// Trace entities also broadcast themselves as outputs.
    #[arg(long)]
    trace_outputs: bool,
    /// Report verdicts as visible monitor outputs.
    #[arg(long)]
    observe_verdicts: bool,
    /// Value the environment may send to unmatched inputs.
    #[arg(long = "env-value", value_delimiter = ',')]
    env_values: Vec<String>,
}

impl EngineArgs {
    fn options(&self) -> EngineOptions {
        EngineOptions {
            open_outputs: !self.closed,
            trace_outputs: self.trace_outputs,
            env_values: self.env_values.iter().map(|v| Name::id(v)).collect(),
            observe_verdicts: self.observe_verdicts,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Unfoldings given to every replication.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    unfold: u32,
    #[arg(long, default_value_t = 100_000, value_parser = positive)]
    max_states: usize,
    #[arg(long, default_value_t = 64, value_parser = positive)]
    max_trace_len: usize,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    clocks: ClockArgs,
}

impl RunArgs {
    fn bounds(&self) -> ExploreBounds {
        ExploreBounds { max_repeat_unfold: self.unfold, max_trace_len: self.max_trace_len, max_states: self.max_states }
    }

    fn explore(&self, s: &System) -> LtsGraph {
        explore(s, &self.clocks.map(), &self.engine.options(), &self.bounds())
    }
}

#[derive(Args)]
struct PlacementArgs {
    /// Host of orchestrated and migrating monitors.
    #[arg(long, default_value = "h")]
    central: String,
    /// Location emitting the start signal of a choreography; defaults to the central host.
    #[arg(long)]
    start: Option<String>,
    /// Placement override keyed by preorder node index, e.g. `2=k` or `2.comb=l`.
    #[arg(long = "place", value_parser = parse_assignment::<String>)]
    place: Vec<(String, String)>,
    #[arg(long, value_enum, default_value_t = CtxInitArg::Literal)]
    ctx_init: CtxInitArg,
}

impl PlacementArgs {
    fn placement(&self, clocks: &ClockMap) -> Placement {
        let mut p = Placement::at(Name::id(&self.central));
        if let Some(s) = &self.start {
            p.start = Name::id(s);
        }
        p.overrides = self.place.iter().map(|(k, v)| (k.clone(), Name::id(v))).collect();
        if let CtxInitArg::Clock = self.ctx_init {
            p.ctx_init = CtxInit::Clock(clocks.clone());
        }
        p
    }
}

fn parse_assignment<T: std::str::FromStr>(s: &str) -> Result<(String, T), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.parse().map_err(|_| format!("bad value in `{s}`"))?;
    Ok((k.to_string(), v))
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn load_system(path: &Path) -> Result<System, CliError> {
    parse_system(&read(path)?).map_err(|source| CliError::Parse { path: path.display().to_string(), source })
}

fn load_contract(path: &Path) -> Result<Contract, CliError> {
    parse_contract(&read(path)?).map_err(|source| CliError::Parse { path: path.display().to_string(), source })
}

fn load_filter(name_or_path: &str) -> Result<Filter, CliError> {
    match Filter::builtin(name_or_path) {
        Ok(f) => Ok(f),
        Err(_) if Path::new(name_or_path).exists() => Ok(Filter::from_json(&read(Path::new(name_or_path))?)?),
        Err(e) => Err(e.into()),
    }
}

/// Trace logs of every terminal state, one line per distinct trace-set.
fn terminal_trace_sets(g: &LtsGraph) -> BTreeSet<String> {
    let adj = g.adjacency();
    g.states
        .iter()
        .enumerate()
        .filter(|(i, _)| adj[*i].is_empty())
        .map(|(_, c)| {
            let logs: Vec<String> = c
                .trace_logs()
                .iter()
                .map(|(l, log)| {
                    let entries: Vec<String> = log
                        .iter()
                        .map(|(ts, ch, vs)| format!("{ch}<{}>@{ts}", vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")))
                        .collect();
                    format!("{l}: {}", entries.join(" "))
                })
                .collect();
            if logs.is_empty() {
                "(no traces)".to_string()
            } else {
                logs.join("; ")
            }
        })
        .collect()
}

fn reachable_verdicts(g: &LtsGraph) -> BTreeSet<String> {
    g.states.iter().flat_map(|c| c.verdicts.iter().map(|(l, v)| format!("{v}@{l}"))).collect()
}

fn explore_summary(g: &LtsGraph, filtered: Option<(&Filter, &FilteredLts)>) -> String {
    let mut out = format!("states {}\nedges {}\ntruncated {}\n", g.states.len(), g.edges.len(), g.truncated);
    if let Some((f, l)) = filtered {
        let _ = writeln!(out, "filter {} states {} edges {}", f.name, l.len(), l.edges.len());
    }
    let verdicts = reachable_verdicts(g);
    let _ = writeln!(out, "verdicts {}", if verdicts.is_empty() { "none".to_string() } else { verdicts.into_iter().collect::<Vec<_>>().join(" ") });
    let sets = terminal_trace_sets(g);
    let _ = writeln!(out, "terminal trace-sets {}", sets.len());
    for s in sets {
        let _ = writeln!(out, "  {s}");
    }
    out
}

fn filtered_json(l: &FilteredLts) -> serde_json::Value {
    let edges: Vec<serde_json::Value> =
        l.edges.iter().map(|(s, a, t)| serde_json::json!({ "from": s, "label": a.to_string(), "to": t })).collect();
    let states: Vec<String> = l.states.iter().map(|c| c.system.to_string()).collect();
    serde_json::json!({ "initial": l.initial, "states": states, "edges": edges, "truncated": l.truncated })
}

fn filtered_dot(l: &FilteredLts) -> String {
    let mut out = String::from("digraph lts {\n  rankdir=LR;\n");
    for s in 0..l.len() {
        let _ = writeln!(out, "  s{s} [label=\"{s}\"{}];", if s == l.initial { ", shape=doublecircle" } else { "" });
    }
    for (s, a, t) in &l.edges {
        let _ = writeln!(out, "  s{s} -> s{t} [label=\"{}\"];", a.to_string().replace('"', "\\\""));
    }
    out.push_str("}\n");
    out
}

fn emit(text: &str, output: &Option<PathBuf>) -> Result<(), CliError> {
    match output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Explore { system, filter, format, output, run } => {
            let g = run.explore(&load_system(&system)?);
            let filter = filter.as_deref().map(load_filter).transpose()?;
            let filtered = filter.as_ref().map(|f| (f, FilteredLts::from_graph(&g, f)));
            let summary = explore_summary(&g, filtered.as_ref().map(|(f, l)| (*f, l)));
            let graph = match (format, &filtered) {
                (Format::Text, _) => None,
                (Format::Json, None) => Some(format!("{:#}\n", g.to_json())),
                (Format::Json, Some((_, l))) => Some(format!("{:#}\n", filtered_json(l))),
                (Format::Dot, None) => Some(g.to_dot()),
                (Format::Dot, Some((_, l))) => Some(filtered_dot(l)),
            };
            match (graph, &output) {
                (None, _) => print!("{summary}"),
                (Some(text), Some(_)) => {
                    emit(&text, &output)?;
                    print!("{summary}");
                }
                (Some(text), None) => {
                    print!("{text}");
                    eprint!("{summary}");
                }
            }
            Ok(0)
        }
        Command::Check { left, right, filter, filter_left, filter_right, witness, format, run } => {
            let fl = load_filter(filter_left.as_deref().unwrap_or(&filter))?;
            let fr = load_filter(filter_right.as_deref().unwrap_or(&filter))?;
            let (gl, gr) = (run.explore(&load_system(&left)?), run.explore(&load_system(&right)?));
            let (ll, lr) = (FilteredLts::from_graph(&gl, &fl), FilteredLts::from_graph(&gr, &fr));
            let r = check_weak_bisim(&ll, &lr);
            let json = r.to_json();
            if let Some(p) = &witness {
                write(p, &format!("{json:#}\n"))?;
            }
            if format == Format::Json {
                println!("{json:#}");
            } else {
                let verdict = match r.verdict {
                    BisimVerdict::Bisimilar => "bisimilar",
                    BisimVerdict::Distinguished => "distinguished",
                    BisimVerdict::Inconclusive => "inconclusive",
                };
                println!("{verdict}");
                println!("left {} states under {}{}", ll.len(), fl.name, if ll.truncated { " (truncated)" } else { "" });
                println!("right {} states under {}{}", lr.len(), fr.name, if lr.truncated { " (truncated)" } else { "" });
                if let Some(t) = &r.trace {
                    println!("trace {}", t.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "));
                }
            }
            Ok(match r.verdict {
                BisimVerdict::Bisimilar => 0,
                BisimVerdict::Distinguished => EXIT_DISTINGUISHED,
                BisimVerdict::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
        Command::Simulate { system, steps, seed, halt_on_first_fail, unfold, format, engine, clocks } => {
            let opts = SimOptions { steps, seed, halt_on_first_fail, max_repeat_unfold: unfold };
            let r = simulate(&load_system(&system)?, &clocks.map(), &engine.options(), &opts);
            match format {
                Format::Json => println!("{:#}", serde_json::to_value(&r).expect("report serialises")),
                Format::Text => print!("{}", r.to_text()),
                Format::Dot => return Err(CliError::Usage("simulate has no dot output".into())),
            }
            Ok(0)
        }
        Command::Compile { contract, strategy, nested, no_align, placement, clocks } => {
            let e = load_contract(&contract)?;
            let p = placement.placement(&clocks.map());
            let monitor = match (strategy, nested) {
                (StrategyArg::Mig, true) => compile_mig_nested(&e, &p, !no_align)?,
                (_, true) => return Err(CliError::Usage("--nested applies to the mig strategy only".into())),
                (s, false) => compile(&e, s.into(), &p)?,
            };
            println!("{monitor}");
            Ok(0)
        }
        Command::VerifyContract { contract, system, strategy, format, placement, run } => {
            let e = load_contract(&contract)?;
            let sys = load_system(&system)?;
            let p = placement.placement(&run.clocks.map());
            let strategies: Vec<Strategy> = match strategy {
                Some(s) => vec![s.into()],
                None => STRATEGIES.to_vec(),
            };
            let mut reports = Vec::new();
            for s in strategies {
                reports.push(verify_contract(&e, &sys, s, &p, &run.clocks.map(), &run.bounds())?);
            }
            let unsound = reports.iter().any(|r| !r.soundness_violations.is_empty());
            let complete: Vec<&_> = reports.iter().filter(|r| !r.truncated).collect();
            let agree = complete.windows(2).all(|w| w[0].fail_reachable == w[1].fail_reachable);
            if format == Format::Json {
                let per: BTreeMap<&str, serde_json::Value> =
                    reports.iter().map(|r| (r.strategy.as_str(), serde_json::to_value(r).expect("report serialises"))).collect();
                println!("{:#}", serde_json::json!({ "strategies": per, "agree": agree, "sound": !unsound }));
            } else {
                for r in &reports {
                    println!(
                        "{} states {} truncated {} fail-reachable {} unjustified-fail-states {}",
                        r.strategy,
                        r.states,
                        r.truncated,
                        r.fail_reachable,
                        r.soundness_violations.len()
                    );
                }
                println!("strategies agree {agree}");
                println!("sound {}", !unsound);
            }
            Ok(if unsound { EXIT_UNSOUND } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
