//! `treeroute` — mesh generation, routing traces, deadlock verification and
//! metric sweeps for multi-tree geometric NoC routing.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 domain error
//! (unreachable pair, dependency cycle found).

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use treeroute::addressing::TreeAddress;
use treeroute::deadlock::{build_cdg, find_cycle, DependencySource};
use treeroute::forest::{choose_root, Preference};
use treeroute::metrics::{render_reports, run_sweep, ExperimentConfig};
use treeroute::router::{Restriction, RouteMode, RoutingOptions, RoutingState};
use treeroute::topology::{NodeId, Topology};

use config::{
    parse_averaging, parse_granularity, parse_mesh, parse_mesh_list, parse_prefs, parse_root,
};

const SEED_ENV: &str = "TREEROUTE_SEED";

#[derive(Parser)]
#[command(name = "treeroute", version, about = "Multi-tree geometric routing for networks-on-chip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh topology file, optionally with injected link faults.
    GenMesh(GenMeshArgs),
    /// Route one packet and print the hop-by-hop trace.
    Trace(TraceArgs),
    /// Build the channel dependency graph and check it for cycles.
    CheckDeadlock(CheckArgs),
    /// Run the evaluation sweep and emit one CSV/TSV row per point.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TopoArgs {
    /// Topology file in the text format (alternative to --mesh).
    file: Option<PathBuf>,
    /// Generate a fault-free WxH mesh instead of reading a file.
    #[arg(long, value_name = "WxH")]
    mesh: Option<String>,
}

impl TopoArgs {
    fn load(&self) -> Result<Topology, CliError> {
        match (&self.file, &self.mesh) {
            (Some(path), None) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
                Topology::from_text(&text).map_err(|e| CliError::usage(e.to_string()))
            }
            (None, Some(mesh)) => {
                let (w, h) = parse_mesh(mesh).map_err(CliError::usage)?;
                Topology::build_mesh(w, h).map_err(|e| CliError::usage(e.to_string()))
            }
            (None, None) => Err(CliError::usage(
                "a topology file or --mesh WxH is required".into(),
            )),
            (Some(_), Some(_)) => Err(CliError::usage(
                "give either a topology file or --mesh, not both".into(),
            )),
        }
    }

    fn mesh_hint(&self) -> Option<(u16, u16)> {
        self.mesh.as_deref().and_then(|m| parse_mesh(m).ok())
    }
}

#[derive(Args)]
struct ForestArgs {
    /// Root selection: central | highest-id | corner-se/sw/ne/nw | <id>.
    #[arg(long, default_value = "central")]
    root: String,
    /// Number of spanning trees.
    #[arg(long, default_value_t = 2)]
    trees: usize,
    /// Comma-separated growth preferences, e.g. NSEW,EWNS.
    #[arg(long)]
    prefs: Option<String>,
    /// Down-arc gate: cone (default) or strict-ancestor.
    #[arg(long, default_value = "cone")]
    down_rule: String,
    /// Disable the Manhattan tie-break even on meshes.
    #[arg(long)]
    no_manhattan: bool,
}

impl ForestArgs {
    fn preferences(&self) -> Result<Vec<Preference>, CliError> {
        match &self.prefs {
            Some(s) => {
                let prefs = parse_prefs(s).map_err(CliError::usage)?;
                if prefs.len() < self.trees {
                    return Err(CliError::usage(format!(
                        "{} trees requested but only {} preference orders given",
                        self.trees,
                        prefs.len()
                    )));
                }
                Ok(prefs[..self.trees].to_vec())
            }
            None => Preference::defaults(self.trees).map_err(|e| CliError::usage(e.to_string())),
        }
    }

    fn options(&self, restriction: Restriction) -> Result<RoutingOptions, CliError> {
        Ok(RoutingOptions {
            designated_tree: 0,
            manhattan_tiebreak: !self.no_manhattan,
            restriction,
            down_rule: config::parse_down_rule(&self.down_rule).map_err(CliError::usage)?,
        })
    }

    fn build_state(
        &self,
        topo: Topology,
        mesh_hint: Option<(u16, u16)>,
        restriction: Restriction,
    ) -> Result<RoutingState, CliError> {
        let policy = parse_root(&self.root, mesh_hint).map_err(CliError::usage)?;
        let root = choose_root(&topo, policy).map_err(|e| CliError::usage(e.to_string()))?;
        RoutingState::build(topo, root, &self.preferences()?, self.options(restriction)?)
            .map_err(|e| CliError::usage(e.to_string()))
    }
}

#[derive(Args)]
struct GenMeshArgs {
    /// Mesh size, e.g. 8x8.
    size: String,
    /// Fail each link (or arc) independently with this probability.
    #[arg(long, default_value_t = 0.0)]
    fail_prob: f64,
    /// Fault RNG seed; defaults to $TREEROUTE_SEED or 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Fault granularity: link (both arcs) or arc.
    #[arg(long, default_value = "link")]
    granularity: String,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    topo: TopoArgs,
    #[command(flatten)]
    forest: ForestArgs,
    /// Source node: integer id or tree-0 compass address (e.g. NN).
    #[arg(long)]
    src: String,
    /// Destination node: integer id or tree-0 compass address.
    #[arg(long)]
    dst: String,
    /// Next-hop selection: deterministic or adaptive.
    #[arg(long, default_value = "deterministic")]
    mode: String,
    /// Adaptive-mode seed; defaults to $TREEROUTE_SEED or 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    topo: TopoArgs,
    #[command(flatten)]
    forest: ForestArgs,
    /// Dependency source: legal (default) or greedy.
    #[arg(long, default_value = "legal")]
    source: String,
    /// Drop every forwarding restriction (negative control).
    #[arg(long)]
    disable_ancestor_rule: bool,
    /// Check this many random fault patterns instead of the topology as-is.
    #[arg(long)]
    patterns: Option<u64>,
    /// Link failure probability for --patterns.
    #[arg(long, default_value_t = 0.1)]
    fail_prob: f64,
    /// Fault granularity for --patterns.
    #[arg(long, default_value = "link")]
    granularity: String,
    /// Fault RNG seed; defaults to $TREEROUTE_SEED or 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// key=value configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh sizes, e.g. 4x4,8x8.
    #[arg(long)]
    meshes: Option<String>,
    /// Tree counts, e.g. 1,2.
    #[arg(long)]
    trees: Option<String>,
    /// Link failure probabilities, e.g. 0,0.01,0.05.
    #[arg(long)]
    fail_probs: Option<String>,
    /// Master seed; defaults to $TREEROUTE_SEED or the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum source-destination pairs per sweep point.
    #[arg(long)]
    min_pairs: Option<u64>,
    /// Root policy: central | highest-id | <id>.
    #[arg(long)]
    root: Option<String>,
    /// Growth preferences, e.g. NSEW,EWNS.
    #[arg(long)]
    prefs: Option<String>,
    /// Stretch averaging: expectation | distinct-mean.
    #[arg(long)]
    averaging: Option<String>,
    /// Fault granularity: link | arc.
    #[arg(long)]
    granularity: Option<String>,
    /// Down-arc gate: cone | strict-ancestor.
    #[arg(long)]
    down_rule: Option<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output format: csv | tsv.
    #[arg(long)]
    format: Option<String>,
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: String) -> CliError {
        CliError { message, code: 1 }
    }

    fn domain(message: String) -> CliError {
        CliError { message, code: 2 }
    }
}

fn env_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Resolve a node given as an integer id or a tree-0 compass address.
fn resolve_node(state: &RoutingState, name: &str) -> Result<NodeId, CliError> {
    if let Ok(id) = name.parse::<u32>() {
        let n = NodeId(id);
        if state.topology().contains(n) {
            return Ok(n);
        }
        return Err(CliError::usage(format!("node {id} out of range")));
    }
    let addr = TreeAddress::parse_compass(name)
        .map_err(|e| CliError::usage(format!("bad node `{name}`: {e}")))?;
    state
        .covered_nodes()
        .find(|&n| state.addr(0, n) == Some(&addr))
        .ok_or_else(|| CliError::usage(format!("no node with tree-0 address `{name}`")))
}

fn cmd_gen_mesh(args: &GenMeshArgs) -> Result<(), CliError> {
    let (w, h) = parse_mesh(&args.size).map_err(CliError::usage)?;
    let topo = Topology::build_mesh(w, h).map_err(|e| CliError::usage(e.to_string()))?;
    let granularity = parse_granularity(&args.granularity).map_err(CliError::usage)?;
    let seed = args.seed.unwrap_or_else(env_seed);
    let faulted = topo
        .inject_link_faults(args.fail_prob, seed, granularity)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let text = faulted.to_text();
    match &args.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let topo = args.topo.load()?;
    let state = args
        .forest
        .build_state(topo, args.topo.mesh_hint(), Restriction::Enforced)?;
    let src = resolve_node(&state, &args.src)?;
    let dst = resolve_node(&state, &args.dst)?;
    let mode = match args.mode.as_str() {
        "deterministic" => RouteMode::Deterministic,
        "adaptive" => RouteMode::Adaptive {
            seed: args.seed.unwrap_or_else(env_seed),
        },
        other => {
            return Err(CliError::usage(format!(
                "bad mode `{other}` (deterministic|adaptive)"
            )))
        }
    };
    let trace = state
        .route(src, dst, mode)
        .map_err(|e| CliError::domain(e.to_string()))?;
    print!("{}", trace.render(&state));
    println!("delivered in {} hops", trace.len());
    Ok(())
}

fn cmd_check_deadlock(args: &CheckArgs) -> Result<(), CliError> {
    let source = match args.source.as_str() {
        "legal" => DependencySource::Legal,
        "greedy" => DependencySource::Greedy,
        other => return Err(CliError::usage(format!("bad source `{other}` (legal|greedy)"))),
    };
    let restriction = if args.disable_ancestor_rule {
        Restriction::Unrestricted
    } else {
        Restriction::Enforced
    };
    let base = args.topo.load()?;
    let granularity = parse_granularity(&args.granularity).map_err(CliError::usage)?;
    let seed = args.seed.unwrap_or_else(env_seed);

    let check_one = |topo: Topology, label: &str| -> Result<(), CliError> {
        let state = args
            .forest
            .build_state(topo, args.topo.mesh_hint(), restriction)?;
        let cdg = build_cdg(&state, source);
        match find_cycle(&cdg) {
            None => {
                println!("{label}ACYCLIC");
                Ok(())
            }
            Some(cycle) => {
                let arcs: Vec<String> = cycle.iter().map(|a| a.to_string()).collect();
                Err(CliError::domain(format!(
                    "{label}CYCLE of {} arcs: {}",
                    cycle.len(),
                    arcs.join(" ")
                )))
            }
        }
    };

    match args.patterns {
        None => check_one(base, ""),
        Some(n) => {
            for i in 0..n {
                let faulted = base
                    .inject_link_faults(args.fail_prob, seed.wrapping_add(i), granularity)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                check_one(faulted, &format!("pattern {i}: "))?;
            }
            Ok(())
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::default();
    let mut out = args.out.clone();
    let mut format = args.format.clone();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let file = config::parse_config_file(&text).map_err(CliError::usage)?;
        cfg = file.experiment;
        if out.is_none() {
            out = file.out.map(PathBuf::from);
        }
        if format.is_none() {
            format = file.format;
        }
    } else {
        cfg.master_seed = env_seed();
    }

    if let Some(m) = &args.meshes {
        cfg.mesh_sizes = parse_mesh_list(m).map_err(CliError::usage)?;
    }
    if let Some(t) = &args.trees {
        cfg.tree_counts = t
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| format!("bad tree count `{x}`")))
            .collect::<Result<_, _>>()
            .map_err(CliError::usage)?;
    }
    if let Some(p) = &args.fail_probs {
        cfg.fail_probs = p
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| format!("bad probability `{x}`")))
            .collect::<Result<_, _>>()
            .map_err(CliError::usage)?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(mp) = args.min_pairs {
        cfg.min_pairs = mp;
    }
    if let Some(root) = &args.root {
        cfg.root_policy = parse_root(root, None).map_err(CliError::usage)?;
    }
    if let Some(prefs) = &args.prefs {
        cfg.preferences = parse_prefs(prefs).map_err(CliError::usage)?;
    }
    if let Some(a) = &args.averaging {
        cfg.averaging = parse_averaging(a).map_err(CliError::usage)?;
    }
    if let Some(g) = &args.granularity {
        cfg.granularity = parse_granularity(g).map_err(CliError::usage)?;
    }
    if let Some(d) = &args.down_rule {
        cfg.down_rule = config::parse_down_rule(d).map_err(CliError::usage)?;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }

    let sep = match format.as_deref() {
        None | Some("csv") => ',',
        Some("tsv") => '\t',
        Some(other) => return Err(CliError::usage(format!("bad format `{other}` (csv|tsv)"))),
    };
    let reports = run_sweep(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
    let rendered = render_reports(&reports, sep);
    match out {
        Some(path) => fs::write(&path, rendered)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::GenMesh(args) => cmd_gen_mesh(args),
        Command::Trace(args) => cmd_trace(args),
        Command::CheckDeadlock(args) => cmd_check_deadlock(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
