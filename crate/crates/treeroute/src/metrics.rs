//! Route-quality evaluation: shortest-path oracles, exact per-pair route
//! ensembles (expected/maximum length and distinct-route counts over the
//! greedy candidate DAG), and seeded experiment sweeps aggregating mean
//! stretch, the fraction of non-minimal pairs and the degree of adaptiveness.
//!
//! Per-pair statistics use exact rational arithmetic; nothing is rounded
//! until a report is rendered, so results are independent of evaluation
//! order and worker count.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::forest::{choose_root, Preference, RootPolicy};
use crate::router::{DownRule, PacketPhase, RoutingOptions, RoutingState};
use crate::topology::{FaultGranularity, NodeId, Topology};
use crate::{Error, Result};

/// BFS over healthy arcs from `src`: hop distance and number of minimal
/// paths to every node. Counting runs over the BFS level DAG (sum of
/// predecessor counts).
pub fn shortest_paths_from(topo: &Topology, src: NodeId) -> (Vec<Option<u32>>, Vec<u64>) {
    let n = topo.node_count();
    let mut dist = vec![None; n];
    let mut count = vec![0u64; n];
    dist[src.index()] = Some(0);
    count[src.index()] = 1;
    let mut queue = VecDeque::new();
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()].unwrap();
        for v in topo.healthy_out(u) {
            match dist[v.index()] {
                None => {
                    dist[v.index()] = Some(du + 1);
                    count[v.index()] = count[u.index()];
                    queue.push_back(v);
                }
                Some(dv) if dv == du + 1 => {
                    count[v.index()] = count[v.index()]
                        .checked_add(count[u.index()])
                        .expect("shortest-path count overflow");
                }
                _ => {}
            }
        }
    }
    (dist, count)
}

/// Hop length of the shortest path over healthy arcs.
pub fn shortest_len(topo: &Topology, src: NodeId, dst: NodeId) -> Result<u32> {
    shortest_paths_from(topo, src).0[dst.index()].ok_or(Error::Unreachable { src, dst })
}

/// Number of minimal-length paths over healthy arcs.
pub fn shortest_count(topo: &Topology, src: NodeId, dst: NodeId) -> Result<u64> {
    let (dist, count) = shortest_paths_from(topo, src);
    dist[dst.index()]
        .map(|_| count[dst.index()])
        .ok_or(Error::Unreachable { src, dst })
}

/// Exact statistics of the set of routes the algorithm may emit for one
/// pair, computed over the walk-state DAG on (node, phase).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleStats {
    /// Expected hop count under uniform random choice at every step.
    pub expected_len: BigRational,
    /// Longest route the algorithm may produce.
    pub max_len: u32,
    /// Number of distinct node sequences.
    pub distinct_routes: u128,
    /// Total hops summed over the distinct routes (for the unweighted mean).
    pub route_len_sum: u128,
}

impl EnsembleStats {
    fn terminal() -> EnsembleStats {
        EnsembleStats {
            expected_len: BigRational::zero(),
            max_len: 0,
            distinct_routes: 1,
            route_len_sum: 0,
        }
    }

    /// Unweighted mean route length over the distinct routes.
    pub fn mean_distinct_len(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.route_len_sum),
            BigInt::from(self.distinct_routes),
        )
    }
}

#[derive(Clone)]
enum Cell {
    Unvisited,
    InProgress,
    Done(EnsembleStats),
}

/// Memoized per-destination ensemble solver, reusable across sources.
pub struct DestinationEnsemble<'a> {
    state: &'a RoutingState,
    dest: NodeId,
    cells: Vec<[Cell; 2]>,
}

impl<'a> DestinationEnsemble<'a> {
    pub fn new(state: &'a RoutingState, dest: NodeId) -> Result<Self> {
        if !state.covers(dest) {
            return Err(Error::Unreachable { src: dest, dst: dest });
        }
        Ok(DestinationEnsemble {
            state,
            dest,
            cells: vec![
                [Cell::Unvisited, Cell::Unvisited];
                state.topology().node_count()
            ],
        })
    }

    pub fn stats_from(&mut self, src: NodeId, phase: PacketPhase) -> Result<EnsembleStats> {
        if !self.state.covers(src) {
            return Err(Error::Unreachable {
                src,
                dst: self.dest,
            });
        }
        Ok(self.solve(src, phase).clone())
    }

    fn solve(&mut self, v: NodeId, phase: PacketPhase) -> &EnsembleStats {
        let slot = phase_index(phase);
        if v == self.dest {
            self.cells[v.index()][slot] = Cell::Done(EnsembleStats::terminal());
        }
        match &self.cells[v.index()][slot] {
            Cell::Done(_) => {}
            Cell::InProgress => {
                // The potential argument makes the walk-state graph a DAG;
                // hitting an in-progress state means a forwarding-rule bug.
                panic!("cycle in the walk-state graph at node {v}");
            }
            Cell::Unvisited => {
                self.cells[v.index()][slot] = Cell::InProgress;
                let cands = self
                    .state
                    .greedy_candidates(v, self.dest, phase)
                    .expect("covered pair");
                assert!(
                    !cands.is_empty(),
                    "no candidate from {v} toward {}: progress guarantee violated",
                    self.dest
                );
                let mut expected_sum = BigRational::zero();
                let mut max_len = 0u32;
                let mut distinct = 0u128;
                let mut len_sum = 0u128;
                for &(n, p) in &cands {
                    let child = self.solve(n, p).clone();
                    expected_sum += child.expected_len;
                    max_len = max_len.max(child.max_len);
                    distinct = distinct
                        .checked_add(child.distinct_routes)
                        .expect("distinct route count overflow");
                    len_sum = len_sum
                        .checked_add(
                            child
                                .route_len_sum
                                .checked_add(child.distinct_routes)
                                .expect("route length sum overflow"),
                        )
                        .expect("route length sum overflow");
                }
                let stats = EnsembleStats {
                    expected_len: BigRational::from(BigInt::from(1))
                        + expected_sum / BigRational::from(BigInt::from(cands.len() as i64)),
                    max_len: max_len + 1,
                    distinct_routes: distinct,
                    route_len_sum: len_sum,
                };
                self.cells[v.index()][slot] = Cell::Done(stats);
            }
        }
        match &self.cells[v.index()][slot] {
            Cell::Done(s) => s,
            _ => unreachable!(),
        }
    }
}

fn phase_index(p: PacketPhase) -> usize {
    match p {
        PacketPhase::Ascending => 0,
        PacketPhase::Descending => 1,
    }
}

/// Route-set statistics for a single pair, starting in the ascending phase.
pub fn route_ensemble(state: &RoutingState, src: NodeId, dst: NodeId) -> Result<EnsembleStats> {
    let mut solver = DestinationEnsemble::new(state, dst)?;
    solver.stats_from(src, PacketPhase::Ascending)
}

/// Everything the evaluation knows about one ordered pair.
#[derive(Debug, Clone)]
pub struct PairStats {
    pub src: NodeId,
    pub dst: NodeId,
    pub shortest_len: u32,
    pub shortest_count: u64,
    pub expected_route_len: BigRational,
    pub max_route_len: u32,
    pub distinct_routes: u128,
    pub route_len_sum: u128,
    pub always_minimal: bool,
}

impl PairStats {
    pub fn build(state: &RoutingState, src: NodeId, dst: NodeId) -> Result<PairStats> {
        let shortest = shortest_len(state.topology(), src, dst)?;
        let count = shortest_count(state.topology(), src, dst)?;
        let ens = route_ensemble(state, src, dst)?;
        Ok(PairStats::from_parts(src, dst, shortest, count, ens))
    }

    fn from_parts(
        src: NodeId,
        dst: NodeId,
        shortest_len: u32,
        shortest_count: u64,
        ens: EnsembleStats,
    ) -> PairStats {
        PairStats {
            src,
            dst,
            shortest_len,
            shortest_count,
            always_minimal: ens.max_len == shortest_len,
            expected_route_len: ens.expected_len,
            max_route_len: ens.max_len,
            distinct_routes: ens.distinct_routes,
            route_len_sum: ens.route_len_sum,
        }
    }

    /// Expected route length divided by the shortest-path length.
    pub fn stretch(&self) -> BigRational {
        assert!(self.shortest_len >= 1, "stretch undefined for src == dst");
        &self.expected_route_len / BigRational::from(BigInt::from(self.shortest_len))
    }

    /// Stretch under the unweighted mean over distinct routes.
    pub fn stretch_unweighted(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.route_len_sum),
            BigInt::from(self.distinct_routes) * BigInt::from(self.shortest_len),
        )
    }

    /// Distinct routes divided by minimal paths; defined only for pairs the
    /// algorithm serves exclusively with minimal routes.
    pub fn adaptiveness(&self) -> Option<BigRational> {
        if self.always_minimal {
            Some(BigRational::new(
                BigInt::from(self.distinct_routes),
                BigInt::from(self.shortest_count),
            ))
        } else {
            None
        }
    }
}

/// Which per-pair average feeds the reported mean stretch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StretchAveraging {
    /// Expectation under uniform random tie-breaking.
    Expectation,
    /// Unweighted mean over the distinct routes.
    DistinctMean,
}

/// Full sweep parameterization. Everything influencing the numbers lives
/// here so a report can echo its own provenance.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mesh_sizes: Vec<(u16, u16)>,
    pub tree_counts: Vec<usize>,
    pub fail_probs: Vec<f64>,
    pub master_seed: u64,
    pub min_pairs: u64,
    pub root_policy: RootPolicy,
    /// Preference pool; the first K orders grow the K trees. Empty means
    /// the standard vertical/horizontal defaults.
    pub preferences: Vec<Preference>,
    pub averaging: StretchAveraging,
    pub granularity: FaultGranularity,
    pub manhattan: bool,
    pub down_rule: DownRule,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mesh_sizes: vec![(4, 4), (8, 8)],
            tree_counts: vec![1, 2],
            fail_probs: vec![0.0, 0.01, 0.02, 0.05, 0.10],
            master_seed: 1,
            min_pairs: 250_000,
            root_policy: RootPolicy::Central,
            preferences: Vec::new(),
            averaging: StretchAveraging::Expectation,
            granularity: FaultGranularity::Link,
            manhattan: true,
            down_rule: DownRule::DeliverableCone,
            workers: None,
        }
    }
}

/// Aggregated metrics for one sweep point.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub mesh: (u16, u16),
    pub k_trees: usize,
    pub fail_prob: f64,
    pub pairs: u64,
    pub averaging: StretchAveraging,
    pub mean_stretch_expectation: BigRational,
    pub mean_stretch_distinct: BigRational,
    pub frac_nonminimal: BigRational,
    /// Averaged over always-minimal pairs only; `None` when there are none.
    pub mean_adaptiveness: Option<BigRational>,
    pub patterns_used: u64,
    pub patterns_skipped: u64,
    pub seed: u64,
}

impl MetricsReport {
    /// Mean stretch under the configured averaging.
    pub fn mean_stretch(&self) -> &BigRational {
        match self.averaging {
            StretchAveraging::Expectation => &self.mean_stretch_expectation,
            StretchAveraging::DistinctMean => &self.mean_stretch_distinct,
        }
    }

    pub fn mean_stretch_f64(&self) -> f64 {
        self.mean_stretch().to_f64().unwrap()
    }

    pub fn frac_nonminimal_f64(&self) -> f64 {
        self.frac_nonminimal.to_f64().unwrap()
    }

    pub fn mean_adaptiveness_f64(&self) -> Option<f64> {
        self.mean_adaptiveness.as_ref().map(|r| r.to_f64().unwrap())
    }
}

#[derive(Clone)]
struct Accum {
    pairs: u64,
    stretch_sum: BigRational,
    stretch_unweighted_sum: BigRational,
    nonminimal: u64,
    adapt_sum: BigRational,
    adapt_count: u64,
}

impl Accum {
    fn new() -> Accum {
        Accum {
            pairs: 0,
            stretch_sum: BigRational::zero(),
            stretch_unweighted_sum: BigRational::zero(),
            nonminimal: 0,
            adapt_sum: BigRational::zero(),
            adapt_count: 0,
        }
    }

    fn add_pair(&mut self, p: &PairStats) {
        self.pairs += 1;
        self.stretch_sum += p.stretch();
        self.stretch_unweighted_sum += p.stretch_unweighted();
        if !p.always_minimal {
            self.nonminimal += 1;
        }
        if let Some(a) = p.adaptiveness() {
            self.adapt_sum += a;
            self.adapt_count += 1;
        }
    }

    fn merge(&mut self, other: Accum) {
        self.pairs += other.pairs;
        self.stretch_sum += other.stretch_sum;
        self.stretch_unweighted_sum += other.stretch_unweighted_sum;
        self.nonminimal += other.nonminimal;
        self.adapt_sum += other.adapt_sum;
        self.adapt_count += other.adapt_count;
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one fault pattern. Deliberately independent of the tree count so
/// K=1 and K=2 see identical fault patterns at matched master seeds.
fn pattern_seed(master: u64, mesh: (u16, u16), p: f64, index: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ ((mesh.0 as u64) << 16 | mesh.1 as u64));
    s = splitmix64(s ^ p.to_bits());
    splitmix64(s ^ index)
}

/// Evaluate every ordered pair of the root's component under one fault
/// pattern.
fn evaluate_pattern(
    topo: &Topology,
    root: NodeId,
    prefs: &[Preference],
    manhattan: bool,
    down_rule: DownRule,
) -> Accum {
    let state = RoutingState::build(
        topo.clone(),
        root,
        prefs,
        RoutingOptions {
            manhattan_tiebreak: manhattan,
            down_rule,
            ..RoutingOptions::default()
        },
    )
    .expect("pattern state");
    let covered: Vec<NodeId> = state.covered_nodes().collect();
    let shortest: Vec<(Vec<Option<u32>>, Vec<u64>)> = covered
        .iter()
        .map(|&src| shortest_paths_from(topo, src))
        .collect();

    let mut accum = Accum::new();
    for &dst in &covered {
        let mut solver = DestinationEnsemble::new(&state, dst).expect("covered dest");
        for (si, &src) in covered.iter().enumerate() {
            if src == dst {
                continue;
            }
            let ens = solver
                .stats_from(src, PacketPhase::Ascending)
                .expect("covered pair");
            let len = shortest[si].0[dst.index()].expect("component pair connected");
            let count = shortest[si].1[dst.index()];
            accum.add_pair(&PairStats::from_parts(src, dst, len, count, ens));
        }
    }
    accum
}

/// Run the full sweep: one report per (mesh, K, p) point.
///
/// Fault patterns are drawn with successive per-point seeds until the pair
/// budget is reached; p = 0 is deterministic, so a single pattern covering
/// every ordered pair exactly once suffices there. Patterns whose root
/// component has fewer than two nodes are skipped (counted in the report).
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    validate_config(config)?;
    let mut reports = Vec::new();
    for &mesh in &config.mesh_sizes {
        for &k in &config.tree_counts {
            let prefs: Vec<Preference> = if config.preferences.is_empty() {
                Preference::defaults(k)?
            } else {
                config.preferences[..k].to_vec()
            };
            for &p in &config.fail_probs {
                reports.push(run_point(config, mesh, k, &prefs, p)?);
            }
        }
    }
    Ok(reports)
}

fn validate_config(config: &ExperimentConfig) -> Result<()> {
    if config.mesh_sizes.is_empty() || config.tree_counts.is_empty() || config.fail_probs.is_empty()
    {
        return Err(Error::InvalidArgument(
            "mesh sizes, tree counts and failure probabilities must be non-empty".into(),
        ));
    }
    for &p in &config.fail_probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "failure probability {p} outside [0,1]"
            )));
        }
    }
    for &k in &config.tree_counts {
        if k == 0 {
            return Err(Error::InvalidArgument("tree count must be positive".into()));
        }
        if !config.preferences.is_empty() && config.preferences.len() < k {
            return Err(Error::InvalidArgument(format!(
                "{k} trees requested but only {} preference orders given",
                config.preferences.len()
            )));
        }
    }
    if config.min_pairs == 0 {
        return Err(Error::InvalidArgument("min_pairs must be positive".into()));
    }
    Ok(())
}

fn run_point(
    config: &ExperimentConfig,
    mesh: (u16, u16),
    k: usize,
    prefs: &[Preference],
    p: f64,
) -> Result<MetricsReport> {
    let base = Topology::build_mesh(mesh.0, mesh.1)?;

    // Pattern selection is sequential and cheap; the expensive pair
    // evaluation below fans out over workers without affecting which
    // patterns are chosen.
    let mut chosen: Vec<(Topology, NodeId)> = Vec::new();
    let mut expected_pairs = 0u64;
    let mut skipped = 0u64;
    let mut index = 0u64;
    let mut consecutive_skips = 0u32;
    loop {
        let seed = pattern_seed(config.master_seed, mesh, p, index);
        index += 1;
        let faulted = base.inject_link_faults(p, seed, config.granularity)?;
        let root = choose_root(&faulted, config.root_policy)?;
        let component = faulted.component(root);
        if component.len() < 2 {
            skipped += 1;
            consecutive_skips += 1;
            if consecutive_skips > 1000 {
                return Err(Error::InvalidArgument(format!(
                    "could not draw a usable fault pattern for {}x{} at p={p}",
                    mesh.0, mesh.1
                )));
            }
            continue;
        }
        consecutive_skips = 0;
        expected_pairs += (component.len() * (component.len() - 1)) as u64;
        chosen.push((faulted, root));
        if p == 0.0 || expected_pairs >= config.min_pairs {
            break;
        }
    }

    let accums = crate::map_collect(&chosen, config.workers, |(topo, root)| {
        evaluate_pattern(topo, *root, prefs, config.manhattan, config.down_rule)
    });
    let mut total = Accum::new();
    for a in accums {
        total.merge(a);
    }
    debug_assert_eq!(total.pairs, expected_pairs);

    let pairs_big = BigRational::from(BigInt::from(total.pairs));
    Ok(MetricsReport {
        mesh,
        k_trees: k,
        fail_prob: p,
        pairs: total.pairs,
        averaging: config.averaging,
        mean_stretch_expectation: &total.stretch_sum / &pairs_big,
        mean_stretch_distinct: &total.stretch_unweighted_sum / &pairs_big,
        frac_nonminimal: BigRational::new(
            BigInt::from(total.nonminimal),
            BigInt::from(total.pairs),
        ),
        mean_adaptiveness: (total.adapt_count > 0).then(|| {
            &total.adapt_sum / BigRational::from(BigInt::from(total.adapt_count))
        }),
        patterns_used: chosen.len() as u64,
        patterns_skipped: skipped,
        seed: config.master_seed,
    })
}

/// Fixed-point decimal rendering with round-half-even, as used in reports.
pub fn format_rational(r: &BigRational, digits: u32) -> String {
    let negative = r.is_negative();
    let num = r.numer().abs();
    let den = r.denom().abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = &num * &scale;
    let mut q = &scaled / &den;
    let rem = &scaled % &den;
    let twice = &rem * BigInt::from(2);
    let round_up = match twice.cmp(&den) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (&q % BigInt::from(2)) == BigInt::from(1),
    };
    if round_up {
        q += 1;
    }
    let int_part = &q / &scale;
    let frac_part = &q % &scale;
    let sign = if negative && !q.is_zero() { "-" } else { "" };
    format!(
        "{sign}{int_part}.{frac:0>width$}",
        frac = frac_part.to_string(),
        width = digits as usize
    )
}

/// Render reports as delimiter-separated rows with the canonical header.
pub fn render_reports(reports: &[MetricsReport], sep: char) -> String {
    let mut out = String::new();
    let header = [
        "mesh",
        "k_trees",
        "fail_prob",
        "pairs",
        "mean_stretch",
        "frac_nonminimal",
        "mean_adaptiveness",
        "patterns_used",
        "patterns_skipped",
        "seed",
    ];
    out.push_str(&header.join(&sep.to_string()));
    out.push('\n');
    for r in reports {
        let fields = [
            format!("{}x{}", r.mesh.0, r.mesh.1),
            r.k_trees.to_string(),
            format!("{:.6}", r.fail_prob),
            r.pairs.to_string(),
            format_rational(r.mean_stretch(), 6),
            format_rational(&r.frac_nonminimal, 6),
            r.mean_adaptiveness
                .as_ref()
                .map(|a| format_rational(a, 6))
                .unwrap_or_else(|| "nan".to_string()),
            r.patterns_used.to_string(),
            r.patterns_skipped.to_string(),
            r.seed.to_string(),
        ];
        out.push_str(&fields.join(&sep.to_string()));
        out.push('\n');
    }
    out
}
