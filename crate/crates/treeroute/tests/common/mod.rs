//! Test-only oracles, independent of the library's DP/BFS implementations:
//! plain exhaustive enumeration, small and slow on purpose.

// Each test target uses its own subset of these helpers.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treeroute::forest::SpanningTree;
use treeroute::router::{PacketPhase, RoutingState};
use treeroute::topology::{NodeId, Topology};

pub struct EnumeratedRoutes {
    pub max_len: u32,
    pub distinct: u128,
    pub len_sum: u128,
    pub expected: BigRational,
}

/// Walk every branch of the greedy candidate sets explicitly, carrying the
/// probability of each branch. No memoization: this is the oracle the
/// ensemble DP is checked against.
pub fn enumerate_routes(state: &RoutingState, src: NodeId, dst: NodeId) -> EnumeratedRoutes {
    let mut out = EnumeratedRoutes {
        max_len: 0,
        distinct: 0,
        len_sum: 0,
        expected: BigRational::zero(),
    };
    fn go(
        state: &RoutingState,
        v: NodeId,
        phase: PacketPhase,
        dst: NodeId,
        len: u32,
        prob: BigRational,
        out: &mut EnumeratedRoutes,
    ) {
        if v == dst {
            out.max_len = out.max_len.max(len);
            out.distinct += 1;
            out.len_sum += len as u128;
            out.expected += prob * BigRational::from(BigInt::from(len));
            return;
        }
        let cands = state.greedy_candidates(v, dst, phase).unwrap();
        assert!(!cands.is_empty(), "stuck at {v} toward {dst}");
        let share = prob / BigRational::from(BigInt::from(cands.len() as u32));
        for (n, p) in cands {
            go(state, n, p, dst, len + 1, share.clone(), out);
        }
    }
    go(
        state,
        src,
        PacketPhase::Ascending,
        dst,
        0,
        BigRational::from(BigInt::from(1)),
        &mut out,
    );
    out
}

/// Hop distances from `root` along tree edges only.
pub fn bfs_on_tree(tree: &SpanningTree, topo: &Topology, from: NodeId) -> Vec<Option<u32>> {
    let n = topo.node_count();
    let mut adj = vec![Vec::new(); n];
    for v in topo.nodes() {
        if let Some(p) = tree.parent(v) {
            adj[v.index()].push(p);
            adj[p.index()].push(v);
        }
    }
    let mut dist = vec![None; n];
    dist[from.index()] = Some(0);
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.index()].unwrap();
        for &w in &adj[u.index()] {
            if dist[w.index()].is_none() {
                dist[w.index()] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Count paths of exactly the minimum length by explicit DFS.
pub fn enumerate_min_paths(topo: &Topology, src: NodeId, dst: NodeId) -> Option<(u32, u64)> {
    // Minimum length by brute-force iterative deepening over healthy arcs.
    let mut best: Option<u32> = None;
    for limit in 0..=(topo.node_count() as u32) {
        if count_paths(topo, src, dst, limit) > 0 {
            best = Some(limit);
            break;
        }
    }
    let len = best?;
    Some((len, count_paths(topo, src, dst, len)))
}

fn count_paths(topo: &Topology, at: NodeId, dst: NodeId, budget: u32) -> u64 {
    if at == dst {
        return if budget == 0 { 1 } else { 0 };
    }
    if budget == 0 {
        return 0;
    }
    topo.healthy_out(at)
        .map(|n| count_paths(topo, n, dst, budget - 1))
        .sum()
}

/// Random connected-ish arbitrary graph (no coordinates), 4..=max_nodes
/// nodes: a random spine keeps most of it in one component, extra links are
/// sprinkled on top.
pub fn random_topology(seed: u64, max_nodes: usize) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=max_nodes);
    let mut topo = Topology::with_nodes(n);
    let mut order: Vec<u32> = (0..n as u32).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for w in order.windows(2) {
        topo.add_link(NodeId(w[0]), NodeId(w[1]));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let a = rng.gen_range(0..n as u32);
        let b = rng.gen_range(0..n as u32);
        if a != b {
            topo.add_link(NodeId(a), NodeId(b));
        }
    }
    topo
}
