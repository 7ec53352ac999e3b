//! Oracle-equality tests: the library's DP/BFS answers must match plain
//! exhaustive enumeration on instances small enough to enumerate.

mod common;

use common::{bfs_on_tree, enumerate_min_paths, enumerate_routes, random_topology};

use treeroute::addressing::{address_of, tree_distance};
use treeroute::forest::{choose_root, grow_tree, Preference, RootPolicy};
use treeroute::metrics::{route_ensemble, shortest_count, shortest_len, PairStats};
use treeroute::router::{DownRule, RoutingOptions, RoutingState};
use treeroute::topology::{FaultGranularity, NodeId, Topology};

fn opts(rule: DownRule) -> RoutingOptions {
    RoutingOptions {
        down_rule: rule,
        ..RoutingOptions::default()
    }
}

fn check_ensembles_against_enumeration(state: &RoutingState) {
    let covered: Vec<NodeId> = state.covered_nodes().collect();
    for &src in &covered {
        for &dst in &covered {
            if src == dst {
                continue;
            }
            let dp = route_ensemble(state, src, dst).unwrap();
            let oracle = enumerate_routes(state, src, dst);
            assert_eq!(dp.max_len, oracle.max_len, "max {src}->{dst}");
            assert_eq!(dp.distinct_routes, oracle.distinct, "count {src}->{dst}");
            assert_eq!(dp.route_len_sum, oracle.len_sum, "len sum {src}->{dst}");
            assert_eq!(dp.expected_len, oracle.expected, "expectation {src}->{dst}");
        }
    }
}

#[test]
fn ensemble_dp_matches_enumeration_fault_free() {
    for (w, h) in [(2u16, 2u16), (3, 3), (4, 4)] {
        let topo = Topology::build_mesh(w, h).unwrap();
        for k in [1usize, 2] {
            for rule in [DownRule::StrictAncestor, DownRule::DeliverableCone] {
                for policy in [RootPolicy::Central, RootPolicy::HighestId] {
                    let root = choose_root(&topo, policy).unwrap();
                    let state = RoutingState::build(
                        topo.clone(),
                        root,
                        &Preference::defaults(k).unwrap(),
                        opts(rule),
                    )
                    .unwrap();
                    check_ensembles_against_enumeration(&state);
                }
            }
        }
    }
}

#[test]
fn ensemble_dp_matches_enumeration_faulted() {
    let base = Topology::build_mesh(4, 4).unwrap();
    for seed in 0..12u64 {
        for granularity in [FaultGranularity::Link, FaultGranularity::Arc] {
            let topo = base.inject_link_faults(0.25, seed, granularity).unwrap();
            let root = choose_root(&topo, RootPolicy::Central).unwrap();
            if topo.component(root).len() < 2 {
                continue;
            }
            for rule in [DownRule::StrictAncestor, DownRule::DeliverableCone] {
                let state = RoutingState::build(
                    topo.clone(),
                    root,
                    &Preference::defaults(2).unwrap(),
                    opts(rule),
                )
                .unwrap();
                check_ensembles_against_enumeration(&state);
            }
        }
    }
}

#[test]
fn ensemble_dp_matches_enumeration_arbitrary_graphs() {
    for seed in 100..112u64 {
        let topo = random_topology(seed, 16);
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        let state = RoutingState::build(
            topo,
            root,
            &[Preference::vertical()],
            RoutingOptions::default(),
        )
        .unwrap();
        check_ensembles_against_enumeration(&state);
    }
}

#[test]
fn tree_distance_matches_bfs_on_tree() {
    for seed in 0..50u64 {
        let topo = random_topology(seed, 25);
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        let tree = grow_tree(&topo, root, &Preference::vertical()).unwrap();
        let covered: Vec<NodeId> = tree.covered_nodes().collect();
        for &a in &covered {
            let oracle = bfs_on_tree(&tree, &topo, a);
            let addr_a = address_of(&tree, a).unwrap();
            for &b in &covered {
                let addr_b = address_of(&tree, b).unwrap();
                assert_eq!(
                    Some(tree_distance(&addr_a, &addr_b)),
                    oracle[b.index()],
                    "seed {seed} pair {a},{b}"
                );
                assert_eq!(
                    tree_distance(&addr_a, &addr_b),
                    tree_distance(&addr_b, &addr_a)
                );
            }
        }
    }
}

#[test]
fn shortest_paths_match_enumeration() {
    // Fault-free sanity: the C(6,3) lattice count.
    let topo = Topology::build_mesh(4, 4).unwrap();
    let (len, count) = enumerate_min_paths(&topo, NodeId(0), NodeId(15)).unwrap();
    assert_eq!(len, 6);
    assert_eq!(count, 20);
    assert_eq!(shortest_len(&topo, NodeId(0), NodeId(15)).unwrap(), len);
    assert_eq!(shortest_count(&topo, NodeId(0), NodeId(15)).unwrap(), count);

    // The pinned faulted instance: every pair of the root's component.
    let faulted = topo.inject_link_faults(0.5, 42, FaultGranularity::Link).unwrap();
    let root = choose_root(&faulted, RootPolicy::Central).unwrap();
    let comp: Vec<NodeId> = faulted.component(root).into_iter().collect();
    assert!(comp.len() >= 2);
    for &src in &comp {
        for &dst in &comp {
            if src == dst {
                continue;
            }
            let (len, count) = enumerate_min_paths(&faulted, src, dst).unwrap();
            assert_eq!(shortest_len(&faulted, src, dst).unwrap(), len, "{src}->{dst}");
            assert_eq!(shortest_count(&faulted, src, dst).unwrap(), count, "{src}->{dst}");
        }
    }
}

#[test]
fn corner_pair_adaptiveness_pinned() {
    // Two-tree fault-free 4x4, central root, corner to opposite corner:
    // 20 minimal paths; the DP and the enumeration agree on the distinct
    // route count, which is pinned here after the first verified run.
    let topo = Topology::build_mesh(4, 4).unwrap();
    let state = RoutingState::build(
        topo,
        NodeId(10),
        &Preference::defaults(2).unwrap(),
        RoutingOptions::default(),
    )
    .unwrap();
    let stats = PairStats::build(&state, NodeId(0), NodeId(15)).unwrap();
    let oracle = enumerate_routes(&state, NodeId(0), NodeId(15));
    assert_eq!(stats.distinct_routes, oracle.distinct);
    assert!(stats.always_minimal);
    assert_eq!(stats.shortest_count, 20);
    assert_eq!(
        stats.distinct_routes,
        PINNED_CORNER_DISTINCT_ROUTES,
        "distinct routes for the (0,15) corner pair changed"
    );
}

const PINNED_CORNER_DISTINCT_ROUTES: u128 = 12;
