//! Property tests for the structural invariants: codec roundtrips, fault
//! injection purity, BFS optimality, and the route-shape guarantees.

mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use treeroute::addressing::{
    address_of, is_ancestor, rle_decode, rle_encode, tree_distance, TreeAddress,
};
use treeroute::forest::{build_forest, choose_root, grow_tree, PortLabel, Preference, RootPolicy};
use treeroute::router::{ArcClass, DownRule, PacketPhase, RouteMode, RoutingOptions, RoutingState};
use treeroute::topology::{FaultGranularity, NodeId, Topology};

fn label_seq() -> impl Strategy<Value = Vec<PortLabel>> {
    prop::collection::vec(0u16..4, 0..40).prop_map(|v| v.into_iter().map(PortLabel).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rle_roundtrip_and_maximality(labels in label_seq()) {
        let addr = TreeAddress::new(labels);
        let encoded = rle_encode(&addr);
        prop_assert_eq!(rle_decode(&encoded).unwrap(), addr);
        for pair in encoded.runs().windows(2) {
            prop_assert_ne!(pair[0].0, pair[1].0);
        }
        prop_assert!(encoded.runs().iter().all(|&(_, c)| c > 0));
    }

    #[test]
    fn ancestor_distance_relation(a in label_seq(), suffix in label_seq()) {
        let long = TreeAddress::new(
            a.clone().into_iter().chain(suffix.clone()).collect());
        let a = TreeAddress::new(a);
        prop_assert!(is_ancestor(&a, &long));
        prop_assert_eq!(tree_distance(&a, &long) as usize, suffix.len());
        prop_assert_eq!(tree_distance(&a, &long), tree_distance(&long, &a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fault_injection_pure_and_symmetric(
        w in 2u16..6, h in 2u16..6, p in 0.0f64..1.0, seed in any::<u64>(),
        arc_level in any::<bool>(),
    ) {
        let granularity = if arc_level { FaultGranularity::Arc } else { FaultGranularity::Link };
        let base = Topology::build_mesh(w, h).unwrap();
        let a = base.inject_link_faults(p, seed, granularity).unwrap();
        let b = base.inject_link_faults(p, seed, granularity).unwrap();
        prop_assert_eq!(a.healthy_arcs(), b.healthy_arcs());
        // Arc-pair symmetry: wherever one arc of a link exists, so does the
        // other (health may differ).
        for arc in base.healthy_arcs() {
            let fwd = a.arc_healthy(arc.from, arc.to);
            let bwd = a.arc_healthy(arc.to, arc.from);
            if granularity == FaultGranularity::Link {
                prop_assert_eq!(fwd, bwd);
            }
        }
        // Mesh coords: every arc joins 4-neighbors.
        for arc in a.healthy_arcs() {
            prop_assert_eq!(a.manhattan(arc.from, arc.to), Some(1));
        }
    }

    #[test]
    fn bfs_depths_agree_across_trees(seed in any::<u64>(), p in 0.0f64..0.5) {
        let topo = Topology::build_mesh(5, 5)
            .unwrap()
            .inject_link_faults(p, seed, FaultGranularity::Link)
            .unwrap();
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        let forest = build_forest(
            &topo,
            root,
            &[Preference::vertical(), Preference::horizontal()],
        )
        .unwrap();
        let comp = topo.component(root);
        for n in topo.nodes() {
            prop_assert_eq!(forest[0].depth(n), forest[1].depth(n));
            prop_assert_eq!(forest[0].covers(n), comp.contains(&n));
        }
        // Depth equals hop distance over bidirectionally healthy links:
        // depth(child) = depth(parent) + 1 and the root sits at zero.
        prop_assert_eq!(forest[0].depth(root), Some(0));
        for n in forest[0].covered_nodes() {
            if let Some(parent) = forest[0].parent(n) {
                prop_assert_eq!(
                    forest[0].depth(n).unwrap(),
                    forest[0].depth(parent).unwrap() + 1
                );
            }
        }
    }

    #[test]
    fn leaf_removal_keeps_addresses(seed in any::<u64>()) {
        let topo = Topology::build_mesh(4, 4)
            .unwrap()
            .inject_link_faults(0.2, seed, FaultGranularity::Link)
            .unwrap();
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        let forest = build_forest(
            &topo,
            root,
            &[Preference::vertical(), Preference::horizontal()],
        )
        .unwrap();
        let dmax = forest[0].max_depth();
        if dmax == 0 {
            return Ok(());
        }
        let leaf = forest[0]
            .covered_nodes()
            .find(|&n| forest[0].depth(n) == Some(dmax))
            .unwrap();
        prop_assert!(treeroute::forest::removable_without_reconfig(&forest, leaf));
        for tree in &forest {
            let trimmed = tree.without_leaf(leaf);
            for n in trimmed.covered_nodes() {
                prop_assert_eq!(
                    address_of(&trimmed, n).unwrap(),
                    address_of(tree, n).unwrap()
                );
            }
        }
    }
}

fn route_invariants(state: &RoutingState, mode: RouteMode) -> Result<(), TestCaseError> {
    let covered: Vec<NodeId> = state.covered_nodes().collect();
    let bound = 2 * state.topology().node_count();
    for &src in &covered {
        for &dst in &covered {
            if src == dst {
                continue;
            }
            let trace = state.route(src, dst, mode).unwrap();
            prop_assert!(trace.has_valid_shape(), "shape {src}->{dst}");
            prop_assert!(trace.len() <= bound, "length bound {src}->{dst}");
            prop_assert_eq!(*trace.nodes().last().unwrap(), dst);

            // No (node, phase) state repeats along the walk.
            let mut phase = PacketPhase::Ascending;
            let mut seen = HashSet::new();
            prop_assert!(seen.insert((src, phase)));
            for (i, &class) in trace.classes().iter().enumerate() {
                if class == ArcClass::Down {
                    phase = PacketPhase::Descending;
                }
                prop_assert!(
                    seen.insert((trace.nodes()[i + 1], phase)),
                    "state repeat {src}->{dst}"
                );
            }

            // Every down hop strictly shrinks the multi-tree potential.
            for (i, &class) in trace.classes().iter().enumerate() {
                if class == ArcClass::Down {
                    prop_assert!(
                        state.potential(trace.nodes()[i + 1], dst)
                            < state.potential(trace.nodes()[i], dst)
                    );
                }
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routes_deliver_with_valid_shape(
        seed in any::<u64>(),
        p in 0.0f64..0.4,
        k in 1usize..=2,
        cone in any::<bool>(),
        arc_level in any::<bool>(),
    ) {
        let granularity = if arc_level { FaultGranularity::Arc } else { FaultGranularity::Link };
        let topo = Topology::build_mesh(4, 4)
            .unwrap()
            .inject_link_faults(p, seed, granularity)
            .unwrap();
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        if topo.component(root).len() < 2 {
            return Ok(());
        }
        let state = RoutingState::build(
            topo,
            root,
            &Preference::defaults(k).unwrap(),
            RoutingOptions {
                down_rule: if cone { DownRule::DeliverableCone } else { DownRule::StrictAncestor },
                ..RoutingOptions::default()
            },
        )
        .unwrap();
        route_invariants(&state, RouteMode::Deterministic)?;
        route_invariants(&state, RouteMode::Adaptive { seed })?;
    }

    #[test]
    fn strict_ancestor_down_hops_land_on_ancestors(seed in any::<u64>()) {
        let topo = Topology::build_mesh(5, 5)
            .unwrap()
            .inject_link_faults(0.2, seed, FaultGranularity::Link)
            .unwrap();
        let root = choose_root(&topo, RootPolicy::Central).unwrap();
        if topo.component(root).len() < 2 {
            return Ok(());
        }
        let state = RoutingState::build(
            topo,
            root,
            &Preference::defaults(2).unwrap(),
            RoutingOptions {
                down_rule: DownRule::StrictAncestor,
                ..RoutingOptions::default()
            },
        )
        .unwrap();
        let covered: Vec<NodeId> = state.covered_nodes().collect();
        for &src in &covered {
            for &dst in &covered {
                if src == dst {
                    continue;
                }
                let trace = state.route(src, dst, RouteMode::Adaptive { seed }).unwrap();
                for (i, &class) in trace.classes().iter().enumerate() {
                    if class == ArcClass::Down {
                        let landed = trace.nodes()[i + 1];
                        let ancestor_somewhere = (0..state.tree_count()).any(|t| {
                            is_ancestor(
                                state.addr(t, landed).unwrap(),
                                state.addr(t, dst).unwrap(),
                            )
                        });
                        prop_assert!(ancestor_somewhere, "{src}->{dst} hop {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn grown_trees_are_bfs_optimal(seed in any::<u64>(), p in 0.0f64..0.6) {
        let topo = Topology::build_mesh(5, 5)
            .unwrap()
            .inject_link_faults(p, seed, FaultGranularity::Link)
            .unwrap();
        let root = choose_root(&topo, RootPolicy::HighestId).unwrap();
        let tree = grow_tree(&topo, root, &Preference::horizontal()).unwrap();
        // Oracle: plain BFS over bidirectionally healthy links.
        let mut dist = vec![None; topo.node_count()];
        dist[root.index()] = Some(0u32);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()].unwrap();
            for v in topo.bidirectional_neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        for n in topo.nodes() {
            prop_assert_eq!(tree.depth(n), dist[n.index()]);
        }
    }
}
