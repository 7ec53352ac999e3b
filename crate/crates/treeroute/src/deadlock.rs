//! Channel dependency graph construction and acyclicity verification.
//!
//! A channel (arc) depends on another when some packet may occupy the first
//! while waiting for the second, i.e. when the two arcs appear consecutively
//! on a path the forwarding rules could produce for some destination. The
//! routing protocol is deadlock free when this dependency graph is acyclic.

use std::collections::BTreeSet;

use crate::router::{ArcClass, PacketPhase, RoutingState};
use crate::topology::{Arc, NodeId};

/// Which next-hop set induces dependencies: every legal hop (the whole
/// protocol family) or only the greedy candidates (one tie-break policy).
/// The greedy graph is a subgraph of the legal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependencySource {
    Legal,
    Greedy,
}

/// Dependency graph over healthy arcs.
#[derive(Debug, Clone)]
pub struct ChannelDependencyGraph {
    verts: Vec<Arc>,
    succ: Vec<Vec<usize>>,
}

impl ChannelDependencyGraph {
    pub(crate) fn from_parts(verts: Vec<Arc>, edges: BTreeSet<(usize, usize)>) -> Self {
        let mut succ = vec![Vec::new(); verts.len()];
        for (a, b) in edges {
            succ[a].push(b);
        }
        ChannelDependencyGraph { verts, succ }
    }

    pub fn vertices(&self) -> &[Arc] {
        &self.verts
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    /// True when `(a, b)` is a dependency edge.
    pub fn has_edge(&self, a: Arc, b: Arc) -> bool {
        let ia = self.verts.iter().position(|&v| v == a);
        let ib = self.verts.iter().position(|&v| v == b);
        match (ia, ib) {
            (Some(ia), Some(ib)) => self.succ[ia].binary_search(&ib).is_ok(),
            _ => false,
        }
    }
}

/// Enumerate, for every destination, which arc can wait on which, and union
/// the result into one destination-agnostic dependency graph.
///
/// Injection is covered implicitly: every arc usable as a first hop is a
/// vertex, and dependencies start from the arc a packet arrived through.
pub fn build_cdg(state: &RoutingState, source: DependencySource) -> ChannelDependencyGraph {
    let verts: Vec<Arc> = state.topology().healthy_arcs();
    let index = |a: Arc| verts.binary_search(&a).expect("healthy arc");
    let dests: Vec<NodeId> = state.covered_nodes().collect();

    let per_dest: Vec<Vec<(usize, usize)>> = crate::map_collect(&dests, None, |&t| {
        let mut edges = Vec::new();
        // Next-hop sets for both phases, per current node.
        let n = state.topology().node_count();
        let mut asc: Vec<Option<Vec<(NodeId, PacketPhase)>>> = vec![None; n];
        let mut desc: Vec<Option<Vec<(NodeId, PacketPhase)>>> = vec![None; n];
        for &u in &dests {
            if u == t {
                continue;
            }
            let set_for = |phase| match source {
                DependencySource::Legal => state
                    .legal_next_hops(u, t, phase)
                    .map(|v| v.into_iter().map(|(n, _, p)| (n, p)).collect())
                    .unwrap_or_default(),
                DependencySource::Greedy => state.greedy_candidates(u, t, phase).unwrap_or_default(),
            };
            asc[u.index()] = Some(set_for(PacketPhase::Ascending));
            desc[u.index()] = Some(set_for(PacketPhase::Descending));
        }
        let contains = |set: &Option<Vec<(NodeId, PacketPhase)>>, n: NodeId| {
            set.as_ref().map_or(false, |s| s.iter().any(|&(m, _)| m == n))
        };
        for &a1 in &verts {
            let (u, v) = (a1.from, a1.to);
            if !state.covers(u) || !state.covers(v) || u == t || v == t {
                continue;
            }
            let class = state.classify_arc(u, v).expect("covered endpoints");
            // a1 must be usable toward t in some phase.
            let usable = contains(&asc[u.index()], v)
                || (class == ArcClass::Down && contains(&desc[u.index()], v));
            if !usable {
                continue;
            }
            // Phase after traversing a1 depends only on its class: down arcs
            // commit the packet to descending, anything else keeps ascending.
            let after = if class == ArcClass::Down {
                &desc[v.index()]
            } else {
                &asc[v.index()]
            };
            if let Some(nexts) = after {
                for &(w, _) in nexts {
                    edges.push((index(a1), index(Arc { from: v, to: w })));
                }
            }
        }
        edges
    });

    let mut edges = BTreeSet::new();
    for chunk in per_dest {
        edges.extend(chunk);
    }
    ChannelDependencyGraph::from_parts(verts, edges)
}

/// Depth-first search for a cycle; returns one witness (the arcs along the
/// cycle, in dependency order) or `None` when the graph is acyclic.
pub fn find_cycle(cdg: &ChannelDependencyGraph) -> Option<Vec<Arc>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let n = cdg.vertex_count();
    let mut color = vec![Color::White; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if color[start] != Color::White {
            continue;
        }
        color[start] = Color::Gray;
        stack.push((start, 0));
        while let Some(frame) = stack.last_mut() {
            let v = frame.0;
            if frame.1 < cdg.successors(v).len() {
                let w = cdg.successors(v)[frame.1];
                frame.1 += 1;
                match color[w] {
                    Color::White => {
                        color[w] = Color::Gray;
                        stack.push((w, 0));
                    }
                    Color::Gray => {
                        let pos = stack.iter().position(|&(x, _)| x == w).unwrap();
                        return Some(stack[pos..].iter().map(|&(x, _)| cdg.vertices()[x]).collect());
                    }
                    Color::Black => {}
                }
            } else {
                color[v] = Color::Black;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Preference;
    use crate::router::{Restriction, RoutingOptions};
    use crate::topology::{FaultGranularity, Topology};

    fn mesh_state(k: usize, restriction: Restriction) -> RoutingState {
        let topo = Topology::build_mesh(4, 4).unwrap();
        RoutingState::build(
            topo,
            NodeId(15),
            &Preference::defaults(k).unwrap(),
            RoutingOptions {
                restriction,
                ..RoutingOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn fault_free_mesh_is_acyclic() {
        for k in [1, 2] {
            let state = mesh_state(k, Restriction::Enforced);
            for source in [DependencySource::Legal, DependencySource::Greedy] {
                let cdg = build_cdg(&state, source);
                assert_eq!(find_cycle(&cdg), None, "k={k} source={source:?}");
            }
        }
    }

    #[test]
    fn ring_without_restrictions_has_cycle() {
        // 4-node ring: with every rule disabled the four arcs around the ring
        // wait on each other. The verifier must produce that witness.
        let topo = Topology::from_text("nodes 4\nlink 0 1\nlink 1 2\nlink 2 3\nlink 3 0\n").unwrap();
        let state = RoutingState::build(
            topo,
            NodeId(0),
            &[Preference::vertical()],
            RoutingOptions {
                restriction: Restriction::Unrestricted,
                ..RoutingOptions::default()
            },
        )
        .unwrap();
        let cdg = build_cdg(&state, DependencySource::Legal);
        let cycle = find_cycle(&cdg).expect("unrestricted ring must deadlock");
        // The witness must be a real closed dependency chain.
        for i in 0..cycle.len() {
            let a = cycle[i];
            let b = cycle[(i + 1) % cycle.len()];
            assert_eq!(a.to, b.from);
            assert!(cdg.has_edge(a, b));
        }
        // The hand-constructed 4-arc cycle around the ring is also present.
        let ring = [
            Arc { from: NodeId(0), to: NodeId(1) },
            Arc { from: NodeId(1), to: NodeId(2) },
            Arc { from: NodeId(2), to: NodeId(3) },
            Arc { from: NodeId(3), to: NodeId(0) },
        ];
        for i in 0..4 {
            assert!(cdg.has_edge(ring[i], ring[(i + 1) % 4]));
        }
        // And the same ring with the rules enforced is clean.
        let topo = Topology::from_text("nodes 4\nlink 0 1\nlink 1 2\nlink 2 3\nlink 3 0\n").unwrap();
        let ok = RoutingState::build(
            topo,
            NodeId(0),
            &[Preference::vertical()],
            RoutingOptions::default(),
        )
        .unwrap();
        assert_eq!(find_cycle(&build_cdg(&ok, DependencySource::Legal)), None);
    }

    #[test]
    fn trivial_graphs_have_no_cycle() {
        let empty = ChannelDependencyGraph::from_parts(Vec::new(), BTreeSet::new());
        assert_eq!(find_cycle(&empty), None);

        let a = Arc { from: NodeId(0), to: NodeId(1) };
        let b = Arc { from: NodeId(1), to: NodeId(2) };
        let dag = ChannelDependencyGraph::from_parts(
            vec![a, b],
            [(0usize, 1usize)].into_iter().collect(),
        );
        assert_eq!(find_cycle(&dag), None);
    }

    #[test]
    fn greedy_dependencies_are_subset_of_legal() {
        let topo = Topology::build_mesh(4, 4)
            .unwrap()
            .inject_link_faults(0.2, 31, FaultGranularity::Link)
            .unwrap();
        let root = crate::forest::choose_root(&topo, crate::forest::RootPolicy::Central).unwrap();
        let state = RoutingState::build(
            topo,
            root,
            &Preference::defaults(2).unwrap(),
            RoutingOptions::default(),
        )
        .unwrap();
        let legal = build_cdg(&state, DependencySource::Legal);
        let greedy = build_cdg(&state, DependencySource::Greedy);
        assert_eq!(legal.vertices(), greedy.vertices());
        for (v, succs) in greedy.succ.iter().enumerate() {
            for w in succs {
                assert!(legal.succ[v].binary_search(w).is_ok());
            }
        }
        assert!(greedy.edge_count() <= legal.edge_count());
    }

    #[test]
    fn faulted_meshes_stay_acyclic() {
        for seed in 0..20u64 {
            let topo = Topology::build_mesh(4, 4)
                .unwrap()
                .inject_link_faults(0.25, seed, FaultGranularity::Arc)
                .unwrap();
            let root =
                crate::forest::choose_root(&topo, crate::forest::RootPolicy::Central).unwrap();
            let state = RoutingState::build(
                topo,
                root,
                &Preference::defaults(2).unwrap(),
                RoutingOptions::default(),
            )
            .unwrap();
            let cdg = build_cdg(&state, DependencySource::Legal);
            assert_eq!(find_cycle(&cdg), None, "seed {seed}");
        }
    }
}
