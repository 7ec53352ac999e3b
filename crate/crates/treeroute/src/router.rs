//! The forwarding engine: arc classification, legal next hops under the
//! deadlock restriction, greedy multi-tree selection with the Manhattan
//! tie-break, and full route generation.
//!
//! Every packet walks an ascending phase (up or sideways channels) followed
//! by a descending phase (down channels admitted by the configured
//! [`DownRule`]). The phase bit travels with the packet; once a down channel
//! is taken the packet may never turn back up, which is exactly the path
//! shape the dependency-cycle argument needs. Sideways hops must strictly
//! shrink the designated tree's distance, so they cannot cycle either.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::addressing::{address_of, is_ancestor, tree_distance, TreeAddress};
use crate::forest::{build_forest, Preference, SpanningTree};
use crate::topology::{NodeId, Topology};
use crate::{Error, Result};

/// Channel category by the depth change of its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcClass {
    Up,
    Side,
    Down,
}

impl fmt::Display for ArcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcClass::Up => "UP",
            ArcClass::Side => "SIDE",
            ArcClass::Down => "DOWN",
        })
    }
}

/// One-bit walk state: starts ascending, flips on the first down hop and
/// never reverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketPhase {
    Ascending,
    Descending,
}

/// Whether the deadlock-avoidance rules are applied. `Unrestricted` drops
/// them all (every healthy arc is a legal hop) and exists so the dependency
/// verifier has a broken protocol to catch; routing with it is not meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restriction {
    Enforced,
    Unrestricted,
}

/// Gate for down arcs. Both variants keep every path shaped (Up|Side)*Down*
/// and guarantee the descent ends at the destination; they differ in how
/// much of the mesh may be crossed while descending.
///
/// `StrictAncestor` admits a down arc only when its head is a tree ancestor
/// of the destination, so the descent follows tree paths. `DeliverableCone`
/// also admits down arcs that strictly shrink the multi-tree potential and
/// land on a node from which a pure descent to the destination still exists;
/// tree ancestors always qualify, so the cone is a superset. The relaxed
/// gate is what makes two-tree routing minimal on fault-free meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownRule {
    StrictAncestor,
    DeliverableCone,
}

#[derive(Debug, Clone, Copy)]
pub struct RoutingOptions {
    /// Tree used for the sideways-arc distance test.
    pub designated_tree: usize,
    /// Break greedy ties by Manhattan distance when coordinates exist.
    pub manhattan_tiebreak: bool,
    pub restriction: Restriction,
    pub down_rule: DownRule,
}

impl Default for RoutingOptions {
    fn default() -> Self {
        RoutingOptions {
            designated_tree: 0,
            manhattan_tiebreak: true,
            restriction: Restriction::Enforced,
            down_rule: DownRule::DeliverableCone,
        }
    }
}

/// How `route` picks among the greedy candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteMode {
    /// Lowest node id; a pure function of the inputs.
    Deterministic,
    /// Uniform random choice per hop from a dedicated stream.
    Adaptive { seed: u64 },
}

/// Immutable routing context: topology, common-root forest and per-node
/// addresses. Safe to share across threads.
#[derive(Debug)]
pub struct RoutingState {
    topo: Topology,
    forest: Vec<SpanningTree>,
    addrs: Vec<Vec<Option<TreeAddress>>>,
    opts: RoutingOptions,
    /// Lazily computed per-destination descent cones (derived data).
    cones: Vec<std::sync::OnceLock<Box<[bool]>>>,
}

impl Clone for RoutingState {
    fn clone(&self) -> Self {
        RoutingState {
            topo: self.topo.clone(),
            forest: self.forest.clone(),
            addrs: self.addrs.clone(),
            opts: self.opts,
            cones: (0..self.topo.node_count())
                .map(|_| std::sync::OnceLock::new())
                .collect(),
        }
    }
}

impl RoutingState {
    /// Grow `prefs.len()` trees rooted at `root` and precompute addresses.
    pub fn build(
        topo: Topology,
        root: NodeId,
        prefs: &[Preference],
        opts: RoutingOptions,
    ) -> Result<RoutingState> {
        let forest = build_forest(&topo, root, prefs)?;
        RoutingState::from_forest(topo, forest, opts)
    }

    /// Wrap an existing forest. All trees must share one root; depth maps
    /// then agree automatically because every tree is breadth-first.
    pub fn from_forest(
        topo: Topology,
        forest: Vec<SpanningTree>,
        opts: RoutingOptions,
    ) -> Result<RoutingState> {
        if forest.is_empty() {
            return Err(Error::InvalidArgument("empty forest".into()));
        }
        if forest.iter().any(|t| t.root() != forest[0].root()) {
            return Err(Error::InvalidArgument(
                "all trees must share the same root".into(),
            ));
        }
        if opts.designated_tree >= forest.len() {
            return Err(Error::InvalidArgument(format!(
                "designated tree {} out of range for {} trees",
                opts.designated_tree,
                forest.len()
            )));
        }
        let mut addrs = Vec::with_capacity(forest.len());
        for tree in &forest {
            let mut per_node = vec![None; topo.node_count()];
            for n in tree.covered_nodes() {
                per_node[n.index()] = Some(address_of(tree, n)?);
            }
            addrs.push(per_node);
        }
        let cones = (0..topo.node_count())
            .map(|_| std::sync::OnceLock::new())
            .collect();
        Ok(RoutingState {
            topo,
            forest,
            addrs,
            opts,
            cones,
        })
    }

    /// Nodes from which the destination can be reached by potential-shrinking
    /// down arcs alone. Computed once per destination; nodes are visited in
    /// decreasing depth order, so each cell only depends on finished ones.
    fn descent_cone(&self, dest: NodeId) -> &[bool] {
        self.cones[dest.index()].get_or_init(|| {
            let n = self.topo.node_count();
            let mut ok = vec![false; n].into_boxed_slice();
            ok[dest.index()] = true;
            let mut order: Vec<NodeId> = self.covered_nodes().collect();
            order.sort_by_key(|&v| std::cmp::Reverse(self.depth(v).unwrap()));
            for v in order {
                if v == dest {
                    continue;
                }
                let dv = self.depth(v).unwrap();
                let phi_v = self.potential(v, dest);
                ok[v.index()] = self.topo.healthy_out(v).any(|w| {
                    ok[w.index()]
                        && self.depth(w).is_some_and(|dw| dw > dv)
                        && self.potential(w, dest) < phi_v
                });
            }
            ok
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn forest(&self) -> &[SpanningTree] {
        &self.forest
    }

    pub fn tree_count(&self) -> usize {
        self.forest.len()
    }

    pub fn root(&self) -> NodeId {
        self.forest[0].root()
    }

    pub fn options(&self) -> RoutingOptions {
        self.opts
    }

    /// Address of `n` in tree `k`, when `n` is covered.
    pub fn addr(&self, k: usize, n: NodeId) -> Option<&TreeAddress> {
        self.addrs[k][n.index()].as_ref()
    }

    /// Common depth of `n` across the forest.
    pub fn depth(&self, n: NodeId) -> Option<u32> {
        self.forest[0].depth(n)
    }

    pub fn covers(&self, n: NodeId) -> bool {
        self.topo.contains(n) && self.depth(n).is_some()
    }

    pub fn covered_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.forest[0].covered_nodes()
    }

    pub fn covered_count(&self) -> usize {
        self.forest[0].covered_count()
    }

    /// Tree distance between two covered nodes in tree `k`.
    pub fn tree_dist(&self, k: usize, a: NodeId, b: NodeId) -> u32 {
        tree_distance(
            self.addrs[k][a.index()].as_ref().expect("covered node"),
            self.addrs[k][b.index()].as_ref().expect("covered node"),
        )
    }

    /// Greedy potential: minimum tree distance to `dest` over all trees.
    pub fn potential(&self, n: NodeId, dest: NodeId) -> u32 {
        (0..self.forest.len())
            .map(|k| self.tree_dist(k, n, dest))
            .min()
            .unwrap()
    }

    /// Up when depth decreases, Side when equal, Down when it increases.
    pub fn classify_arc(&self, from: NodeId, to: NodeId) -> Result<ArcClass> {
        let df = self.depth(from).ok_or(Error::NotCovered(from))?;
        let dt = self.depth(to).ok_or(Error::NotCovered(to))?;
        Ok(match dt.cmp(&df) {
            std::cmp::Ordering::Less => ArcClass::Up,
            std::cmp::Ordering::Equal => ArcClass::Side,
            std::cmp::Ordering::Greater => ArcClass::Down,
        })
    }

    /// Hops a packet in `phase` at `current` may legally take toward `dest`:
    ///
    /// * down arcs admitted by the configured [`DownRule`] (the packet then
    ///   descends for good);
    /// * while ascending, sideways arcs that strictly shrink the designated
    ///   tree's distance, and any up arc.
    ///
    /// Arcs leading out of the root's component are never usable. The result
    /// is in ascending neighbor-id order.
    pub fn legal_next_hops(
        &self,
        current: NodeId,
        dest: NodeId,
        phase: PacketPhase,
    ) -> Result<Vec<(NodeId, ArcClass, PacketPhase)>> {
        if !self.covers(current) || !self.covers(dest) {
            return Err(Error::Unreachable {
                src: current,
                dst: dest,
            });
        }
        if current == dest {
            return Err(Error::InvalidArgument(
                "next hops are undefined at the destination".into(),
            ));
        }
        let mut out = Vec::new();
        let d_cur = self.depth(current).unwrap();
        for n in self.topo.healthy_out(current) {
            let Some(d_n) = self.depth(n) else { continue };
            let class = match d_n.cmp(&d_cur) {
                std::cmp::Ordering::Less => ArcClass::Up,
                std::cmp::Ordering::Equal => ArcClass::Side,
                std::cmp::Ordering::Greater => ArcClass::Down,
            };
            if self.opts.restriction == Restriction::Unrestricted {
                let next_phase = if class == ArcClass::Down {
                    PacketPhase::Descending
                } else {
                    PacketPhase::Ascending
                };
                out.push((n, class, next_phase));
                continue;
            }
            match class {
                ArcClass::Down => {
                    let descends_toward_dest = match self.opts.down_rule {
                        DownRule::StrictAncestor => (0..self.forest.len()).any(|k| {
                            is_ancestor(
                                self.addrs[k][n.index()].as_ref().unwrap(),
                                self.addrs[k][dest.index()].as_ref().unwrap(),
                            )
                        }),
                        DownRule::DeliverableCone => {
                            self.potential(n, dest) < self.potential(current, dest)
                                && self.descent_cone(dest)[n.index()]
                        }
                    };
                    if descends_toward_dest {
                        out.push((n, ArcClass::Down, PacketPhase::Descending));
                    }
                }
                ArcClass::Side => {
                    if phase == PacketPhase::Ascending {
                        let k = self.opts.designated_tree;
                        if self.tree_dist(k, n, dest) < self.tree_dist(k, current, dest) {
                            out.push((n, ArcClass::Side, PacketPhase::Ascending));
                        }
                    }
                }
                ArcClass::Up => {
                    if phase == PacketPhase::Ascending {
                        out.push((n, ArcClass::Up, PacketPhase::Ascending));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Legal hops minimizing the potential, then (on meshes) the Manhattan
    /// distance to the destination.
    pub fn greedy_candidates(
        &self,
        current: NodeId,
        dest: NodeId,
        phase: PacketPhase,
    ) -> Result<Vec<(NodeId, PacketPhase)>> {
        let legal = self.legal_next_hops(current, dest, phase)?;
        if legal.is_empty() {
            return Ok(Vec::new());
        }
        let phi = |n: NodeId| self.potential(n, dest);
        let best = legal.iter().map(|&(n, _, _)| phi(n)).min().unwrap();
        let mut cands: Vec<(NodeId, PacketPhase)> = legal
            .iter()
            .filter(|&&(n, _, _)| phi(n) == best)
            .map(|&(n, _, p)| (n, p))
            .collect();
        if self.opts.manhattan_tiebreak && self.topo.has_coords() {
            let md = |n: NodeId| self.topo.manhattan(n, dest).unwrap();
            let best_md = cands.iter().map(|&(n, _)| md(n)).min().unwrap();
            cands.retain(|&(n, _)| md(n) == best_md);
        }
        Ok(cands)
    }

    /// Deterministic selection: lowest node id among the candidates.
    pub fn next_hop_deterministic(
        &self,
        current: NodeId,
        dest: NodeId,
        phase: PacketPhase,
    ) -> Result<(NodeId, PacketPhase)> {
        let cands = self.greedy_candidates(current, dest, phase)?;
        cands.first().copied().ok_or(Error::Unreachable {
            src: current,
            dst: dest,
        })
    }

    /// Adaptive selection: uniform choice from the caller's RNG stream.
    pub fn next_hop_adaptive<R: Rng>(
        &self,
        current: NodeId,
        dest: NodeId,
        phase: PacketPhase,
        rng: &mut R,
    ) -> Result<(NodeId, PacketPhase)> {
        let cands = self.greedy_candidates(current, dest, phase)?;
        if cands.is_empty() {
            return Err(Error::Unreachable {
                src: current,
                dst: dest,
            });
        }
        Ok(cands[rng.gen_range(0..cands.len())])
    }

    /// Walk a packet from `src` to `dest`, recording nodes and arc classes.
    pub fn route(&self, src: NodeId, dest: NodeId, mode: RouteMode) -> Result<RouteTrace> {
        if !self.covers(src) || !self.covers(dest) {
            return Err(Error::Unreachable { src, dst: dest });
        }
        let mut nodes = vec![src];
        let mut classes = Vec::new();
        let mut rng = match mode {
            RouteMode::Adaptive { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            RouteMode::Deterministic => None,
        };
        let bound = 2 * self.topo.node_count();
        let mut current = src;
        let mut phase = PacketPhase::Ascending;
        while current != dest {
            let cands = self.greedy_candidates(current, dest, phase)?;
            assert!(
                !cands.is_empty(),
                "no legal hop from {current} toward {dest}: progress guarantee violated"
            );
            let (next, next_phase) = match rng.as_mut() {
                Some(r) => cands[r.gen_range(0..cands.len())],
                None => cands[0],
            };
            classes.push(self.classify_arc(current, next)?);
            nodes.push(next);
            assert!(
                classes.len() <= bound,
                "route from {src} to {dest} exceeded the 2|V| hop bound"
            );
            current = next;
            phase = next_phase;
        }
        Ok(RouteTrace { nodes, classes })
    }
}

/// A produced path with per-hop arc classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTrace {
    nodes: Vec<NodeId>,
    classes: Vec<ArcClass>,
}

impl RouteTrace {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn classes(&self) -> &[ArcClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// The deadlock precondition: (Up|Side)* Down*.
    pub fn has_valid_shape(&self) -> bool {
        let first_down = self
            .classes
            .iter()
            .position(|&c| c == ArcClass::Down)
            .unwrap_or(self.classes.len());
        self.classes[first_down..]
            .iter()
            .all(|&c| c == ArcClass::Down)
    }

    /// One line per hop: `FROM -> TO class=UP|SIDE|DOWN phi=P`. Nodes are
    /// shown as tree-0 compass addresses on meshes, raw ids otherwise.
    pub fn render(&self, state: &RoutingState) -> String {
        let dest = *self.nodes.last().unwrap();
        let name = |n: NodeId| -> String {
            state
                .addr(0, n)
                .and_then(|a| a.render_compass())
                .unwrap_or_else(|| n.to_string())
        };
        let mut out = String::new();
        for (i, class) in self.classes.iter().enumerate() {
            let from = self.nodes[i];
            let to = self.nodes[i + 1];
            out.push_str(&format!(
                "{} -> {} class={} phi={}\n",
                name(from),
                name(to),
                class,
                state.potential(to, dest)
            ));
        }
        out
    }
}
