//! Breadth-first spanning trees with direction-preferential parent selection.
//!
//! All trees of a forest share one root, so node depths agree across trees;
//! that property is what lets the router classify channels consistently no
//! matter which tree it measures distances in.

use std::collections::VecDeque;
use std::fmt;

use crate::topology::{NodeId, Topology};
use crate::{Error, Result};

/// Locally unique identifier of a tree arc leaving a node. On meshes the
/// four compass directions are used; on arbitrary graphs labels are assigned
/// sequentially per parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortLabel(pub u16);

impl fmt::Display for PortLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compass {
    North,
    East,
    South,
    West,
}

impl Compass {
    pub const ALL: [Compass; 4] = [Compass::North, Compass::East, Compass::South, Compass::West];

    pub fn label(self) -> PortLabel {
        PortLabel(match self {
            Compass::North => 0,
            Compass::East => 1,
            Compass::South => 2,
            Compass::West => 3,
        })
    }

    pub fn from_label(l: PortLabel) -> Option<Compass> {
        Compass::ALL.into_iter().find(|c| c.label() == l)
    }

    pub fn letter(self) -> char {
        match self {
            Compass::North => 'N',
            Compass::East => 'E',
            Compass::South => 'S',
            Compass::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Compass> {
        match c.to_ascii_uppercase() {
            'N' => Some(Compass::North),
            'E' => Some(Compass::East),
            'S' => Some(Compass::South),
            'W' => Some(Compass::West),
            _ => None,
        }
    }

    /// Direction of a unit step `from -> to` in mesh coordinates. The y axis
    /// grows southward (row index), matching node index order.
    pub fn between(from: (u16, u16), to: (u16, u16)) -> Option<Compass> {
        let dx = to.0 as i32 - from.0 as i32;
        let dy = to.1 as i32 - from.1 as i32;
        match (dx, dy) {
            (0, -1) => Some(Compass::North),
            (1, 0) => Some(Compass::East),
            (0, 1) => Some(Compass::South),
            (-1, 0) => Some(Compass::West),
            _ => None,
        }
    }
}

/// Ordered list of arc labels; earlier entries win parent ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preference {
    order: Vec<PortLabel>,
}

impl Preference {
    pub fn new(order: Vec<PortLabel>) -> Preference {
        Preference { order }
    }

    /// North-south growth: N > S > E > W.
    pub fn vertical() -> Preference {
        Preference::new(
            [Compass::North, Compass::South, Compass::East, Compass::West]
                .into_iter()
                .map(Compass::label)
                .collect(),
        )
    }

    /// East-west growth: E > W > N > S.
    pub fn horizontal() -> Preference {
        Preference::new(
            [Compass::East, Compass::West, Compass::North, Compass::South]
                .into_iter()
                .map(Compass::label)
                .collect(),
        )
    }

    /// The standard two-tree configuration: a vertical tree then a
    /// horizontal one. `k` beyond 2 needs explicit preference orders.
    pub fn defaults(k: usize) -> Result<Vec<Preference>> {
        let pool = [Preference::vertical(), Preference::horizontal()];
        if k == 0 || k > pool.len() {
            return Err(Error::InvalidArgument(format!(
                "no default preference orders for {k} trees; pass them explicitly"
            )));
        }
        Ok(pool[..k].to_vec())
    }

    fn rank(&self, l: PortLabel) -> usize {
        self.order.iter().position(|&o| o == l).unwrap_or(self.order.len())
    }

    /// Parse a compass permutation such as `NSEW`.
    pub fn parse_compass(s: &str) -> Result<Preference> {
        let mut seen = [false; 4];
        let mut order = Vec::new();
        for c in s.chars() {
            let dir = Compass::from_letter(c)
                .ok_or_else(|| Error::InvalidArgument(format!("bad direction `{c}` in `{s}`")))?;
            let idx = dir.label().0 as usize;
            if seen[idx] {
                return Err(Error::InvalidArgument(format!("duplicate direction in `{s}`")));
            }
            seen[idx] = true;
            order.push(dir.label());
        }
        if order.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "preference `{s}` must list all four directions"
            )));
        }
        Ok(Preference::new(order))
    }

    pub fn render_compass(&self) -> String {
        self.order
            .iter()
            .map(|&l| Compass::from_label(l).map(Compass::letter).unwrap_or('?'))
            .collect()
    }
}

/// Rooted BFS spanning tree over the root's bidirectionally healthy component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    root: NodeId,
    parent: Vec<Option<(NodeId, PortLabel)>>,
    children: Vec<Vec<(PortLabel, NodeId)>>,
    depth: Vec<Option<u32>>,
}

impl SpanningTree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    /// BFS depth of `n`, `None` when `n` is outside the root's component.
    pub fn depth(&self, n: NodeId) -> Option<u32> {
        self.depth[n.index()]
    }

    pub fn covers(&self, n: NodeId) -> bool {
        n.index() < self.depth.len() && self.depth[n.index()].is_some()
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent[n.index()].map(|(p, _)| p)
    }

    /// Label of the tree arc parent -> n.
    pub fn parent_label(&self, n: NodeId) -> Option<PortLabel> {
        self.parent[n.index()].map(|(_, l)| l)
    }

    /// Tree children of `n` with their arc labels, ordered by label.
    pub fn children(&self, n: NodeId) -> &[(PortLabel, NodeId)] {
        &self.children[n.index()]
    }

    pub fn child_by_label(&self, n: NodeId, l: PortLabel) -> Option<NodeId> {
        self.children[n.index()]
            .iter()
            .find(|(cl, _)| *cl == l)
            .map(|&(_, c)| c)
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.covers(n) && self.children[n.index()].is_empty()
    }

    pub fn covered_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.depth
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn covered_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_some()).count()
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Remove a leaf node from the tree structure, leaving every other
    /// node's position untouched. Panics if `n` still has children.
    pub fn without_leaf(&self, n: NodeId) -> SpanningTree {
        assert!(self.is_leaf(n), "only leaves can be detached");
        assert_ne!(n, self.root, "the root cannot be detached");
        let mut t = self.clone();
        if let Some((p, _)) = t.parent[n.index()] {
            t.children[p.index()].retain(|&(_, c)| c != n);
        }
        t.parent[n.index()] = None;
        t.depth[n.index()] = None;
        t
    }

    /// Line-oriented dump used by fixtures and debugging:
    /// `root ID` then one `node ID depth D parent P label L` per covered
    /// non-root node, in id order.
    pub fn dump(&self) -> String {
        let mut out = format!("root {}\n", self.root);
        for n in self.covered_nodes() {
            if let Some((p, l)) = self.parent[n.index()] {
                out.push_str(&format!(
                    "node {} depth {} parent {} label {}\n",
                    n,
                    self.depth[n.index()].unwrap(),
                    p,
                    l
                ));
            }
        }
        out
    }
}

/// How the common root is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootPolicy {
    /// Minimize eccentricity within the largest component; ties go to the
    /// highest node id.
    Central,
    /// Highest id in the largest component.
    HighestId,
    Explicit(NodeId),
}

pub fn choose_root(topo: &Topology, policy: RootPolicy) -> Result<NodeId> {
    if topo.node_count() == 0 {
        return Err(Error::InvalidArgument("empty topology".into()));
    }
    match policy {
        RootPolicy::Explicit(n) => {
            if topo.contains(n) {
                Ok(n)
            } else {
                Err(Error::InvalidArgument(format!("root {n} out of range")))
            }
        }
        RootPolicy::HighestId => {
            let comp = &topo.components()[0];
            Ok(*comp.iter().max().unwrap())
        }
        RootPolicy::Central => {
            let comp = &topo.components()[0];
            let mut best: Option<(u32, NodeId)> = None;
            for &n in comp {
                let depths = bfs_depths(topo, n);
                let ecc = comp
                    .iter()
                    .map(|m| depths[m.index()].expect("component member reachable"))
                    .max()
                    .unwrap();
                best = match best {
                    None => Some((ecc, n)),
                    Some((be, bn)) if ecc < be || (ecc == be && n > bn) => Some((ecc, n)),
                    other => other,
                };
            }
            Ok(best.unwrap().1)
        }
    }
}

fn bfs_depths(topo: &Topology, root: NodeId) -> Vec<Option<u32>> {
    let mut depth = vec![None; topo.node_count()];
    depth[root.index()] = Some(0);
    let mut queue = VecDeque::new();
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        let d = depth[u.index()].unwrap();
        for v in topo.bidirectional_neighbors(u) {
            if depth[v.index()].is_none() {
                depth[v.index()] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    depth
}

/// Grow one BFS tree from `root`. Ties between candidate parents are broken
/// by the preference rank of the parent -> child arc direction (meshes), then
/// by lowest parent id.
pub fn grow_tree(topo: &Topology, root: NodeId, pref: &Preference) -> Result<SpanningTree> {
    if !topo.contains(root) {
        return Err(Error::InvalidArgument(format!("root {root} out of range")));
    }
    let n = topo.node_count();
    let depth = bfs_depths(topo, root);

    let mut parent: Vec<Option<(NodeId, PortLabel)>> = vec![None; n];
    let mut chosen_parent: Vec<Option<NodeId>> = vec![None; n];
    for v in topo.nodes() {
        let Some(dv) = depth[v.index()] else { continue };
        if v == root {
            continue;
        }
        let mut candidates: Vec<NodeId> = topo
            .bidirectional_neighbors(v)
            .filter(|p| depth[p.index()] == Some(dv - 1))
            .collect();
        debug_assert!(!candidates.is_empty());
        if topo.has_coords() {
            candidates.sort_by_key(|&p| {
                let dir = Compass::between(topo.coord(p).unwrap(), topo.coord(v).unwrap())
                    .map(Compass::label);
                (dir.map(|l| pref.rank(l)).unwrap_or(usize::MAX), p)
            });
        } else {
            candidates.sort();
        }
        chosen_parent[v.index()] = Some(candidates[0]);
    }

    // Arc labels: compass direction when every tree arc has one, sequential
    // per parent otherwise.
    let compass_ok = topo.has_coords()
        && topo.nodes().all(|v| match chosen_parent[v.index()] {
            Some(p) => Compass::between(topo.coord(p).unwrap(), topo.coord(v).unwrap()).is_some(),
            None => true,
        });

    let mut children: Vec<Vec<(PortLabel, NodeId)>> = vec![Vec::new(); n];
    if compass_ok {
        for v in topo.nodes() {
            if let Some(p) = chosen_parent[v.index()] {
                let dir =
                    Compass::between(topo.coord(p).unwrap(), topo.coord(v).unwrap()).unwrap();
                parent[v.index()] = Some((p, dir.label()));
                children[p.index()].push((dir.label(), v));
            }
        }
    } else {
        let mut grouped: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for v in topo.nodes() {
            if let Some(p) = chosen_parent[v.index()] {
                grouped[p.index()].push(v);
            }
        }
        for p in topo.nodes() {
            grouped[p.index()].sort();
            for (i, &v) in grouped[p.index()].iter().enumerate() {
                let l = PortLabel(i as u16);
                parent[v.index()] = Some((p, l));
                children[p.index()].push((l, v));
            }
        }
    }
    for row in &mut children {
        row.sort();
    }

    Ok(SpanningTree {
        root,
        parent,
        children,
        depth,
    })
}

/// Grow one tree per preference order, all rooted at `root`.
pub fn build_forest(
    topo: &Topology,
    root: NodeId,
    prefs: &[Preference],
) -> Result<Vec<SpanningTree>> {
    if prefs.is_empty() {
        return Err(Error::InvalidArgument("at least one tree is required".into()));
    }
    prefs.iter().map(|p| grow_tree(topo, root, p)).collect()
}

/// True when `n` can be powered off without re-addressing any other node:
/// it must be a leaf in every tree of the forest (the root never qualifies).
pub fn removable_without_reconfig(forest: &[SpanningTree], n: NodeId) -> bool {
    !forest.is_empty()
        && forest[0].root() != n
        && forest.iter().all(|t| t.is_leaf(n))
}
