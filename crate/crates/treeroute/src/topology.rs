//! Graph model of the chip network: mesh generators, fault injection and
//! connectivity queries.
//!
//! Every bidirectional link is stored as a pair of directed arcs whose health
//! can differ, so a link with one failed channel degrades to a unidirectional
//! connection instead of disappearing.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Dense node identifier in `[0, node_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed channel between two adjacent nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub from: NodeId,
    pub to: NodeId,
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Whether a fault takes out a whole bidirectional link or a single arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultGranularity {
    Link,
    Arc,
}

#[derive(Debug, Clone, Copy)]
struct ArcEntry {
    to: NodeId,
    healthy: bool,
}

/// Immutable node/arc graph with optional 2D mesh coordinates.
#[derive(Debug, Clone)]
pub struct Topology {
    adj: Vec<Vec<ArcEntry>>,
    coords: Option<Vec<(u16, u16)>>,
}

impl Topology {
    /// Empty graph with `n` isolated nodes.
    pub fn with_nodes(n: usize) -> Topology {
        Topology {
            adj: vec![Vec::new(); n],
            coords: None,
        }
    }

    /// W×H grid with all links healthy; node index is `y * width + x`.
    pub fn build_mesh(width: u16, height: u16) -> Result<Topology> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh dimensions must be positive, got {width}x{height}"
            )));
        }
        let w = width as u32;
        let h = height as u32;
        let mut topo = Topology::with_nodes((w * h) as usize);
        let mut coords = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                coords.push((x as u16, y as u16));
            }
        }
        topo.coords = Some(coords);
        for y in 0..h {
            for x in 0..w {
                let n = NodeId(y * w + x);
                if x + 1 < w {
                    topo.add_link(n, NodeId(y * w + x + 1));
                }
                if y + 1 < h {
                    topo.add_link(n, NodeId((y + 1) * w + x));
                }
            }
        }
        Ok(topo)
    }

    /// Insert both arcs of a bidirectional link, healthy.
    pub fn add_link(&mut self, a: NodeId, b: NodeId) {
        self.add_arc(a, b);
        self.add_arc(b, a);
    }

    /// Insert one healthy arc; the opposite arc is created unhealthy if it
    /// does not exist yet, so links always come in pairs.
    pub fn add_arc(&mut self, from: NodeId, to: NodeId) {
        assert_ne!(from, to, "self-arcs are not allowed");
        self.insert_entry(from, to, true);
        self.ensure_entry(to, from);
    }

    fn insert_entry(&mut self, from: NodeId, to: NodeId, healthy: bool) {
        let row = &mut self.adj[from.index()];
        match row.binary_search_by_key(&to, |e| e.to) {
            Ok(i) => row[i].healthy = row[i].healthy || healthy,
            Err(i) => row.insert(i, ArcEntry { to, healthy }),
        }
    }

    fn ensure_entry(&mut self, from: NodeId, to: NodeId) {
        let row = &mut self.adj[from.index()];
        if let Err(i) = row.binary_search_by_key(&to, |e| e.to) {
            row.insert(i, ArcEntry { to, healthy: false });
        }
    }

    fn set_arc_health(&mut self, from: NodeId, to: NodeId, healthy: bool) {
        let row = &mut self.adj[from.index()];
        if let Ok(i) = row.binary_search_by_key(&to, |e| e.to) {
            row[i].healthy = healthy;
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.adj.len() as u32).map(NodeId)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n.index() < self.adj.len()
    }

    /// Mesh coordinates `(x, y)` when this topology was built as a grid or
    /// declared coordinates in its text form.
    pub fn coord(&self, n: NodeId) -> Option<(u16, u16)> {
        self.coords.as_ref().map(|c| c[n.index()])
    }

    pub fn has_coords(&self) -> bool {
        self.coords.is_some()
    }

    pub fn manhattan(&self, a: NodeId, b: NodeId) -> Option<u32> {
        let ca = self.coord(a)?;
        let cb = self.coord(b)?;
        Some((ca.0 as i32 - cb.0 as i32).unsigned_abs() + (ca.1 as i32 - cb.1 as i32).unsigned_abs())
    }

    /// Health of the directed arc `from -> to`; false when the arc is absent.
    pub fn arc_healthy(&self, from: NodeId, to: NodeId) -> bool {
        self.adj[from.index()]
            .binary_search_by_key(&to, |e| e.to)
            .map(|i| self.adj[from.index()][i].healthy)
            .unwrap_or(false)
    }

    /// Both channels of the link healthy.
    pub fn link_healthy(&self, a: NodeId, b: NodeId) -> bool {
        self.arc_healthy(a, b) && self.arc_healthy(b, a)
    }

    /// Targets of healthy arcs leaving `n`, in ascending id order.
    pub fn healthy_out(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[n.index()]
            .iter()
            .filter(|e| e.healthy)
            .map(|e| e.to)
    }

    /// Neighbors joined to `n` by links healthy in both directions.
    pub fn bidirectional_neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[n.index()]
            .iter()
            .filter(move |e| e.healthy && self.arc_healthy(e.to, n))
            .map(|e| e.to)
    }

    /// All healthy arcs, ordered by (from, to).
    pub fn healthy_arcs(&self) -> Vec<Arc> {
        let mut out = Vec::new();
        for from in self.nodes() {
            for e in &self.adj[from.index()] {
                if e.healthy {
                    out.push(Arc { from, to: e.to });
                }
            }
        }
        out
    }

    pub fn healthy_arc_count(&self) -> usize {
        self.adj
            .iter()
            .map(|row| row.iter().filter(|e| e.healthy).count())
            .sum()
    }

    /// Canonical list of links (unordered node pairs with at least one arc).
    fn links(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for from in self.nodes() {
            for e in &self.adj[from.index()] {
                if from < e.to {
                    out.push((from, e.to));
                }
            }
        }
        out
    }

    /// Fail each link (or arc) independently with probability `p`. Pure in
    /// (self, p, seed, granularity); the input topology is not modified.
    pub fn inject_link_faults(
        &self,
        p: f64,
        seed: u64,
        granularity: FaultGranularity,
    ) -> Result<Topology> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "failure probability must be in [0,1], got {p}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut topo = self.clone();
        match granularity {
            FaultGranularity::Link => {
                for (a, b) in self.links() {
                    if rng.gen::<f64>() < p {
                        topo.set_arc_health(a, b, false);
                        topo.set_arc_health(b, a, false);
                    }
                }
            }
            FaultGranularity::Arc => {
                for (a, b) in self.links() {
                    if rng.gen::<f64>() < p {
                        topo.set_arc_health(a, b, false);
                    }
                    if rng.gen::<f64>() < p {
                        topo.set_arc_health(b, a, false);
                    }
                }
            }
        }
        Ok(topo)
    }

    /// Nodes reachable from `n` following healthy arcs in their direction.
    pub fn reachable_from(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.search(n, |t, u| t.healthy_out(u).collect())
    }

    /// Connected component of `n` over links healthy in both directions.
    /// This is the component spanning trees are grown over: tree edges carry
    /// traffic both up and down, so half-failed links do not qualify.
    pub fn component(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.search(n, |t, u| t.bidirectional_neighbors(u).collect())
    }

    fn search(
        &self,
        n: NodeId,
        neighbors: impl Fn(&Topology, NodeId) -> Vec<NodeId>,
    ) -> BTreeSet<NodeId> {
        assert!(self.contains(n), "node {n} out of range");
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(n);
        queue.push_back(n);
        while let Some(u) = queue.pop_front() {
            for v in neighbors(self, u) {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// All components over bidirectionally healthy links, largest first;
    /// ties broken by smallest contained node id.
    pub fn components(&self) -> Vec<BTreeSet<NodeId>> {
        let mut assigned = vec![false; self.node_count()];
        let mut comps = Vec::new();
        for n in self.nodes() {
            if !assigned[n.index()] {
                let comp = self.component(n);
                for m in &comp {
                    assigned[m.index()] = true;
                }
                comps.push(comp);
            }
        }
        comps.sort_by(|a, b| {
            b.len()
                .cmp(&a.len())
                .then_with(|| a.iter().next().cmp(&b.iter().next()))
        });
        comps
    }

    /// Parse the line-oriented topology text format:
    ///
    /// ```text
    /// nodes N
    /// link A B       # bidirectional, both arcs healthy
    /// arc FROM TO    # one healthy arc (reverse arc exists but unhealthy)
    /// coord N X Y    # optional mesh coordinates
    /// ```
    pub fn from_text(text: &str) -> Result<Topology> {
        let mut topo: Option<Topology> = None;
        let mut coords: Vec<Option<(u16, u16)>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let keyword = parts.next().unwrap();
            let args: Vec<&str> = parts.collect();
            let parse_u32 = |s: &str| -> Result<u32> {
                s.parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("expected integer, got `{s}`"),
                })
            };
            match keyword {
                "nodes" => {
                    if args.len() != 1 {
                        return Err(Error::Parse {
                            line,
                            msg: "usage: nodes N".into(),
                        });
                    }
                    let n = parse_u32(args[0])? as usize;
                    topo = Some(Topology::with_nodes(n));
                    coords = vec![None; n];
                }
                "link" | "arc" => {
                    let t = topo.as_mut().ok_or(Error::Parse {
                        line,
                        msg: "`nodes N` must come first".into(),
                    })?;
                    if args.len() != 2 {
                        return Err(Error::Parse {
                            line,
                            msg: format!("usage: {keyword} A B"),
                        });
                    }
                    let a = NodeId(parse_u32(args[0])?);
                    let b = NodeId(parse_u32(args[1])?);
                    if !t.contains(a) || !t.contains(b) || a == b {
                        return Err(Error::Parse {
                            line,
                            msg: format!("bad endpoints {} {}", a, b),
                        });
                    }
                    if keyword == "link" {
                        t.add_link(a, b);
                    } else {
                        t.add_arc(a, b);
                    }
                }
                "coord" => {
                    let t = topo.as_ref().ok_or(Error::Parse {
                        line,
                        msg: "`nodes N` must come first".into(),
                    })?;
                    if args.len() != 3 {
                        return Err(Error::Parse {
                            line,
                            msg: "usage: coord N X Y".into(),
                        });
                    }
                    let n = NodeId(parse_u32(args[0])?);
                    if !t.contains(n) {
                        return Err(Error::Parse {
                            line,
                            msg: format!("node {n} out of range"),
                        });
                    }
                    let x = parse_u32(args[1])?;
                    let y = parse_u32(args[2])?;
                    coords[n.index()] = Some((x as u16, y as u16));
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown keyword `{other}`"),
                    });
                }
            }
        }
        let mut topo = topo.ok_or(Error::Parse {
            line: 0,
            msg: "missing `nodes N` line".into(),
        })?;
        if coords.iter().all(|c| c.is_some()) && !coords.is_empty() {
            topo.coords = Some(coords.into_iter().map(|c| c.unwrap()).collect());
        } else if coords.iter().any(|c| c.is_some()) {
            return Err(Error::Parse {
                line: 0,
                msg: "coords must be given for all nodes or none".into(),
            });
        }
        Ok(topo)
    }

    /// Serialize to the text format. Healthy bidirectional links come out as
    /// `link`, surviving halves of degraded links as `arc`; fully dead links
    /// are dropped (they cannot carry traffic).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nodes {}\n", self.node_count()));
        if let Some(coords) = &self.coords {
            for (i, (x, y)) in coords.iter().enumerate() {
                out.push_str(&format!("coord {i} {x} {y}\n"));
            }
        }
        for (a, b) in self.links() {
            let ab = self.arc_healthy(a, b);
            let ba = self.arc_healthy(b, a);
            match (ab, ba) {
                (true, true) => out.push_str(&format!("link {a} {b}\n")),
                (true, false) => out.push_str(&format!("arc {a} {b}\n")),
                (false, true) => out.push_str(&format!("arc {b} {a}\n")),
                (false, false) => {}
            }
        }
        out
    }
}
