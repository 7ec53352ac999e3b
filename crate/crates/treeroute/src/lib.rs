//! Multi-tree geometric routing for networks-on-chip.
//!
//! Packets are routed greedily over virtual coordinates derived from one or
//! more breadth-first spanning trees that share a common root. The forwarding
//! rules restrict every path to an ascending prefix (up or sideways channels)
//! followed by a descending suffix, which keeps the channel dependency graph
//! acyclic without virtual channels, and the greedy distance function makes
//! delivery succeed for every pair connected to the root's component no
//! matter how many links have failed.
//!
//! The crate is organized around the pipeline used by the `treeroute` CLI:
//!
//! * [`topology`] — graph model, mesh builders, fault injection;
//! * [`forest`] — direction-preferential BFS spanning trees;
//! * [`addressing`] — tree coordinates, tree distance, RLE compression;
//! * [`router`] — arc classification and greedy next-hop/route computation;
//! * [`deadlock`] — channel dependency graph construction and cycle search;
//! * [`metrics`] — stretch / minimality / adaptiveness evaluation sweeps.

pub mod addressing;
pub mod deadlock;
pub mod forest;
pub mod metrics;
pub mod router;
pub mod topology;

use thiserror::Error;

use crate::topology::NodeId;

/// Errors returned by the routing library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A node lies outside the spanning forest (not in the root's component).
    #[error("node {0} is not covered by the spanning forest")]
    NotCovered(NodeId),
    #[error("node {0} is not part of the tree")]
    NotInTree(NodeId),
    #[error("no route from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("malformed address: {0}")]
    MalformedAddress(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Map `f` over `items`, fanning out across threads when the `parallel`
/// feature is enabled. `workers = Some(1)` forces the sequential path, other
/// values size a dedicated pool, `None` uses the global default. The output
/// order always matches the input order, so callers stay deterministic.
#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        Some(1) => items.iter().map(f).collect(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("failed to build worker pool")
            .install(|| items.par_iter().map(f).collect()),
        None => items.par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, R, F>(items: &[T], _workers: Option<usize>, f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
