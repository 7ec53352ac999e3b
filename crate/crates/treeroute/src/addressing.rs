//! Tree coordinates: address assignment, tree distance, ancestor tests and
//! run-length address compression.

use std::fmt;

use crate::forest::{Compass, PortLabel, SpanningTree};
use crate::topology::NodeId;
use crate::{Error, Result};

/// Sequence of arc labels on the root-to-node tree path. The root's address
/// is empty; the length always equals the node's depth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TreeAddress {
    labels: Vec<PortLabel>,
}

impl TreeAddress {
    pub fn new(labels: Vec<PortLabel>) -> TreeAddress {
        TreeAddress { labels }
    }

    pub fn empty() -> TreeAddress {
        TreeAddress::default()
    }

    pub fn labels(&self) -> &[PortLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Compass rendering such as `WWNN`; `None` when a label is not one of
    /// the four mesh directions. The empty address renders as `e`.
    pub fn render_compass(&self) -> Option<String> {
        if self.labels.is_empty() {
            return Some("e".to_string());
        }
        self.labels
            .iter()
            .map(|&l| Compass::from_label(l).map(Compass::letter))
            .collect()
    }

    /// Parse compass letters; `e` (or the empty string) is the root.
    pub fn parse_compass(s: &str) -> Result<TreeAddress> {
        if s.is_empty() || s == "e" {
            return Ok(TreeAddress::empty());
        }
        let labels = s
            .chars()
            .map(|c| {
                Compass::from_letter(c)
                    .map(Compass::label)
                    .ok_or_else(|| Error::MalformedAddress(format!("bad direction `{c}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeAddress::new(labels))
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render_compass() {
            Some(s) => f.write_str(&s),
            None => {
                let parts: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
                write!(f, "[{}]", parts.join("."))
            }
        }
    }
}

/// Address of `n` in `tree`: the labels along the root-to-`n` path.
pub fn address_of(tree: &SpanningTree, n: NodeId) -> Result<TreeAddress> {
    if !tree.covers(n) {
        return Err(Error::NotInTree(n));
    }
    let mut labels = Vec::with_capacity(tree.depth(n).unwrap() as usize);
    let mut cur = n;
    while let Some(p) = tree.parent(cur) {
        labels.push(tree.parent_label(cur).unwrap());
        cur = p;
    }
    labels.reverse();
    Ok(TreeAddress::new(labels))
}

fn common_prefix_len(a: &TreeAddress, b: &TreeAddress) -> usize {
    a.labels
        .iter()
        .zip(&b.labels)
        .take_while(|(x, y)| x == y)
        .count()
}

/// Hop distance between two nodes of the same tree when travelling along
/// tree edges only: I + J - 2K with K the shared-prefix length.
pub fn tree_distance(a: &TreeAddress, b: &TreeAddress) -> u32 {
    let k = common_prefix_len(a, b);
    (a.len() + b.len() - 2 * k) as u32
}

/// Prefix test; reflexive, so every node is an ancestor of itself.
pub fn is_ancestor(a: &TreeAddress, b: &TreeAddress) -> bool {
    a.len() <= b.len() && a.labels == b.labels[..a.len()]
}

/// Run-length compressed address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedAddress {
    runs: Vec<(PortLabel, u32)>,
}

impl CompressedAddress {
    pub fn runs(&self) -> &[(PortLabel, u32)] {
        &self.runs
    }

    /// Compass rendering such as `W2N2`.
    pub fn render_compass(&self) -> Option<String> {
        if self.runs.is_empty() {
            return Some("e".to_string());
        }
        let mut out = String::new();
        for &(l, count) in &self.runs {
            out.push(Compass::from_label(l)?.letter());
            out.push_str(&count.to_string());
        }
        Some(out)
    }
}

/// Compress into maximal runs.
pub fn rle_encode(a: &TreeAddress) -> CompressedAddress {
    let mut runs: Vec<(PortLabel, u32)> = Vec::new();
    for &l in a.labels() {
        match runs.last_mut() {
            Some((last, count)) if *last == l => *count += 1,
            _ => runs.push((l, 1)),
        }
    }
    CompressedAddress { runs }
}

/// Expand a compressed address; rejects zero counts and adjacent runs with
/// equal labels (those never come out of `rle_encode`).
pub fn rle_decode(c: &CompressedAddress) -> Result<TreeAddress> {
    let mut labels = Vec::new();
    for (i, &(l, count)) in c.runs.iter().enumerate() {
        if count == 0 {
            return Err(Error::MalformedAddress(format!("run {i} has zero count")));
        }
        if i > 0 && c.runs[i - 1].0 == l {
            return Err(Error::MalformedAddress(format!(
                "runs {} and {i} share label {l}",
                i - 1
            )));
        }
        labels.extend(std::iter::repeat(l).take(count as usize));
    }
    Ok(TreeAddress::new(labels))
}

/// Bits needed to store the compressed address with fixed-width fields:
/// one (label, count) pair per run. Counts must fit `count_bits`; callers
/// that want to keep over-long runs representable can split them first with
/// [`split_runs`].
pub fn encoded_size_bits(c: &CompressedAddress, label_bits: u32, count_bits: u32) -> Result<u64> {
    let max_count = if count_bits >= 32 {
        u32::MAX
    } else {
        (1u32 << count_bits) - 1
    };
    for &(l, count) in &c.runs {
        if count > max_count {
            return Err(Error::InvalidArgument(format!(
                "run {l}x{count} does not fit in {count_bits} count bits"
            )));
        }
    }
    Ok(c.runs.len() as u64 * (label_bits as u64 + count_bits as u64))
}

/// Split runs longer than `max_count` into several runs so every count fits
/// a fixed-width field. The result may contain adjacent runs with the same
/// label, which is why it is a distinct type state from `rle_encode` output.
pub fn split_runs(c: &CompressedAddress, max_count: u32) -> CompressedAddress {
    assert!(max_count > 0);
    let mut runs = Vec::new();
    for &(l, mut count) in &c.runs {
        while count > max_count {
            runs.push((l, max_count));
            count -= max_count;
        }
        runs.push((l, count));
    }
    CompressedAddress { runs }
}
