//! Discriminating and pre-discriminating paths.
//!
//! A path `<x, q1, ..., qk, v, y>` discriminates `v` when every `qi` is a
//! collider on the path and a parent of `y`, and `x` is not adjacent to `y`.
//! The relaxed mode drops the nonadjacency condition and lets the node next to
//! `v` (called `w`) reach `y` through any edge not out of `y`; it lists paths
//! that would become discriminating if the `x`-`y` edge went away.

use std::collections::{BTreeSet, VecDeque};

use crate::graph::{Endpoint, MixedGraph, NodeId, NodeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscPath {
    /// Far endpoint.
    pub x: NodeId,
    /// Interior colliders in path order, nearest to `v` last.
    pub body: Vec<NodeId>,
    pub v: NodeId,
    pub y: NodeId,
    pub w: NodeId,
}

impl DiscPath {
    /// The full node sequence `x, body.., v, y`.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.body.len() + 3);
        out.push(self.x);
        out.extend_from_slice(&self.body);
        out.push(self.v);
        out.push(self.y);
        out
    }

    pub fn len(&self) -> usize {
        self.body.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscMode {
    pub strict: bool,
}

impl DiscMode {
    pub const STRICT: DiscMode = DiscMode { strict: true };
    pub const RELAXED: DiscMode = DiscMode { strict: false };
}

/// Unbounded up to 25 nodes, body length 4 beyond that.
pub fn default_disc_len(node_count: usize) -> Option<usize> {
    if node_count <= 25 {
        None
    } else {
        Some(4)
    }
}

fn seeds_from(g: &MixedGraph, w: NodeId, y: NodeId, mode: DiscMode) -> bool {
    if !g.is_adjacent(w, y) {
        return false;
    }
    if mode.strict {
        g.is_parent_of(w, y)
    } else {
        !g.is_parent_of(y, w)
    }
}

/// Paths `<x, .., w, v, y>` grown backwards from the seed `w`.
pub fn list_discriminating_paths(
    g: &MixedGraph,
    w: NodeId,
    y: NodeId,
    max_len: Option<usize>,
    mode: DiscMode,
) -> Vec<DiscPath> {
    let mut out = BTreeSet::new();
    collect(g, w, y, max_len, mode, &mut out);
    out.into_iter().collect()
}

fn collect(
    g: &MixedGraph,
    w: NodeId,
    y: NodeId,
    max_len: Option<usize>,
    mode: DiscMode,
    out: &mut BTreeSet<DiscPath>,
) {
    if !seeds_from(g, w, y, mode) {
        return;
    }
    for &v in g.neighbors(w) {
        if v == y || !g.is_adjacent(v, y) || g.endpoint(y, v) != Some(Endpoint::Circle) {
            continue;
        }
        disc_bfs(g, w, v, y, max_len, mode, out);
    }
}

fn disc_bfs(
    g: &MixedGraph,
    w: NodeId,
    v: NodeId,
    y: NodeId,
    max_len: Option<usize>,
    mode: DiscMode,
    out: &mut BTreeSet<DiscPath>,
) {
    // body is kept nearest-to-v first while growing
    let mut queue: VecDeque<(NodeId, Option<NodeId>, Vec<NodeId>)> = VecDeque::new();
    queue.push_back((w, None, Vec::new()));
    while let Some((t, p, body)) = queue.pop_front() {
        if let Some(p) = p {
            if !g.is_into(p, t) || !g.is_parent_of(t, y) {
                continue;
            }
        }
        for x in g.nodes_into(t) {
            if Some(x) == p || body.contains(&x) {
                continue;
            }
            let mut grown = body.clone();
            grown.push(t);
            if max_len.is_some_and(|m| grown.len() > m) {
                continue;
            }
            let path = DiscPath {
                x,
                body: grown.iter().rev().copied().collect(),
                v,
                y,
                w,
            };
            if let Ok(true) = exists_discriminating_path(g, &path, mode) {
                out.insert(path);
            }
            if g.is_parent_of(x, y) && x != v {
                queue.push_back((x, Some(t), grown));
            }
        }
    }
}

/// Validates a candidate path assembled by the enumeration.
///
/// Fails with a structural error when the path reaches its collider checks
/// but `v` does not point into `w`, which only a broken caller can produce.
pub fn exists_discriminating_path(g: &MixedGraph, path: &DiscPath, mode: DiscMode) -> Result<bool> {
    let DiscPath { x, v, y, w, .. } = *path;
    let ends = [x, w, v, y];
    if ends
        .iter()
        .enumerate()
        .any(|(i, a)| ends[i + 1..].contains(a))
    {
        return Ok(false);
    }
    let mut seen = NodeSet::new();
    if !path.nodes().into_iter().all(|n| seen.insert(n)) {
        return Ok(false);
    }
    if mode.strict && g.is_adjacent(x, y) {
        return Ok(false);
    }
    if !g.is_adjacent(v, y) || path.body.last() != Some(&w) {
        return Ok(false);
    }
    let mut seq = Vec::with_capacity(path.body.len() + 2);
    seq.push(x);
    seq.extend_from_slice(&path.body);
    seq.push(v);
    for win in seq.windows(3) {
        let (a, b, c) = (win[0], win[1], win[2]);
        if !g.is_adjacent(a, b) || !g.is_adjacent(b, c) || !g.collider(a, b, c) {
            return Ok(false);
        }
        if mode.strict {
            if !g.is_parent_of(b, y) {
                return Ok(false);
            }
        } else if !g.is_adjacent(y, b) || g.is_parent_of(y, b) {
            return Ok(false);
        }
    }
    if !g.is_into(v, w) {
        return Err(Error::Structural("v must point to w".into()));
    }
    Ok(true)
}

/// Every discriminating path ending at `y`, over all seeds `w`.
pub fn discriminating_paths_into(
    g: &MixedGraph,
    y: NodeId,
    max_len: Option<usize>,
    mode: DiscMode,
) -> Vec<DiscPath> {
    let mut out = BTreeSet::new();
    for &w in g.neighbors(y) {
        collect(g, w, y, max_len, mode, &mut out);
    }
    out.into_iter().collect()
}

/// Every discriminating path in the graph.
pub fn list_all_discriminating_paths(
    g: &MixedGraph,
    max_len: Option<usize>,
    mode: DiscMode,
) -> Vec<DiscPath> {
    let mut out = BTreeSet::new();
    for w in g.nodes() {
        for &y in g.neighbors(w) {
            collect(g, w, y, max_len, mode, &mut out);
        }
    }
    out.into_iter().collect()
}

/// Relaxed-mode paths between `x` and `y` in either direction: those that
/// would discriminate their `v` if the `x`-`y` edge were removed.
pub fn list_pre_discriminating_paths(
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
    max_len: Option<usize>,
) -> Vec<DiscPath> {
    let mut out: Vec<DiscPath> = discriminating_paths_into(g, y, max_len, DiscMode::RELAXED)
        .into_iter()
        .filter(|p| p.x == x)
        .collect();
    out.extend(
        discriminating_paths_into(g, x, max_len, DiscMode::RELAXED)
            .into_iter()
            .filter(|p| p.x == y),
    );
    out
}

/// The `v` nodes of a set of paths.
pub fn v_candidates(paths: &[DiscPath]) -> NodeSet {
    paths.iter().map(|p| p.v).collect()
}
