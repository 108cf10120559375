//! m-separation, Possible-D-SEP, inducing paths and latent projection.

use std::borrow::Cow;
use std::collections::VecDeque;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::graph::{AncestorIndex, Endpoint, MixedGraph, NodeId, NodeSet};

pub(crate) fn mask(n: usize, set: &NodeSet) -> FixedBitSet {
    let mut m = FixedBitSet::with_capacity(n);
    for &v in set {
        m.insert(v);
    }
    m
}

/// Whether a walk arriving at `b` from `a` may continue to `c` given `cond`.
pub fn reachable_step(
    g: &MixedGraph,
    a: NodeId,
    b: NodeId,
    c: NodeId,
    cond: &NodeSet,
) -> Result<bool> {
    let collider = g.is_def_collider(a, b, c)?;
    let anc = g.ancestor_index();
    let m = mask(g.node_count(), cond);
    Ok(step_open(g, &anc, a, b, c, collider, &m))
}

#[inline]
pub(crate) fn step_open(
    g: &MixedGraph,
    anc: &AncestorIndex,
    a: NodeId,
    b: NodeId,
    c: NodeId,
    collider: bool,
    cond: &FixedBitSet,
) -> bool {
    if (!collider || g.is_underline(a, b, c)) && !cond.contains(b) {
        return true;
    }
    collider && anc.is_ancestor_of_mask(b, cond)
}

/// Reusable m-separation queries against one graph snapshot.
pub struct Separation<'g> {
    g: &'g MixedGraph,
    anc: Cow<'g, AncestorIndex>,
    walks_are_paths: bool,
}

/// Directed and bidirected edges only, no underlines, no directed or almost
/// directed cycle. On such graphs an open walk shortens to an open path.
fn walks_are_paths(g: &MixedGraph, anc: &AncestorIndex) -> bool {
    if g.underlines().next().is_some() {
        return false;
    }
    g.edges().iter().all(|e| {
        let (a, b) = (e.a, e.b);
        if e.is_directed() {
            let (p, c) = if g.is_parent_of(a, b) { (a, b) } else { (b, a) };
            !anc.is_ancestor(c, p)
        } else {
            e.is_bidirected() && !anc.is_ancestor(a, b) && !anc.is_ancestor(b, a)
        }
    })
}

impl<'g> Separation<'g> {
    pub fn new(g: &'g MixedGraph) -> Self {
        let anc = g.ancestor_index();
        Separation {
            g,
            walks_are_paths: walks_are_paths(g, &anc),
            anc: Cow::Owned(anc),
        }
    }

    /// Reuses an ancestor index computed for `g`.
    pub fn with_index(g: &'g MixedGraph, anc: &'g AncestorIndex) -> Self {
        Separation {
            g,
            walks_are_paths: walks_are_paths(g, anc),
            anc: Cow::Borrowed(anc),
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        self.g
    }

    pub fn ancestors(&self) -> &AncestorIndex {
        &self.anc
    }

    /// `x` and `y` are nonadjacent and every path between them is blocked by `z`.
    pub fn m_separated(&self, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
        if self.g.is_adjacent(x, y) {
            return false;
        }
        let cond = mask(self.g.node_count(), z);
        !self.connected_given(x, y, &cond)
    }

    /// Some open path between `x` and `y` other than the direct edge.
    ///
    /// Reachability over directed edge visits decides it on ancestral graphs.
    /// Elsewhere an open walk need not contain an open path, so a positive
    /// answer is confirmed by a search over simple paths.
    pub(crate) fn connected_given(&self, x: NodeId, y: NodeId, cond: &FixedBitSet) -> bool {
        if !self.walk_connected(x, y, cond) {
            return false;
        }
        if self.walks_are_paths {
            return true;
        }
        let mut on_path = FixedBitSet::with_capacity(self.g.node_count());
        on_path.insert(x);
        self.g
            .neighbors(x)
            .iter()
            .any(|&b| b != y && self.path_open(x, b, y, cond, &mut on_path))
    }

    fn path_open(
        &self,
        a: NodeId,
        b: NodeId,
        y: NodeId,
        cond: &FixedBitSet,
        on_path: &mut FixedBitSet,
    ) -> bool {
        if b == y {
            return true;
        }
        let g = self.g;
        on_path.insert(b);
        let found = g.neighbors(b).iter().any(|&c| {
            !on_path.contains(c)
                && step_open(g, &self.anc, a, b, c, g.collider(a, b, c), cond)
                && self.path_open(b, c, y, cond, on_path)
        });
        on_path.set(b, false);
        found
    }

    fn walk_connected(&self, x: NodeId, y: NodeId, cond: &FixedBitSet) -> bool {
        let g = self.g;
        let n = g.node_count();
        let mut seen = vec![false; n * n];
        let mut queue = VecDeque::new();
        for &b in g.neighbors(x) {
            if b == y {
                continue;
            }
            seen[x * n + b] = true;
            queue.push_back((x, b));
        }
        while let Some((a, b)) = queue.pop_front() {
            if b == y {
                return true;
            }
            for &c in g.neighbors(b) {
                if c == a || seen[b * n + c] {
                    continue;
                }
                if step_open(g, &self.anc, a, b, c, g.collider(a, b, c), cond) {
                    seen[b * n + c] = true;
                    queue.push_back((b, c));
                }
            }
        }
        false
    }
}

/// `x` and `y` are m-separated by `z` in `g`.
pub fn m_separated(g: &MixedGraph, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    Separation::new(g).m_separated(x, y, z)
}

fn pds_step(g: &MixedGraph, a: NodeId, b: NodeId, c: NodeId) -> bool {
    g.collider(a, b, c) || (!g.noncollider(a, b, c) && g.is_adjacent(a, c))
}

/// Edge states `(u, v)` reachable from `start` along walks whose every
/// interior triple passes the Possible-D-SEP condition.
fn pds_states(g: &MixedGraph, start: NodeId, avoid: Option<NodeId>) -> Vec<bool> {
    let n = g.node_count();
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::new();
    for &b in g.neighbors(start) {
        if Some(b) == avoid {
            continue;
        }
        seen[start * n + b] = true;
        queue.push_back((start, b));
    }
    while let Some((a, b)) = queue.pop_front() {
        if Some(b) == avoid {
            continue;
        }
        for &c in g.neighbors(b) {
            if c == a || c == start || seen[b * n + c] {
                continue;
            }
            if pds_step(g, a, b, c) {
                seen[b * n + c] = true;
                queue.push_back((b, c));
            }
        }
    }
    seen
}

/// Possible-D-SEP of `a`: every `v != a` reachable from `a` along a path
/// whose interior triples are colliders or unresolved triangles.
pub fn possible_dsep_from(g: &MixedGraph, a: NodeId) -> NodeSet {
    let n = g.node_count();
    let seen = pds_states(g, a, None);
    (0..n)
        .filter(|&v| v != a && (0..n).any(|u| seen[u * n + v]))
        .collect()
}

/// Interior nodes of `a`-`b` paths whose every interior triple is a collider
/// or a triangle whose middle is not a definite noncollider.
///
/// Walks are pruned at the first failing triple, so the search only explores
/// paths that can still qualify.
pub fn possible_dsep(g: &MixedGraph, a: NodeId, b: NodeId) -> NodeSet {
    let n = g.node_count();
    let mut out = vec![false; n];
    let mut on_path = vec![false; n];
    let mut path = vec![a];
    on_path[a] = true;
    pds_paths(g, b, &mut path, &mut on_path, &mut out);
    (0..n).filter(|&v| out[v]).collect()
}

fn pds_paths(
    g: &MixedGraph,
    b: NodeId,
    path: &mut Vec<NodeId>,
    on_path: &mut [bool],
    out: &mut [bool],
) {
    let tip = path[path.len() - 1];
    let prev = (path.len() >= 2).then(|| path[path.len() - 2]);
    for &next in g.neighbors(tip) {
        if on_path[next] {
            continue;
        }
        if let Some(p) = prev {
            if !pds_step(g, p, tip, next) {
                continue;
            }
        }
        if next == b {
            for &v in &path[1..] {
                out[v] = true;
            }
            continue;
        }
        on_path[next] = true;
        path.push(next);
        pds_paths(g, b, path, on_path, out);
        path.pop();
        on_path[next] = false;
    }
}

/// An inducing path between `x` and `y`: every interior node is a collider
/// and an ancestor of `x`, `y` or a member of `selection`.
pub fn has_inducing_path(g: &MixedGraph, x: NodeId, y: NodeId, selection: &NodeSet) -> bool {
    inducing_path_relative_to(g, x, y, &NodeSet::new(), selection)
}

/// Inducing path relative to the latent set `latent`: interior nodes outside
/// `latent` are colliders, and every collider is an ancestor of `x`, `y` or `selection`.
pub fn inducing_path_relative_to(
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
    latent: &NodeSet,
    selection: &NodeSet,
) -> bool {
    if x == y {
        return false;
    }
    if g.is_adjacent(x, y) {
        return true;
    }
    let anc = g.ancestor_index();
    let n = g.node_count();
    let mut targets = selection.clone();
    targets.insert(x);
    targets.insert(y);
    let tmask = mask(n, &targets);
    let in_an: Vec<bool> = (0..n).map(|v| anc.is_ancestor_of_mask(v, &tmask)).collect();
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::new();
    for &b in g.neighbors(x) {
        seen[x * n + b] = true;
        queue.push_back((x, b));
    }
    while let Some((a, b)) = queue.pop_front() {
        if b == y {
            return true;
        }
        for &c in g.neighbors(b) {
            if c == a || seen[b * n + c] {
                continue;
            }
            let ok = if g.collider(a, b, c) {
                in_an[b]
            } else {
                latent.contains(&b)
            };
            if ok {
                seen[b * n + c] = true;
                queue.push_back((b, c));
            }
        }
    }
    false
}

/// The MAG over the measured nodes of a DAG with latent flags.
///
/// Two measured nodes are adjacent iff they are d-connected given their
/// measured ancestors, and the mark at `x` is a tail iff `x` is an ancestor of `y`.
pub fn latent_project(dag: &MixedGraph) -> Result<MixedGraph> {
    if !dag.is_dag() {
        return Err(Error::NotADag("latent projection needs a DAG".into()));
    }
    let measured = dag.measured();
    let sep = Separation::new(dag);
    let anc = sep.ancestors();
    let n = dag.node_count();
    let mut mag = MixedGraph::empty();
    for &v in &measured {
        mag.add_node(dag.name(v), false);
    }
    for (i, &x) in measured.iter().enumerate() {
        for (j, &y) in measured.iter().enumerate().skip(i + 1) {
            let adjacent = dag.is_adjacent(x, y) || {
                let mut cond = FixedBitSet::with_capacity(n);
                for &m in &measured {
                    if m != x && m != y && (anc.is_ancestor(m, x) || anc.is_ancestor(m, y)) {
                        cond.insert(m);
                    }
                }
                sep.connected_given(x, y, &cond)
            };
            if adjacent {
                let end_x = if anc.is_ancestor(x, y) {
                    Endpoint::Tail
                } else {
                    Endpoint::Arrow
                };
                let end_y = if anc.is_ancestor(y, x) {
                    Endpoint::Tail
                } else {
                    Endpoint::Arrow
                };
                mag.add_edge(i, j, end_x, end_y)?;
            }
        }
    }
    Ok(mag)
}

/// Why a mixed graph fails to be a MAG, if it does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MagDefect {
    DirectedCycle(Vec<NodeId>),
    AlmostCycle(NodeId, NodeId),
    UndirectedIntoArrow(NodeId, NodeId),
    CircleMark(NodeId, NodeId),
    NotMaximal(NodeId, NodeId),
}

/// The first defect that keeps `g` from being a MAG.
pub fn mag_defect(g: &MixedGraph) -> Option<MagDefect> {
    for e in g.edges() {
        if e.end_a == Endpoint::Circle || e.end_b == Endpoint::Circle {
            return Some(MagDefect::CircleMark(e.a, e.b));
        }
    }
    if let Some(cycle) = directed_cycle(g) {
        return Some(MagDefect::DirectedCycle(cycle));
    }
    let anc = g.ancestor_index();
    for e in g.edges() {
        if e.is_bidirected() && (anc.is_ancestor(e.a, e.b) || anc.is_ancestor(e.b, e.a)) {
            return Some(MagDefect::AlmostCycle(e.a, e.b));
        }
    }
    for e in g.edges() {
        if e.is_undirected() {
            for v in [e.a, e.b] {
                if g.neighbors(v).iter().any(|&w| g.is_into(w, v)) {
                    return Some(MagDefect::UndirectedIntoArrow(v, e.other(v)));
                }
            }
        }
    }
    let n = g.node_count();
    for x in 0..n {
        for y in x + 1..n {
            if !g.is_adjacent(x, y) && has_inducing_path(g, x, y, &NodeSet::new()) {
                return Some(MagDefect::NotMaximal(x, y));
            }
        }
    }
    None
}

pub fn is_mag(g: &MixedGraph) -> bool {
    mag_defect(g).is_none()
}

/// Some directed cycle over fully directed edges, as a node sequence.
pub fn directed_cycle(g: &MixedGraph) -> Option<Vec<NodeId>> {
    let n = g.node_count();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let nbrs = g.neighbors(v);
            if *i < nbrs.len() {
                let c = nbrs[*i];
                *i += 1;
                if !g.is_parent_of(v, c) {
                    continue;
                }
                match state[c] {
                    0 => {
                        state[c] = 1;
                        parent[c] = v;
                        stack.push((c, 0));
                    }
                    1 => {
                        let mut cycle = vec![c];
                        let mut u = v;
                        while u != c {
                            cycle.push(u);
                            u = parent[u];
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    None
}
