//! Mixed graphs whose edges carry a tail, arrowhead or circle at each end.
//!
//! One type covers DAGs, CPDAGs, MAGs and PAGs. Nodes are dense indices
//! into a name table and every traversal visits neighbours in index order,
//! so anything built on top of this module is deterministic.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Tail,
    Arrow,
    Circle,
}

impl Endpoint {
    pub fn symbol(self) -> char {
        match self {
            Endpoint::Tail => '-',
            Endpoint::Arrow => '>',
            Endpoint::Circle => 'o',
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// An edge with the mark at each of its ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub end_a: Endpoint,
    pub end_b: Endpoint,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId, end_a: Endpoint, end_b: Endpoint) -> Self {
        Edge { a, b, end_a, end_b }
    }

    pub fn mark_at(&self, v: NodeId) -> Option<Endpoint> {
        if v == self.a {
            Some(self.end_a)
        } else if v == self.b {
            Some(self.end_b)
        } else {
            None
        }
    }

    pub fn other(&self, v: NodeId) -> NodeId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn is_bidirected(&self) -> bool {
        self.end_a == Endpoint::Arrow && self.end_b == Endpoint::Arrow
    }

    pub fn is_directed(&self) -> bool {
        matches!(
            (self.end_a, self.end_b),
            (Endpoint::Tail, Endpoint::Arrow) | (Endpoint::Arrow, Endpoint::Tail)
        )
    }

    pub fn is_undirected(&self) -> bool {
        self.end_a == Endpoint::Tail && self.end_b == Endpoint::Tail
    }
}

/// A triple `<x, y, z>` with `y` in the middle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub x: NodeId,
    pub y: NodeId,
    pub z: NodeId,
}

impl Triple {
    pub fn new(x: NodeId, y: NodeId, z: NodeId) -> Self {
        Triple { x, y, z }
    }

    /// The same triple with its ends ordered so that `x <= z`.
    pub fn canonical(self) -> Self {
        if self.x <= self.z {
            self
        } else {
            Triple {
                x: self.z,
                y: self.y,
                z: self.x,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedGraph {
    names: Vec<String>,
    latent: Vec<bool>,
    index: HashMap<String, NodeId>,
    /// `marks[a * n + b]` is the mark at `b` on the edge between `a` and `b`.
    marks: Vec<Option<Endpoint>>,
    adj: Vec<Vec<NodeId>>,
    underlines: HashSet<Triple>,
}

impl PartialEq for MixedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.latent == other.latent
            && self.marks == other.marks
            && self.underlines == other.underlines
    }
}

impl Eq for MixedGraph {}

impl MixedGraph {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        let mut g = MixedGraph::empty();
        for name in names {
            g.add_node(name.as_ref(), false);
        }
        g
    }

    /// `n` measured nodes named `X1..Xn`.
    pub fn with_nodes(n: usize) -> Self {
        let names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
        MixedGraph::new(&names)
    }

    pub fn empty() -> Self {
        MixedGraph {
            names: Vec::new(),
            latent: Vec::new(),
            index: HashMap::new(),
            marks: Vec::new(),
            adj: Vec::new(),
            underlines: HashSet::new(),
        }
    }

    /// Same nodes, no edges.
    pub fn empty_like(&self) -> Self {
        let mut g = MixedGraph::empty();
        for v in 0..self.node_count() {
            g.add_node(&self.names[v], self.latent[v]);
        }
        g
    }

    pub fn add_node(&mut self, name: &str, latent: bool) -> NodeId {
        let old = self.names.len();
        let n = old + 1;
        let mut marks = vec![None; n * n];
        for a in 0..old {
            for b in 0..old {
                marks[a * n + b] = self.marks[a * old + b];
            }
        }
        self.marks = marks;
        self.names.push(name.to_string());
        self.latent.push(latent);
        self.index.insert(name.to_string(), old);
        self.adj.push(Vec::new());
        old
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.names.len()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn is_latent(&self, v: NodeId) -> bool {
        self.latent[v]
    }

    pub fn set_latent(&mut self, v: NodeId, latent: bool) {
        self.latent[v] = latent;
    }

    pub fn measured(&self) -> Vec<NodeId> {
        self.nodes().filter(|&v| !self.latent[v]).collect()
    }

    pub fn latents(&self) -> Vec<NodeId> {
        self.nodes().filter(|&v| self.latent[v]).collect()
    }

    #[inline]
    fn slot(&self, a: NodeId, b: NodeId) -> usize {
        a * self.names.len() + b
    }

    #[inline]
    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.marks[self.slot(a, b)].is_some()
    }

    /// Mark at `b` on the edge between `a` and `b`.
    #[inline]
    pub fn endpoint(&self, a: NodeId, b: NodeId) -> Option<Endpoint> {
        self.marks[self.slot(a, b)]
    }

    #[inline]
    fn has_mark(&self, a: NodeId, b: NodeId, mark: Endpoint) -> bool {
        self.marks[self.slot(a, b)] == Some(mark)
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn add_edge(
        &mut self,
        a: NodeId,
        b: NodeId,
        end_a: Endpoint,
        end_b: Endpoint,
    ) -> Result<()> {
        let n = self.node_count();
        if a >= n || b >= n {
            return Err(Error::UnknownNode(format!("#{}", a.max(b))));
        }
        if a == b {
            return Err(Error::SelfLoop(self.names[a].clone()));
        }
        if self.is_adjacent(a, b) {
            return Err(Error::DuplicateEdge(
                self.names[a].clone(),
                self.names[b].clone(),
            ));
        }
        let (ab, ba) = (self.slot(a, b), self.slot(b, a));
        self.marks[ab] = Some(end_b);
        self.marks[ba] = Some(end_a);
        insert_sorted(&mut self.adj[a], b);
        insert_sorted(&mut self.adj[b], a);
        Ok(())
    }

    pub fn add_directed(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.add_edge(a, b, Endpoint::Tail, Endpoint::Arrow)
    }

    pub fn add_bidirected(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.add_edge(a, b, Endpoint::Arrow, Endpoint::Arrow)
    }

    pub fn add_undirected(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.add_edge(a, b, Endpoint::Tail, Endpoint::Tail)
    }

    pub fn add_nondirected(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.add_edge(a, b, Endpoint::Circle, Endpoint::Circle)
    }

    /// `a o-> b`
    pub fn add_partially_oriented(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.add_edge(a, b, Endpoint::Circle, Endpoint::Arrow)
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> Option<Edge> {
        let e = self.edge(a, b)?;
        let (ab, ba) = (self.slot(a, b), self.slot(b, a));
        self.marks[ab] = None;
        self.marks[ba] = None;
        remove_sorted(&mut self.adj[a], b);
        remove_sorted(&mut self.adj[b], a);
        self.underlines.retain(|t| {
            !((t.x == a || t.z == a) && t.y == b || (t.x == b || t.z == b) && t.y == a)
        });
        Some(e)
    }

    /// Sets the mark at `b` on the existing edge `a *-* b`.
    pub fn set_endpoint(&mut self, a: NodeId, b: NodeId, mark: Endpoint) -> Result<()> {
        if !self.is_adjacent(a, b) {
            return Err(self.missing(a, b));
        }
        let s = self.slot(a, b);
        self.marks[s] = Some(mark);
        Ok(())
    }

    /// Sets both marks of the existing edge between `a` and `b`.
    pub fn set_edge(
        &mut self,
        a: NodeId,
        b: NodeId,
        end_a: Endpoint,
        end_b: Endpoint,
    ) -> Result<()> {
        self.set_endpoint(b, a, end_a)?;
        self.set_endpoint(a, b, end_b)
    }

    pub(crate) fn missing(&self, a: NodeId, b: NodeId) -> Error {
        Error::MissingEdge(self.names[a].clone(), self.names[b].clone())
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<Edge> {
        let end_b = self.endpoint(a, b)?;
        let end_a = self.endpoint(b, a)?;
        Some(Edge::new(a, b, end_a, end_b))
    }

    /// All edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for a in self.nodes() {
            for &b in &self.adj[a] {
                if a < b {
                    out.push(self.edge(a, b).expect("adjacency list out of sync"));
                }
            }
        }
        out
    }

    /// Replaces every mark with `mark`, keeping adjacencies.
    pub fn reorient_all(&mut self, mark: Endpoint) {
        for m in self.marks.iter_mut().flatten() {
            *m = mark;
        }
    }

    #[inline]
    pub fn is_parent_of(&self, a: NodeId, b: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Arrow) && self.has_mark(b, a, Endpoint::Tail)
    }

    #[inline]
    pub fn is_bidirected(&self, a: NodeId, b: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Arrow) && self.has_mark(b, a, Endpoint::Arrow)
    }

    #[inline]
    pub fn is_undirected(&self, a: NodeId, b: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Tail) && self.has_mark(b, a, Endpoint::Tail)
    }

    /// `a o-o b`
    #[inline]
    pub fn is_nondirected(&self, a: NodeId, b: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Circle) && self.has_mark(b, a, Endpoint::Circle)
    }

    /// `a *-> b`
    #[inline]
    pub fn is_into(&self, a: NodeId, b: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Arrow)
    }

    pub fn parents(&self, v: NodeId) -> Vec<NodeId> {
        self.adj[v]
            .iter()
            .copied()
            .filter(|&p| self.is_parent_of(p, v))
            .collect()
    }

    pub fn children(&self, v: NodeId) -> Vec<NodeId> {
        self.adj[v]
            .iter()
            .copied()
            .filter(|&c| self.is_parent_of(v, c))
            .collect()
    }

    /// Neighbours `x` with `x *-> t`.
    pub fn nodes_into(&self, t: NodeId) -> Vec<NodeId> {
        self.adj[t]
            .iter()
            .copied()
            .filter(|&x| self.is_into(x, t))
            .collect()
    }

    pub fn common_adjacents(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        self.adj[a]
            .iter()
            .copied()
            .filter(|&c| c != b && self.is_adjacent(c, b))
            .collect()
    }

    pub fn add_underline(&mut self, t: Triple) {
        self.underlines.insert(t.canonical());
    }

    pub fn is_underline(&self, a: NodeId, b: NodeId, c: NodeId) -> bool {
        !self.underlines.is_empty() && self.underlines.contains(&Triple::new(a, b, c).canonical())
    }

    pub fn underlines(&self) -> impl Iterator<Item = &Triple> {
        self.underlines.iter()
    }

    pub fn clear_underlines(&mut self) {
        self.underlines.clear();
    }

    /// Both marks at `b` are arrowheads. Unchecked: false when an edge is missing.
    #[inline]
    pub(crate) fn collider(&self, a: NodeId, b: NodeId, c: NodeId) -> bool {
        self.has_mark(a, b, Endpoint::Arrow) && self.has_mark(c, b, Endpoint::Arrow)
    }

    /// `a *-> b <-* c`
    pub fn is_def_collider(&self, a: NodeId, b: NodeId, c: NodeId) -> Result<bool> {
        self.require_edge(a, b)?;
        self.require_edge(b, c)?;
        Ok(self.collider(a, b, c))
    }

    pub(crate) fn noncollider(&self, a: NodeId, b: NodeId, c: NodeId) -> bool {
        let at_b_from_a = self.endpoint(a, b);
        let at_b_from_c = self.endpoint(c, b);
        if at_b_from_a.is_none() || at_b_from_c.is_none() {
            return false;
        }
        if self.is_undirected(a, b) && self.is_undirected(b, c) {
            return true;
        }
        if self.is_adjacent(a, c) {
            return false;
        }
        let tail = Some(Endpoint::Tail);
        let circle = Some(Endpoint::Circle);
        at_b_from_a == tail
            || at_b_from_c == tail
            || (at_b_from_a == circle && at_b_from_c == circle)
    }

    /// Definite noncollider at `b` on `<a, b, c>`.
    ///
    /// True for an unshielded triple with a tail at `b` on either edge, for an
    /// unshielded triple with circles at `b` on both edges, and for `a - b - c`.
    pub fn is_definite_noncollider(&self, a: NodeId, b: NodeId, c: NodeId) -> Result<bool> {
        self.require_edge(a, b)?;
        self.require_edge(b, c)?;
        Ok(self.noncollider(a, b, c))
    }

    fn require_edge(&self, a: NodeId, b: NodeId) -> Result<()> {
        if self.is_adjacent(a, b) {
            Ok(())
        } else {
            Err(self.missing(a, b))
        }
    }

    /// Ancestors of `x` over fully directed edges, `x` included.
    pub fn ancestors(&self, x: NodeId) -> NodeSet {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([x]);
        seen[x] = true;
        while let Some(v) = queue.pop_front() {
            for &p in &self.adj[v] {
                if !seen[p] && self.is_parent_of(p, v) {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(v, _)| v)
            .collect()
    }

    /// Descendants of `x` over fully directed edges, `x` included.
    pub fn descendants(&self, x: NodeId) -> NodeSet {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([x]);
        seen[x] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &self.adj[v] {
                if !seen[c] && self.is_parent_of(v, c) {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(v, _)| v)
            .collect()
    }

    /// Topological order of the directed part, `None` on a directed cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let n = self.node_count();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents(v).len()).collect();
        let mut ready: BTreeSet<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Every edge directed and no directed cycle.
    pub fn is_dag(&self) -> bool {
        self.edges().iter().all(Edge::is_directed) && self.is_acyclic()
    }

    /// Every simple path from `x` to `y` with at most `max_len` edges, in
    /// lexicographic order of node indices.
    pub fn all_paths(&self, x: NodeId, y: NodeId, max_len: usize) -> Vec<Vec<NodeId>> {
        let mut out = Vec::new();
        if x == y {
            return out;
        }
        let mut on_path = vec![false; self.node_count()];
        let mut path = vec![x];
        on_path[x] = true;
        self.paths_from(y, max_len, &mut path, &mut on_path, &mut out);
        out
    }

    fn paths_from(
        &self,
        y: NodeId,
        max_len: usize,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<NodeId>>,
    ) {
        let tip = *path.last().expect("path is never empty");
        if path.len() > max_len {
            return;
        }
        for &next in &self.adj[tip] {
            if on_path[next] {
                continue;
            }
            if next == y {
                let mut p = path.clone();
                p.push(y);
                out.push(p);
                continue;
            }
            on_path[next] = true;
            path.push(next);
            self.paths_from(y, max_len, path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }

    /// Subgraph over `keep`, renumbered in the given order.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> MixedGraph {
        let mut g = MixedGraph::empty();
        for &v in keep {
            g.add_node(&self.names[v], self.latent[v]);
        }
        for (i, &a) in keep.iter().enumerate() {
            for (j, &b) in keep.iter().enumerate().skip(i + 1) {
                if let Some(e) = self.edge(a, b) {
                    g.add_edge(i, j, e.end_a, e.end_b).expect("fresh graph");
                }
            }
        }
        g
    }

    /// Same graph with nodes permuted into `order` (given by name).
    pub fn reorder_like(&self, names: &[String]) -> Result<MixedGraph> {
        let keep = names
            .iter()
            .map(|n| self.node_id(n).ok_or_else(|| Error::UnknownNode(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.induced_subgraph(&keep))
    }

    pub fn ancestor_index(&self) -> AncestorIndex {
        AncestorIndex::new(self)
    }

    pub fn names_of<'a, I: IntoIterator<Item = &'a NodeId>>(&self, set: I) -> Vec<String> {
        set.into_iter().map(|&v| self.names[v].clone()).collect()
    }

    pub fn ids_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<NodeId>> {
        names
            .iter()
            .map(|n| {
                self.node_id(n.as_ref())
                    .ok_or_else(|| Error::UnknownNode(n.as_ref().to_string()))
            })
            .collect()
    }
}

/// Ancestor relation of one graph snapshot, computed eagerly.
#[derive(Debug, Clone)]
pub struct AncestorIndex {
    /// `anc[v]` holds every ancestor of `v`, `v` included.
    anc: Vec<FixedBitSet>,
}

impl AncestorIndex {
    pub fn new(g: &MixedGraph) -> Self {
        let n = g.node_count();
        let mut anc = vec![FixedBitSet::with_capacity(n); n];
        for v in 0..n {
            let mut seen = FixedBitSet::with_capacity(n);
            seen.insert(v);
            let mut stack = vec![v];
            while let Some(u) = stack.pop() {
                for &p in g.neighbors(u) {
                    if !seen.contains(p) && g.is_parent_of(p, u) {
                        seen.insert(p);
                        stack.push(p);
                    }
                }
            }
            anc[v] = seen;
        }
        AncestorIndex { anc }
    }

    /// `a` is an ancestor of `b` (reflexive).
    #[inline]
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        self.anc[b].contains(a)
    }

    pub fn is_ancestor_of_any<'a, I: IntoIterator<Item = &'a NodeId>>(
        &self,
        a: NodeId,
        set: I,
    ) -> bool {
        set.into_iter().any(|&b| self.is_ancestor(a, b))
    }

    /// `a` is an ancestor of some member of the bit mask.
    #[inline]
    pub fn is_ancestor_of_mask(&self, a: NodeId, mask: &FixedBitSet) -> bool {
        mask.ones().any(|b| self.anc[b].contains(a))
    }

    pub fn ancestors_of(&self, b: NodeId) -> &FixedBitSet {
        &self.anc[b]
    }
}

fn insert_sorted(v: &mut Vec<NodeId>, x: NodeId) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn remove_sorted(v: &mut Vec<NodeId>, x: NodeId) {
    if let Ok(pos) = v.binary_search(&x) {
        v.remove(pos);
    }
}
