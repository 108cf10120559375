//! Recursive path blocking: build a conditioning set on the fly by walking
//! every open continuation from `x` toward `y` and conditioning on the
//! noncolliders that cannot be closed further downstream.

use fixedbitset::FixedBitSet;

use crate::graph::{AncestorIndex, MixedGraph, NodeId, NodeSet};
use crate::separation::step_open;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Blocked,
    Unblockable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRequest {
    pub x: NodeId,
    pub y: NodeId,
    /// Nodes that must end up in the blocking set.
    pub containing: NodeSet,
    /// Nodes never traversed and never added.
    pub not_followed: NodeSet,
    /// Edge budget for a single branch; `None` is unbounded.
    pub max_path_len: Option<usize>,
    /// Recursion steps before giving up with `None`; `None` is unbounded.
    pub max_steps: Option<u64>,
}

/// Step budget of a default request. The walk is exponential in the worst
/// case, and running out returns `None`, which is always safe.
pub const DEFAULT_MAX_STEPS: u64 = 10_000;

impl BlockRequest {
    pub fn new(x: NodeId, y: NodeId) -> Self {
        BlockRequest {
            x,
            y,
            containing: NodeSet::new(),
            not_followed: NodeSet::new(),
            max_path_len: None,
            max_steps: Some(DEFAULT_MAX_STEPS),
        }
    }

    pub fn not_followed(mut self, f: NodeSet) -> Self {
        self.not_followed = f;
        self
    }

    pub fn containing(mut self, c: NodeSet) -> Self {
        self.containing = c;
        self
    }

    pub fn max_path_len(mut self, len: Option<usize>) -> Self {
        self.max_path_len = len;
        self
    }

    pub fn max_steps(mut self, steps: Option<u64>) -> Self {
        self.max_steps = steps;
        self
    }
}

/// Unbounded up to 25 nodes, 5 edges beyond that.
pub fn default_block_len(node_count: usize) -> Option<usize> {
    if node_count <= 25 {
        None
    } else {
        Some(5)
    }
}

/// Walks the graph for one request. Holds the mutable path and blocking
/// state of a single call, so separate calls never share anything mutable.
pub struct Blocker<'g> {
    g: &'g MixedGraph,
    anc: &'g AncestorIndex,
    y: NodeId,
    forbidden: FixedBitSet,
    on_path: FixedBitSet,
    path_len: usize,
    budget: Option<usize>,
    max_steps: Option<u64>,
    pub blocking: FixedBitSet,
    pub steps: u64,
    pub exhausted: bool,
}

impl<'g> Blocker<'g> {
    pub fn new(
        g: &'g MixedGraph,
        anc: &'g AncestorIndex,
        y: NodeId,
        forbidden: &NodeSet,
        budget: Option<usize>,
    ) -> Self {
        let n = g.node_count();
        let mut f = FixedBitSet::with_capacity(n);
        for &v in forbidden {
            f.insert(v);
        }
        Blocker {
            g,
            anc,
            y,
            forbidden: f,
            on_path: FixedBitSet::with_capacity(n),
            path_len: 0,
            budget,
            max_steps: None,
            blocking: FixedBitSet::with_capacity(n),
            steps: 0,
            exhausted: false,
        }
    }

    pub fn blocking_set(&self) -> NodeSet {
        self.blocking.ones().collect()
    }

    fn reachable(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let g = self.g;
        g.neighbors(b)
            .iter()
            .copied()
            .filter(|&c| {
                c != a
                    && !self.on_path.contains(c)
                    && !self.forbidden.contains(c)
                    && step_open(g, self.anc, a, b, c, g.collider(a, b, c), &self.blocking)
            })
            .collect()
    }

    fn leave(&mut self, b: NodeId, verdict: Verdict) -> Verdict {
        self.on_path.set(b, false);
        self.path_len -= 1;
        verdict
    }

    /// Whether every open continuation `a -> b -> ... -> y` can be blocked.
    ///
    /// The walk first tries to close the continuations downstream of `b`
    /// without conditioning on `b`. When that fails it conditions on `b`
    /// (never on a latent node or a node already in the set) and keeps it
    /// if every remaining continuation is then blocked.
    pub fn find_path_to_target(&mut self, a: NodeId, b: NodeId) -> Verdict {
        self.steps += 1;
        if self.max_steps.is_some_and(|m| self.steps > m) {
            self.exhausted = true;
            return Verdict::Unblockable;
        }
        if b == self.y || self.on_path.contains(b) {
            return Verdict::Unblockable;
        }
        if let Some(limit) = self.budget {
            if self.path_len + 1 > limit {
                return Verdict::Unblockable;
            }
        }
        self.on_path.insert(b);
        self.path_len += 1;
        let reachable = self.reachable(a, b);

        if self.g.is_latent(b) || self.blocking.contains(b) {
            for c in reachable {
                if self.find_path_to_target(b, c) == Verdict::Unblockable {
                    return self.leave(b, Verdict::Unblockable);
                }
            }
            return self.leave(b, Verdict::Blocked);
        }

        let snapshot = self.blocking.clone();
        let mut open = false;
        for c in reachable {
            if self.find_path_to_target(b, c) == Verdict::Unblockable {
                open = true;
                break;
            }
        }
        if !open {
            return self.leave(b, Verdict::Blocked);
        }

        self.blocking = snapshot.clone();
        self.blocking.insert(b);
        let reachable = self.reachable(a, b);
        for c in reachable {
            if self.find_path_to_target(b, c) == Verdict::Unblockable {
                self.blocking = snapshot;
                return self.leave(b, Verdict::Unblockable);
            }
        }
        self.leave(b, Verdict::Blocked)
    }
}

/// Outcome of a blocking call together with the work it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOutcome {
    pub set: Option<NodeSet>,
    pub steps: u64,
    pub sweeps: u32,
    /// The step budget ran out; `set` is `None`.
    pub exhausted: bool,
}

/// A set containing `containing`, avoiding `not_followed`, that blocks every
/// path between `x` and `y` other than the direct edge and inducing paths;
/// `None` when some continuation cannot be blocked.
pub fn block_paths_recursively(g: &MixedGraph, req: &BlockRequest) -> Option<NodeSet> {
    let anc = g.ancestor_index();
    block_with_index(g, &anc, req).set
}

/// Same as [`block_paths_recursively`] with a precomputed ancestor index.
///
/// The first-hop sweep repeats until the set stops growing, since a node added
/// late can open a collider on a continuation that was already judged blocked.
pub fn block_with_index(g: &MixedGraph, anc: &AncestorIndex, req: &BlockRequest) -> BlockOutcome {
    let mut blocker = Blocker::new(g, anc, req.y, &req.not_followed, req.max_path_len);
    blocker.max_steps = req.max_steps;
    for &c in &req.containing {
        blocker.blocking.insert(c);
    }
    let x = req.x;
    blocker.on_path.insert(x);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let before = blocker.blocking.clone();
        for &b in g.neighbors(x) {
            if b == req.y || req.not_followed.contains(&b) {
                continue;
            }
            if blocker.find_path_to_target(x, b) == Verdict::Unblockable {
                return BlockOutcome {
                    set: None,
                    steps: blocker.steps,
                    sweeps,
                    exhausted: blocker.exhausted,
                };
            }
        }
        if blocker.blocking == before {
            break;
        }
    }
    BlockOutcome {
        set: Some(blocker.blocking_set()),
        steps: blocker.steps,
        sweeps,
        exhausted: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separation::m_separated;
    use crate::text::from_text;

    fn g(text: &str) -> MixedGraph {
        from_text(text).unwrap()
    }

    #[test]
    fn peters_mag_needs_nothing() {
        let mag = g("Graph Nodes:\nx,a,b,z,y\nGraph Edges:\n1. x --> b\n2. b --> z\n3. z <-> y\n4. x <-> a\n5. a <-> y\n6. a --> b\n");
        let (x, y) = (mag.node_id("x").unwrap(), mag.node_id("y").unwrap());
        assert_eq!(
            block_paths_recursively(&mag, &BlockRequest::new(x, y)),
            Some(NodeSet::new())
        );
    }

    #[test]
    fn score_dag_blocks_through_middle() {
        let dag = g(
            "Graph Nodes:\nX,Y,Z,W\nGraph Edges:\n1. X --> Y\n2. Y --> Z\n3. W --> Z\n4. X --> Z\n",
        );
        let b = block_paths_recursively(&dag, &BlockRequest::new(0, 2)).unwrap();
        assert_eq!(b, NodeSet::from([1]));
    }

    #[test]
    fn running_out_of_steps_gives_none() {
        let dag = g(
            "Graph Nodes:\nX,Y,Z,W\nGraph Edges:\n1. X --> Y\n2. Y --> Z\n3. W --> Z\n4. X --> Z\n",
        );
        let anc = dag.ancestor_index();
        let out = block_with_index(&dag, &anc, &BlockRequest::new(0, 2).max_steps(Some(1)));
        assert!(out.set.is_none() && out.exhausted);
        let out = block_with_index(&dag, &anc, &BlockRequest::new(0, 2).max_steps(None));
        assert_eq!(out.set, Some(NodeSet::from([1])));
        assert!(!out.exhausted);
    }

    #[test]
    fn lone_edge_needs_nothing() {
        let e = g("Graph Nodes:\nX,Y\nGraph Edges:\n1. X --> Y\n");
        assert_eq!(
            block_paths_recursively(&e, &BlockRequest::new(0, 1)),
            Some(NodeSet::new())
        );
    }

    #[test]
    fn find_path_base_cases() {
        let chain = g("Graph Nodes:\nx,b,y\nGraph Edges:\n1. x --> b\n2. b --> y\n");
        let anc = chain.ancestor_index();
        let mut blk = Blocker::new(&chain, &anc, 2, &NodeSet::new(), None);
        blk.on_path.insert(0);
        assert_eq!(blk.find_path_to_target(1, 2), Verdict::Unblockable);
        assert_eq!(blk.find_path_to_target(1, 0), Verdict::Unblockable);
        assert_eq!(blk.find_path_to_target(0, 1), Verdict::Blocked);
        assert_eq!(blk.blocking_set(), NodeSet::from([1]));
        assert!(m_separated(&chain, 0, 2, &NodeSet::from([1])));
    }

    #[test]
    fn forbidden_first_hop_is_skipped() {
        let chain = g("Graph Nodes:\nx,b,y\nGraph Edges:\n1. x --> b\n2. b --> y\n");
        let req = BlockRequest::new(0, 2).not_followed(NodeSet::from([1]));
        assert_eq!(block_paths_recursively(&chain, &req), Some(NodeSet::new()));
    }

    #[test]
    fn budget_exhaustion_is_unblockable() {
        let chain = g("Graph Nodes:\nx,a,b,c,y\nGraph Edges:\n1. x --> a\n2. a --> b\n3. b --> c\n4. c --> y\n");
        let req = BlockRequest::new(0, 4).max_path_len(Some(2));
        assert_eq!(
            block_paths_recursively(&chain, &req),
            Some(NodeSet::from([2]))
        );
        let req = BlockRequest::new(0, 4).max_path_len(Some(1));
        assert_eq!(
            block_paths_recursively(&chain, &req),
            Some(NodeSet::from([1]))
        );
    }
}
