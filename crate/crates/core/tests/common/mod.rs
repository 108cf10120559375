//! Brute-force reference implementations and random graph generators shared
//! by the integration tests. Everything here walks explicit simple paths or
//! enumerates subsets, so it is slow but easy to audit.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fcit_core::graph::{Endpoint, MixedGraph, NodeId, NodeSet};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn is_collider_on(g: &MixedGraph, a: NodeId, b: NodeId, c: NodeId) -> bool {
    g.endpoint(a, b) == Some(Endpoint::Arrow) && g.endpoint(c, b) == Some(Endpoint::Arrow)
}

/// Directed-path ancestors, computed by repeated relaxation.
pub fn bf_ancestors(g: &MixedGraph, v: NodeId) -> NodeSet {
    let mut out = NodeSet::from([v]);
    loop {
        let mut grew = false;
        for a in g.nodes() {
            if out.contains(&a) {
                continue;
            }
            if out.iter().any(|&b| g.is_parent_of(a, b)) {
                out.insert(a);
                grew = true;
            }
        }
        if !grew {
            return out;
        }
    }
}

/// A path is open given `z` when each interior collider has a descendant in
/// `z` (itself included) and each interior noncollider is outside `z`.
pub fn bf_path_open(g: &MixedGraph, path: &[NodeId], z: &NodeSet) -> bool {
    for w in path.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if is_collider_on(g, a, b, c) && !g.is_underline(a, b, c) {
            if !z.iter().any(|&s| bf_ancestors(g, s).contains(&b)) {
                return false;
            }
        } else if z.contains(&b) {
            return false;
        }
    }
    true
}

pub fn bf_m_separated(g: &MixedGraph, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    if g.is_adjacent(x, y) {
        return false;
    }
    g.all_paths(x, y, g.node_count())
        .iter()
        .all(|p| !bf_path_open(g, p, z))
}

/// d-separation in a DAG through the moralized ancestral graph.
pub fn moral_d_separated(dag: &MixedGraph, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    let mut keep: NodeSet = NodeSet::new();
    for &v in z.iter().chain([x, y].iter()) {
        keep.extend(bf_ancestors(dag, v));
    }
    let n = dag.node_count();
    let mut und = vec![vec![false; n]; n];
    for &v in &keep {
        let parents = dag.parents(v);
        for &p in &parents {
            und[p][v] = true;
            und[v][p] = true;
        }
        for &p in &parents {
            for &q in &parents {
                if p != q {
                    und[p][q] = true;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![x];
    seen[x] = true;
    while let Some(v) = stack.pop() {
        if v == y {
            return false;
        }
        for w in 0..n {
            if und[v][w] && keep.contains(&w) && !seen[w] && !z.contains(&w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    true
}

fn definite_noncollider(g: &MixedGraph, a: NodeId, b: NodeId, c: NodeId) -> bool {
    g.is_definite_noncollider(a, b, c).unwrap()
}

/// Interior nodes of `a`-`b` paths whose every interior triple is a collider
/// or a triangle whose middle is not a definite noncollider.
pub fn bf_possible_dsep(g: &MixedGraph, a: NodeId, b: NodeId) -> NodeSet {
    let mut out = NodeSet::new();
    for p in g.all_paths(a, b, g.node_count()) {
        let ok = p.windows(3).all(|w| {
            is_collider_on(g, w[0], w[1], w[2])
                || (!definite_noncollider(g, w[0], w[1], w[2]) && g.is_adjacent(w[0], w[2]))
        });
        if ok {
            out.extend(p[1..p.len() - 1].iter().copied());
        }
    }
    out
}

/// Possible-D-SEP of `a` from the textbook path definition.
pub fn bf_possible_dsep_from(g: &MixedGraph, a: NodeId) -> NodeSet {
    let mut out = NodeSet::new();
    for v in g.nodes() {
        if v == a {
            continue;
        }
        let found = g.all_paths(a, v, g.node_count()).iter().any(|p| {
            p.windows(3).all(|w| {
                is_collider_on(g, w[0], w[1], w[2])
                    || (!definite_noncollider(g, w[0], w[1], w[2]) && g.is_adjacent(w[0], w[2]))
            })
        });
        if found {
            out.insert(v);
        }
    }
    out
}

/// Inducing path relative to `latent`, checked path by path.
pub fn bf_inducing(g: &MixedGraph, x: NodeId, y: NodeId, latent: &NodeSet) -> bool {
    let mut an = bf_ancestors(g, x);
    an.extend(bf_ancestors(g, y));
    g.all_paths(x, y, g.node_count()).iter().any(|p| {
        p.windows(3).all(|w| {
            let b = w[1];
            if is_collider_on(g, w[0], b, w[2]) {
                an.contains(&b)
            } else {
                latent.contains(&b)
            }
        })
    })
}

pub fn is_inducing(g: &MixedGraph, path: &[NodeId]) -> bool {
    let (x, y) = (path[0], path[path.len() - 1]);
    let mut an = bf_ancestors(g, x);
    an.extend(bf_ancestors(g, y));
    path.windows(3)
        .all(|w| is_collider_on(g, w[0], w[1], w[2]) && an.contains(&w[1]))
}

/// All subsets of `items`, smallest first.
pub fn subsets(items: &[NodeId]) -> Vec<NodeSet> {
    let mut out = Vec::new();
    for size in 0..=items.len() {
        combos(items, size, 0, &mut Vec::new(), &mut out);
    }
    out
}

fn combos(
    items: &[NodeId],
    size: usize,
    start: usize,
    cur: &mut Vec<NodeId>,
    out: &mut Vec<NodeSet>,
) {
    if cur.len() == size {
        out.push(cur.iter().copied().collect());
        return;
    }
    for i in start..items.len() {
        cur.push(items[i]);
        combos(items, size, i + 1, cur, out);
        cur.pop();
    }
}

/// A random DAG on `n` nodes whose edges respect a random order.
pub fn random_dag(rng: &mut impl Rng, n: usize, p_edge: f64) -> MixedGraph {
    let mut g = MixedGraph::with_nodes(n);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_edge) {
                g.add_directed(order[i], order[j]).unwrap();
            }
        }
    }
    g
}

/// A random DAG with `latents` of its nodes flagged latent.
pub fn random_latent_dag(rng: &mut impl Rng, n: usize, latents: usize, p_edge: f64) -> MixedGraph {
    let mut g = random_dag(rng, n, p_edge);
    let mut ids: Vec<NodeId> = (0..n).collect();
    ids.shuffle(rng);
    for &v in ids.iter().take(latents) {
        g.set_latent(v, true);
    }
    g
}

/// A graph with random marks on random adjacencies; usually not ancestral.
pub fn random_mixed(rng: &mut impl Rng, n: usize, p_edge: f64, circles: bool) -> MixedGraph {
    let marks: &[Endpoint] = if circles {
        &[Endpoint::Tail, Endpoint::Arrow, Endpoint::Circle]
    } else {
        &[Endpoint::Tail, Endpoint::Arrow]
    };
    let mut g = MixedGraph::with_nodes(n);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p_edge) {
                let ea = *marks.choose(rng).unwrap();
                let eb = *marks.choose(rng).unwrap();
                g.add_edge(a, b, ea, eb).unwrap();
            }
        }
    }
    g
}

pub fn set(items: &[NodeId]) -> NodeSet {
    items.iter().copied().collect::<BTreeSet<_>>()
}

/// X -> Y <- L -> Z <- W with L latent.
pub const TRACE1_DAG: &str =
    "Graph Nodes:\nX,Y,(L),Z,W\nGraph Edges:\n1. X --> Y\n2. L --> Y\n3. L --> Z\n4. W --> Z\n";

/// The score-based DAG for the first trace, with the extra X -> Z.
pub const TRACE1_SCORE_DAG: &str =
    "Graph Nodes:\nX,Y,Z,W\nGraph Edges:\n1. X --> Y\n2. Y --> Z\n3. W --> Z\n4. X --> Z\n";

/// A latent model where R4 during removal decides whether S - L survives.
pub const TRACE2_DAG: &str = "Graph Nodes:\n(U1),M,P,(U2),L,Q,H,S,(U3),D\nGraph Edges:\n\
1. U1 --> M\n2. U1 --> L\n3. U1 --> U3\n4. P --> M\n5. U2 --> M\n6. L --> M\n7. M --> Q\n8. H --> M\n9. S --> M\n\
10. U3 --> M\n11. D --> M\n12. H --> P\n13. U2 --> H\n14. U2 --> D\n15. D --> L\n16. S --> Q\n17. U3 --> H\n18. S --> D\n";
