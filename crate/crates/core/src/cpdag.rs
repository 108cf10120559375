//! Score-based CPDAG search: grow-shrink parent selection over an order,
//! BOSS-style relocation search, and DAG to CPDAG conversion.

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use parking_lot::{Mutex, RwLock};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ci::CiTest;
use crate::error::{Error, Result};
use crate::graph::{Endpoint, MixedGraph, NodeId, NodeSet};
use crate::par::{self, Execution};
use crate::stats::{Bic, CovarianceModel, LocalScore, MSepOracle, ScoreParams};

use Endpoint::{Arrow, Tail};

/// Picks the parents of a node among its predecessors in an order.
pub trait OrderScorer: Sync {
    fn variables(&self) -> usize;

    /// Parents (sorted) and local score of `node` given `preds`.
    fn parents(&self, node: usize, preds: &[usize]) -> (Vec<usize>, f64);

    /// Score change from dropping `x` out of the parent set `rest + x` of `y`.
    fn delete_gain(&self, x: usize, y: usize, rest: &[usize]) -> f64;
}

/// Greedy forward additions then backward removals, each step taking the
/// single change with the largest strict gain; ties go to the lower index.
pub fn grow_shrink_parents<S: LocalScore + ?Sized>(
    score: &S,
    target: usize,
    preds: &[usize],
) -> (Vec<usize>, f64) {
    let mut cand: Vec<usize> = preds.iter().copied().filter(|&v| v != target).collect();
    cand.sort_unstable();
    let mut pa: Vec<usize> = Vec::new();
    let mut best = score.local(target, &pa);
    loop {
        let mut pick = None;
        let mut top = best;
        for &c in &cand {
            if pa.contains(&c) {
                continue;
            }
            let trial = insert_sorted(&pa, c);
            let s = score.local(target, &trial);
            if s > top {
                top = s;
                pick = Some(trial);
            }
        }
        match pick {
            Some(p) => {
                pa = p;
                best = top;
            }
            None => break,
        }
    }
    shrink(score, target, pa, best)
}

fn shrink<S: LocalScore + ?Sized>(
    score: &S,
    target: usize,
    mut pa: Vec<usize>,
    mut best: f64,
) -> (Vec<usize>, f64) {
    loop {
        let mut pick = None;
        let mut top = best;
        for i in 0..pa.len() {
            let mut trial = pa.clone();
            trial.remove(i);
            let s = score.local(target, &trial);
            if s > top {
                top = s;
                pick = Some(trial);
            }
        }
        match pick {
            Some(p) => {
                pa = p;
                best = top;
            }
            None => break,
        }
    }
    (pa, best)
}

fn insert_sorted(v: &[usize], x: usize) -> Vec<usize> {
    let mut out = v.to_vec();
    let at = out.partition_point(|&y| y < x);
    out.insert(at, x);
    out
}

type ParentMemo = RwLock<HashMap<(usize, FixedBitSet), (Vec<usize>, f64)>>;

fn memo_key(n: usize, node: usize, preds: &[usize]) -> (usize, FixedBitSet) {
    let mut bits = FixedBitSet::with_capacity(n);
    for &p in preds {
        bits.insert(p);
    }
    (node, bits)
}

struct GstNode {
    set: Vec<usize>,
    score: f64,
    /// Improving additions sorted best first: (score, candidate, child).
    kids: Option<Vec<(f64, usize, Option<usize>)>>,
}

/// Grow-shrink tree for one target: caches the forward phase of
/// [`grow_shrink_parents`] across predecessor sets.
struct Gst {
    nodes: Vec<GstNode>,
    shrunk: HashMap<Vec<usize>, (Vec<usize>, f64)>,
}

impl Gst {
    fn new() -> Self {
        Gst {
            nodes: Vec::new(),
            shrunk: HashMap::new(),
        }
    }

    fn parents<S: LocalScore + ?Sized>(
        &mut self,
        score: &S,
        target: usize,
        preds: &FixedBitSet,
    ) -> (Vec<usize>, f64) {
        if self.nodes.is_empty() {
            self.nodes.push(GstNode {
                set: Vec::new(),
                score: score.local(target, &[]),
                kids: None,
            });
        }
        let mut at = 0;
        loop {
            if self.nodes[at].kids.is_none() {
                let node = &self.nodes[at];
                let cand: Vec<usize> = (0..score.variables())
                    .filter(|&c| c != target && node.set.binary_search(&c).is_err())
                    .collect();
                let mut kids: Vec<(f64, usize, Option<usize>)> = score
                    .local_extended(target, &node.set, &cand)
                    .into_iter()
                    .zip(cand)
                    .filter(|&(s, _)| s > node.score)
                    .map(|(s, c)| (s, c, None))
                    .collect();
                kids.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                self.nodes[at].kids = Some(kids);
            }
            let kids = self.nodes[at].kids.as_ref().expect("filled");
            let Some(i) = kids.iter().position(|k| preds.contains(k.1)) else {
                break;
            };
            let (s, c, child) = kids[i];
            at = match child {
                Some(next) => next,
                None => {
                    let set = insert_sorted(&self.nodes[at].set, c);
                    self.nodes.push(GstNode {
                        set,
                        score: s,
                        kids: None,
                    });
                    let next = self.nodes.len() - 1;
                    self.nodes[at].kids.as_mut().expect("filled")[i].2 = Some(next);
                    next
                }
            };
        }
        let grown = &self.nodes[at];
        if let Some(hit) = self.shrunk.get(&grown.set) {
            return hit.clone();
        }
        let out = shrink(score, target, grown.set.clone(), grown.score);
        self.shrunk.insert(grown.set.clone(), out.clone());
        out
    }
}

/// BIC with grow-shrink parent selection, cached in one tree per node.
pub struct BicOrderScorer {
    bic: Bic,
    trees: Vec<Mutex<Gst>>,
}

impl BicOrderScorer {
    pub fn new(cm: Arc<CovarianceModel>, params: ScoreParams) -> Self {
        let bic = Bic::new(cm, params);
        let trees = (0..bic.variables())
            .map(|_| Mutex::new(Gst::new()))
            .collect();
        BicOrderScorer { bic, trees }
    }

    pub fn bic(&self) -> &Bic {
        &self.bic
    }
}

impl OrderScorer for BicOrderScorer {
    fn variables(&self) -> usize {
        self.bic.variables()
    }

    fn parents(&self, node: usize, preds: &[usize]) -> (Vec<usize>, f64) {
        let mut bits = FixedBitSet::with_capacity(self.variables());
        bits.extend(preds.iter().copied().filter(|&v| v != node));
        self.trees[node]
            .lock()
            .parents(&self.bic.uncached(), node, &bits)
    }

    fn delete_gain(&self, x: usize, y: usize, rest: &[usize]) -> f64 {
        let mut with = rest.to_vec();
        with.push(x);
        with.sort_unstable();
        self.bic.local(y, rest) - self.bic.local(y, &with)
    }
}

/// Minimal I-map parents read off an independence oracle; the score is
/// minus the number of parents.
pub struct OracleOrderScorer<'a> {
    oracle: &'a MSepOracle,
    p: usize,
    memo: ParentMemo,
}

impl<'a> OracleOrderScorer<'a> {
    pub fn new(oracle: &'a MSepOracle) -> Self {
        let p = oracle.measured_names().len();
        OracleOrderScorer {
            oracle,
            p,
            memo: RwLock::new(HashMap::new()),
        }
    }
}

impl OrderScorer for OracleOrderScorer<'_> {
    fn variables(&self) -> usize {
        self.p
    }

    fn parents(&self, node: usize, preds: &[usize]) -> (Vec<usize>, f64) {
        let key = memo_key(self.p, node, preds);
        if let Some(hit) = self.memo.read().get(&key) {
            return hit.clone();
        }
        let mut pa: Vec<usize> = preds
            .iter()
            .copied()
            .filter(|&u| {
                let rest: NodeSet = preds
                    .iter()
                    .copied()
                    .filter(|&w| w != u && w != node)
                    .collect();
                u != node && !self.oracle.independent(u, node, &rest)
            })
            .collect();
        pa.sort_unstable();
        let out = (pa.clone(), -(pa.len() as f64));
        self.memo.write().insert(key, out.clone());
        out
    }

    fn delete_gain(&self, x: usize, y: usize, rest: &[usize]) -> f64 {
        let rest: NodeSet = rest.iter().copied().collect();
        if self.oracle.independent(x, y, &rest) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BossConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Finish with backward equivalence search on the CPDAG.
    pub bes: bool,
    pub execution: Execution,
}

impl Default for BossConfig {
    fn default() -> Self {
        BossConfig {
            seed: 0,
            restarts: 1,
            bes: true,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BossResult {
    pub order: Vec<usize>,
    pub dag: MixedGraph,
    pub cpdag: MixedGraph,
    pub score: f64,
    /// Total score after every accepted relocation, starting value first.
    pub trace: Vec<f64>,
}

fn order_parents(
    scorer: &dyn OrderScorer,
    order: &[usize],
    exec: Execution,
) -> Vec<(Vec<usize>, f64)> {
    par::map_range(exec, order.len(), |i| scorer.parents(order[i], &order[..i]))
}

fn improves(new: f64, old: f64) -> bool {
    new > old + 1e-9 * (1.0 + old.abs())
}

/// One relocation search from `start`; returns the final order and trace.
/// Moves onto equal-scoring positions are taken, and passes repeat while a
/// whole pass strictly improves the score.
fn relocate(
    scorer: &dyn OrderScorer,
    start: Vec<usize>,
    exec: Execution,
) -> (Vec<usize>, Vec<f64>) {
    let p = start.len();
    let mut order = start;
    let mut current: f64 = order_parents(scorer, &order, exec)
        .iter()
        .map(|x| x.1)
        .sum();
    let mut trace = vec![current];
    loop {
        let pass_start = current;
        for v in 0..p {
            let at = order.iter().position(|&u| u == v).expect("v in order");
            let q: Vec<usize> = order.iter().copied().filter(|&u| u != v).collect();
            let a = par::map_range(exec, q.len(), |j| scorer.parents(q[j], &q[..j]).1);
            let b = par::map_range(exec, q.len(), |j| {
                let mut preds = q[..j].to_vec();
                preds.push(v);
                scorer.parents(q[j], &preds).1
            });
            let sv = par::map_range(exec, p, |k| scorer.parents(v, &q[..k]).1);
            let mut suffix_b = vec![0.0; q.len() + 1];
            for j in (0..q.len()).rev() {
                suffix_b[j] = suffix_b[j + 1] + b[j];
            }
            let mut prefix_a = 0.0;
            let mut best: Option<(usize, f64)> = None;
            for k in 0..p {
                let total = sv[k] + prefix_a + suffix_b[k];
                if best.is_none_or(|(_, s)| total > s) {
                    best = Some((k, total));
                }
                if k < q.len() {
                    prefix_a += a[k];
                }
            }
            let (k, total) = best.expect("at least one position");
            if k != at && !improves(current, total) {
                let mut next = q;
                next.insert(k, v);
                order = next;
                current = order_parents(scorer, &order, exec)
                    .iter()
                    .map(|x| x.1)
                    .sum();
                trace.push(current);
            }
        }
        if !improves(current, pass_start) {
            return (order, trace);
        }
    }
}

/// Best-order search by relocation, from a seeded random order.
pub fn boss_search<S: AsRef<str>>(
    scorer: &dyn OrderScorer,
    names: &[S],
    cfg: &BossConfig,
) -> BossResult {
    let p = scorer.variables();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let mut start: Vec<usize> = (0..p).collect();
        start.shuffle(&mut rng);
        let (order, trace) = relocate(scorer, start, cfg.execution);
        let better = match &best {
            None => true,
            Some((_, t)) => improves(*trace.last().unwrap(), *t.last().unwrap()),
        };
        if better {
            best = Some((order, trace));
        }
    }
    let (order, mut trace) = best.expect("one restart");
    let mut dag = dag_from_order(scorer, names, &order, cfg.execution);
    let mut cpdag = dag_to_cpdag(&dag).expect("order DAGs are acyclic");
    if cfg.bes {
        let (pruned, gains) = bes(scorer, &cpdag, cfg.execution);
        if !gains.is_empty() {
            for g in gains {
                trace.push(trace.last().unwrap() + g);
            }
            dag = pdag_to_dag(&pruned).expect("BES keeps a consistent extension");
            cpdag = pruned;
        }
    }
    BossResult {
        order,
        dag,
        cpdag,
        score: *trace.last().unwrap(),
        trace,
    }
}

pub fn dag_from_order<S: AsRef<str>>(
    scorer: &dyn OrderScorer,
    names: &[S],
    order: &[usize],
    exec: Execution,
) -> MixedGraph {
    let mut dag = MixedGraph::new(names);
    for (i, (pa, _)) in order_parents(scorer, order, exec).into_iter().enumerate() {
        for u in pa {
            dag.add_directed(u, order[i]).expect("fresh edge");
        }
    }
    dag
}

/// Unshielded `a *-> c <-* b`, listed with `a < b`.
pub fn unshielded_colliders(g: &MixedGraph) -> Vec<(NodeId, NodeId, NodeId)> {
    let mut out = Vec::new();
    for c in g.nodes() {
        let nb = g.neighbors(c);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !g.is_adjacent(a, b) && g.is_into(a, c) && g.is_into(b, c) {
                    out.push((a.min(b), c, a.max(b)));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn directed(g: &MixedGraph, a: NodeId, b: NodeId) -> bool {
    g.endpoint(a, b) == Some(Arrow) && g.endpoint(b, a) == Some(Tail)
}

fn undirected(g: &MixedGraph, a: NodeId, b: NodeId) -> bool {
    g.endpoint(a, b) == Some(Tail) && g.endpoint(b, a) == Some(Tail)
}

fn orient(g: &mut MixedGraph, a: NodeId, b: NodeId) {
    g.set_edge(a, b, Tail, Arrow).expect("edge exists");
}

/// Closes a partially directed graph under Meek's first three rules.
pub fn meek_closure(g: &mut MixedGraph) {
    loop {
        let mut changed = false;
        for b in g.nodes() {
            let nb = g.neighbors(b).to_vec();
            for &c in &nb {
                if !undirected(g, b, c) {
                    continue;
                }
                let r1 = nb
                    .iter()
                    .any(|&a| a != c && directed(g, a, b) && !g.is_adjacent(a, c));
                let r2 = nb
                    .iter()
                    .any(|&m| m != c && directed(g, b, m) && directed(g, m, c));
                let r3 = {
                    let into_c: Vec<NodeId> = g
                        .neighbors(c)
                        .iter()
                        .copied()
                        .filter(|&d| d != b && directed(g, d, c) && undirected(g, b, d))
                        .collect();
                    into_c
                        .iter()
                        .enumerate()
                        .any(|(i, &d1)| into_c[i + 1..].iter().any(|&d2| !g.is_adjacent(d1, d2)))
                };
                if r1 || r2 || r3 {
                    orient(g, b, c);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Compelled edges directed, reversible edges undirected.
pub fn dag_to_cpdag(dag: &MixedGraph) -> Result<MixedGraph> {
    if !dag.is_dag() {
        return Err(Error::NotADag(
            "input has a cycle or a non-directed edge".into(),
        ));
    }
    let mut out = dag.clone();
    out.reorient_all(Tail);
    for (a, c, b) in unshielded_colliders(dag) {
        orient(&mut out, a, c);
        orient(&mut out, b, c);
    }
    meek_closure(&mut out);
    Ok(out)
}

/// A DAG member of the class of a partially directed graph (Dor and Tarsi).
pub fn pdag_to_dag(g: &MixedGraph) -> Result<MixedGraph> {
    let mut out = g.clone();
    let mut alive = vec![true; g.node_count()];
    for _ in g.nodes() {
        let sink = g.nodes().find(|&x| {
            alive[x]
                && !g
                    .neighbors(x)
                    .iter()
                    .any(|&z| alive[z] && directed(g, x, z))
                && g.neighbors(x)
                    .iter()
                    .filter(|&&y| alive[y] && undirected(g, x, y))
                    .all(|&y| {
                        g.neighbors(x)
                            .iter()
                            .all(|&z| z == y || !alive[z] || g.is_adjacent(y, z))
                    })
        });
        let Some(x) = sink else {
            return Err(Error::NotADag("no consistent extension".into()));
        };
        for &y in g.neighbors(x) {
            if alive[y] && undirected(g, x, y) {
                orient(&mut out, y, x);
            }
        }
        alive[x] = false;
    }
    Ok(out)
}

fn cliques_within(g: &MixedGraph, pool: &[NodeId]) -> Vec<Vec<NodeId>> {
    fn grow(
        g: &MixedGraph,
        pool: &[NodeId],
        from: usize,
        cur: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        out.push(cur.clone());
        for i in from..pool.len() {
            if cur.iter().all(|&c| g.is_adjacent(c, pool[i])) {
                cur.push(pool[i]);
                grow(g, pool, i + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    grow(g, pool, 0, &mut Vec::new(), &mut out);
    out
}

struct Deletion {
    x: NodeId,
    y: NodeId,
    h: Vec<NodeId>,
    gain: f64,
}

fn best_deletion(
    scorer: &dyn OrderScorer,
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
) -> Option<Deletion> {
    let na: Vec<NodeId> = g
        .neighbors(y)
        .iter()
        .copied()
        .filter(|&h| h != x && undirected(g, h, y) && g.is_adjacent(h, x))
        .collect();
    let pa: Vec<NodeId> = g
        .neighbors(y)
        .iter()
        .copied()
        .filter(|&h| h != x && directed(g, h, y))
        .collect();
    let mut best: Option<Deletion> = None;
    for keep in cliques_within(g, &na) {
        let mut cond: Vec<usize> = keep.iter().chain(&pa).copied().collect();
        cond.sort_unstable();
        let gain = scorer.delete_gain(x, y, &cond);
        if gain > 1e-9 && best.as_ref().is_none_or(|b| gain > b.gain) {
            let h = na.iter().copied().filter(|v| !keep.contains(v)).collect();
            best = Some(Deletion { x, y, h, gain });
        }
    }
    best
}

/// Backward equivalence search: repeatedly applies the best edge deletion
/// while it improves the score. Returns the CPDAG and the accepted gains.
pub fn bes(
    scorer: &dyn OrderScorer,
    cpdag: &MixedGraph,
    exec: Execution,
) -> (MixedGraph, Vec<f64>) {
    let mut g = cpdag.clone();
    let mut gains = Vec::new();
    loop {
        let mut pairs = Vec::new();
        for e in g.edges() {
            let (a, b) = (e.a, e.b);
            if undirected(&g, a, b) {
                pairs.push((a, b));
                pairs.push((b, a));
            } else if directed(&g, a, b) {
                pairs.push((a, b));
            } else if directed(&g, b, a) {
                pairs.push((b, a));
            }
        }
        let found = par::map(exec, &pairs, |&(x, y)| best_deletion(scorer, &g, x, y));
        let mut pick: Option<Deletion> = None;
        for d in found.into_iter().flatten() {
            if pick.as_ref().is_none_or(|p| d.gain > p.gain) {
                pick = Some(d);
            }
        }
        let Some(d) = pick else {
            return (g, gains);
        };
        let mut next = g.clone();
        next.remove_edge(d.x, d.y);
        for &h in &d.h {
            if undirected(&next, d.y, h) {
                orient(&mut next, d.y, h);
            }
            if undirected(&next, d.x, h) {
                orient(&mut next, d.x, h);
            }
        }
        let Ok(ext) = pdag_to_dag(&next) else {
            return (g, gains);
        };
        g = dag_to_cpdag(&ext).expect("extension is acyclic");
        gains.push(d.gain);
    }
}
