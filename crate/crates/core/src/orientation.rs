//! The complete FCI orientation rules, MAG/PAG conversion and the PAG
//! legality check.

use std::collections::{HashMap, HashSet, VecDeque};

use fixedbitset::FixedBitSet;
use itertools::Itertools;

use crate::blocking::{block_paths_recursively, BlockRequest};
use crate::ci::CiTest;
use crate::discpath::{
    exists_discriminating_path, list_all_discriminating_paths, DiscMode, DiscPath,
};
use crate::graph::{Endpoint, MixedGraph, NodeId, NodeSet};
use crate::separation::{directed_cycle, has_inducing_path, is_mag};
use crate::sepset::SepsetMap;
use crate::{Error, Result};

use Endpoint::{Arrow, Circle, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    R0,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
}

impl Rule {
    pub const ALL: [Rule; 11] = [
        Rule::R0,
        Rule::R1,
        Rule::R2,
        Rule::R3,
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
        Rule::R8,
        Rule::R9,
        Rule::R10,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSet(u16);

impl RuleSet {
    pub fn all() -> Self {
        RuleSet((1 << 11) - 1)
    }

    pub fn none() -> Self {
        RuleSet(0)
    }

    /// Everything except the selection rules R5-R7.
    pub fn without_selection() -> Self {
        Self::all()
            .without(Rule::R5)
            .without(Rule::R6)
            .without(Rule::R7)
    }

    pub fn with(self, r: Rule) -> Self {
        RuleSet(self.0 | 1 << r as u16)
    }

    pub fn without(self, r: Rule) -> Self {
        RuleSet(self.0 & !(1 << r as u16))
    }

    pub fn contains(self, r: Rule) -> bool {
        self.0 & (1 << r as u16) != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R4Mode {
    AdjacencySubsets,
    RecursiveBlocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleConfig {
    pub rules: RuleSet,
    pub r4_mode: R4Mode,
    /// Body length cap for discriminating paths (`L_d`).
    pub r4_max_disc_len: Option<usize>,
    /// Subset size cap in the R4 search (`d`); `None` is unbounded.
    pub r4_depth: Option<usize>,
    /// Branch length cap for recursive blocking (`L_b`).
    pub max_block_len: Option<usize>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            rules: RuleSet::all(),
            r4_mode: R4Mode::RecursiveBlocking,
            r4_max_disc_len: None,
            r4_depth: None,
            max_block_len: None,
        }
    }
}

/// Where R4 gets its collider decisions from.
#[derive(Clone, Copy)]
pub enum R4Source<'a> {
    /// R4 never fires.
    Off,
    /// `v` is a noncollider iff it is in the recorded separating set.
    Sepsets(&'a SepsetMap),
    /// Search for a separating set with a test, as set by `RuleConfig::r4_mode`.
    Test {
        sepsets: Option<&'a SepsetMap>,
        test: &'a dyn CiTest,
    },
    /// Read the answer from a MAG in the class.
    Mag(&'a MixedGraph),
}

#[inline]
fn mark(g: &MixedGraph, a: NodeId, b: NodeId) -> Option<Endpoint> {
    g.endpoint(a, b)
}

fn set(g: &mut MixedGraph, a: NodeId, b: NodeId, m: Endpoint) -> bool {
    if g.endpoint(a, b) == Some(m) {
        return false;
    }
    g.set_endpoint(a, b, m).expect("edge exists");
    true
}

/// `a` to `b` can be read as a step of a directed path in some member.
#[inline]
fn pd(g: &MixedGraph, a: NodeId, b: NodeId) -> bool {
    matches!(mark(g, b, a), Some(Tail) | Some(Circle))
        && matches!(mark(g, a, b), Some(Arrow) | Some(Circle))
}

#[inline]
fn circle_edge(g: &MixedGraph, a: NodeId, b: NodeId) -> bool {
    mark(g, a, b) == Some(Circle) && mark(g, b, a) == Some(Circle)
}

/// R0: every unshielded `a *- c -* b` whose ends have a recorded separating
/// set missing `c` becomes `a *-> c <-* b`.
pub fn orient_colliders_from_sepsets(g: &mut MixedGraph, sepsets: &SepsetMap) -> bool {
    let mut changed = false;
    for c in g.nodes() {
        let nb = g.neighbors(c).to_vec();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if g.is_adjacent(a, b) {
                    continue;
                }
                if let Some(s) = sepsets.get(a, b) {
                    if !s.contains(&c) {
                        changed |= set(g, a, c, Arrow);
                        changed |= set(g, b, c, Arrow);
                    }
                }
            }
        }
    }
    changed
}

/// Whether `x` and `y` are joined by a path of `o-o` edges.
pub fn circle_reachable(g: &MixedGraph, x: NodeId, y: NodeId) -> bool {
    if x == y {
        return true;
    }
    let mut seen = FixedBitSet::with_capacity(g.node_count());
    let mut queue = VecDeque::from([x]);
    seen.insert(x);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if !seen.contains(v) && circle_edge(g, u, v) {
                if v == y {
                    return true;
                }
                seen.insert(v);
                queue.push_back(v);
            }
        }
    }
    false
}

/// Depth-first search for an uncovered path made of edges accepted by `ok`.
///
/// Failed `(prev, cur)` states are remembered only when the failure did not
/// depend on which nodes were already on the path, so the answer stays exact.
struct UncoveredSearch<'g, F> {
    g: &'g MixedGraph,
    ok: F,
    target: NodeId,
    on_path: FixedBitSet,
    stack: Vec<NodeId>,
    dead: HashSet<(NodeId, NodeId)>,
}

impl<'g, F: Fn(NodeId, NodeId) -> bool> UncoveredSearch<'g, F> {
    fn new(g: &'g MixedGraph, target: NodeId, ok: F) -> Self {
        UncoveredSearch {
            g,
            ok,
            target,
            on_path: FixedBitSet::with_capacity(g.node_count()),
            stack: Vec::new(),
            dead: HashSet::new(),
        }
    }

    /// A path `start, first, ..., target`, with `start -> first` already checked.
    fn find(
        &mut self,
        start: NodeId,
        first: NodeId,
        last_ok: &dyn Fn(NodeId) -> bool,
    ) -> Option<Vec<NodeId>> {
        self.on_path.clear();
        self.stack.clear();
        self.on_path.insert(start);
        self.stack.push(start);
        if first == self.target {
            return last_ok(start).then(|| vec![start, first]);
        }
        let found = self.extend(start, first, last_ok).0;
        found.then(|| self.stack.clone())
    }

    fn extend(
        &mut self,
        prev: NodeId,
        cur: NodeId,
        last_ok: &dyn Fn(NodeId) -> bool,
    ) -> (bool, bool) {
        if self.dead.contains(&(prev, cur)) {
            return (false, false);
        }
        self.on_path.insert(cur);
        self.stack.push(cur);
        let mut tainted = false;
        let g = self.g;
        for &next in g.neighbors(cur) {
            if next == prev || g.is_adjacent(prev, next) || !(self.ok)(cur, next) {
                continue;
            }
            if next == self.target {
                if last_ok(cur) {
                    self.stack.push(next);
                    return (true, false);
                }
                continue;
            }
            if self.on_path.contains(next) {
                tainted = true;
                continue;
            }
            let (found, t) = self.extend(cur, next, last_ok);
            if found {
                return (true, false);
            }
            tainted |= t;
        }
        self.on_path.set(cur, false);
        self.stack.pop();
        if !tainted {
            self.dead.insert((prev, cur));
        }
        (false, tainted)
    }
}

/// An uncovered `o-o` path `<a, c, ..., d, b>` with `a` not adjacent to `d`
/// and `b` not adjacent to `c`, as R5 requires.
pub fn r5_path(g: &MixedGraph, a: NodeId, b: NodeId) -> Option<Vec<NodeId>> {
    let mut search = UncoveredSearch::new(g, b, |u, v| circle_edge(g, u, v));
    for &c in g.neighbors(a) {
        if c == b || !circle_edge(g, a, c) || g.is_adjacent(c, b) || !circle_reachable(g, c, b) {
            continue;
        }
        let last_ok = |d: NodeId| d != a && !g.is_adjacent(a, d);
        if let Some(p) = search.find(a, c, &last_ok) {
            return Some(p);
        }
    }
    None
}

/// An uncovered potentially directed path `<a, b, t, ..., c>` with `b` not
/// adjacent to `c`, as R9 requires.
pub fn r9_path(g: &MixedGraph, a: NodeId, c: NodeId) -> Option<Vec<NodeId>> {
    let mut search = UncoveredSearch::new(g, c, |u, v| pd(g, u, v));
    for &b in g.neighbors(a) {
        if b == c || !pd(g, a, b) || g.is_adjacent(b, c) {
            continue;
        }
        if let Some(p) = search.find(a, b, &|_| true) {
            return Some(p);
        }
    }
    None
}

/// R10's path condition for `alpha o-> gamma`: parents `beta`, `theta` of
/// `gamma` reached from `alpha` by uncovered potentially directed paths whose
/// first steps are distinct and nonadjacent.
pub fn r10_uncovered_pd_paths(g: &MixedGraph, alpha: NodeId, gamma: NodeId) -> bool {
    let parents: Vec<NodeId> = g
        .parents(gamma)
        .into_iter()
        .filter(|&p| p != alpha)
        .collect();
    if parents.len() < 2 {
        return false;
    }
    let firsts: Vec<NodeId> = g
        .neighbors(alpha)
        .iter()
        .copied()
        .filter(|&m| pd(g, alpha, m))
        .collect();
    if firsts.len() < 2 {
        return false;
    }
    let mut searches: HashMap<NodeId, UncoveredSearch<'_, _>> = HashMap::new();
    let mut reach: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &m in &firsts {
        let mut hit = Vec::new();
        for &t in &parents {
            let s = searches
                .entry(t)
                .or_insert_with(|| UncoveredSearch::new(g, t, move |u, v| pd(g, u, v)));
            if s.find(alpha, m, &|_| true).is_some() {
                hit.push(t);
            }
        }
        reach.insert(m, hit);
    }
    for (i, &mu) in firsts.iter().enumerate() {
        for &om in &firsts[i + 1..] {
            if g.is_adjacent(mu, om) {
                continue;
            }
            let (ra, rb) = (&reach[&mu], &reach[&om]);
            if ra.iter().any(|&b| rb.iter().any(|&t| t != b)) {
                return true;
            }
        }
    }
    false
}

/// Alg. 8 style search for a set separating the ends of discriminating
/// paths between `x` and `y`; `None` when no candidate is independent.
pub fn rule_r4_recursive(
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
    test: &dyn CiTest,
    cfg: &RuleConfig,
) -> Option<NodeSet> {
    let paths: Vec<DiscPath> =
        list_all_discriminating_paths(g, cfg.r4_max_disc_len, DiscMode::STRICT)
            .into_iter()
            .filter(|p| (p.x == x && p.y == y) || (p.x == y && p.y == x))
            .collect();
    let nf_cand: Vec<NodeId> = paths
        .iter()
        .filter(|p| mark(g, p.y, p.v) == Some(Circle))
        .map(|p| p.v)
        .sorted()
        .dedup()
        .collect();
    let common: Vec<NodeId> = g.common_adjacents(x, y);
    let d1 = cfg.r4_depth.unwrap_or(nf_cand.len()).min(nf_cand.len());
    for size in 0..=d1 {
        for nf in nf_cand.iter().copied().combinations(size) {
            let req = BlockRequest::new(x, y)
                .not_followed(nf.into_iter().collect())
                .max_path_len(cfg.max_block_len);
            let Some(b) = block_paths_recursively(g, &req) else {
                continue;
            };
            if let Some(s) = trim_and_test(g, x, y, &b, &common, cfg.r4_depth, test) {
                return Some(s);
            }
        }
    }
    None
}

/// Tries `b \ d` for `d` over subsets of the common adjacents inside `b`,
/// never dropping a known collider `x -> d <- y`.
pub(crate) fn trim_and_test(
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
    b: &NodeSet,
    common: &[NodeId],
    depth: Option<usize>,
    test: &dyn CiTest,
) -> Option<NodeSet> {
    let droppable: Vec<NodeId> = common.iter().copied().filter(|c| b.contains(c)).collect();
    let d2 = depth.unwrap_or(droppable.len()).min(droppable.len());
    for size in 0..=d2 {
        for d in droppable.iter().copied().combinations(size) {
            if d.iter()
                .any(|&c| g.is_parent_of(x, c) && g.is_parent_of(y, c))
            {
                continue;
            }
            let s: NodeSet = b.iter().copied().filter(|v| !d.contains(v)).collect();
            if test.independent(x, y, &s) {
                return Some(s);
            }
        }
    }
    None
}

/// Separating set for `x`, `y` from subsets of either adjacency set.
fn adjacency_subset_search(
    g: &MixedGraph,
    x: NodeId,
    y: NodeId,
    depth: Option<usize>,
    test: &dyn CiTest,
) -> Option<NodeSet> {
    for (a, b) in [(x, y), (y, x)] {
        let adj: Vec<NodeId> = g.neighbors(a).iter().copied().filter(|&v| v != b).collect();
        let cap = depth.unwrap_or(adj.len()).min(adj.len());
        for size in 0..=cap {
            for s in adj.iter().copied().combinations(size) {
                let s: NodeSet = s.into_iter().collect();
                if test.independent(x, y, &s) {
                    return Some(s);
                }
            }
        }
    }
    None
}

/// Applies R1-R10 (as enabled) to a fixed point.
pub struct Orienter<'a> {
    cfg: RuleConfig,
    source: R4Source<'a>,
    r4_cache: HashMap<(NodeId, NodeId), Option<NodeSet>>,
    pub sweeps: usize,
}

impl<'a> Orienter<'a> {
    pub fn new(cfg: RuleConfig, source: R4Source<'a>) -> Self {
        Orienter {
            cfg,
            source,
            r4_cache: HashMap::new(),
            sweeps: 0,
        }
    }

    pub fn config(&self) -> &RuleConfig {
        &self.cfg
    }

    /// Runs sweeps R1 through R10 until nothing changes. Only marks change.
    pub fn apply(&mut self, g: &mut MixedGraph) -> bool {
        let rules = self.cfg.rules;
        let mut any = false;
        loop {
            self.sweeps += 1;
            let mut changed = false;
            if rules.contains(Rule::R1) {
                changed |= r1(g);
            }
            if rules.contains(Rule::R2) {
                changed |= r2(g);
            }
            if rules.contains(Rule::R3) {
                changed |= r3(g);
            }
            if rules.contains(Rule::R4) {
                changed |= self.r4(g);
            }
            if rules.contains(Rule::R5) {
                changed |= r5(g);
            }
            if rules.contains(Rule::R6) {
                changed |= r6(g);
            }
            if rules.contains(Rule::R7) {
                changed |= r7(g);
            }
            if rules.contains(Rule::R8) {
                changed |= r8(g);
            }
            if rules.contains(Rule::R9) {
                changed |= r9(g);
            }
            if rules.contains(Rule::R10) {
                changed |= r10(g);
            }
            if !changed {
                return any;
            }
            any = true;
        }
    }

    /// `Some(true)` when `v` is a noncollider on the path, `Some(false)` when
    /// it is a collider, `None` when the source has no answer.
    fn decide(&mut self, g: &MixedGraph, p: &DiscPath) -> Option<bool> {
        match self.source {
            R4Source::Off => None,
            R4Source::Sepsets(s) => s.get(p.x, p.y).map(|s| s.contains(&p.v)),
            R4Source::Mag(mag) => {
                Some(!(mark(mag, p.w, p.v) == Some(Arrow) && mark(mag, p.y, p.v) == Some(Arrow)))
            }
            R4Source::Test { sepsets, test } => {
                let key = (p.x.min(p.y), p.x.max(p.y));
                if let Some(hit) = self.r4_cache.get(&key) {
                    return hit.as_ref().map(|s| s.contains(&p.v));
                }
                let found = match (sepsets.and_then(|s| s.get(p.x, p.y)), self.cfg.r4_mode) {
                    (Some(s), _) => Some(s.clone()),
                    (None, R4Mode::RecursiveBlocking) => {
                        rule_r4_recursive(g, p.x, p.y, test, &self.cfg)
                    }
                    (None, R4Mode::AdjacencySubsets) => {
                        adjacency_subset_search(g, p.x, p.y, self.cfg.r4_depth, test)
                    }
                };
                let answer = found.as_ref().map(|s| s.contains(&p.v));
                self.r4_cache.insert(key, found);
                answer
            }
        }
    }

    fn r4(&mut self, g: &mut MixedGraph) -> bool {
        if matches!(self.source, R4Source::Off) {
            return false;
        }
        self.r4_cache.retain(|_, found| found.is_some());
        let mut changed = false;
        for p in list_all_discriminating_paths(g, self.cfg.r4_max_disc_len, DiscMode::STRICT) {
            if mark(g, p.y, p.v) != Some(Circle)
                || !matches!(
                    exists_discriminating_path(g, &p, DiscMode::STRICT),
                    Ok(true)
                )
            {
                continue;
            }
            match self.decide(g, &p) {
                Some(true) => {
                    changed |= set(g, p.y, p.v, Tail);
                    changed |= set(g, p.v, p.y, Arrow);
                }
                Some(false) => {
                    changed |= set(g, p.w, p.v, Arrow);
                    changed |= set(g, p.y, p.v, Arrow);
                    if mark(g, p.v, p.y) == Some(Circle) {
                        changed |= set(g, p.v, p.y, Arrow);
                    }
                }
                None => {}
            }
        }
        changed
    }
}

fn r1(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for b in g.nodes() {
        let nb = g.neighbors(b).to_vec();
        for &a in &nb {
            if mark(g, a, b) != Some(Arrow) {
                continue;
            }
            for &c in &nb {
                if c != a && mark(g, c, b) == Some(Circle) && !g.is_adjacent(a, c) {
                    changed |= set(g, c, b, Tail);
                    changed |= set(g, b, c, Arrow);
                }
            }
        }
    }
    changed
}

fn r2(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for a in g.nodes() {
        let nb = g.neighbors(a).to_vec();
        for &c in &nb {
            if mark(g, a, c) != Some(Circle) {
                continue;
            }
            let fires = g.common_adjacents(a, c).into_iter().any(|b| {
                (g.is_parent_of(a, b) && mark(g, b, c) == Some(Arrow))
                    || (mark(g, a, b) == Some(Arrow) && g.is_parent_of(b, c))
            });
            if fires {
                changed |= set(g, a, c, Arrow);
            }
        }
    }
    changed
}

fn r3(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for b in g.nodes() {
        let nb = g.neighbors(b).to_vec();
        for &t in &nb {
            if mark(g, t, b) != Some(Circle) {
                continue;
            }
            let around: Vec<NodeId> = g.common_adjacents(t, b);
            let fires = around.iter().tuple_combinations().any(|(&a, &c)| {
                !g.is_adjacent(a, c)
                    && g.collider(a, b, c)
                    && mark(g, a, t) == Some(Circle)
                    && mark(g, c, t) == Some(Circle)
            });
            if fires {
                changed |= set(g, t, b, Arrow);
            }
        }
    }
    changed
}

fn r5(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for e in g.edges() {
        let (a, b) = (e.a, e.b);
        if !circle_edge(g, a, b) {
            continue;
        }
        if let Some(p) = r5_path(g, a, b) {
            set(g, a, b, Tail);
            set(g, b, a, Tail);
            for w in p.windows(2) {
                set(g, w[0], w[1], Tail);
                set(g, w[1], w[0], Tail);
            }
            changed = true;
        }
    }
    changed
}

fn r6(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for b in g.nodes() {
        let nb = g.neighbors(b).to_vec();
        if !nb.iter().any(|&a| g.is_undirected(a, b)) {
            continue;
        }
        for &c in &nb {
            if mark(g, c, b) == Some(Circle) && nb.iter().any(|&a| a != c && g.is_undirected(a, b))
            {
                changed |= set(g, c, b, Tail);
            }
        }
    }
    changed
}

fn r7(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for b in g.nodes() {
        let nb = g.neighbors(b).to_vec();
        for &a in &nb {
            if !(mark(g, b, a) == Some(Tail) && mark(g, a, b) == Some(Circle)) {
                continue;
            }
            for &c in &nb {
                if c != a && mark(g, c, b) == Some(Circle) && !g.is_adjacent(a, c) {
                    changed |= set(g, c, b, Tail);
                }
            }
        }
    }
    changed
}

/// Edges `a o-> c`, in node order.
fn circle_arrows(g: &MixedGraph) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for a in g.nodes() {
        for &c in g.neighbors(a) {
            if mark(g, c, a) == Some(Circle) && mark(g, a, c) == Some(Arrow) {
                out.push((a, c));
            }
        }
    }
    out
}

fn r8(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for (a, c) in circle_arrows(g) {
        let fires = g.common_adjacents(a, c).into_iter().any(|b| {
            g.is_parent_of(b, c)
                && (g.is_parent_of(a, b)
                    || (mark(g, b, a) == Some(Tail) && mark(g, a, b) == Some(Circle)))
        });
        if fires {
            changed |= set(g, c, a, Tail);
        }
    }
    changed
}

fn r9(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for (a, c) in circle_arrows(g) {
        if mark(g, c, a) == Some(Circle) && r9_path(g, a, c).is_some() {
            changed |= set(g, c, a, Tail);
        }
    }
    changed
}

fn r10(g: &mut MixedGraph) -> bool {
    let mut changed = false;
    for (a, c) in circle_arrows(g) {
        if mark(g, c, a) == Some(Circle) && r10_uncovered_pd_paths(g, a, c) {
            changed |= set(g, c, a, Tail);
        }
    }
    changed
}

/// R0 from sepsets, then the enabled rules to a fixed point.
pub fn apply_final_rules(
    g: &MixedGraph,
    sepsets: &SepsetMap,
    test: Option<&dyn CiTest>,
    cfg: &RuleConfig,
) -> MixedGraph {
    let mut out = g.clone();
    if cfg.rules.contains(Rule::R0) {
        orient_colliders_from_sepsets(&mut out, sepsets);
    }
    let source = match test {
        Some(t) => R4Source::Test {
            sepsets: Some(sepsets),
            test: t,
        },
        None => R4Source::Sepsets(sepsets),
    };
    Orienter::new(*cfg, source).apply(&mut out);
    out
}

/// A MAG in the class of `g`: circles opposite arrowheads and tails become
/// tails, and the `o-o` part is oriented acyclically without new unshielded
/// colliders by repeatedly turning a simplicial node into a sink.
pub fn pag_to_mag(g: &MixedGraph) -> MixedGraph {
    let mut m = g.clone();
    m.clear_underlines();
    for e in g.edges() {
        let (a, b) = (e.a, e.b);
        match (e.end_a, e.end_b) {
            (Circle, Arrow) | (Circle, Tail) => set(&mut m, b, a, Tail),
            (Arrow, Circle) | (Tail, Circle) => set(&mut m, a, b, Tail),
            _ => false,
        };
    }
    let n = g.node_count();
    let mut remaining = FixedBitSet::with_capacity(n);
    for e in g.edges() {
        if e.end_a == Circle && e.end_b == Circle {
            remaining.insert(e.a);
            remaining.insert(e.b);
        }
    }
    let circle_nbrs = |m: &MixedGraph, v: NodeId, rem: &FixedBitSet| -> Vec<NodeId> {
        m.neighbors(v)
            .iter()
            .copied()
            .filter(|&u| rem.contains(u) && circle_edge(m, v, u))
            .collect()
    };
    while remaining.count_ones(..) > 0 {
        let nodes: Vec<NodeId> = remaining.ones().collect();
        let simplicial = nodes.iter().rev().copied().find(|&v| {
            let nb = circle_nbrs(&m, v, &remaining);
            nb.iter()
                .tuple_combinations()
                .all(|(&a, &b)| m.is_adjacent(a, b))
        });
        let sink = simplicial.unwrap_or(*nodes.last().unwrap());
        for u in circle_nbrs(&m, sink, &remaining) {
            set(&mut m, sink, u, Tail);
            set(&mut m, u, sink, Arrow);
        }
        remaining.set(sink, false);
    }
    m
}

fn pag_of_mag(mag: &MixedGraph, reduced: bool) -> MixedGraph {
    let mut p = mag.clone();
    p.clear_underlines();
    p.reorient_all(Circle);
    for c in mag.nodes() {
        let nb = mag.neighbors(c);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !mag.is_adjacent(a, b) && mag.collider(a, c, b) {
                    set(&mut p, a, c, Arrow);
                    set(&mut p, b, c, Arrow);
                }
            }
        }
    }
    let cfg = if reduced {
        RuleConfig {
            rules: RuleSet::without_selection(),
            r4_max_disc_len: Some(1),
            ..RuleConfig::default()
        }
    } else {
        RuleConfig::default()
    };
    Orienter::new(cfg, R4Source::Mag(mag)).apply(&mut p);
    p
}

/// The PAG of the Markov equivalence class of `mag`. DAG inputs use the
/// reduced rule set: no selection rules and discriminating paths of four
/// nodes only.
pub fn mag_to_pag(mag: &MixedGraph) -> Result<MixedGraph> {
    if !is_mag(mag) {
        return Err(Error::IllegalMag(
            "input is not a maximal ancestral graph".into(),
        ));
    }
    Ok(pag_of_mag(mag, mag.is_dag()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    AlmostCycle { a: NodeId, b: NodeId },
    DirectedCycle { cycle: Vec<NodeId> },
    NonMaximal { a: NodeId, b: NodeId },
    RuleNoncompliant { a: NodeId, b: NodeId },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::AlmostCycle { .. } => "ALMOST_CYCLE",
            Violation::DirectedCycle { .. } => "DIRECTED_CYCLE",
            Violation::NonMaximal { .. } => "NON_MAXIMAL",
            Violation::RuleNoncompliant { .. } => "RULE_NONCOMPLIANT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalityReport {
    pub is_legal: bool,
    pub violations: Vec<Violation>,
}

/// Checks that the MAG read off `g` is ancestral and maximal and that its
/// PAG reproduces every mark of `g`.
pub fn legal_pag_check(g: &MixedGraph) -> LegalityReport {
    let mag = pag_to_mag(g);
    let mut violations = Vec::new();
    if let Some(cycle) = directed_cycle(&mag) {
        violations.push(Violation::DirectedCycle { cycle });
    }
    let anc = mag.ancestor_index();
    for e in mag.edges() {
        if e.is_bidirected() && (anc.is_ancestor(e.a, e.b) || anc.is_ancestor(e.b, e.a)) {
            violations.push(Violation::AlmostCycle { a: e.a, b: e.b });
        }
    }
    let none = NodeSet::new();
    for a in mag.nodes() {
        for b in a + 1..mag.node_count() {
            if !mag.is_adjacent(a, b) && has_inducing_path(&mag, a, b, &none) {
                violations.push(Violation::NonMaximal { a, b });
            }
        }
    }
    let back = pag_of_mag(&mag, false);
    for e in g.edges() {
        if back.endpoint(e.a, e.b) != Some(e.end_b) || back.endpoint(e.b, e.a) != Some(e.end_a) {
            violations.push(Violation::RuleNoncompliant { a: e.a, b: e.b });
        }
    }
    LegalityReport {
        is_legal: violations.is_empty(),
        violations,
    }
}

pub fn is_legal_pag(g: &MixedGraph) -> bool {
    legal_pag_check(g).is_legal
}
