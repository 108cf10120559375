//! Star-FCI, the backward edge-removal template, FCIT and LV-Lite.

use std::collections::HashSet;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::blocking::{block_with_index, default_block_len, BlockRequest};
use crate::ci::{Budgeted, CiTest};
use crate::cpdag::{
    boss_search, pdag_to_dag, unshielded_colliders, BicOrderScorer, BossConfig, OracleOrderScorer,
    OrderScorer,
};
use crate::discpath::{default_disc_len, list_pre_discriminating_paths, v_candidates};
use crate::error::{Error, Result};
use crate::graph::{Endpoint, MixedGraph, NodeId, NodeSet};
use crate::orientation::{
    is_legal_pag, mag_to_pag, orient_colliders_from_sepsets, Orienter, R4Mode, R4Source, Rule,
    RuleConfig,
};
use crate::par::{self, Execution};
use crate::separation::possible_dsep_from;
use crate::sepset::SepsetMap;
use crate::stats::{CovarianceModel, FisherZ, MSepOracle, ScoreParams};

use Endpoint::{Arrow, Circle};

/// What the searches learn from: a covariance model or an m-separation oracle.
#[derive(Clone)]
pub enum Input {
    Data(Arc<CovarianceModel>),
    Oracle(Arc<MSepOracle>),
}

impl Input {
    pub fn names(&self) -> Vec<String> {
        match self {
            Input::Data(cm) => cm.names().to_vec(),
            Input::Oracle(o) => o.measured_names(),
        }
    }

    pub fn p(&self) -> usize {
        self.names().len()
    }

    pub fn test(&self, alpha: f64) -> Box<dyn CiTest + '_> {
        match self {
            Input::Data(cm) => Box::new(FisherZ::new(cm.clone(), alpha)),
            Input::Oracle(o) => Box::new(o.as_ref()),
        }
    }

    pub fn scorer(&self, params: ScoreParams) -> Box<dyn OrderScorer + '_> {
        match self {
            Input::Data(cm) => Box::new(BicOrderScorer::new(cm.clone(), params)),
            Input::Oracle(o) => Box::new(OracleOrderScorer::new(o)),
        }
    }
}

/// Source of the initial CPDAG.
#[derive(Debug, Clone)]
pub enum CpdagProcedure {
    Boss,
    External(MixedGraph),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha: f64,
    pub penalty: f64,
    /// Largest conditioning set used in any test; `None` is unbounded.
    pub depth: Option<usize>,
    /// Body length cap for (pre-)discriminating paths; `None` picks a size-based default.
    pub max_disc_len: Option<usize>,
    /// Branch length cap for recursive blocking; `None` picks a size-based default.
    pub max_block_len: Option<usize>,
    pub execution: Execution,
    pub seed: u64,
    pub legacy_pdsep: bool,
    /// Run R4 while edges are being removed (FCIT).
    pub r4_in_removal: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 0.01,
            penalty: 2.0,
            depth: None,
            max_disc_len: None,
            max_block_len: None,
            execution: Execution::default(),
            seed: 0,
            legacy_pdsep: false,
            r4_in_removal: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Data(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Data(format!(
                "penalty must be positive, got {}",
                self.penalty
            )));
        }
        Ok(())
    }

    pub fn score_params(&self) -> ScoreParams {
        ScoreParams {
            penalty_discount: self.penalty,
        }
    }

    fn disc_len(&self, p: usize) -> Option<usize> {
        self.max_disc_len.or(default_disc_len(p))
    }

    fn block_len(&self, p: usize) -> Option<usize> {
        self.max_block_len.or(default_block_len(p))
    }

    fn rule_config(&self, p: usize) -> RuleConfig {
        RuleConfig {
            r4_max_disc_len: self.disc_len(p),
            r4_depth: self.depth,
            max_block_len: self.block_len(p),
            ..RuleConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub x: NodeId,
    pub y: NodeId,
    pub set: NodeSet,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub graph: MixedGraph,
    pub sepsets: SepsetMap,
    pub removals: Vec<Removal>,
    pub cpdag: Option<MixedGraph>,
    pub tests: u64,
}

/// Proposes separating sets for an adjacent pair. Each set judged
/// independent is offered to `accept`; the search stops at the first
/// accepted one.
pub trait SeparatorGenerator: Sync {
    fn search(
        &self,
        g: &MixedGraph,
        x: NodeId,
        y: NodeId,
        test: &dyn CiTest,
        accept: &mut dyn FnMut(&NodeSet) -> bool,
    ) -> Option<NodeSet>;
}

/// No candidates at all.
pub struct NoSeparators;

impl SeparatorGenerator for NoSeparators {
    fn search(
        &self,
        _: &MixedGraph,
        _: NodeId,
        _: NodeId,
        _: &dyn CiTest,
        _: &mut dyn FnMut(&NodeSet) -> bool,
    ) -> Option<NodeSet> {
        None
    }
}

fn offer(
    test: &dyn CiTest,
    x: NodeId,
    y: NodeId,
    s: NodeSet,
    seen: &mut HashSet<NodeSet>,
    accept: &mut dyn FnMut(&NodeSet) -> bool,
) -> Option<NodeSet> {
    if !seen.insert(s.clone()) {
        return None;
    }
    (test.independent(x, y, &s) && accept(&s)).then_some(s)
}

/// Subsets of either adjacency set, ascending size, lexicographic.
pub struct AdjacencySets {
    pub depth: Option<usize>,
}

impl SeparatorGenerator for AdjacencySets {
    fn search(
        &self,
        g: &MixedGraph,
        x: NodeId,
        y: NodeId,
        test: &dyn CiTest,
        accept: &mut dyn FnMut(&NodeSet) -> bool,
    ) -> Option<NodeSet> {
        let ax: Vec<NodeId> = g.neighbors(x).iter().copied().filter(|&v| v != y).collect();
        let ay: Vec<NodeId> = g.neighbors(y).iter().copied().filter(|&v| v != x).collect();
        let cap = self.depth.unwrap_or(usize::MAX).min(ax.len().max(ay.len()));
        let mut seen = HashSet::new();
        for size in 0..=cap {
            for adj in [&ax, &ay] {
                for s in adj.iter().copied().combinations(size) {
                    if let Some(s) = offer(test, x, y, s.into_iter().collect(), &mut seen, accept) {
                        return Some(s);
                    }
                }
            }
        }
        None
    }
}

/// Subsets of the textbook Possible-D-SEP of either endpoint.
pub struct PossibleDsepSets {
    pub depth: Option<usize>,
}

impl SeparatorGenerator for PossibleDsepSets {
    fn search(
        &self,
        g: &MixedGraph,
        x: NodeId,
        y: NodeId,
        test: &dyn CiTest,
        accept: &mut dyn FnMut(&NodeSet) -> bool,
    ) -> Option<NodeSet> {
        let mut seen = HashSet::new();
        let px: Vec<NodeId> = possible_dsep_from(g, x)
            .into_iter()
            .filter(|&v| v != y)
            .collect();
        let py: Vec<NodeId> = possible_dsep_from(g, y)
            .into_iter()
            .filter(|&v| v != x)
            .collect();
        let cap = self.depth.unwrap_or(usize::MAX).min(px.len().max(py.len()));
        for size in 0..=cap {
            for pds in [&px, &py] {
                for s in pds.iter().copied().combinations(size) {
                    if let Some(s) = offer(test, x, y, s.into_iter().collect(), &mut seen, accept) {
                        return Some(s);
                    }
                }
            }
        }
        None
    }
}

/// Recursive blocking under every forbiddance set drawn from the
/// pre-discriminating paths, trimmed by the common adjacents.
pub struct TargetedSets {
    pub depth: Option<usize>,
    pub max_disc_len: Option<usize>,
    pub max_block_len: Option<usize>,
    /// Draw forbiddance sets from pre-discriminating paths; off means `F = {}` only.
    pub use_pdps: bool,
}

impl SeparatorGenerator for TargetedSets {
    fn search(
        &self,
        g: &MixedGraph,
        x: NodeId,
        y: NodeId,
        test: &dyn CiTest,
        accept: &mut dyn FnMut(&NodeSet) -> bool,
    ) -> Option<NodeSet> {
        let vcand: Vec<NodeId> = if self.use_pdps {
            v_candidates(&list_pre_discriminating_paths(g, x, y, self.max_disc_len))
                .into_iter()
                .collect()
        } else {
            Vec::new()
        };
        let common = g.common_adjacents(x, y);
        let anc = g.ancestor_index();
        let mut seen = HashSet::new();
        let mut blocked_by: HashSet<NodeSet> = HashSet::new();
        let f_cap = self.depth.unwrap_or(usize::MAX).min(vcand.len());
        for fsize in 0..=f_cap {
            for f in vcand.iter().copied().combinations(fsize) {
                let req = BlockRequest::new(x, y)
                    .not_followed(f.into_iter().collect())
                    .max_path_len(self.max_block_len);
                let Some(b) = block_with_index(g, &anc, &req).set else {
                    continue;
                };
                if !blocked_by.insert(b.clone()) {
                    continue;
                }
                let droppable: Vec<NodeId> =
                    common.iter().copied().filter(|c| b.contains(c)).collect();
                for dsize in 0..=droppable.len() {
                    for d in droppable.iter().copied().combinations(dsize) {
                        if d.iter()
                            .any(|&c| g.is_parent_of(x, c) && g.is_parent_of(y, c))
                        {
                            continue;
                        }
                        let s: NodeSet = b.iter().copied().filter(|v| !d.contains(v)).collect();
                        if self.depth.is_some_and(|cap| s.len() > cap) {
                            continue;
                        }
                        if let Some(s) = offer(test, x, y, s, &mut seen, accept) {
                            return Some(s);
                        }
                    }
                }
            }
        }
        None
    }
}

/// Circles everywhere, then the given colliders where still unshielded.
fn reset_with_colliders(g: &MixedGraph, colliders: &[(NodeId, NodeId, NodeId)]) -> MixedGraph {
    let mut h = g.clone();
    h.clear_underlines();
    h.reorient_all(Circle);
    for &(a, c, b) in colliders {
        if h.is_adjacent(a, c) && h.is_adjacent(b, c) && !h.is_adjacent(a, b) {
            h.set_endpoint(a, c, Arrow).expect("edge");
            h.set_endpoint(b, c, Arrow).expect("edge");
        }
    }
    h
}

/// Shared state of the backward edge-removal loop.
struct Backward<'a> {
    test: &'a dyn CiTest,
    generator: &'a dyn SeparatorGenerator,
    rules: RuleConfig,
    r4: bool,
    known: Vec<(NodeId, NodeId, NodeId)>,
    sepsets: SepsetMap,
    removals: Vec<Removal>,
    execution: Execution,
}

impl Backward<'_> {
    fn reorient(&self, g: &MixedGraph, sepsets: &SepsetMap) -> MixedGraph {
        let mut h = reset_with_colliders(g, &self.known);
        orient_colliders_from_sepsets(&mut h, sepsets);
        let (rules, source) = if self.r4 {
            (
                self.rules,
                R4Source::Test {
                    sepsets: Some(sepsets),
                    test: self.test,
                },
            )
        } else {
            (
                RuleConfig {
                    rules: self.rules.rules.without(Rule::R4),
                    ..self.rules
                },
                R4Source::Off,
            )
        };
        Orienter::new(rules, source).apply(&mut h);
        h
    }

    /// The graph after removing `x *-* y` with separating set `s`, if legal.
    fn attempt(&self, g: &MixedGraph, x: NodeId, y: NodeId, s: &NodeSet) -> Option<MixedGraph> {
        let mut h = g.clone();
        h.remove_edge(x, y)?;
        let mut sepsets = self.sepsets.clone();
        sepsets.insert(x, y, s.clone());
        let h = self.reorient(&h, &sepsets);
        is_legal_pag(&h).then_some(h)
    }

    fn commit(&mut self, x: NodeId, y: NodeId, s: NodeSet) {
        self.sepsets.insert(x, y, s.clone());
        self.removals.push(Removal { x, y, set: s });
    }

    /// First legal removal for edge `(x, y)` of `g`.
    fn candidate(&self, g: &MixedGraph, x: NodeId, y: NodeId) -> Option<(NodeSet, MixedGraph)> {
        let mut next = None;
        let found =
            self.generator.search(
                g,
                x,
                y,
                self.test,
                &mut |s| match self.attempt(g, x, y, s) {
                    Some(h) => {
                        next = Some(h);
                        true
                    }
                    None => false,
                },
            );
        found.zip(next)
    }

    fn run(&mut self, mut g: MixedGraph) -> MixedGraph {
        loop {
            let edges: Vec<(NodeId, NodeId)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
            if self.execution.is_parallel() {
                let found = par::map(self.execution, &edges, |&(x, y)| {
                    self.candidate(&g, x, y).map(|(s, _)| (x, y, s))
                });
                let mut any = false;
                for (x, y, s) in found.into_iter().flatten() {
                    if !self.test.independent(x, y, &s) {
                        continue;
                    }
                    if let Some(h) = self.attempt(&g, x, y, &s) {
                        self.commit(x, y, s);
                        g = h;
                        any = true;
                    }
                }
                if !any {
                    return g;
                }
            } else {
                let step = edges
                    .iter()
                    .find_map(|&(x, y)| self.candidate(&g, x, y).map(|(s, h)| (x, y, s, h)));
                match step {
                    Some((x, y, s, h)) => {
                        self.commit(x, y, s);
                        g = h;
                    }
                    None => return g,
                }
            }
        }
    }
}

/// The backward template: repeatedly remove the first edge for which the
/// generator certifies a legal removal, reorienting after each deletion.
/// Colliders of the input graph are kept as known colliders.
pub fn fci_backward(
    g: &MixedGraph,
    test: &dyn CiTest,
    generator: &dyn SeparatorGenerator,
    cfg: &SearchConfig,
) -> SearchResult {
    let test = Budgeted::new(test, cfg.depth);
    let mut engine = Backward {
        test: &test,
        generator,
        rules: cfg.rule_config(g.node_count()),
        r4: cfg.r4_in_removal,
        known: unshielded_colliders(g),
        sepsets: SepsetMap::new(),
        removals: Vec::new(),
        execution: cfg.execution,
    };
    let graph = engine.run(g.clone());
    SearchResult {
        graph,
        sepsets: engine.sepsets,
        removals: engine.removals,
        cpdag: None,
        tests: test.calls(),
    }
}

fn boss_config(cfg: &SearchConfig) -> BossConfig {
    BossConfig {
        seed: cfg.seed,
        restarts: 1,
        bes: true,
        execution: cfg.execution,
    }
}

/// The initial CPDAG, and the DAG behind it when BOSS produced it.
pub fn initial_cpdag(
    input: &Input,
    procedure: &CpdagProcedure,
    cfg: &SearchConfig,
) -> Result<(MixedGraph, Option<MixedGraph>)> {
    let names = input.names();
    match procedure {
        CpdagProcedure::Boss => {
            let scorer = input.scorer(cfg.score_params());
            let res = boss_search(scorer.as_ref(), &names, &boss_config(cfg));
            Ok((res.cpdag, Some(res.dag)))
        }
        CpdagProcedure::External(g) => Ok((g.reorder_like(&names)?, None)),
    }
}

/// FCIT from a BOSS CPDAG.
pub fn fcit(input: &Input, cfg: &SearchConfig) -> Result<SearchResult> {
    fcit_with(input, &CpdagProcedure::Boss, cfg)
}

/// Starts from the PAG of a DAG in the CPDAG's class when the reoriented
/// CPDAG is not a legal PAG, so every state visited is legal.
pub fn fcit_with(
    input: &Input,
    procedure: &CpdagProcedure,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    let (cpdag, _) = initial_cpdag(input, procedure, cfg)?;
    let p = input.p();
    let test = input.test(cfg.alpha);
    let budget = Budgeted::new(test.as_ref(), cfg.depth);
    let generator = TargetedSets {
        depth: cfg.depth,
        max_disc_len: cfg.disc_len(p),
        max_block_len: cfg.block_len(p),
        use_pdps: cfg.r4_in_removal,
    };
    let mut engine = Backward {
        test: &budget,
        generator: &generator,
        rules: cfg.rule_config(p),
        r4: cfg.r4_in_removal,
        known: unshielded_colliders(&cpdag),
        sepsets: SepsetMap::new(),
        removals: Vec::new(),
        execution: cfg.execution,
    };
    let mut start = engine.reorient(&cpdag, &SepsetMap::new());
    if !is_legal_pag(&start) {
        if let Some(pag) = pdag_to_dag(&cpdag).ok().and_then(|d| mag_to_pag(&d).ok()) {
            start = pag;
        }
    }
    let graph = engine.run(start);
    Ok(SearchResult {
        graph,
        sepsets: engine.sepsets,
        removals: engine.removals,
        cpdag: Some(cpdag),
        tests: budget.calls(),
    })
}

/// One pass of removals against a frozen adjacency snapshot; order
/// independent, so both execution modes agree.
fn stable_removals(
    g: &mut MixedGraph,
    generator: &dyn SeparatorGenerator,
    test: &dyn CiTest,
    exec: Execution,
    sepsets: &mut SepsetMap,
) {
    let edges: Vec<(NodeId, NodeId)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
    let snapshot = g.clone();
    let found = par::map(exec, &edges, |&(x, y)| {
        generator
            .search(&snapshot, x, y, test, &mut |_| true)
            .map(|s| (x, y, s))
    });
    for (x, y, s) in found.into_iter().flatten() {
        g.remove_edge(x, y);
        sepsets.insert(x, y, s);
    }
}

/// Circles, colliders the CPDAG had on triples now unshielded, then R0.
fn star_colliders(g: &MixedGraph, cpdag: &MixedGraph, sepsets: &SepsetMap) -> MixedGraph {
    let mut h = g.clone();
    h.reorient_all(Circle);
    for c in g.nodes() {
        let nb = g.neighbors(c);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !g.is_adjacent(a, b) && cpdag.is_parent_of(a, c) && cpdag.is_parent_of(b, c) {
                    h.set_endpoint(a, c, Arrow).expect("edge");
                    h.set_endpoint(b, c, Arrow).expect("edge");
                }
            }
        }
    }
    orient_colliders_from_sepsets(&mut h, sepsets);
    h
}

/// Star-FCI: removals over adjacency subsets of the initial CPDAG, collider
/// transfer plus R0, then the final rules.
pub fn star_fci(
    input: &Input,
    procedure: &CpdagProcedure,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    let (cpdag, _) = initial_cpdag(input, procedure, cfg)?;
    let p = input.p();
    let test = input.test(cfg.alpha);
    let budget = Budgeted::new(test.as_ref(), cfg.depth);
    let mut sepsets = SepsetMap::new();
    let mut g = cpdag.clone();
    stable_removals(
        &mut g,
        &AdjacencySets { depth: cfg.depth },
        &budget,
        cfg.execution,
        &mut sepsets,
    );
    let mut h = star_colliders(&g, &cpdag, &sepsets);
    if cfg.legacy_pdsep {
        stable_removals(
            &mut h,
            &PossibleDsepSets { depth: cfg.depth },
            &budget,
            cfg.execution,
            &mut sepsets,
        );
        h = star_colliders(&h, &cpdag, &sepsets);
    }
    let rules = RuleConfig {
        r4_mode: R4Mode::AdjacencySubsets,
        ..cfg.rule_config(p)
    };
    Orienter::new(
        rules,
        R4Source::Test {
            sepsets: Some(&sepsets),
            test: &budget,
        },
    )
    .apply(&mut h);
    let removals = sepsets
        .iter()
        .map(|(x, y, s)| Removal {
            x,
            y,
            set: s.clone(),
        })
        .collect();
    Ok(SearchResult {
        graph: h,
        sepsets,
        removals,
        cpdag: Some(cpdag),
        tests: budget.calls(),
    })
}

/// The PAG of the BOSS DAG.
pub fn lv_lite(input: &Input, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let scorer = input.scorer(cfg.score_params());
    let res = boss_search(scorer.as_ref(), &input.names(), &boss_config(cfg));
    let graph = mag_to_pag(&res.dag)?;
    Ok(SearchResult {
        graph,
        sepsets: SepsetMap::new(),
        removals: Vec::new(),
        cpdag: Some(res.cpdag),
        tests: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Fcit,
    LvLite,
    StarFci,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Fcit, Algorithm::LvLite, Algorithm::StarFci];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fcit => "fcit",
            Algorithm::LvLite => "lv-lite",
            Algorithm::StarFci => "star-fci",
        }
    }

    pub fn run(
        self,
        input: &Input,
        procedure: &CpdagProcedure,
        cfg: &SearchConfig,
    ) -> Result<SearchResult> {
        match self {
            Algorithm::Fcit => fcit_with(input, procedure, cfg),
            Algorithm::LvLite => lv_lite(input, cfg),
            Algorithm::StarFci => star_fci(input, procedure, cfg),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown algorithm {s}")))
    }
}
