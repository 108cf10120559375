//! Gaussian sufficient statistics, the Fisher-Z test, the m-separation
//! oracle and the BIC local score.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use parking_lot::RwLock;
use statrs::function::erf::erfc;

use crate::ci::{CiDecision, CiTest};
use crate::error::{Error, Result};
use crate::graph::{AncestorIndex, MixedGraph, NodeId, NodeSet};
use crate::separation::Separation;

/// Relative pivot below which a factorization is treated as singular.
pub const PIVOT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Data("dataset has no columns".into()));
        }
        if names.len() != values.ncols() {
            return Err(Error::Data(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value".into()));
        }
        Ok(Dataset { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    /// Same data with columns rearranged; `order[k]` is the old index of new column `k`.
    pub fn select_columns(&self, order: &[usize]) -> Dataset {
        let names = order.iter().map(|&j| self.names[j].clone()).collect();
        let values = self.values.select_columns(order);
        Dataset { names, values }
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut flat = Vec::new();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Data(format!(
                    "row {} has {} fields, expected {}",
                    i + 2,
                    rec.len(),
                    names.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Data(format!("row {}: cannot parse {field:?}", i + 2)))?;
                flat.push(v);
            }
            rows += 1;
        }
        Dataset::new(
            names.clone(),
            DMatrix::from_row_slice(rows, names.len(), &flat),
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Dataset::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.names)?;
        for row in self.values.row_iter() {
            wtr.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }
}

/// Sample covariance plus sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    names: Vec<String>,
    cov: DMatrix<f64>,
    n: usize,
}

impl CovarianceModel {
    pub fn new(names: Vec<String>, cov: DMatrix<f64>, n: usize) -> Result<Self> {
        if !cov.is_square() || cov.nrows() != names.len() {
            return Err(Error::Data("covariance shape does not match names".into()));
        }
        for j in 0..cov.nrows() {
            if !(cov[(j, j)] > 0.0) {
                return Err(Error::Data(format!(
                    "column {} has zero variance",
                    names[j]
                )));
            }
        }
        Ok(CovarianceModel { names, cov, n })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.cov.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn sub(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])])
    }

    /// Partial correlation of `x` and `y` given `z`, `None` if the
    /// submatrix is numerically singular.
    pub fn partial_correlation(&self, x: usize, y: usize, z: &NodeSet) -> Option<f64> {
        let mut idx = vec![x, y];
        idx.extend(z.iter().copied());
        let inv = spd_inverse(&self.sub(&idx))?;
        let r = -inv[(0, 1)] / (inv[(0, 0)] * inv[(1, 1)]).sqrt();
        Some(r.clamp(-1.0, 1.0))
    }

    /// Variance of the residual of `node` regressed on `parents`.
    pub fn residual_variance(&self, node: usize, parents: &[usize]) -> Option<f64> {
        let s_yy = self.cov[(node, node)];
        if parents.is_empty() {
            return Some(s_yy);
        }
        let sxx = self.sub(parents);
        let sxy =
            DVector::from_iterator(parents.len(), parents.iter().map(|&p| self.cov[(p, node)]));
        let beta = spd_solve(&sxx, &sxy)?;
        let rv = s_yy - sxy.dot(&beta);
        (rv > PIVOT_EPS * s_yy).then_some(rv)
    }

    /// `residual_variance(node, parents + c)` for each `c` in `extra`, sharing
    /// one factorization of the `parents` block.
    pub fn residual_variances_extended(
        &self,
        node: usize,
        parents: &[usize],
        extra: &[usize],
    ) -> Vec<Option<f64>> {
        let s_yy = self.cov[(node, node)];
        let k = parents.len();
        let l = if k == 0 {
            DMatrix::zeros(0, 0)
        } else {
            match cholesky_checked(&self.sub(parents)) {
                Some(c) => c.l(),
                None => return vec![None; extra.len()],
            }
        };
        let sxy = DVector::from_iterator(k, parents.iter().map(|&p| self.cov[(p, node)]));
        let w = l.solve_lower_triangular(&sxy).expect("nonsingular factor");
        let base = s_yy - w.dot(&w);
        extra
            .iter()
            .map(|&c| {
                let s_cc = self.cov[(c, c)];
                let b = DVector::from_iterator(k, parents.iter().map(|&p| self.cov[(p, c)]));
                let lc = l.solve_lower_triangular(&b).expect("nonsingular factor");
                let d2 = s_cc - lc.dot(&lc);
                if d2 < PIVOT_EPS * s_cc {
                    return None;
                }
                let wc = (self.cov[(c, node)] - lc.dot(&w)) / d2.sqrt();
                let rv = base - wc * wc;
                (rv > PIVOT_EPS * s_yy).then_some(rv)
            })
            .collect()
    }
}

fn cholesky_checked(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        if l[(i, i)] * l[(i, i)] < PIVOT_EPS * m[(i, i)] {
            return None;
        }
    }
    Some(chol)
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    cholesky_checked(m).map(|c| c.inverse())
}

fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    cholesky_checked(m).map(|c| c.solve(b))
}

pub fn covariance(data: &Dataset) -> Result<CovarianceModel> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Data("need at least two rows".into()));
    }
    let means = data.values.row_mean();
    let mut centered = data.values.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    CovarianceModel::new(data.names.clone(), cov, n)
}

pub fn fisher_z(cm: &CovarianceModel, x: usize, y: usize, z: &NodeSet, alpha: f64) -> CiDecision {
    if x == y || z.contains(&x) || z.contains(&y) {
        return CiDecision {
            independent: false,
            p_value: 0.0,
            set: z.clone(),
            degenerate: false,
        };
    }
    let dof = cm.n as f64 - z.len() as f64 - 3.0;
    if dof <= 0.0 {
        return CiDecision::degenerate(z);
    }
    let Some(r) = cm.partial_correlation(x, y, z) else {
        return CiDecision::degenerate(z);
    };
    let stat = dof.sqrt() * r.atanh().abs();
    let p = if stat.is_finite() {
        erfc(stat / std::f64::consts::SQRT_2)
    } else {
        0.0
    };
    CiDecision {
        independent: p > alpha,
        p_value: p,
        set: z.clone(),
        degenerate: false,
    }
}

#[derive(Debug, Clone)]
pub struct FisherZ {
    cm: Arc<CovarianceModel>,
    alpha: f64,
}

impl FisherZ {
    pub fn new(cm: Arc<CovarianceModel>, alpha: f64) -> Self {
        FisherZ { cm, alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.cm
    }
}

impl CiTest for FisherZ {
    fn test(&self, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision {
        fisher_z(&self.cm, x, y, z, self.alpha)
    }
}

/// Answers independence queries over the measured nodes of a latent DAG
/// (or any ancestral graph) by m-separation. Node `i` of the oracle is the
/// `i`-th measured node of the graph.
#[derive(Debug, Clone)]
pub struct MSepOracle {
    graph: MixedGraph,
    anc: AncestorIndex,
    measured: Vec<NodeId>,
}

impl MSepOracle {
    pub fn new(graph: MixedGraph) -> Self {
        let anc = graph.ancestor_index();
        let measured = graph.measured();
        MSepOracle {
            graph,
            anc,
            measured,
        }
    }

    /// Oracle whose node order follows `names`, which must all be measured.
    pub fn with_order<S: AsRef<str>>(graph: MixedGraph, names: &[S]) -> Result<Self> {
        let measured = graph.ids_of(names)?;
        if let Some(&v) = measured.iter().find(|&&v| graph.is_latent(v)) {
            return Err(Error::NodeSetMismatch(format!(
                "{} is latent",
                graph.name(v)
            )));
        }
        let anc = graph.ancestor_index();
        Ok(MSepOracle {
            graph,
            anc,
            measured,
        })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn measured_names(&self) -> Vec<String> {
        self.graph.names_of(&self.measured)
    }

    pub fn separated(&self, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
        if x == y {
            return false;
        }
        let z: NodeSet = z.iter().map(|&v| self.measured[v]).collect();
        Separation::with_index(&self.graph, &self.anc).m_separated(
            self.measured[x],
            self.measured[y],
            &z,
        )
    }
}

impl CiTest for MSepOracle {
    fn test(&self, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision {
        CiDecision::oracle(self.separated(x, y, z), z)
    }
}

pub fn msep_oracle(true_graph: &MixedGraph, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision {
    MSepOracle::new(true_graph.clone()).test(x, y, z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    pub penalty_discount: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            penalty_discount: 2.0,
        }
    }
}

/// `-n ln(sigma^2) - c k ln(n)` with `k = |parents| + 1`; higher is better.
pub fn bic_local(cm: &CovarianceModel, node: usize, parents: &[usize], params: ScoreParams) -> f64 {
    bic_from(
        cm,
        cm.residual_variance(node, parents),
        parents.len(),
        params,
    )
}

fn bic_from(cm: &CovarianceModel, rv: Option<f64>, parents: usize, params: ScoreParams) -> f64 {
    let n = cm.n as f64;
    match rv {
        Some(rv) => -n * rv.ln() - params.penalty_discount * (parents as f64 + 1.0) * n.ln(),
        None => f64::NEG_INFINITY,
    }
}

/// A decomposable local score.
pub trait LocalScore: Sync {
    fn variables(&self) -> usize;

    /// Score of `node` with `parents`, which are given sorted.
    fn local(&self, node: usize, parents: &[usize]) -> f64;

    /// `local(node, parents + c)` for each `c` in `extra`.
    fn local_extended(&self, node: usize, parents: &[usize], extra: &[usize]) -> Vec<f64> {
        extra
            .iter()
            .map(|&c| {
                let mut pa = parents.to_vec();
                pa.insert(pa.partition_point(|&v| v < c), c);
                self.local(node, &pa)
            })
            .collect()
    }

    fn total(&self, parents: &[Vec<usize>]) -> f64 {
        parents
            .iter()
            .enumerate()
            .map(|(v, pa)| self.local(v, pa))
            .sum()
    }
}

/// BIC over a covariance model with an insert-only memo.
pub struct Bic {
    cm: Arc<CovarianceModel>,
    params: ScoreParams,
    cache: RwLock<HashMap<(usize, Vec<usize>), f64>>,
}

impl Bic {
    pub fn new(cm: Arc<CovarianceModel>, params: ScoreParams) -> Self {
        Bic {
            cm,
            params,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.cm
    }

    pub fn cached(&self) -> usize {
        self.cache.read().len()
    }

    /// The same score without the memo.
    pub fn uncached(&self) -> UncachedBic<'_> {
        UncachedBic(self)
    }
}

pub struct UncachedBic<'a>(&'a Bic);

impl LocalScore for UncachedBic<'_> {
    fn variables(&self) -> usize {
        self.0.cm.p()
    }

    fn local(&self, node: usize, parents: &[usize]) -> f64 {
        bic_local(&self.0.cm, node, parents, self.0.params)
    }

    fn local_extended(&self, node: usize, parents: &[usize], extra: &[usize]) -> Vec<f64> {
        let cm = &self.0.cm;
        cm.residual_variances_extended(node, parents, extra)
            .into_iter()
            .map(|rv| bic_from(cm, rv, parents.len() + 1, self.0.params))
            .collect()
    }
}

impl LocalScore for Bic {
    fn variables(&self) -> usize {
        self.cm.p()
    }

    fn local(&self, node: usize, parents: &[usize]) -> f64 {
        let key = (node, parents.to_vec());
        if let Some(&s) = self.cache.read().get(&key) {
            return s;
        }
        let s = bic_local(&self.cm, node, parents, self.params);
        self.cache.write().insert(key, s);
        s
    }
}

/// Total BIC of a DAG whose nodes are the model's columns in order.
pub fn bic_total(cm: &CovarianceModel, dag: &MixedGraph, params: ScoreParams) -> f64 {
    dag.nodes()
        .map(|v| bic_local(cm, v, &dag.parents(v), params))
        .sum()
}
