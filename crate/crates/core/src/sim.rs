//! Random latent DAGs, linear Gaussian data, and evaluation metrics.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Endpoint, MixedGraph, NodeId};
use crate::orientation::{legal_pag_check, mag_to_pag};
use crate::separation::latent_project;
use crate::stats::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n_measured: usize,
    pub n_latent: usize,
    pub avg_degree: f64,
    pub n_samples: usize,
    pub coef_low: f64,
    pub coef_high: f64,
    pub var_low: f64,
    pub var_high: f64,
    pub seed: u64,
    pub replicates: usize,
}

impl SimSpec {
    pub fn new(n_measured: usize, n_latent: usize, avg_degree: f64, n_samples: usize) -> Self {
        SimSpec {
            n_measured,
            n_latent,
            avg_degree,
            n_samples,
            coef_low: -1.0,
            coef_high: 1.0,
            var_low: 1.0,
            var_high: 3.0,
            seed: 0,
            replicates: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn nodes(&self) -> usize {
        self.n_measured + self.n_latent
    }

    pub fn edge_target(&self) -> usize {
        (self.avg_degree * self.nodes() as f64 / 2.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes();
        if self.n_measured == 0 {
            return Err(Error::Data("need at least one measured variable".into()));
        }
        if !(self.avg_degree >= 0.0) || self.edge_target() > n * n.saturating_sub(1) / 2 {
            return Err(Error::InfeasibleDensity {
                edges: self.edge_target(),
                nodes: n,
            });
        }
        if !(self.coef_low <= self.coef_high)
            || !(0.0 < self.var_low && self.var_low <= self.var_high)
        {
            return Err(Error::Data("bad coefficient or variance interval".into()));
        }
        Ok(())
    }
}

/// Independent stream `index` of the generator seeded with `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(index.wrapping_add(1));
    r.next_u64()
}

/// Samples `round(avg_degree * nodes / 2)` distinct forward pairs of a
/// random order and marks `n_latent` random nodes latent.
pub fn random_forward_dag(spec: &SimSpec) -> Result<MixedGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let latent: Vec<usize> = index::sample(&mut rng, n, spec.n_latent).into_vec();
    let mut g = MixedGraph::empty();
    let (mut xi, mut li) = (0, 0);
    for v in 0..n {
        if latent.contains(&v) {
            li += 1;
            g.add_node(&format!("L{li}"), true);
        } else {
            xi += 1;
            g.add_node(&format!("X{xi}"), false);
        }
    }
    let total = n * n.saturating_sub(1) / 2;
    let mut picks = index::sample(&mut rng, total, spec.edge_target()).into_vec();
    picks.sort_unstable();
    for k in picks {
        let (i, j) = pair_of(k, n);
        g.add_directed(order[i], order[j])?;
    }
    Ok(g)
}

/// The `k`-th pair `(i, j)`, `i < j`, in row-major order over `n` items.
fn pair_of(mut k: usize, n: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i - 1;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

/// Edge coefficients and noise variances of a linear Gaussian model.
#[derive(Debug, Clone, PartialEq)]
pub struct Sem {
    pub coefs: BTreeMap<(NodeId, NodeId), f64>,
    pub noise_var: Vec<f64>,
}

impl Sem {
    pub fn random<R: Rng>(dag: &MixedGraph, spec: &SimSpec, rng: &mut R) -> Result<Self> {
        if !dag.is_dag() {
            return Err(Error::NotADag("cannot simulate from a cyclic graph".into()));
        }
        let coef = Uniform::new_inclusive(spec.coef_low, spec.coef_high)
            .map_err(|e| Error::Data(e.to_string()))?;
        let var = Uniform::new_inclusive(spec.var_low, spec.var_high)
            .map_err(|e| Error::Data(e.to_string()))?;
        let mut coefs = BTreeMap::new();
        for e in dag.edges() {
            let (a, b) = if dag.is_parent_of(e.a, e.b) {
                (e.a, e.b)
            } else {
                (e.b, e.a)
            };
            coefs.insert((a, b), coef.sample(rng));
        }
        let noise_var = dag.nodes().map(|_| var.sample(rng)).collect();
        Ok(Sem { coefs, noise_var })
    }

    /// `n` rows over every node of `dag`, in node order.
    pub fn sample_all<R: Rng>(&self, dag: &MixedGraph, n: usize, rng: &mut R) -> DMatrix<f64> {
        let order = dag.topological_order().expect("acyclic");
        let mut x = DMatrix::<f64>::zeros(n, dag.node_count());
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        for &v in &order {
            let sd = self.noise_var[v].sqrt();
            let parents = dag.parents(v);
            for r in 0..n {
                let mut val = sd * std.sample(rng);
                for &p in &parents {
                    val += self.coefs[&(p, v)] * x[(r, p)];
                }
                x[(r, v)] = val;
            }
        }
        x
    }
}

/// Measured columns of a linear Gaussian simulation, in shuffled order.
pub fn simulate_sem(dag: &MixedGraph, spec: &SimSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 << 32));
    let sem = Sem::random(dag, spec, &mut rng)?;
    let all = sem.sample_all(dag, spec.n_samples, &mut rng);
    let mut cols = dag.measured();
    cols.shuffle(&mut rng);
    Dataset::new(dag.names_of(&cols), all.select_columns(&cols))
}

pub fn true_pag(dag: &MixedGraph) -> Result<MixedGraph> {
    mag_to_pag(&latent_project(dag)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: Option<f64>,
    pub ar: Option<f64>,
    pub ahp: Option<f64>,
    pub ahr: Option<f64>,
    pub ahpc: Option<f64>,
    pub ahrc: Option<f64>,
    pub tp: Option<f64>,
    pub tr: Option<f64>,
    pub arrow_path_prec: Option<f64>,
    pub tail_path_prec: Option<f64>,
    pub bidir_latent_prec: Option<f64>,
    pub legal_pag: bool,
    pub elapsed_ms: f64,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 13] = [
        "ap",
        "ar",
        "ahp",
        "ahr",
        "ahpc",
        "ahrc",
        "tp",
        "tr",
        "arrow_path_prec",
        "tail_path_prec",
        "bidir_latent_prec",
        "legal_pag",
        "elapsed_ms",
    ];

    /// Table cells; undefined values print as `*`.
    pub fn cells(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map_or("*".to_string(), |x| format!("{x:.4}"));
        vec![
            f(self.ap),
            f(self.ar),
            f(self.ahp),
            f(self.ahr),
            f(self.ahpc),
            f(self.ahrc),
            f(self.tp),
            f(self.tr),
            f(self.arrow_path_prec),
            f(self.tail_path_prec),
            f(self.bidir_latent_prec),
            self.legal_pag.to_string(),
            format!("{:.3}", self.elapsed_ms),
        ]
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision/recall tallies for endpoint marks equal to `mark`.
fn mark_tallies(
    est: &MixedGraph,
    truth: &MixedGraph,
    mark: Endpoint,
    common_only: bool,
) -> (usize, usize, usize) {
    let (mut hit, mut est_n, mut true_n) = (0, 0, 0);
    let both = |a: NodeId, b: NodeId| est.is_adjacent(a, b) && truth.is_adjacent(a, b);
    for a in est.nodes() {
        for b in est.nodes() {
            if a == b || (common_only && !both(a, b)) {
                continue;
            }
            let e = est.endpoint(a, b) == Some(mark);
            let t = truth.endpoint(a, b) == Some(mark);
            est_n += e as usize;
            true_n += t as usize;
            hit += (e && t) as usize;
        }
    }
    (hit, est_n, true_n)
}

/// Path-based precisions of `est` against the generating DAG.
pub fn path_metrics(
    est: &MixedGraph,
    true_dag: &MixedGraph,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let ids = true_dag
        .ids_of(est.names())
        .map_err(|e| Error::NodeSetMismatch(e.to_string()))?;
    let anc = true_dag.ancestor_index();
    let (mut ap, mut apn, mut tp, mut tpn, mut bp, mut bpn) = (0, 0, 0, 0, 0, 0);
    for e in est.edges() {
        let (a, b) = (ids[e.a], ids[e.b]);
        for (x, y, mx, my) in [(a, b, e.end_a, e.end_b), (b, a, e.end_b, e.end_a)] {
            if my == Endpoint::Arrow {
                apn += 1;
                ap += !anc.is_ancestor(y, x) as usize;
                if mx == Endpoint::Tail {
                    tpn += 1;
                    tp += anc.is_ancestor(x, y) as usize;
                }
            }
        }
        if e.is_bidirected() {
            bpn += 1;
            let confounded = true_dag
                .latents()
                .into_iter()
                .any(|l| true_dag.is_parent_of(l, a) && true_dag.is_parent_of(l, b));
            bp += confounded as usize;
        }
    }
    Ok((ratio(ap, apn), ratio(tp, tpn), ratio(bp, bpn)))
}

pub fn compare_graphs(
    est: &MixedGraph,
    true_pag: &MixedGraph,
    true_dag: &MixedGraph,
) -> Result<MetricsReport> {
    let mut want: Vec<&String> = true_pag.names().iter().collect();
    let mut have: Vec<&String> = est.names().iter().collect();
    want.sort();
    have.sort();
    if want != have {
        return Err(Error::NodeSetMismatch(
            "estimate and truth cover different variables".into(),
        ));
    }
    let est_al = est.reorder_like(true_pag.names())?;
    let est_edges = est_al.edge_count();
    let true_edges = true_pag.edge_count();
    let common = true_pag
        .edges()
        .iter()
        .filter(|e| est_al.is_adjacent(e.a, e.b))
        .count();
    let (ah, ah_e, ah_t) = mark_tallies(&est_al, true_pag, Endpoint::Arrow, false);
    let (ahc, ahc_e, ahc_t) = mark_tallies(&est_al, true_pag, Endpoint::Arrow, true);
    let (t, t_e, t_t) = mark_tallies(&est_al, true_pag, Endpoint::Tail, false);
    let (arrow_path_prec, tail_path_prec, bidir_latent_prec) = path_metrics(est, true_dag)?;
    Ok(MetricsReport {
        ap: ratio(common, est_edges),
        ar: ratio(common, true_edges),
        ahp: ratio(ah, ah_e),
        ahr: ratio(ah, ah_t),
        ahpc: ratio(ahc, ahc_e),
        ahrc: ratio(ahc, ahc_t),
        tp: ratio(t, t_e),
        tr: ratio(t, t_t),
        arrow_path_prec,
        tail_path_prec,
        bidir_latent_prec,
        legal_pag: legal_pag_check(est).is_legal,
        elapsed_ms: 0.0,
    })
}

/// Metrics that need only the generating DAG; the PAG-relative fields stay undefined.
pub fn compare_to_dag(est: &MixedGraph, true_dag: &MixedGraph) -> Result<MetricsReport> {
    let (arrow_path_prec, tail_path_prec, bidir_latent_prec) = path_metrics(est, true_dag)?;
    Ok(MetricsReport {
        arrow_path_prec,
        tail_path_prec,
        bidir_latent_prec,
        legal_pag: legal_pag_check(est).is_legal,
        ..MetricsReport::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_covers_all_pairs() {
        let n = 6;
        let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|k| pair_of(k, n)).collect();
        let mut expect = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                expect.push((i, j));
            }
        }
        assert_eq!(pairs, expect);
    }

    #[test]
    fn edge_count_matches_target() {
        let spec = SimSpec::new(20, 4, 4.0, 10).with_seed(3);
        let g = random_forward_dag(&spec).unwrap();
        assert_eq!(g.edge_count(), 48);
        assert_eq!(g.latents().len(), 4);
        assert!(g.is_dag());
        assert_eq!(
            random_forward_dag(&SimSpec::new(5, 0, 0.0, 10))
                .unwrap()
                .edge_count(),
            0
        );
    }

    #[test]
    fn infeasible_density_is_an_error() {
        assert!(matches!(
            random_forward_dag(&SimSpec::new(4, 0, 5.0, 10)),
            Err(Error::InfeasibleDensity { .. })
        ));
    }
}
