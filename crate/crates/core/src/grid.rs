//! Benchmark grids: simulate each condition, run the algorithms, score them.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::MixedGraph;
use crate::par::{self, Execution};
use crate::search::{Algorithm, CpdagProcedure, Input, SearchConfig};
use crate::sim::{
    compare_graphs, compare_to_dag, derive_seed, random_forward_dag, simulate_sem, true_pag,
    MetricsReport, SimSpec,
};
use crate::stats::covariance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub spec: SimSpec,
    pub algorithms: Vec<Algorithm>,
    pub config: SearchConfig,
    /// Score against the true PAG; off leaves only the DAG-relative metrics.
    pub against_pag: bool,
}

impl Condition {
    pub fn new(spec: SimSpec, algorithms: Vec<Algorithm>, config: SearchConfig) -> Self {
        Condition {
            spec,
            algorithms,
            config,
            against_pag: true,
        }
    }
}

/// Every combination of the listed degrees, latent counts and sample sizes.
pub fn paper_grid(
    measured: usize,
    degrees: &[f64],
    latents: &[usize],
    samples: &[usize],
    replicates: usize,
    algorithms: &[Algorithm],
    config: SearchConfig,
) -> Vec<Condition> {
    let mut out = Vec::new();
    for &d in degrees {
        for &l in latents {
            for &n in samples {
                let mut spec = SimSpec::new(measured, l, d, n);
                spec.replicates = replicates;
                out.push(Condition::new(spec, algorithms.to_vec(), config));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: usize,
    pub replicate: usize,
    pub seed: u64,
    pub n_measured: usize,
    pub n_latent: usize,
    pub avg_degree: f64,
    pub n_samples: usize,
    pub components: usize,
    pub algorithm: Algorithm,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Connected components of the full generating graph, latents included.
pub fn component_count(g: &MixedGraph) -> usize {
    let mut seen = vec![false; g.node_count()];
    let mut count = 0;
    for s in g.nodes() {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

struct Replicate {
    dag: MixedGraph,
    pag: Option<MixedGraph>,
    input: Input,
}

fn simulate(cond: &Condition, seed: u64) -> Result<Replicate> {
    let spec = cond.spec.with_seed(seed);
    let dag = random_forward_dag(&spec)?;
    let data = simulate_sem(&dag, &spec)?;
    let pag = if cond.against_pag {
        Some(true_pag(&dag)?)
    } else {
        None
    };
    Ok(Replicate {
        dag,
        pag,
        input: Input::Data(std::sync::Arc::new(covariance(&data)?)),
    })
}

fn score(rep: &Replicate, alg: Algorithm, cfg: &SearchConfig) -> Result<MetricsReport> {
    let start = Instant::now();
    let res = alg.run(&rep.input, &CpdagProcedure::Boss, cfg)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut m = match &rep.pag {
        Some(pag) => compare_graphs(&res.graph, pag, &rep.dag)?,
        None => compare_to_dag(&res.graph, &rep.dag)?,
    };
    m.elapsed_ms = elapsed_ms;
    Ok(m)
}

/// Runs every replicate of every condition. Replicate `r` of condition `c`
/// uses seed `derive_seed(derive_seed(master, c), r)`. Failures are recorded
/// per run and the grid carries on.
pub fn run_grid(conditions: &[Condition], master_seed: u64, exec: Execution) -> Vec<RunRecord> {
    let jobs: Vec<(usize, usize)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(c, cond)| (0..cond.spec.replicates.max(1)).map(move |r| (c, r)))
        .collect();
    par::map(exec, &jobs, |&(c, r)| {
        let cond = &conditions[c];
        let seed = derive_seed(derive_seed(master_seed, c as u64), r as u64);
        let record =
            |algorithm, components, out: std::result::Result<MetricsReport, String>| RunRecord {
                condition: c,
                replicate: r,
                seed,
                n_measured: cond.spec.n_measured,
                n_latent: cond.spec.n_latent,
                avg_degree: cond.spec.avg_degree,
                n_samples: cond.spec.n_samples,
                components,
                algorithm,
                error: out.as_ref().err().cloned(),
                metrics: out.ok(),
            };
        match simulate(cond, seed) {
            Ok(rep) => {
                let comps = component_count(&rep.dag);
                cond.algorithms
                    .iter()
                    .map(|&a| {
                        record(
                            a,
                            comps,
                            score(&rep, a, &cond.config).map_err(|e| e.to_string()),
                        )
                    })
                    .collect::<Vec<_>>()
            }
            Err(e) => cond
                .algorithms
                .iter()
                .map(|&a| record(a, 0, Err(e.to_string())))
                .collect(),
        }
    })
    .into_iter()
    .flatten()
    .collect()
}

/// One CSV row per run; undefined metrics print as `*`.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = vec![
        "condition",
        "replicate",
        "seed",
        "n_measured",
        "n_latent",
        "avg_degree",
        "n_samples",
        "components",
        "algorithm",
    ];
    header.extend(MetricsReport::FIELDS);
    header.push("error");
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.condition.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.n_measured.to_string(),
            r.n_latent.to_string(),
            r.avg_degree.to_string(),
            r.n_samples.to_string(),
            r.components.to_string(),
            r.algorithm.name().to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend(m.cells()),
            None => row.extend(MetricsReport::FIELDS.iter().map(|_| String::new())),
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of the defined values, `None` when there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
