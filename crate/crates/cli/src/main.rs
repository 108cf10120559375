use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, Parser, Subcommand};
use fcit_core::graph::MixedGraph;
use fcit_core::grid::{paper_grid, run_grid, write_csv};
use fcit_core::orientation::{legal_pag_check, Violation};
use fcit_core::par::{self, Execution};
use fcit_core::search::{Algorithm, CpdagProcedure, Input, SearchConfig};
use fcit_core::sim::{
    compare_graphs, compare_to_dag, random_forward_dag, simulate_sem, true_pag, SimSpec,
};
use fcit_core::stats::{covariance, Dataset, MSepOracle};
use fcit_core::text::{read_graph, write_graph};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "fcit",
    version,
    about = "Causal search under latent confounding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a linear Gaussian dataset with its true DAG and PAG.
    Simulate(SimulateArgs),
    /// Run fcit, lv-lite or star-fci on a dataset or an oracle.
    Search(SearchArgs),
    /// Score an estimated PAG against a true DAG.
    Eval(EvalArgs),
    /// Check that a graph is a legal PAG. Exits 1 when it is not.
    Check { graph: PathBuf },
    /// Run a simulation grid and write one CSV row per run.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    measured: usize,
    #[arg(long, default_value_t = 0)]
    latents: usize,
    #[arg(long, default_value_t = 4.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    coef_low: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    coef_high: f64,
    /// Sample from this DAG instead of a random one.
    #[arg(long)]
    dag: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    penalty: f64,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    max_disc_len: Option<usize>,
    #[arg(long)]
    max_block_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    legacy_pdsep: bool,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    r4_in_removal: bool,
}

impl ConfigArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            alpha: self.alpha,
            penalty: self.penalty,
            depth: self.depth,
            max_disc_len: self.max_disc_len,
            max_block_len: self.max_block_len,
            execution: if self.jobs == Some(1) {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            seed: self.seed,
            legacy_pdsep: self.legacy_pdsep,
            r4_in_removal: self.r4_in_removal,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_parser = parse_algorithm, default_value = "fcit")]
    algorithm: Algorithm,
    #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
    data: Option<PathBuf>,
    /// True DAG answering independence queries by m-separation.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// CPDAG to start from instead of running BOSS.
    #[arg(long)]
    init_cpdag: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    true_dag: PathBuf,
    /// Skip the PAG-relative metrics.
    #[arg(long)]
    dag_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    measured: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    degrees: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,4,8")]
    latents: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "200,500,1000,5000")]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm, default_value = "fcit,lv-lite")]
    algorithms: Vec<Algorithm>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: fcit_core::Error| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    version: String,
    started_unix_ms: u128,
    wall_clock_ms: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<fcit_core::Error> for Failure {
    fn from(e: fcit_core::Error) -> Self {
        use fcit_core::Error::*;
        let code = match e {
            Io(_) | Csv(_) | Json(_) | Parse { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 3,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: 3,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

struct Recorder {
    command: &'static str,
    args: Vec<String>,
    started: SystemTime,
    clock: Instant,
}

impl Recorder {
    fn write(
        &self,
        path: &Path,
        config: impl Serialize,
        seeds: Vec<u64>,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> Result<(), Failure> {
        let m = RunManifest {
            command: self.command.into(),
            args: self.args.clone(),
            config: serde_json::to_value(config)?,
            seeds,
            inputs,
            outputs,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix_ms: self
                .started
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis()),
            wall_clock_ms: self.clock.elapsed().as_secs_f64() * 1e3,
        };
        fs::write(path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or("run".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn simulate(a: &SimulateArgs, rec: &Recorder) -> Outcome {
    let mut spec = SimSpec::new(a.measured, a.latents, a.avg_degree, a.n).with_seed(a.seed);
    spec.coef_low = a.coef_low;
    spec.coef_high = a.coef_high;
    let dag = match &a.dag {
        Some(p) => {
            let g = read_graph(p)?;
            spec.n_measured = g.measured().len();
            spec.n_latent = g.latents().len();
            g
        }
        None => {
            spec.validate()?;
            random_forward_dag(&spec)?
        }
    };
    let data = simulate_sem(&dag, &spec)?;
    fs::create_dir_all(&a.out)?;
    let outputs: Vec<PathBuf> = ["data.csv", "true_dag.txt", "true_pag.txt"]
        .iter()
        .map(|f| a.out.join(f))
        .collect();
    data.write_csv(&outputs[0])?;
    write_graph(&outputs[1], &dag)?;
    write_graph(&outputs[2], &true_pag(&dag)?)?;
    rec.write(
        &a.out.join("manifest.json"),
        spec,
        vec![a.seed],
        a.dag.iter().cloned().collect(),
        outputs,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn search(a: &SearchArgs, rec: &Recorder) -> Outcome {
    let cfg = a.config.config();
    cfg.validate()?;
    let (input, mut inputs) = match (&a.data, &a.oracle) {
        (_, Some(p)) => (
            Input::Oracle(Arc::new(MSepOracle::new(read_graph(p)?))),
            vec![p.clone()],
        ),
        (Some(p), None) => {
            let cm = covariance(&Dataset::read_csv(p)?)?;
            (Input::Data(Arc::new(cm)), vec![p.clone()])
        }
        (None, None) => unreachable!("clap requires --data or --oracle"),
    };
    let procedure = match &a.init_cpdag {
        Some(p) => {
            inputs.push(p.clone());
            CpdagProcedure::External(read_graph(p)?)
        }
        None => CpdagProcedure::Boss,
    };
    let res = par::with_jobs(a.config.jobs, || a.algorithm.run(&input, &procedure, &cfg))?;
    let graph = res.graph.reorder_like(&input.names())?;
    fs::create_dir_all(&a.out)?;
    let outputs = vec![a.out.join("est_pag.txt"), a.out.join("sepsets.json")];
    write_graph(&outputs[0], &graph)?;
    fs::write(&outputs[1], res.sepsets.to_json(&res.graph)? + "\n")?;
    rec.write(
        &a.out.join("manifest.json"),
        serde_json::json!({ "algorithm": a.algorithm, "search": cfg }),
        vec![cfg.seed],
        inputs,
        outputs,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn eval(a: &EvalArgs, rec: &Recorder) -> Outcome {
    let est = read_graph(&a.est)?;
    let dag = read_graph(&a.true_dag)?;
    let metrics = if a.dag_only {
        compare_to_dag(&est, &dag)?
    } else {
        compare_graphs(&est, &true_pag(&dag)?, &dag)?
    };
    fs::write(&a.out, serde_json::to_string_pretty(&metrics)? + "\n")?;
    rec.write(
        &sidecar(&a.out),
        serde_json::json!({ "dag_only": a.dag_only }),
        vec![],
        vec![a.est.clone(), a.true_dag.clone()],
        vec![a.out.clone()],
    )?;
    Ok(ExitCode::SUCCESS)
}

fn describe(g: &MixedGraph, v: &Violation) -> String {
    let body = match v {
        Violation::DirectedCycle { cycle } => g.names_of(cycle).join(" -> "),
        Violation::AlmostCycle { a, b }
        | Violation::NonMaximal { a, b }
        | Violation::RuleNoncompliant { a, b } => format!("{} {}", g.name(*a), g.name(*b)),
    };
    format!("{} {body}", v.kind())
}

fn check(path: &Path) -> Outcome {
    let g = read_graph(path)?;
    let report = legal_pag_check(&g);
    if report.is_legal {
        println!("legal PAG");
        return Ok(ExitCode::SUCCESS);
    }
    for v in &report.violations {
        println!("{}", describe(&g, v));
    }
    Ok(ExitCode::from(1))
}

fn bench(a: &BenchArgs, rec: &Recorder) -> Outcome {
    let cfg = a.config.config();
    cfg.validate()?;
    let conditions = paper_grid(
        a.measured,
        &a.degrees,
        &a.latents,
        &a.samples,
        a.replicates,
        &a.algorithms,
        cfg,
    );
    let records = par::with_jobs(a.config.jobs, || {
        run_grid(&conditions, cfg.seed, cfg.execution)
    });
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&records, fs::File::create(&a.out)?)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} runs failed; see the error column",
            records.len()
        );
    }
    rec.write(
        &sidecar(&a.out),
        &conditions,
        vec![cfg.seed],
        vec![],
        vec![a.out.clone()],
    )?;
    Ok(ExitCode::SUCCESS)
}

fn run(args: Vec<String>) -> Outcome {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return Ok(ExitCode::from(if e.use_stderr() { 2 } else { 0 }));
        }
    };
    let rec = |command| Recorder {
        command,
        args: args[1..].to_vec(),
        started: SystemTime::now(),
        clock: Instant::now(),
    };
    match &cli.command {
        Command::Simulate(a) => simulate(a, &rec("simulate")),
        Command::Search(a) => search(a, &rec("search")),
        Command::Eval(a) => eval(a, &rec("eval")),
        Command::Check { graph } => check(graph),
        Command::Bench(a) => bench(a, &rec("bench")),
        Command::Replay { manifest } => {
            let m: RunManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
            if m.args.first().is_some_and(|c| c == "replay") {
                return Err(Failure {
                    code: 2,
                    message: "manifest records a replay".into(),
                });
            }
            run(std::iter::once(args[0].clone()).chain(m.args).collect())
        }
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_map_onto_the_search_config() {
        let cli = Cli::try_parse_from([
            "fcit",
            "search",
            "--data",
            "d.csv",
            "--out",
            "o",
            "--alpha",
            "0.05",
            "--depth",
            "3",
            "--jobs",
            "1",
            "--r4-in-removal",
            "false",
            "--legacy-pdsep",
        ])
        .unwrap();
        let Command::Search(a) = cli.command else {
            panic!()
        };
        let cfg = a.config.config();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.depth, Some(3));
        assert_eq!(cfg.execution, Execution::Sequential);
        assert!(!cfg.r4_in_removal && cfg.legacy_pdsep);
        assert_eq!(cfg.penalty, 2.0);
    }

    #[test]
    fn data_and_oracle_are_exclusive() {
        assert!(Cli::try_parse_from(["fcit", "search", "--out", "o"]).is_err());
        assert!(Cli::try_parse_from([
            "fcit", "search", "--data", "a", "--oracle", "b", "--out", "o"
        ])
        .is_err());
    }

    #[test]
    fn sidecar_sits_next_to_the_output() {
        assert_eq!(
            sidecar(Path::new("x/results.csv")),
            PathBuf::from("x/results.manifest.json")
        );
    }
}
