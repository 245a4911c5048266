use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use hetmoran::estimate::{estimate_fp, EstimatorConfig};
use hetmoran::exact::{self, ExactOptions};
use hetmoran::exec::{stream_rng, Execution};
use hetmoran::experiment::{self, ExperimentSpec, FitnessMode};
use hetmoran::io::{self as hio, DatasetFormat};
use hetmoran::process::{run_to_absorption, PotentialTrace};
use hetmoran::reduction::{self, Regime, SetCoverInstance};
use hetmoran::select::{self, greedy_select, ExactOracle, GreedyOptions, Method, MonteCarloOracle};
use hetmoran::verify::{self, Property, SweepSpec};
use hetmoran::{Configuration, FitnessGraph};

#[derive(Parser, Debug)]
#[command(name = "hetmoran", version, about = "Heterogeneous Moran process: fixation probabilities and seed selection")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Per-trajectory step cap (default: the expected-time bound where it
    /// applies, 10^8 otherwise).
    #[arg(long, global = true)]
    step_cap: Option<u64>,
    /// Trajectories per estimate.
    #[arg(long, global = true, default_value_t = 5000)]
    runs: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trajectory to absorption.
    Simulate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        seeds: String,
        /// Record the potential every K steps (undirected graphs).
        #[arg(long)]
        trace_every: Option<u64>,
    },
    /// Exact fixation probabilities (small graphs).
    Exact {
        #[command(flatten)]
        graph: GraphArgs,
        /// Seed set; every single node when omitted.
        #[arg(long)]
        seeds: Option<String>,
        /// Also report expected absorption times.
        #[arg(long)]
        times: bool,
    },
    /// Monte Carlo fixation probability with a confidence interval.
    Estimate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        seeds: String,
        #[arg(long, requires = "delta")]
        epsilon: Option<f64>,
        #[arg(long, requires = "epsilon")]
        delta: Option<f64>,
    },
    /// Choose k seed nodes.
    Select {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        k: usize,
        /// Trajectories per greedy candidate evaluation.
        #[arg(long, default_value_t = 1000)]
        greedy_runs: u64,
        /// Greedy with exact values instead of estimates.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        lazy: bool,
    },
    /// Fixation probability per method over grids of k and m_max.
    Sweep {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "dataset")]
        dataset: String,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,15,20")]
        k_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1.1")]
        m_max_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "greedy,random,degree,closeness,pagerank")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 1000)]
        greedy_runs: u64,
        #[arg(long)]
        lazy: bool,
    },
    /// Check a structural property over random instances.
    Verify {
        #[arg(long, value_parser = parse_property)]
        property: Property,
        /// Largest instance size.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Build the Set Cover gadget and its fitness parameters.
    Reduce {
        /// JSON file: {"sets": [[1, 4], [1, 2, 4]], "k": 2}
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RegimeArg::General)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// Solve the gadget exactly and compare covers with non-covers.
        #[arg(long)]
        solve: bool,
        /// Write the gadget as `<prefix>.edges` and `<prefix>.fitness`.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Fitness file with rows `node m r`.
    #[arg(long, conflicts_with = "m_max")]
    fitness: Option<PathBuf>,
    /// Sample mutant fitness uniformly on [1, m_max] instead.
    #[arg(long)]
    m_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Edgelist)]
    format: FormatArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Edgelist,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    General,
    Biased,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse()
}

fn parse_property(s: &str) -> std::result::Result<Property, String> {
    s.parse()
}

impl Cli {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn estimator(&self, master_seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            step_cap: self.step_cap,
            execution: self.execution(),
            ..EstimatorConfig::with_runs(self.runs, master_seed)
        }
    }
}

fn load(args: &GraphArgs, seed: u64) -> Result<FitnessGraph> {
    let format = match args.format {
        FormatArg::Edgelist => DatasetFormat::EdgeList,
        FormatArg::Csv => DatasetFormat::Csv,
    };
    let g = hio::ingest_dataset(&args.graph, format).with_context(|| format!("reading {}", args.graph.display()))?;
    info!("loaded {} nodes, {} arcs", g.n(), g.arc_count());
    if let Some(path) = &args.fitness {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (m, r) = hio::parse_fitness(&text, g.labels())?;
        return Ok(g.with_fitness(m, r)?);
    }
    if let Some(m_max) = args.m_max {
        let mut rng = stream_rng(seed, u64::MAX);
        return Ok(experiment::with_sampled_fitness(&g, m_max, &mut rng)?);
    }
    Ok(g)
}

/// Comma-separated node labels.
fn parse_seeds(g: &FitnessGraph, text: &str) -> Result<Configuration> {
    let mut c = Configuration::empty(g.n());
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match g.labels().iter().position(|l| l == part) {
            Some(u) => {
                c.insert(u);
            }
            None => bail!("unknown node '{part}'"),
        }
    }
    Ok(c)
}

fn seed_label(g: &FitnessGraph, c: &Configuration) -> String {
    c.iter().map(|u| g.label(u)).collect::<Vec<_>>().join(";")
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationReport {
    seed_set: String,
    outcome: String,
    steps: u64,
    potential_trace: Option<Vec<(u64, f64)>>,
}

#[derive(Serialize)]
struct ReductionReport {
    n: usize,
    arcs: Option<usize>,
    params: reduction::ReductionParams,
    bounds: reduction::Lemma2Bounds,
    separates: bool,
    separation: Option<reduction::SeparationReport>,
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Simulate {
            graph,
            seeds,
            trace_every,
        } => {
            let g = load(graph, cli.seed)?;
            let seed = parse_seeds(&g, seeds)?;
            let mut rng = stream_rng(cli.seed, 0);
            let cap = cli.step_cap.unwrap_or_else(|| hetmoran::estimate::default_step_cap(&g));
            let trace = trace_every.map(|every| PotentialTrace { every });
            let stats = run_to_absorption(&g, &seed, &mut rng, cap, trace)?;
            json(&SimulationReport {
                seed_set: seed_label(&g, &seed),
                outcome: format!("{:?}", stats.outcome).to_lowercase(),
                steps: stats.steps,
                potential_trace: stats.potential_trace,
            })
        }
        Command::Exact { graph, seeds, times } => {
            let g = load(graph, cli.seed)?;
            let mut opts = ExactOptions {
                execution: cli.execution(),
                ..ExactOptions::default()
            };
            if *times {
                opts = opts.with_times();
            }
            let table = exact::solve(&g, &opts)?;
            let sets = match seeds {
                Some(s) => vec![parse_seeds(&g, s)?],
                None => (0..g.n()).map(|u| Configuration::from_nodes(g.n(), [u])).collect(),
            };
            let rows: Vec<Vec<String>> = sets
                .iter()
                .map(|c| {
                    let mut row = vec![seed_label(&g, c), table.fp(c).to_string()];
                    if let Some(t) = table.expected_steps(c) {
                        row.push(t.to_string());
                    }
                    row
                })
                .collect();
            let header: &[&str] = if *times { &["seed_set", "fp", "expected_steps"] } else { &["seed_set", "fp"] };
            csv_string(header, &rows)
        }
        Command::Estimate {
            graph,
            seeds,
            epsilon,
            delta,
        } => {
            let g = load(graph, cli.seed)?;
            let seed = parse_seeds(&g, seeds)?;
            let mut cfg = cli.estimator(cli.seed);
            if epsilon.is_some() {
                cfg.fixed_runs = None;
                cfg.epsilon = *epsilon;
                cfg.delta = *delta;
            }
            let e = estimate_fp(&g, &seed, &cfg)?;
            csv_string(
                &["seed_set", "fp_hat", "ci_low", "ci_high", "runs", "capped", "mean_steps", "seed"],
                &[vec![
                    seed_label(&g, &seed),
                    e.fp_hat.to_string(),
                    e.ci_low.to_string(),
                    e.ci_high.to_string(),
                    e.runs.to_string(),
                    e.capped_runs.to_string(),
                    e.mean_steps.to_string(),
                    e.master_seed.to_string(),
                ]],
            )
        }
        Command::Select {
            graph,
            method,
            k,
            greedy_runs,
            exact: use_exact,
            lazy,
        } => {
            let g = load(graph, cli.seed)?;
            let opts = GreedyOptions {
                lazy: *lazy,
                execution: cli.execution(),
            };
            let result = match method {
                Method::Greedy if *use_exact => {
                    let oracle = ExactOracle::new(&g, &ExactOptions::default())?;
                    greedy_select(&g, *k, &oracle, &opts)?
                }
                Method::Greedy => {
                    let mut oracle = MonteCarloOracle::new(
                        &g,
                        EstimatorConfig {
                            fixed_runs: Some(*greedy_runs),
                            ..cli.estimator(cli.seed)
                        },
                    );
                    oracle.report_config = cli.estimator(cli.seed);
                    greedy_select(&g, *k, &oracle, &opts)?
                }
                Method::Random => select::baseline_random(&g, *k, &mut stream_rng(cli.seed, u64::MAX)),
                Method::Degree => select::baseline_min_degree(&g, *k),
                Method::Closeness => select::baseline_min_closeness(&g, *k),
                Method::Pagerank => select::baseline_min_pagerank(&g, *k)?,
            };
            let config = result.configuration(g.n());
            let est = match result.fp_final.clone() {
                Some(e) => e,
                None => estimate_fp(&g, &config, &cli.estimator(cli.seed))?,
            };
            let order: Vec<&str> = result.seeds.iter().map(|s| g.label(s.index())).collect();
            csv_string(
                &["method", "k", "seeds", "fp_hat", "ci_low", "ci_high"],
                &[vec![
                    method.to_string(),
                    k.to_string(),
                    order.join(";"),
                    est.fp_hat.to_string(),
                    est.ci_low.to_string(),
                    est.ci_high.to_string(),
                ]],
            )
        }
        Command::Sweep {
            graph,
            dataset,
            k_grid,
            m_max_grid,
            methods,
            greedy_runs,
            lazy,
        } => {
            let g = load(graph, cli.seed)?;
            let explicit = graph.fitness.is_some() || graph.m_max.is_some();
            let spec = ExperimentSpec {
                fitness: if explicit { FitnessMode::Explicit } else { FitnessMode::Sampled },
                k_grid: k_grid.clone(),
                m_max_grid: m_max_grid.clone(),
                methods: methods.clone(),
                runs: cli.runs,
                greedy_runs: *greedy_runs,
                lazy_greedy: *lazy,
                step_cap: cli.step_cap,
                execution: cli.execution(),
                ..ExperimentSpec::new(dataset.clone(), cli.seed)
            };
            let rows = experiment::run_sweep(&g, &spec)?;
            Ok(experiment::rows_to_csv(&rows)?)
        }
        Command::Verify {
            property,
            n,
            instances,
            tolerance,
        } => {
            let mut spec = SweepSpec::new(*property, *n, *instances, cli.seed);
            spec.execution = cli.execution();
            spec.runs = cli.runs;
            if let Some(t) = tolerance {
                spec.tolerance = *t;
            }
            json(&verify::sweep(&spec)?)
        }
        Command::Reduce {
            instance,
            regime,
            eps,
            solve,
            emit,
        } => {
            let text = fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
            let inst = SetCoverInstance::from_json(&text)?;
            let n = inst.node_count();
            let regime = match regime {
                RegimeArg::General => Regime::General,
                RegimeArg::Biased => Regime::MutantBiased,
            };
            let params = reduction::params_for(regime, n, *eps)?;
            let bounds = reduction::lemma2_bounds(n, params.x, params.y);
            let separates = match regime {
                Regime::General => bounds.separates_general(*eps),
                Regime::MutantBiased => bounds.separates_biased(n),
            };
            let graph = params.x.to_f64().map(|_| reduction::build_reduction_graph(&inst, &params)).transpose()?;
            if let (Some(prefix), Some(g)) = (emit, &graph) {
                fs::write(prefix.with_extension("edges"), hio::write_edge_list(g))?;
                fs::write(prefix.with_extension("fitness"), hio::write_fitness(g))?;
            }
            let separation = if *solve {
                Some(reduction::separation(&inst, &params, &ExactOptions::default())?)
            } else {
                None
            };
            json(&ReductionReport {
                n,
                arcs: graph.as_ref().map(|g| g.arc_count()),
                params,
                bounds,
                separates,
                separation,
            })
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
        #[cfg(not(feature = "parallel"))]
        log::warn!("built without the parallel feature; ignoring --threads {threads}");
    }
    let text = run(&cli)?;
    emit(&cli, &text)
}
