//! Experiment sweeps: fixation probability of each selection method over
//! grids of budgets `k` and fitness ranges `m_max`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_fp, estimate_fp_randomized, EstimatorConfig, DEFAULT_RUNS};
use crate::exec::{self, derive_seed, stream_rng, Execution};
use crate::graph::FitnessGraph;
use crate::select::{self, greedy_select, GreedyOptions, Method, MonteCarloOracle, SelectionResult};

pub use crate::io::{ingest_dataset, DatasetFormat};

// tags separating the seed streams of a sweep
const TAG_FITNESS: u64 = 0x6669_746e;
const TAG_SELECT: u64 = 0x7365_6c65;
const TAG_ESTIMATE: u64 = 0x6573_7469;

/// Mutant fitness i.i.d. uniform on `[1, m_max]`, resident fitness 1.
pub fn sample_fitness<R: Rng + ?Sized>(n: usize, m_max: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(m_max >= 1.0 && m_max.is_finite()) {
        return Err(Error::BadRange(format!("m_max must be a finite value >= 1, got {m_max}")));
    }
    let m = (0..n)
        .map(|_| if m_max == 1.0 { 1.0 } else { rng.gen_range(1.0..=m_max) })
        .collect();
    Ok((m, vec![1.0; n]))
}

/// `g` with freshly sampled fitness.
pub fn with_sampled_fitness<R: Rng + ?Sized>(g: &FitnessGraph, m_max: f64, rng: &mut R) -> Result<FitnessGraph> {
    let (m, r) = sample_fitness(g.n(), m_max, rng)?;
    g.with_fitness(m, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMode {
    /// Use the graph's own fitness values; `m_max_grid` is ignored.
    Explicit,
    /// Resample `m ~ U(1, m_max)` once per grid value.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub fitness: FitnessMode,
    pub k_grid: Vec<usize>,
    pub m_max_grid: Vec<f64>,
    pub methods: Vec<Method>,
    /// Runs per reported estimate.
    pub runs: u64,
    /// Runs per candidate evaluation inside greedy.
    pub greedy_runs: u64,
    pub lazy_greedy: bool,
    pub step_cap: Option<u64>,
    pub master_seed: u64,
    pub execution: Execution,
}

impl ExperimentSpec {
    pub fn new(dataset: impl Into<String>, master_seed: u64) -> Self {
        ExperimentSpec {
            dataset: dataset.into(),
            fitness: FitnessMode::Sampled,
            k_grid: vec![1, 5, 10, 15, 20],
            m_max_grid: vec![1.1],
            methods: Method::ALL.to_vec(),
            runs: DEFAULT_RUNS,
            greedy_runs: 1000,
            lazy_greedy: false,
            step_cap: None,
            master_seed,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_grid.is_empty() || self.methods.is_empty() {
            return Err(Error::BadRange("k grid and method list must be nonempty".into()));
        }
        if self.fitness == FitnessMode::Sampled {
            if self.m_max_grid.is_empty() {
                return Err(Error::BadRange("m_max grid must be nonempty".into()));
            }
            if let Some(&bad) = self.m_max_grid.iter().find(|&&m| !(m >= 1.0 && m.is_finite())) {
                return Err(Error::BadRange(format!("m_max must be >= 1, got {bad}")));
            }
        }
        if let Some(&k) = self.k_grid.iter().find(|&&k| k > n) {
            return Err(Error::BadRange(format!("k = {k} exceeds the {n} nodes")));
        }
        if self.runs == 0 || self.greedy_runs == 0 {
            return Err(Error::InvalidConfig("run counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dataset: String,
    pub method: Method,
    pub k: usize,
    pub m_max: f64,
    pub fp_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Selects seeds for every method once at the largest budget and
/// estimates every `(method, k, m_max)` cell. Smaller budgets use prefixes
/// of the selection: greedy rounds draw from streams fixed by the round
/// index and the centrality baselines sort once, so a prefix equals a
/// fresh selection.
///
/// The random method is scored as a strategy: every trajectory draws its
/// own uniform `k`-subset, so its row estimates the expected fixation
/// probability of random seeding rather than that of one lucky draw.
///
/// Every method is estimated with the same stream per `(k, m_max)`, and
/// rows come back ordered by method, then `k`, then `m_max`.
pub fn run_sweep(g: &FitnessGraph, spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate(g.n())?;
    let landscapes: Vec<(f64, FitnessGraph)> = match spec.fitness {
        FitnessMode::Explicit => vec![(g.summary().m_max, g.clone())],
        FitnessMode::Sampled => spec
            .m_max_grid
            .iter()
            .map(|&m_max| {
                let mut rng = stream_rng(derive_seed(spec.master_seed, TAG_FITNESS), m_max.to_bits());
                Ok((m_max, with_sampled_fitness(g, m_max, &mut rng)?))
            })
            .collect::<Result<_>>()?,
    };
    let k_max = spec.k_grid.iter().copied().max().unwrap_or(0);

    // cells in output order
    let mut cells = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for &k in &spec.k_grid {
            for li in 0..landscapes.len() {
                cells.push((mi, method, k, li));
            }
        }
    }

    // one selection per (method, landscape)
    let selections: Vec<Vec<SelectionResult>> = spec
        .methods
        .iter()
        .map(|&method| {
            landscapes
                .iter()
                .map(|(m_max, land)| select_for(land, method, k_max, *m_max, spec))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    exec::try_map_indices(spec.execution, cells.len(), |i| {
        let (mi, method, k, li) = cells[i];
        let (m_max, land) = &landscapes[li];
        let cfg = EstimatorConfig {
            step_cap: spec.step_cap,
            execution: Execution::Sequential,
            ..EstimatorConfig::with_runs(spec.runs, derive_seed(derive_seed(spec.master_seed, TAG_ESTIMATE), cell_tag(k, *m_max)))
        };
        let est = if method == Method::Random {
            let n = land.n();
            estimate_fp_randomized(land, &cfg, |rng| select::baseline_random(land, k, rng).configuration(n))?
        } else {
            estimate_fp(land, &selections[mi][li].prefix(k).configuration(land.n()), &cfg)?
        };
        Ok(SweepRow {
            dataset: spec.dataset.clone(),
            method,
            k,
            m_max: *m_max,
            fp_hat: est.fp_hat,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        })
    })
}

fn cell_tag(k: usize, m_max: f64) -> u64 {
    derive_seed(m_max.to_bits(), k as u64)
}

fn select_for(g: &FitnessGraph, method: Method, k: usize, m_max: f64, spec: &ExperimentSpec) -> Result<SelectionResult> {
    match method {
        Method::Greedy => {
            let cfg = EstimatorConfig {
                step_cap: spec.step_cap,
                execution: Execution::Sequential,
                ..EstimatorConfig::with_runs(spec.greedy_runs, derive_seed(derive_seed(spec.master_seed, TAG_SELECT), m_max.to_bits()))
            };
            let oracle = MonteCarloOracle::new(g, cfg);
            let opts = GreedyOptions {
                lazy: spec.lazy_greedy,
                execution: spec.execution,
            };
            let mut r = greedy_select(g, k, &oracle, &opts)?;
            r.fp_final = None;
            Ok(r)
        }
        // drawn per cell
        Method::Random => Ok(SelectionResult {
            seeds: Vec::new(),
            gains: Vec::new(),
            method,
            fp_final: None,
        }),
        Method::Degree => Ok(select::baseline_min_degree(g, k)),
        Method::Closeness => Ok(select::baseline_min_closeness(g, k)),
        Method::Pagerank => select::baseline_min_pagerank(g, k),
    }
}

pub const CSV_HEADER: [&str; 7] = ["dataset", "method", "k", "m_max", "fp_hat", "ci_low", "ci_high"];

/// RFC 4180 CSV with a header row.
pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.k.to_string(),
            r.m_max.to_string(),
            r.fp_hat.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
