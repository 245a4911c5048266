//! Seed selection: greedy maximization of the fixation probability and the
//! structural baselines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::centrality;
use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::estimate::{estimate_fp, EstimatorConfig, FixationEstimate};
use crate::exact::{self, ExactOptions, ExactResult};
use crate::exec::{self, derive_seed, Execution};
use crate::graph::{FitnessGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Random,
    Degree,
    Closeness,
    Pagerank,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Greedy,
        Method::Random,
        Method::Degree,
        Method::Closeness,
        Method::Pagerank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Random => "random",
            Method::Degree => "degree",
            Method::Closeness => "closeness",
            Method::Pagerank => "pagerank",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Seeds in selection order.
    pub seeds: Vec<NodeId>,
    /// Marginal gain of each greedy pick; empty for baselines.
    pub gains: Vec<f64>,
    pub method: Method,
    pub fp_final: Option<FixationEstimate>,
}

impl SelectionResult {
    pub fn configuration(&self, n: usize) -> Configuration {
        Configuration::from_nodes(n, self.seeds.iter().map(|s| s.index()))
    }

    /// The first `k` picks, as selected for a smaller budget.
    pub fn prefix(&self, k: usize) -> SelectionResult {
        let k = k.min(self.seeds.len());
        SelectionResult {
            seeds: self.seeds[..k].to_vec(),
            gains: self.gains.iter().take(k).copied().collect(),
            method: self.method,
            fp_final: None,
        }
    }
}

/// A fixation-probability oracle for greedy selection.
pub trait FpOracle: Sync {
    /// `fp(seeds)`. `round` is the greedy round, so Monte Carlo oracles can
    /// share random numbers across the candidates of one round.
    fn evaluate(&self, seeds: &Configuration, round: usize) -> Result<f64>;

    /// Final report for a chosen seed set.
    fn report(&self, seeds: &Configuration) -> Result<FixationEstimate>;
}

/// Exact values from a full absorbing-chain solve.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    table: ExactResult,
}

impl ExactOracle {
    pub fn new(g: &FitnessGraph, opts: &ExactOptions) -> Result<Self> {
        Ok(ExactOracle {
            table: exact::solve(g, opts)?,
        })
    }

    pub fn from_table(table: ExactResult) -> Self {
        ExactOracle { table }
    }

    pub fn table(&self) -> &ExactResult {
        &self.table
    }
}

impl FpOracle for ExactOracle {
    fn evaluate(&self, seeds: &Configuration, _round: usize) -> Result<f64> {
        Ok(self.table.fp(seeds))
    }

    fn report(&self, seeds: &Configuration) -> Result<FixationEstimate> {
        Ok(FixationEstimate::exact(self.table.fp(seeds)))
    }
}

/// Monte Carlo estimates with common random numbers: every candidate in a
/// round uses the same master seed, derived from the round index.
#[derive(Debug, Clone)]
pub struct MonteCarloOracle<'g> {
    pub graph: &'g FitnessGraph,
    /// Configuration for candidate evaluations.
    pub config: EstimatorConfig,
    /// Configuration for the final report.
    pub report_config: EstimatorConfig,
}

impl<'g> MonteCarloOracle<'g> {
    pub fn new(graph: &'g FitnessGraph, config: EstimatorConfig) -> Self {
        MonteCarloOracle {
            graph,
            config,
            report_config: config,
        }
    }
}

impl FpOracle for MonteCarloOracle<'_> {
    fn evaluate(&self, seeds: &Configuration, round: usize) -> Result<f64> {
        let cfg = EstimatorConfig {
            master_seed: derive_seed(self.config.master_seed, round as u64),
            ..self.config
        };
        estimate_fp(self.graph, seeds, &cfg)
            .map(|e| e.fp_hat)
            .map_err(|e| Error::EvaluatorFailure(e.to_string()))
    }

    fn report(&self, seeds: &Configuration) -> Result<FixationEstimate> {
        estimate_fp(self.graph, seeds, &self.report_config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GreedyOptions {
    /// Lazy (priority-queue) evaluation. Sound when the objective is
    /// submodular, as on mutant-biased graphs.
    pub lazy: bool,
    pub execution: Execution,
}

/// Stale gains within this band of the best fresh gain are re-evaluated
/// before a lazy pick is committed.
const LAZY_BAND: f64 = 1e-9;

/// `a` ranks before `b`: larger gain, then smaller node id.
fn ranks_before(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

pub fn greedy_select<O: FpOracle>(
    g: &FitnessGraph,
    k: usize,
    oracle: &O,
    opts: &GreedyOptions,
) -> Result<SelectionResult> {
    let n = g.n();
    let k = k.min(n);
    let (seeds, gains) = if opts.lazy {
        lazy_greedy(n, k, oracle)?
    } else {
        plain_greedy(n, k, oracle, opts.execution)?
    };
    let config = Configuration::from_nodes(n, seeds.iter().copied());
    Ok(SelectionResult {
        seeds: seeds.into_iter().map(NodeId::from).collect(),
        gains,
        method: Method::Greedy,
        fp_final: Some(oracle.report(&config)?),
    })
}

fn plain_greedy<O: FpOracle>(
    n: usize,
    k: usize,
    oracle: &O,
    exec: Execution,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut current = Configuration::empty(n);
    let mut seeds = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for round in 0..k {
        let base = oracle.evaluate(&current, round)?;
        let candidates: Vec<usize> = (0..n).filter(|&u| !current.contains(u)).collect();
        let values = exec::try_map_indices(exec, candidates.len(), |i| {
            let mut s = current.clone();
            s.insert(candidates[i]);
            oracle.evaluate(&s, round)
        })?;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (&u, &v) in candidates.iter().zip(&values) {
            let cand = (v - base, u);
            if ranks_before(cand, best) {
                best = cand;
            }
        }
        current.insert(best.1);
        seeds.push(best.1);
        gains.push(best.0);
    }
    Ok((seeds, gains))
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    gain: f64,
    node: usize,
    round: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn lazy_greedy<O: FpOracle>(n: usize, k: usize, oracle: &O) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut current = Configuration::empty(n);
    let mut seeds = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut heap: BinaryHeap<Bound> = (0..n)
        .map(|node| Bound {
            gain: f64::INFINITY,
            node,
            round: usize::MAX,
        })
        .collect();
    let gain_of = |current: &Configuration, base: f64, u: usize, round: usize| -> Result<f64> {
        let mut s = current.clone();
        s.insert(u);
        Ok(oracle.evaluate(&s, round)? - base)
    };

    for round in 0..k {
        let base = oracle.evaluate(&current, round)?;
        // refresh until the top is current
        let top = loop {
            let mut b = heap.pop().expect("candidates remain while k <= n");
            if b.round == round {
                break b;
            }
            b.gain = gain_of(&current, base, b.node, round)?;
            b.round = round;
            heap.push(b);
        };
        // refresh everything that could still tie or beat the top
        let mut fresh = vec![top];
        while let Some(b) = heap.peek() {
            if b.gain < top.gain - LAZY_BAND {
                break;
            }
            let mut b = heap.pop().unwrap();
            if b.round != round {
                b.gain = gain_of(&current, base, b.node, round)?;
                b.round = round;
            }
            fresh.push(b);
        }
        let best_idx = (0..fresh.len())
            .reduce(|a, b| {
                if ranks_before((fresh[b].gain, fresh[b].node), (fresh[a].gain, fresh[a].node)) {
                    b
                } else {
                    a
                }
            })
            .unwrap();
        let best = fresh.swap_remove(best_idx);
        heap.extend(fresh);
        current.insert(best.node);
        seeds.push(best.node);
        gains.push(best.gain);
    }
    Ok((seeds, gains))
}

fn by_smallest_score(scores: &[f64], k: usize, method: Method) -> SelectionResult {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(k.min(scores.len()));
    SelectionResult {
        seeds: order.into_iter().map(NodeId::from).collect(),
        gains: Vec::new(),
        method,
        fp_final: None,
    }
}

/// Uniform random `k`-subset.
pub fn baseline_random<R: Rng + ?Sized>(g: &FitnessGraph, k: usize, rng: &mut R) -> SelectionResult {
    let n = g.n();
    let picks = rand::seq::index::sample(rng, n, k.min(n));
    SelectionResult {
        seeds: picks.into_iter().map(NodeId::from).collect(),
        gains: Vec::new(),
        method: Method::Random,
        fp_final: None,
    }
}

pub fn baseline_min_degree(g: &FitnessGraph, k: usize) -> SelectionResult {
    by_smallest_score(&centrality::degree(g), k, Method::Degree)
}

pub fn baseline_min_closeness(g: &FitnessGraph, k: usize) -> SelectionResult {
    by_smallest_score(&centrality::closeness(g), k, Method::Closeness)
}

pub fn baseline_min_pagerank(g: &FitnessGraph, k: usize) -> Result<SelectionResult> {
    let pr = centrality::pagerank(g, centrality::DEFAULT_DAMPING, centrality::DEFAULT_TOLERANCE)?;
    Ok(by_smallest_score(&pr, k, Method::Pagerank))
}
