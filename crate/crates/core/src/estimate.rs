//! Monte Carlo estimation of fixation probabilities.
//!
//! Runs are independent trajectories; run `i` draws from the random stream
//! `(master_seed, i)`, and per-run counters are merged by integer sums, so
//! an estimate depends only on the graph, seed set and configuration.
//! Runs that hit the step cap are excluded from the point estimate and
//! reported separately.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::exec::{self, stream_rng, Execution};
use crate::graph::FitnessGraph;
use crate::process::{Absorption, Simulation};

/// Runs used when neither an accuracy target nor a run count is given.
pub const DEFAULT_RUNS: u64 = 5000;
/// Ceiling on the time-bound step cap.
pub const BOUND_CAP_CEILING: u64 = 1_000_000_000;
/// Step cap when the time bound does not apply.
pub const FALLBACK_STEP_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Additive accuracy; used with `delta` to size the run budget.
    pub epsilon: Option<f64>,
    /// Failure probability; also sets the interval level to `1 - delta`.
    pub delta: Option<f64>,
    /// Explicit run count, overriding `(epsilon, delta)`.
    pub fixed_runs: Option<u64>,
    /// Per-run step cap; `None` picks [`default_step_cap`].
    pub step_cap: Option<u64>,
    pub master_seed: u64,
    pub execution: Execution,
}

impl EstimatorConfig {
    pub fn with_runs(runs: u64, master_seed: u64) -> Self {
        EstimatorConfig {
            fixed_runs: Some(runs),
            master_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
                }
            }
        }
        if self.fixed_runs == Some(0) {
            return Err(Error::InvalidConfig("fixed_runs must be positive".into()));
        }
        if self.step_cap == Some(0) {
            return Err(Error::InvalidConfig("step cap must be positive".into()));
        }
        if self.fixed_runs.is_none() && self.epsilon.is_some() != self.delta.is_some() {
            return Err(Error::InvalidConfig("epsilon and delta must be given together".into()));
        }
        Ok(())
    }

    pub fn runs(&self) -> u64 {
        match (self.fixed_runs, self.epsilon, self.delta) {
            (Some(r), _, _) => r,
            (None, Some(e), Some(d)) => sample_budget(e, d),
            _ => DEFAULT_RUNS,
        }
    }

    /// Interval confidence level.
    pub fn confidence(&self) -> f64 {
        self.delta.map_or(0.95, |d| 1.0 - d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEstimate {
    pub fp_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: u64,
    pub fixations: u64,
    pub capped_runs: u64,
    /// Mean steps over runs that absorbed.
    pub mean_steps: f64,
    pub master_seed: u64,
}

impl FixationEstimate {
    /// Point value with a zero-width interval.
    pub fn exact(value: f64) -> Self {
        FixationEstimate {
            fp_hat: value,
            ci_low: value,
            ci_high: value,
            runs: 0,
            fixations: 0,
            capped_runs: 0,
            mean_steps: 0.0,
            master_seed: 0,
        }
    }

    pub fn overlaps(&self, other: &FixationEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Hoeffding run count `⌈ln(2/δ) / (2ε²)⌉`, at least 1.
pub fn sample_budget(epsilon: f64, delta: f64) -> u64 {
    let n = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as u64
    } else {
        1
    }
}

/// Standard normal quantile for a two-sided interval at `confidence`.
pub fn z_score(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// `(n² · m_max / r_min)³`, saturating at `ceiling`. Only defined for
/// undirected mutant-biased graphs.
pub fn lemma1_step_bound(g: &FitnessGraph, ceiling: u64) -> Result<u64> {
    if g.is_directed() {
        return Err(Error::NotApplicable("time bound needs an undirected graph"));
    }
    if !g.is_mutant_biased() {
        return Err(Error::NotApplicable("time bound needs a mutant-biased graph"));
    }
    let s = g.summary();
    let n = g.n() as f64;
    let bound = (n * n * s.m_max / s.r_min).powi(3).ceil();
    Ok(if bound >= ceiling as f64 { ceiling } else { bound as u64 })
}

/// The time bound (capped at 10^9) where it applies, 10^8 otherwise.
pub fn default_step_cap(g: &FitnessGraph) -> u64 {
    lemma1_step_bound(g, BOUND_CAP_CEILING).unwrap_or(FALLBACK_STEP_CAP)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    fixations: u64,
    completed: u64,
    capped: u64,
    steps: u128,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            fixations: self.fixations + o.fixations,
            completed: self.completed + o.completed,
            capped: self.capped + o.capped,
            steps: self.steps + o.steps,
        }
    }
}

pub fn estimate_fp(g: &FitnessGraph, seed: &Configuration, cfg: &EstimatorConfig) -> Result<FixationEstimate> {
    cfg.validate()?;
    if seed.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: seed.len(),
        });
    }
    if seed.is_absorbing() {
        let runs = cfg.runs();
        let v = if seed.is_full() { 1.0 } else { 0.0 };
        return Ok(FixationEstimate {
            runs,
            fixations: if seed.is_full() { runs } else { 0 },
            master_seed: cfg.master_seed,
            ..FixationEstimate::exact(v)
        });
    }
    run_estimate(g, cfg, |_| seed.clone())
}

/// Estimates the fixation probability of a randomized seeding strategy:
/// run `i` first draws its seed set from its own stream, then simulates.
pub fn estimate_fp_randomized<F>(g: &FitnessGraph, cfg: &EstimatorConfig, draw: F) -> Result<FixationEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Configuration + Sync + Send,
{
    cfg.validate()?;
    run_estimate(g, cfg, draw)
}

fn run_estimate<F>(g: &FitnessGraph, cfg: &EstimatorConfig, draw: F) -> Result<FixationEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Configuration + Sync + Send,
{
    let runs = cfg.runs();
    let cap = cfg.step_cap.unwrap_or_else(|| default_step_cap(g));
    let tally = exec::fold_indices(
        cfg.execution,
        runs,
        Tally::default(),
        |mut t, i| {
            let mut rng = stream_rng(cfg.master_seed, i);
            let mut sim = Simulation::new(g, draw(&mut rng));
            match sim.run(&mut rng, cap) {
                Absorption::CapHit => t.capped += 1,
                outcome => {
                    t.completed += 1;
                    t.steps += sim.steps() as u128;
                    if outcome == Absorption::Fixed {
                        t.fixations += 1;
                    }
                }
            }
            t
        },
        Tally::merge,
    );
    if tally.completed == 0 {
        return Err(Error::AllRunsCapped { runs });
    }
    let z = z_score(cfg.confidence());
    let (ci_low, ci_high) = wilson_interval(tally.fixations, tally.completed, z);
    Ok(FixationEstimate {
        fp_hat: tally.fixations as f64 / tally.completed as f64,
        ci_low,
        ci_high,
        runs,
        fixations: tally.fixations,
        capped_runs: tally.capped,
        mean_steps: tally.steps as f64 / tally.completed as f64,
        master_seed: cfg.master_seed,
    })
}
