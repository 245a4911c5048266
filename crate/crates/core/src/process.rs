//! The Heterogeneous Moran birth-death kernel.
//!
//! Each step picks a reproducer `u` with probability `f_X(u) / F`, where
//! `F` is the total population fitness, then a target `v` with probability
//! `w(u, v)`, and copies `u`'s type onto `v`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::graph::{FitnessGraph, NodeId};

/// Steps between full rebuilds of the fitness sums.
const REBUILD_INTERVAL: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reproducer: NodeId,
    pub target: NodeId,
    pub changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Absorption {
    Fixed,
    Extinct,
    /// The step cap was reached before absorption.
    CapHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub outcome: Absorption,
    pub steps: u64,
    /// `(step, potential)` samples when tracing was requested.
    pub potential_trace: Option<Vec<(u64, f64)>>,
}

impl TrajectoryStats {
    pub fn fixed(&self) -> bool {
        self.outcome == Absorption::Fixed
    }

    pub fn capped(&self) -> bool {
        self.outcome == Absorption::CapHit
    }
}

/// Fenwick tree over node fitness, with the total kept alongside.
#[derive(Debug, Clone)]
struct FitnessTree {
    tree: Vec<f64>,
    values: Vec<f64>,
    total: f64,
    top: usize,
}

impl FitnessTree {
    fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        let mut t = FitnessTree {
            tree: vec![0.0; n + 1],
            values,
            total: 0.0,
            top,
        };
        t.rebuild();
        t
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree.iter_mut().for_each(|x| *x = 0.0);
        for i in 1..=n {
            self.tree[i] += self.values[i - 1];
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
        self.total = self.values.iter().sum();
    }

    #[inline]
    fn set(&mut self, idx: usize, value: f64) {
        let delta = value - self.values[idx];
        self.values[idx] = value;
        self.total += delta;
        let n = self.values.len();
        let mut i = idx + 1;
        while i <= n {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `target`.
    #[inline]
    fn find(&self, mut target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// A running trajectory that owns its configuration and fitness index.
#[derive(Debug, Clone)]
pub struct Simulation<'g> {
    graph: &'g FitnessGraph,
    state: Configuration,
    fitness: FitnessTree,
    steps: u64,
}

impl<'g> Simulation<'g> {
    pub fn new(graph: &'g FitnessGraph, seed: Configuration) -> Self {
        assert_eq!(seed.len(), graph.n(), "configuration size mismatch");
        let values = (0..graph.n()).map(|u| graph.fitness_of(&seed, u)).collect();
        Simulation {
            graph,
            state: seed,
            fitness: FitnessTree::new(values),
            steps: 0,
        }
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Total population fitness `F` of the current configuration.
    pub fn total_fitness(&self) -> f64 {
        self.fitness.total
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        let g = self.graph;
        if g.n() == 1 {
            self.steps += 1;
            return StepOutcome {
                reproducer: NodeId(0),
                target: NodeId(0),
                changed: false,
            };
        }
        let u = self.fitness.find(rng.gen::<f64>() * self.fitness.total);
        let v = g.sample_neighbor(u, rng);
        let mutant = self.state.contains(u);
        let changed = self.state.set(v, mutant);
        if changed {
            let f = if mutant { g.mutant_fitness(v) } else { g.resident_fitness(v) };
            self.fitness.set(v, f);
        }
        self.steps += 1;
        if self.steps.is_multiple_of(REBUILD_INTERVAL) {
            self.fitness.rebuild();
        }
        StepOutcome {
            reproducer: NodeId(u as u32),
            target: NodeId(v as u32),
            changed,
        }
    }

    /// Steps until absorption or until `step_cap` total steps.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, step_cap: u64) -> Absorption {
        while !self.state.is_absorbing() {
            if self.steps >= step_cap {
                return Absorption::CapHit;
            }
            self.step(rng);
        }
        if self.state.is_full() {
            Absorption::Fixed
        } else {
            Absorption::Extinct
        }
    }
}

/// `f_X(u)`.
pub fn fitness_of(g: &FitnessGraph, x: &Configuration, u: NodeId) -> f64 {
    g.fitness_of(x, u.index())
}

/// One birth-death step from `x`. Absorbing states map to themselves.
pub fn step<R: Rng + ?Sized>(
    g: &FitnessGraph,
    x: &Configuration,
    rng: &mut R,
) -> (Configuration, StepOutcome) {
    let mut sim = Simulation::new(g, x.clone());
    let out = sim.step(rng);
    (sim.state, out)
}

/// Potential tracing options: record `Φ` every `every` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PotentialTrace {
    pub every: u64,
}

/// Runs from `seed` until fixation, extinction, or `step_cap` steps.
pub fn run_to_absorption<R: Rng + ?Sized>(
    g: &FitnessGraph,
    seed: &Configuration,
    rng: &mut R,
    step_cap: u64,
    trace: Option<PotentialTrace>,
) -> Result<TrajectoryStats> {
    if step_cap == 0 {
        return Err(Error::InvalidConfig("step cap must be positive".into()));
    }
    let mut sim = Simulation::new(g, seed.clone());
    let Some(trace) = trace else {
        let outcome = sim.run(rng, step_cap);
        return Ok(TrajectoryStats {
            outcome,
            steps: sim.steps,
            potential_trace: None,
        });
    };
    if g.is_directed() {
        return Err(Error::DirectedGraphUnsupported);
    }
    let every = trace.every.max(1);
    // incremental potential: each flip of v adds or removes m(v)/d(v)
    let contrib: Vec<f64> = (0..g.n())
        .map(|u| g.mutant_fitness(u) / g.degree(u).max(1) as f64)
        .collect();
    let mut phi = potential_phi(g, seed)?;
    let mut samples = vec![(0, phi)];
    let outcome = loop {
        if sim.state.is_absorbing() {
            break if sim.state.is_full() { Absorption::Fixed } else { Absorption::Extinct };
        }
        if sim.steps >= step_cap {
            break Absorption::CapHit;
        }
        let out = sim.step(rng);
        if out.changed {
            let v = out.target.index();
            if sim.state.contains(v) {
                phi += contrib[v];
            } else {
                phi -= contrib[v];
            }
        }
        if sim.steps.is_multiple_of(every) {
            samples.push((sim.steps, phi));
        }
    };
    if samples.last().map(|s| s.0) != Some(sim.steps) {
        samples.push((sim.steps, phi));
    }
    Ok(TrajectoryStats {
        outcome,
        steps: sim.steps,
        potential_trace: Some(samples),
    })
}

/// `Φ(X) = Σ_{u ∈ X} m(u) / d(u)` on undirected graphs.
pub fn potential_phi(g: &FitnessGraph, x: &Configuration) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::DirectedGraphUnsupported);
    }
    Ok(x
        .iter()
        .map(|u| g.mutant_fitness(u) / g.degree(u).max(1) as f64)
        .sum())
}

/// Exact one-step transition law from `x`: for every node `v` whose type
/// can flip, the probability that the next step flips it. The remaining
/// mass stays at `x`.
pub fn flip_probabilities(g: &FitnessGraph, x: &Configuration) -> Vec<(usize, f64)> {
    let total: f64 = (0..g.n()).map(|u| g.fitness_of(x, u)).sum();
    let mut rate = vec![0.0; g.n()];
    for u in 0..g.n() {
        let fu = g.fitness_of(x, u);
        let mu = x.contains(u);
        for (v, w) in g.out_edges(u) {
            if x.contains(v) != mu {
                rate[v] += fu * w;
            }
        }
    }
    rate.into_iter()
        .enumerate()
        .filter(|&(_, r)| r > 0.0)
        .map(|(v, r)| (v, r / total))
        .collect()
}
