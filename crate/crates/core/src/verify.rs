//! Executable checks of the structural properties of fixation
//! probabilities: monotonicity, submodularity, equivalence of the Loopy
//! reformulation, the potential drift and the expected-time bound.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::estimate::{estimate_fp, lemma1_step_bound, EstimatorConfig, BOUND_CAP_CEILING};
use crate::exact::{self, ExactOptions};
use crate::exec::{self, derive_seed, stream_rng, Execution};
use crate::generate::{Family, FitnessKind, InstanceDescriptor};
use crate::graph::FitnessGraph;
use crate::loopy::LoopyKernel;
use crate::process::flip_probabilities;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Standard errors allowed before a Monte Carlo discrepancy counts.
pub const MC_SIGMAS: f64 = 3.0;
/// Violations kept verbatim in a verdict; the rest are only counted.
pub const MAX_WITNESSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Monotone,
    Submodular,
    Supermodular,
    Loopy,
    Drift,
    Timebound,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Monotone => "monotone",
            Property::Submodular => "submodular",
            Property::Supermodular => "supermodular",
            Property::Loopy => "loopy",
            Property::Drift => "drift",
            Property::Timebound => "timebound",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Property::Monotone,
            Property::Submodular,
            Property::Supermodular,
            Property::Loopy,
            Property::Drift,
            Property::Timebound,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown property '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub instance: String,
    /// Witness seed sets, as sorted node lists.
    pub sets: Vec<Vec<usize>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub instances_checked: usize,
    /// Inequalities or values compared.
    pub comparisons: u64,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    /// Discrepancies within Monte Carlo noise.
    pub inconclusive_count: u64,
    pub tolerance: f64,
    /// Largest `lhs - rhs` seen, over all comparisons.
    pub max_excess: f64,
    pub status: Status,
    /// The property is not guaranteed on this input, so a failure is
    /// informative rather than a bug.
    pub expected_fail: bool,
}

impl Verdict {
    fn new(property: Property, tolerance: f64) -> Self {
        Verdict {
            property,
            instances_checked: 0,
            comparisons: 0,
            violation_count: 0,
            violations: Vec::new(),
            inconclusive_count: 0,
            tolerance,
            max_excess: f64::NEG_INFINITY,
            status: Status::Pass,
            expected_fail: false,
        }
    }

    fn observe(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> Violation) {
        self.comparisons += 1;
        self.max_excess = self.max_excess.max(lhs - rhs);
        if lhs > rhs + self.tolerance {
            self.violation_count += 1;
            if self.violations.len() < MAX_WITNESSES {
                self.violations.push(witness());
            }
        }
    }

    fn finish(mut self) -> Self {
        self.status = if self.violation_count > 0 {
            Status::Fail
        } else if self.inconclusive_count > 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Combines per-instance verdicts of the same property.
    pub fn merge(property: Property, tolerance: f64, parts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::new(property, tolerance);
        for p in parts {
            out.instances_checked += p.instances_checked;
            out.comparisons += p.comparisons;
            out.violation_count += p.violation_count;
            out.inconclusive_count += p.inconclusive_count;
            out.max_excess = out.max_excess.max(p.max_excess);
            out.expected_fail |= p.expected_fail;
            let room = MAX_WITNESSES - out.violations.len();
            out.violations.extend(p.violations.into_iter().take(room));
        }
        out.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Exact(ExactOptions),
    /// Sampled seed sets, each value estimated from `runs` trajectories.
    MonteCarlo { runs: u64, samples: usize, master_seed: u64 },
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Exact(ExactOptions::default())
    }
}

fn members(n: usize, mask: u64) -> Vec<usize> {
    (0..n).filter(|&u| mask >> u & 1 == 1).collect()
}

/// `fp(S) ≤ fp(S') + tol` for every pair `S ⊊ S'`.
pub fn monotonicity_table(fp: &[f64], n: usize, tol: f64, instance: &str) -> Verdict {
    let mut v = Verdict::new(Property::Monotone, tol);
    v.instances_checked = 1;
    let full = fp.len() as u64 - 1;
    for s in 0..=full {
        let rest = full & !s;
        // nonempty submasks of the complement
        let mut add = rest;
        while add != 0 {
            let t = s | add;
            v.observe(fp[s as usize], fp[t as usize], || Violation {
                instance: instance.to_string(),
                sets: vec![members(n, s), members(n, t)],
                lhs: fp[s as usize],
                rhs: fp[t as usize],
            });
            add = (add - 1) & rest;
        }
    }
    v.finish()
}

/// `fp(S) + fp(T) ≥ fp(S ∪ T) + fp(S ∩ T) - tol` for all pairs (or the
/// reverse when `reversed`).
pub fn submodularity_table(fp: &[f64], n: usize, tol: f64, reversed: bool, instance: &str) -> Verdict {
    let property = if reversed { Property::Supermodular } else { Property::Submodular };
    let mut v = Verdict::new(property, tol);
    v.instances_checked = 1;
    let states = fp.len() as u64;
    for s in 0..states {
        for t in s + 1..states {
            let sides = fp[s as usize] + fp[t as usize];
            let joins = fp[(s | t) as usize] + fp[(s & t) as usize];
            let (lhs, rhs) = if reversed { (sides, joins) } else { (joins, sides) };
            v.observe(lhs, rhs, || Violation {
                instance: instance.to_string(),
                sets: vec![members(n, s), members(n, t)],
                lhs,
                rhs,
            });
        }
    }
    v.finish()
}

/// Which inequality the bias of `g` guarantees, if any.
pub fn expected_direction(g: &FitnessGraph) -> Option<Property> {
    if g.is_mutant_biased() {
        Some(Property::Submodular)
    } else if g.is_resident_biased() {
        Some(Property::Supermodular)
    } else {
        None
    }
}

pub fn check_monotonicity(g: &FitnessGraph, mode: &Mode, tol: f64, instance: &str) -> Result<Verdict> {
    match mode {
        Mode::Exact(opts) => {
            let table = exact::solve(g, opts)?;
            Ok(monotonicity_table(&table.fp, g.n(), tol, instance))
        }
        Mode::MonteCarlo {
            runs,
            samples,
            master_seed,
        } => {
            let mut rng = stream_rng(*master_seed, u64::MAX);
            let n = g.n();
            let pairs: Vec<(Configuration, Configuration)> = (0..*samples)
                .map(|_| {
                    let s = random_subset(n, &mut rng);
                    let mut t = s.clone();
                    let extra: Vec<usize> = (0..n).filter(|&u| !s.contains(u)).collect();
                    if let Some(&u) = extra.get(rng.gen_range(0..extra.len().max(1))) {
                        t.insert(u);
                    }
                    (s, t)
                })
                .collect();
            let mut v = Verdict::new(Property::Monotone, tol);
            v.instances_checked = 1;
            for (i, (s, t)) in pairs.iter().enumerate() {
                let cfg = EstimatorConfig::with_runs(*runs, derive_seed(*master_seed, i as u64));
                let a = estimate_fp(g, s, &cfg)?;
                let b = estimate_fp(g, t, &cfg)?;
                let se = (se2(a.fp_hat, a.runs - a.capped_runs) + se2(b.fp_hat, b.runs - b.capped_runs)).sqrt();
                let witness = || Violation {
                    instance: instance.to_string(),
                    sets: vec![s.iter().collect(), t.iter().collect()],
                    lhs: a.fp_hat,
                    rhs: b.fp_hat,
                };
                v.comparisons += 1;
                v.max_excess = v.max_excess.max(a.fp_hat - b.fp_hat);
                if a.fp_hat > b.fp_hat + tol + MC_SIGMAS * se {
                    v.violation_count += 1;
                    if v.violations.len() < MAX_WITNESSES {
                        v.violations.push(witness());
                    }
                } else if a.fp_hat > b.fp_hat + tol {
                    v.inconclusive_count += 1;
                }
            }
            Ok(v.finish())
        }
    }
}

fn se2(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        0.25
    } else {
        p * (1.0 - p) / trials as f64
    }
}

fn random_subset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Configuration {
    let mut c = Configuration::empty(n);
    for u in 0..n {
        if rng.gen_bool(0.5) {
            c.insert(u);
        }
    }
    c
}

/// Checks the inequality the graph's bias guarantees. Graphs that are
/// neither mutant- nor resident-biased are checked for submodularity and
/// flagged `expected_fail`. Exact mode only.
pub fn check_submodularity(g: &FitnessGraph, mode: &Mode, tol: f64, instance: &str) -> Result<Verdict> {
    let Mode::Exact(opts) = mode else {
        return Err(Error::NotApplicable("submodularity is checked on exact values only"));
    };
    let table = exact::solve(g, opts)?;
    let direction = expected_direction(g);
    let reversed = direction == Some(Property::Supermodular);
    let mut v = submodularity_table(&table.fp, g.n(), tol, reversed, instance);
    v.expected_fail = direction.is_none();
    Ok(v)
}

/// Exact fixation under the base and the Loopy kernels, for every seed set.
pub fn check_loopy_equivalence(g: &FitnessGraph, opts: &ExactOptions, tol: f64, instance: &str) -> Result<Verdict> {
    let base = exact::solve(g, opts)?;
    let loopy = exact::solve_loopy(&LoopyKernel::new(g), opts)?;
    let n = g.n();
    let mut v = Verdict::new(Property::Loopy, tol);
    v.instances_checked = 1;
    for (mask, (a, b)) in base.fp.iter().zip(&loopy.fp).enumerate() {
        v.observe((a - b).abs(), 0.0, || Violation {
            instance: instance.to_string(),
            sets: vec![members(n, mask as u64)],
            lhs: *a,
            rhs: *b,
        });
    }
    Ok(v.finish())
}

/// The expected one-step change of `Φ(X) = Σ_{u ∈ X} m(u)/d(u)`, from
/// the exact transition law.
pub fn potential_drift(g: &FitnessGraph, x: &Configuration) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::DirectedGraphUnsupported);
    }
    Ok(flip_probabilities(g, x)
        .into_iter()
        .map(|(v, p)| {
            let phi_v = g.mutant_fitness(v) / g.degree(v) as f64;
            if x.contains(v) {
                -p * phi_v
            } else {
                p * phi_v
            }
        })
        .sum())
}

/// `E[ΔΦ] ≥ -tol` at every non-absorbing configuration.
pub fn check_drift(g: &FitnessGraph, tol: f64, instance: &str) -> Result<Verdict> {
    if g.n() > 20 {
        return Err(Error::TooLarge { n: g.n(), cap: 20 });
    }
    let n = g.n();
    let mut v = Verdict::new(Property::Drift, tol);
    v.instances_checked = 1;
    v.expected_fail = !g.is_mutant_biased();
    for mask in 1..(1u64 << n) - 1 {
        let drift = potential_drift(g, &Configuration::from_mask(n, mask))?;
        v.observe(0.0, drift, || Violation {
            instance: instance.to_string(),
            sets: vec![members(n, mask)],
            lhs: 0.0,
            rhs: drift,
        });
    }
    Ok(v.finish())
}

/// Mean absorption steps over `runs` trajectories against the expected-time
/// bound, for `seed_sets` random nonempty proper seed sets.
pub fn check_time_bound(
    g: &FitnessGraph,
    runs: u64,
    seed_sets: usize,
    master_seed: u64,
    instance: &str,
) -> Result<Verdict> {
    let bound = lemma1_step_bound(g, BOUND_CAP_CEILING)?;
    let n = g.n();
    let mut v = Verdict::new(Property::Timebound, 0.0);
    v.instances_checked = 1;
    if n < 2 {
        return Ok(v.finish());
    }
    let mut rng = stream_rng(master_seed, u64::MAX);
    for i in 0..seed_sets {
        let seed = loop {
            let s = random_subset(n, &mut rng);
            if !s.is_absorbing() {
                break s;
            }
        };
        let cfg = EstimatorConfig {
            step_cap: Some(bound),
            ..EstimatorConfig::with_runs(runs, derive_seed(master_seed, i as u64))
        };
        let est = estimate_fp(g, &seed, &cfg)?;
        // a capped run took at least `bound` steps on its own
        let mean = if est.capped_runs > 0 { f64::INFINITY } else { est.mean_steps };
        v.observe(mean, bound as f64, || Violation {
            instance: instance.to_string(),
            sets: vec![seed.iter().collect()],
            lhs: mean,
            rhs: bound as f64,
        });
    }
    Ok(v.finish())
}

/// Parameters of a sweep over random instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub property: Property,
    pub family: Family,
    pub instances: usize,
    pub master_seed: u64,
    pub tolerance: f64,
    /// Trajectories per seed set for the time bound.
    pub runs: u64,
    pub seed_sets: usize,
    pub exact: ExactOptions,
    pub execution: Execution,
}

impl SweepSpec {
    /// The default family for a property: the graphs on which it is
    /// guaranteed to hold.
    pub fn new(property: Property, n_max: usize, instances: usize, master_seed: u64) -> Self {
        use FitnessKind::*;
        let family = match property {
            Property::Monotone | Property::Loopy => Family::new(2, n_max, &FitnessKind::ALL),
            Property::Submodular => Family::new(2, n_max, &[MutantBiased]),
            Property::Supermodular => Family::new(2, n_max, &[ResidentBiased]),
            Property::Drift | Property::Timebound => Family::new(2, n_max, &[MutantBiased, Neutral]).undirected(),
        };
        SweepSpec {
            property,
            family,
            instances,
            master_seed,
            tolerance: if property == Property::Timebound { 0.0 } else { DEFAULT_TOLERANCE },
            runs: 10_000,
            seed_sets: 1,
            exact: ExactOptions {
                execution: Execution::Sequential,
                ..ExactOptions::default()
            },
            execution: Execution::default(),
        }
    }
}

/// Runs one property check on every instance of the family, in parallel
/// across instances, and merges the verdicts.
pub fn sweep(spec: &SweepSpec) -> Result<Verdict> {
    let descriptors = spec.family.descriptors(spec.instances, spec.master_seed)?;
    let parts = exec::try_map_indices(spec.execution, descriptors.len(), |i| {
        check_instance(spec, &descriptors[i])
    })?;
    Ok(Verdict::merge(spec.property, spec.tolerance, parts))
}

pub fn check_instance(spec: &SweepSpec, d: &InstanceDescriptor) -> Result<Verdict> {
    let g = d.build()?;
    let label = d.to_string();
    let mode = Mode::Exact(spec.exact);
    match spec.property {
        Property::Monotone => check_monotonicity(&g, &mode, spec.tolerance, &label),
        Property::Submodular | Property::Supermodular => {
            let table = exact::solve(&g, &spec.exact)?;
            let reversed = spec.property == Property::Supermodular;
            let mut v = submodularity_table(&table.fp, g.n(), spec.tolerance, reversed, &label);
            v.expected_fail = expected_direction(&g) != Some(spec.property);
            Ok(v)
        }
        Property::Loopy => check_loopy_equivalence(&g, &spec.exact, spec.tolerance, &label),
        Property::Drift => check_drift(&g, spec.tolerance, &label),
        Property::Timebound => check_time_bound(&g, spec.runs, spec.seed_sets, d.seed, &label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(e: &[(usize, usize)], m: Vec<f64>, r: Vec<f64>) -> FitnessGraph {
        let edges: Vec<_> = e.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        FitnessGraph::build(&edges, false, m, r).unwrap()
    }

    fn k3() -> FitnessGraph {
        undirected(&[(0, 1), (1, 2), (0, 2)], vec![1.0; 3], vec![1.0; 3])
    }

    #[test]
    fn neutral_triangle_passes_everything() {
        let g = k3();
        let mode = Mode::default();
        assert!(check_monotonicity(&g, &mode, DEFAULT_TOLERANCE, "k3").unwrap().passed());
        let v = check_submodularity(&g, &mode, DEFAULT_TOLERANCE, "k3").unwrap();
        assert!(v.passed());
        // linear, so the inequality is tight everywhere
        assert!(v.max_excess.abs() < 1e-12);
        assert!(check_loopy_equivalence(&g, &ExactOptions::default(), 1e-10, "k3").unwrap().passed());
    }

    #[test]
    fn corrupted_tables_are_caught() {
        let g = k3();
        let mut fp = exact::solve(&g, &ExactOptions::default()).unwrap().fp;
        fp[0b001] = 0.9;
        let v = monotonicity_table(&fp, 3, DEFAULT_TOLERANCE, "corrupt");
        assert_eq!(v.status, Status::Fail);
        assert_eq!(v.violations[0].sets, vec![vec![0], vec![0, 2]]);
        assert_eq!(v.violation_count, 2);
        let v = submodularity_table(&fp, 3, DEFAULT_TOLERANCE, false, "corrupt");
        assert_eq!(v.status, Status::Fail);
        // a convex bump breaks the reversed inequality instead
        let mut fp = exact::solve(&g, &ExactOptions::default()).unwrap().fp;
        fp[0b011] = 0.9;
        assert_eq!(submodularity_table(&fp, 3, DEFAULT_TOLERANCE, true, "corrupt").status, Status::Fail);
    }

    #[test]
    fn single_node_is_trivial() {
        let g = FitnessGraph::build(&[], false, vec![2.0], vec![1.0]).unwrap();
        let v = check_loopy_equivalence(&g, &ExactOptions::default(), 1e-10, "k1").unwrap();
        assert!(v.passed());
        assert_eq!(v.comparisons, 2);
    }

    #[test]
    fn drift_sign() {
        let star = undirected(&[(0, 1), (0, 2), (0, 3)], vec![1.5, 1.2, 1.0, 2.0], vec![1.0; 4]);
        assert!(check_drift(&star, 1e-12, "star").unwrap().passed());
        // closed form: Σ over opposite-type arcs (u mutant, v resident)
        // of m(u)(m(v) - r(v)) / (d(u) d(v) F)
        let x = Configuration::from_nodes(4, [0, 2]);
        let total: f64 = (0..4).map(|u| star.fitness_of(&x, u)).sum();
        let mut expected = 0.0;
        for (u, v, _) in star.arcs() {
            if x.contains(u) && !x.contains(v) {
                let (mu, mv, rv) = (star.mutant_fitness(u), star.mutant_fitness(v), star.resident_fitness(v));
                expected += mu * (mv - rv) / (star.degree(u) as f64 * star.degree(v) as f64 * total);
            }
        }
        assert!((potential_drift(&star, &x).unwrap() - expected).abs() < 1e-15);
        // resident advantage drives Φ down somewhere
        let weak = undirected(&[(0, 1), (1, 2)], vec![0.5; 3], vec![1.0; 3]);
        let v = check_drift(&weak, 1e-12, "weak").unwrap();
        assert_eq!(v.status, Status::Fail);
        assert!(v.expected_fail);
    }

    #[test]
    fn time_bound_on_k2() {
        let g = undirected(&[(0, 1)], vec![1.0; 2], vec![1.0; 2]);
        let v = check_time_bound(&g, 2000, 2, 5, "k2").unwrap();
        assert!(v.passed());
        // from one mutant K2 absorbs in exactly one step
        assert!((v.max_excess - (1.0 - 64.0)).abs() < 1e-12);
        let d = FitnessGraph::build(&[(0, 1, 1.0), (1, 0, 1.0)], true, vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(matches!(check_time_bound(&d, 10, 1, 0, "d"), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn monte_carlo_monotonicity() {
        let g = undirected(&[(0, 1), (1, 2), (2, 3), (3, 0)], vec![1.3; 4], vec![1.0; 4]);
        let mode = Mode::MonteCarlo {
            runs: 500,
            samples: 10,
            master_seed: 3,
        };
        let v = check_monotonicity(&g, &mode, 0.0, "c4").unwrap();
        assert_ne!(v.status, Status::Fail);
        assert_eq!(v.comparisons, 10);
    }

    #[test]
    fn small_sweeps_pass_and_repeat() {
        for p in [Property::Monotone, Property::Submodular, Property::Supermodular, Property::Loopy, Property::Drift] {
            let spec = SweepSpec::new(p, 5, 8, 21);
            let v = sweep(&spec).unwrap();
            assert!(v.passed(), "{p}: {v:?}");
            assert_eq!(v.instances_checked, 8);
            assert_eq!(v, sweep(&spec).unwrap());
        }
    }

    #[test]
    fn property_names() {
        for p in ["monotone", "submodular", "supermodular", "loopy", "drift", "timebound"] {
            assert_eq!(p.parse::<Property>().unwrap().name(), p);
        }
    }
}
