//! Set Cover to seed selection: the bipartite gadget graph, the fitness
//! parameters that separate covers from non-covers, and the closed-form
//! fixation bounds used to validate them.
//!
//! Bounds are evaluated in log space so that mutant fitnesses of size
//! `n^{O(n)}` never have to be materialized as floats.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::exact::{self, ExactOptions};
use crate::graph::FitnessGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub sets: Vec<Vec<u64>>,
    pub k: usize,
}

impl SetCoverInstance {
    pub fn new(sets: Vec<Vec<u64>>, k: usize) -> Result<Self> {
        let inst = SetCoverInstance { sets, k };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: SetCoverInstance = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sets.is_empty() {
            return Err(Error::EmptyGraph);
        }
        if let Some(i) = self.sets.iter().position(|s| s.is_empty()) {
            return Err(Error::EmptySet(i));
        }
        Ok(())
    }

    /// The union of all sets, ascending.
    pub fn universe(&self) -> Vec<u64> {
        self.sets
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// `|V1| + |V2|`.
    pub fn node_count(&self) -> usize {
        self.sets.len() + self.universe().len()
    }

    /// True iff the chosen sets (by index) cover the universe.
    pub fn is_cover(&self, chosen: &[usize]) -> bool {
        let covered: BTreeSet<u64> = chosen
            .iter()
            .filter_map(|&i| self.sets.get(i))
            .flatten()
            .copied()
            .collect();
        covered.len() == self.universe().len()
    }

    /// Every `k`-subset of set indices, in lexicographic order.
    pub fn k_subsets(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..m {
                cur.push(i);
                rec(i + 1, m, k, cur, out);
                cur.pop();
            }
        }
        rec(0, self.sets.len(), k, &mut cur, &mut out);
        out
    }
}

pub fn is_cover(inst: &SetCoverInstance, chosen: &[usize]) -> bool {
    inst.is_cover(chosen)
}

/// A positive real stored either directly or as an integer power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Value(f64),
    Power { base: u64, exponent: u64 },
}

impl Magnitude {
    pub fn ln(&self) -> f64 {
        match *self {
            Magnitude::Value(v) => v.ln(),
            Magnitude::Power { base, exponent } => exponent as f64 * (base as f64).ln(),
        }
    }

    /// The value as a float; `None` when it overflows.
    pub fn to_f64(&self) -> Option<f64> {
        let v = match *self {
            Magnitude::Value(v) => v,
            Magnitude::Power { base, exponent } => {
                i32::try_from(exponent).map(|e| (base as f64).powi(e)).unwrap_or(f64::INFINITY)
            }
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    General,
    #[serde(rename = "biased")]
    MutantBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    /// Mutant fitness on the set nodes.
    pub x: Magnitude,
    /// Mutant fitness on the element nodes.
    pub y: f64,
    pub regime: Regime,
}

/// Gadget graph: set nodes `0..|S|` point to their elements, every element
/// points to every set node. `r ≡ 1`, `m = x` on sets and `y` on elements.
pub fn build_reduction_graph(inst: &SetCoverInstance, params: &ReductionParams) -> Result<FitnessGraph> {
    inst.validate()?;
    let x = params
        .x
        .to_f64()
        .ok_or(Error::NotApplicable("set-node fitness overflows a double"))?;
    let universe = inst.universe();
    let s = inst.sets.len();
    let n = s + universe.len();
    let elem = |e: u64| s + universe.binary_search(&e).expect("element of the universe");
    let mut edges = Vec::new();
    for (i, set) in inst.sets.iter().enumerate() {
        for e in set.iter().copied().collect::<BTreeSet<_>>() {
            edges.push((i, elem(e), 1.0));
        }
    }
    for v in s..n {
        for u in 0..s {
            edges.push((v, u, 1.0));
        }
    }
    let mut mutant = vec![x; s];
    mutant.resize(n, params.y);
    let g = FitnessGraph::build(&uniform_rows(n, &edges), true, mutant, vec![1.0; n])?;
    let mut labels: Vec<String> = (0..s).map(|i| format!("S{}", i + 1)).collect();
    labels.extend(universe.iter().map(|e| e.to_string()));
    g.with_labels(labels)
}

fn uniform_rows(n: usize, edges: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut deg = vec![0usize; n];
    for &(u, _, _) in edges {
        deg[u] += 1;
    }
    edges.iter().map(|&(u, v, _)| (u, v, 1.0 / deg[u] as f64)).collect()
}

/// `ln(ln(1 + e^a))`.
fn ln_ln1p_exp(a: f64) -> f64 {
    if a > 30.0 {
        (a + (-a).exp().ln_1p()).ln()
    } else if a < -30.0 {
        a - a.exp() / 2.0
    } else {
        a.exp().ln_1p().ln()
    }
}

/// `ln(-ln(1 - e^a))` for `a < 0`.
fn ln_neg_ln1m_exp(a: f64) -> f64 {
    if a < -30.0 {
        a + a.exp() / 2.0
    } else {
        (-(-a.exp()).ln_1p()).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Bounds {
    /// Upper bound on fp for seed sets that are not covers.
    pub upper_if_not_cover: f64,
    /// Lower bound on fp for seed sets that are covers.
    pub lower_if_cover: f64,
    /// `ln(1 - upper)`.
    pub ln_one_minus_upper: f64,
    /// `ln(-ln(lower))`, finite even when `lower` rounds to 1.
    pub ln_neg_ln_lower: f64,
}

/// Closed-form bounds for the gadget on `n` total nodes.
///
/// Not a cover: `1 - (1 / (1 + n(n-1)y))^n`.
/// Cover: `x2^n` with `α = (x / (x + n²))^n`, `q = y / n²` and
/// `x2 = qα / (1 - (1-q)α) = 1 / (1 + (1-α)/(qα))`.
pub fn lemma2_bounds(n: usize, x: Magnitude, y: f64) -> Lemma2Bounds {
    let nf = n as f64;
    let ln_one_minus_upper = -nf * (nf * (nf - 1.0) * y).ln_1p();
    let ln_n = nf.ln();
    // L = -ln α = n·ln(1 + n²/x)
    let ln_t = 2.0 * ln_n - x.ln();
    let ln_l = ln_n + ln_ln1p_exp(ln_t);
    let l = ln_l.exp();
    let ln_one_minus_alpha = if ln_l < -30.0 { ln_l - l / 2.0 } else { (-(-l).exp_m1()).ln() };
    let ln_q = y.ln() - 2.0 * ln_n;
    // z = (1-α)/(qα); -ln(lower) = n·ln(1 + z)
    let ln_z = ln_one_minus_alpha - ln_q + l;
    let ln_neg_ln_lower = ln_n + ln_ln1p_exp(ln_z);
    Lemma2Bounds {
        upper_if_not_cover: -ln_one_minus_upper.exp_m1(),
        lower_if_cover: (-ln_neg_ln_lower.exp()).exp(),
        ln_one_minus_upper,
        ln_neg_ln_lower,
    }
}

impl Lemma2Bounds {
    /// `upper ≤ eps` and `lower > 1 - eps`.
    pub fn separates_general(&self, eps: f64) -> bool {
        self.upper_if_not_cover <= eps && self.ln_neg_ln_lower < ln_neg_ln1m_exp(eps.ln())
    }

    /// `upper ≤ 1 - n^{-2n}` and `lower > 1 - n^{-2n}`.
    pub fn separates_biased(&self, n: usize) -> bool {
        let ln_delta = -2.0 * n as f64 * (n as f64).ln();
        self.ln_one_minus_upper >= ln_delta && self.ln_neg_ln_lower < ln_neg_ln1m_exp(ln_delta)
    }
}

const MAX_ADJUSTMENTS: usize = 200;

/// Parameters for which non-covers stay below `eps` and covers exceed
/// `1 - eps`, on a gadget with `n` nodes in total.
///
/// Starts from `y = c / (n · n(n-1))` and `x = n³ / ln(1 + c·y/n³)` with
/// `c = ln(1 / (1 - eps))`, then shrinks `y` or grows `x` until both
/// inequalities check out numerically.
pub fn params_general(n: usize, eps: f64) -> Result<ReductionParams> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if n < 2 {
        return Err(Error::InvalidConfig(format!("gadget needs at least 2 nodes, got {n}")));
    }
    let nf = n as f64;
    let c = -(-eps).ln_1p();
    let mut y = c / (nf * nf * (nf - 1.0));
    let n3 = nf.powi(3);
    let x_for = |y: f64| n3 / (c * y / n3).ln_1p();
    let mut x = x_for(y);
    for _ in 0..MAX_ADJUSTMENTS {
        let b = lemma2_bounds(n, Magnitude::Value(x), y);
        if b.separates_general(eps) {
            return Ok(ReductionParams {
                x: Magnitude::Value(x),
                y,
                regime: Regime::General,
            });
        }
        if b.upper_if_not_cover > eps {
            y /= 2.0;
            x = x.max(x_for(y));
        } else {
            x *= 2.0;
        }
    }
    Err(Error::NoConvergence {
        what: "gadget parameter search",
        iterations: MAX_ADJUSTMENTS,
    })
}

/// Mutant-biased parameters: `y = 1`, `x = n^7 · n^{2n}`.
pub fn params_mutant_biased(n: usize) -> Result<ReductionParams> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("gadget needs at least 2 nodes, got {n}")));
    }
    Ok(ReductionParams {
        x: Magnitude::Power {
            base: n as u64,
            exponent: 2 * n as u64 + 7,
        },
        y: 1.0,
        regime: Regime::MutantBiased,
    })
}

pub fn params_for(regime: Regime, n: usize, eps: f64) -> Result<ReductionParams> {
    match regime {
        Regime::General => params_general(n, eps),
        Regime::MutantBiased => params_mutant_biased(n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSetValue {
    pub sets: Vec<usize>,
    pub is_cover: bool,
    pub fp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub n: usize,
    pub params: ReductionParams,
    pub bounds: Lemma2Bounds,
    /// Every size-`k` seed set inside the set nodes.
    pub seed_sets: Vec<SeedSetValue>,
}

impl SeparationReport {
    pub fn min_cover_fp(&self) -> Option<f64> {
        self.seed_sets.iter().filter(|s| s.is_cover).map(|s| s.fp).reduce(f64::min)
    }

    pub fn max_non_cover_fp(&self) -> Option<f64> {
        self.seed_sets.iter().filter(|s| !s.is_cover).map(|s| s.fp).reduce(f64::max)
    }

    /// Every cover beats every non-cover.
    pub fn separated(&self) -> bool {
        match (self.min_cover_fp(), self.max_non_cover_fp()) {
            (Some(lo), Some(hi)) => lo > hi,
            _ => true,
        }
    }

    /// Every exact value lies on the right side of its bound.
    pub fn bracketed(&self) -> bool {
        self.seed_sets.iter().all(|s| {
            if s.is_cover {
                s.fp >= self.bounds.lower_if_cover
            } else {
                s.fp <= self.bounds.upper_if_not_cover
            }
        })
    }
}

/// Solves the gadget exactly and evaluates every size-`k` seed set drawn
/// from the set nodes.
pub fn separation(inst: &SetCoverInstance, params: &ReductionParams, opts: &ExactOptions) -> Result<SeparationReport> {
    let g = build_reduction_graph(inst, params)?;
    let table = exact::solve(&g, opts)?;
    let seed_sets = inst
        .k_subsets(inst.k)
        .into_iter()
        .map(|sets| {
            let cfg = Configuration::from_nodes(g.n(), sets.iter().copied());
            SeedSetValue {
                is_cover: inst.is_cover(&sets),
                fp: table.fp(&cfg),
                sets,
            }
        })
        .collect();
    Ok(SeparationReport {
        n: g.n(),
        params: *params,
        bounds: lemma2_bounds(g.n(), params.x, params.y),
        seed_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_sets() -> SetCoverInstance {
        SetCoverInstance::new(vec![vec![1, 4], vec![1, 2, 4], vec![3, 5]], 2).unwrap()
    }

    #[test]
    fn gadget_graph_shape() {
        let params = ReductionParams {
            x: Magnitude::Value(3.0),
            y: 0.5,
            regime: Regime::General,
        };
        let g = build_reduction_graph(&three_sets(), &params).unwrap();
        assert_eq!(g.n(), 8);
        assert_eq!(g.arc_count(), 22);
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.weight(1, 3), 1.0 / 3.0);
        assert_eq!(g.degree(5), 3);
        assert_eq!(g.mutant()[..3], [3.0; 3]);
        assert_eq!(g.mutant()[3..], [0.5; 5]);
        assert_eq!(g.label(0), "S1");
        assert_eq!(g.label(7), "5");
    }

    #[test]
    fn singleton_instance() {
        let inst = SetCoverInstance::new(vec![vec![1]], 1).unwrap();
        let g = build_reduction_graph(&inst, &params_mutant_biased(2).unwrap()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.arc_count(), 2);
        assert!(g.is_mutant_biased());
    }

    #[test]
    fn covers() {
        let inst = three_sets();
        assert!(inst.is_cover(&[0, 1, 2]));
        assert!(!inst.is_cover(&[]));
        assert!(inst.is_cover(&[1, 2]));
        assert!(!inst.is_cover(&[0, 1]));
        let covers: Vec<_> = inst.k_subsets(2).into_iter().filter(|s| inst.is_cover(s)).collect();
        assert_eq!(covers, vec![vec![1, 2]]);
    }

    #[test]
    fn invalid_instances() {
        assert_eq!(SetCoverInstance::new(vec![vec![1], vec![]], 1), Err(Error::EmptySet(1)));
        assert!(SetCoverInstance::from_json(r#"{"sets": [[1, 2]], "k": 1}"#).is_ok());
        assert!(matches!(SetCoverInstance::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn general_params_satisfy_both_bounds() {
        for n in [2, 3, 5, 8, 20, 100] {
            for eps in [0.01, 0.1, 0.25, 0.4, 0.49] {
                let p = params_general(n, eps).unwrap();
                let b = lemma2_bounds(n, p.x, p.y);
                assert!(b.upper_if_not_cover <= eps, "n={n} eps={eps}");
                assert!(b.lower_if_cover > 1.0 - eps, "n={n} eps={eps}");
            }
        }
        assert_eq!(params_general(8, 0.5), Err(Error::EpsOutOfRange(0.5)));
        assert_eq!(params_general(8, 0.0), Err(Error::EpsOutOfRange(0.0)));
    }

    #[test]
    fn general_params_are_polynomial() {
        // y·n³ → c and x·c²/n^9 → 1, so y = Θ(1/n³) and x = O(n^10)
        let eps: f64 = 0.25;
        let c = -(-eps).ln_1p();
        for n in [10usize, 40, 160, 640] {
            let p = params_general(n, eps).unwrap();
            let nf = n as f64;
            let y_scaled = p.y * nf.powi(3) / c;
            assert!((1.0..1.2).contains(&y_scaled), "n={n}: {y_scaled}");
            let x_scaled = p.x.to_f64().unwrap() * c * c / nf.powi(9);
            assert!(x_scaled > 0.8 && x_scaled < 1.0, "n={n}: {x_scaled}");
        }
    }

    #[test]
    fn biased_params_separate_in_log_space() {
        for n in [2usize, 3, 8, 30, 200, 5000] {
            let p = params_mutant_biased(n).unwrap();
            assert_eq!(p.y, 1.0);
            let b = lemma2_bounds(n, p.x, p.y);
            assert!(b.separates_biased(n), "n={n}: {b:?}");
        }
        // the exponent is too large for a double from n = 100 on
        assert!(params_mutant_biased(100).unwrap().x.to_f64().is_none());
    }

    #[test]
    fn bound_limits() {
        let b = lemma2_bounds(6, Magnitude::Value(10.0), 1e-300);
        assert!(b.upper_if_not_cover < 1e-290);
        let b = lemma2_bounds(6, Magnitude::Power { base: 10, exponent: 400 }, 1.0);
        assert_eq!(b.lower_if_cover, 1.0);
        assert!(b.ln_neg_ln_lower.is_finite());
    }

    #[test]
    fn bounds_are_monotone() {
        let n = 7;
        let ys: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
        for w in ys.windows(2) {
            let a = lemma2_bounds(n, Magnitude::Value(5.0), w[0]).upper_if_not_cover;
            let b = lemma2_bounds(n, Magnitude::Value(5.0), w[1]).upper_if_not_cover;
            assert!(a < b);
        }
        let xs: Vec<f64> = (0..40).map(|i| 1.0 * 1.5f64.powi(i)).collect();
        for w in xs.windows(2) {
            let a = lemma2_bounds(n, Magnitude::Value(w[0]), 0.3);
            let b = lemma2_bounds(n, Magnitude::Value(w[1]), 0.3);
            assert!(a.ln_neg_ln_lower > b.ln_neg_ln_lower);
            assert!(a.lower_if_cover <= b.lower_if_cover);
        }
    }

    #[test]
    fn log_space_matches_direct_formula() {
        for (n, x, y) in [(3usize, 4.0, 0.5), (5, 50.0, 0.9), (8, 1e4, 0.01)] {
            let nf = n as f64;
            let alpha = (x / (x + nf * nf)).powf(nf);
            let q = y / (nf * nf);
            let direct = (q * alpha / (1.0 - (1.0 - q) * alpha)).powf(nf);
            let b = lemma2_bounds(n, Magnitude::Value(x), y);
            assert!((b.lower_if_cover - direct).abs() < 1e-12 * direct.max(1e-300));
            let upper = 1.0 - ((1.0 / nf) / (1.0 / nf + (nf - 1.0) * y)).powf(nf);
            assert!((b.upper_if_not_cover - upper).abs() < 1e-12);
        }
    }
}
