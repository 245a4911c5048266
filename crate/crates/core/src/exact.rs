//! Ground-truth fixation probabilities by solving the absorbing chain over
//! all `2^n` configurations.
//!
//! Configurations are integer masks. For every transient mask `X` the
//! fixation probability satisfies `(I - Q) h = b`, where `Q` holds the
//! one-step probabilities between transient masks and `b` the probability
//! of stepping straight into `V`. Each row is divided by its diagonal
//! `1 - Q(X, X)` (the total flip probability) before solving, which gives
//! the embedded jump chain and keeps rows with extreme fitness ratios
//! well scaled. Expected absorption times use the same matrix with a unit
//! right-hand side.

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::graph::FitnessGraph;
use crate::loopy::LoopyKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactOptions {
    /// Largest `n` solved by dense elimination.
    pub dense_cap: usize,
    /// Largest `n` solved at all (Gauss-Seidel above `dense_cap`).
    pub sparse_cap: usize,
    /// Residual tolerance for the iterative path.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Also solve for expected absorption times.
    pub with_times: bool,
    pub execution: Execution,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            dense_cap: 10,
            sparse_cap: 20,
            tolerance: 1e-12,
            max_sweeps: 1_000_000,
            with_times: false,
            execution: Execution::default(),
        }
    }
}

impl ExactOptions {
    pub fn with_times(mut self) -> Self {
        self.with_times = true;
        self
    }
}

/// Fixation probability (and optionally expected absorption time) for
/// every configuration, indexed by mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub n: usize,
    pub fp: Vec<f64>,
    pub expected_steps: Option<Vec<f64>>,
}

impl ExactResult {
    #[inline]
    pub fn fp_mask(&self, mask: u64) -> f64 {
        self.fp[mask as usize]
    }

    pub fn fp(&self, seed: &Configuration) -> f64 {
        self.fp_mask(seed.mask().expect("exact results cover at most 64 nodes"))
    }

    pub fn expected_steps(&self, seed: &Configuration) -> Option<f64> {
        let mask = seed.mask()? as usize;
        self.expected_steps.as_ref().map(|t| t[mask])
    }
}

/// One-step flip probabilities out of a configuration.
pub trait TransitionRows: Sync {
    fn n(&self) -> usize;
    /// Pushes `(v, p)`: the step flips node `v` with probability `p`.
    fn flips(&self, mask: u64, out: &mut Vec<(u32, f64)>);
}

/// The birth-death kernel of a fitness graph.
pub struct BaseKernel<'g>(pub &'g FitnessGraph);

impl TransitionRows for BaseKernel<'_> {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn flips(&self, mask: u64, out: &mut Vec<(u32, f64)>) {
        let g = self.0;
        let n = g.n();
        let is_mut = |u: usize| mask >> u & 1 == 1;
        let fit = |u: usize| if is_mut(u) { g.mutant_fitness(u) } else { g.resident_fitness(u) };
        let total: f64 = (0..n).map(fit).sum();
        let mut rate = [0.0f64; 64];
        for u in 0..n {
            let fu = fit(u);
            let mu = is_mut(u);
            for (v, w) in g.out_edges(u) {
                if is_mut(v) != mu {
                    rate[v] += fu * w;
                }
            }
        }
        for (v, &r) in rate.iter().enumerate().take(n) {
            if r > 0.0 {
                out.push((v as u32, r / total));
            }
        }
    }
}

/// The Loopy kernel: uniform reproducer, configuration-dependent self-loops.
impl TransitionRows for LoopyKernel<'_> {
    fn n(&self) -> usize {
        self.base().n()
    }

    fn flips(&self, mask: u64, out: &mut Vec<(u32, f64)>) {
        let g = self.base();
        let n = g.n();
        let x = Configuration::from_mask(n, mask);
        let mut prob = [0.0f64; 64];
        for u in 0..n {
            let mu = x.contains(u);
            for (v, _) in g.out_edges(u) {
                if v != u && x.contains(v) != mu {
                    prob[v] += self.weight(&x, u, v) / n as f64;
                }
            }
        }
        for (v, &p) in prob.iter().enumerate().take(n) {
            if p > 0.0 {
                out.push((v as u32, p));
            }
        }
    }
}

pub fn solve(g: &FitnessGraph, opts: &ExactOptions) -> Result<ExactResult> {
    solve_rows(&BaseKernel(g), opts)
}

pub fn solve_loopy(kernel: &LoopyKernel<'_>, opts: &ExactOptions) -> Result<ExactResult> {
    solve_rows(kernel, opts)
}

/// `fp(seed)` from a full solve.
pub fn exact_fixation(g: &FitnessGraph, seed: &Configuration) -> Result<f64> {
    Ok(solve(g, &ExactOptions::default())?.fp(seed))
}

struct Row {
    // (next mask, probability) normalized by the diagonal
    entries: Vec<(u64, f64)>,
    diag: f64,
}

fn build_rows<K: TransitionRows>(kernel: &K, exec: Execution) -> Vec<Row> {
    let n = kernel.n();
    let count = (1usize << n) - 2;
    exec::map_indices(exec, count, |i| {
        let mask = i as u64 + 1;
        let mut flips = Vec::with_capacity(n);
        kernel.flips(mask, &mut flips);
        let diag: f64 = flips.iter().map(|f| f.1).sum();
        let entries = flips
            .into_iter()
            .map(|(v, p)| (mask ^ (1u64 << v), p / diag))
            .collect();
        Row { entries, diag }
    })
}

pub fn solve_rows<K: TransitionRows>(kernel: &K, opts: &ExactOptions) -> Result<ExactResult> {
    let n = kernel.n();
    if n > opts.sparse_cap || n > 30 {
        return Err(Error::TooLarge {
            n,
            cap: opts.sparse_cap.min(30),
        });
    }
    let states = 1usize << n;
    let full = states as u64 - 1;
    let mut fp = vec![0.0; states];
    fp[states - 1] = 1.0;
    let mut times = opts.with_times.then(|| vec![0.0; states]);
    if n <= 1 {
        return Ok(ExactResult { n, fp, expected_steps: times });
    }

    let rows = build_rows(kernel, opts.execution);
    if rows.iter().any(|r| !(r.diag > 0.0)) {
        return Err(Error::SingularSystem);
    }
    let m = states - 2;
    // right-hand sides: fixation (direct jumps into V) and time (1 / diag)
    let mut b_fix = vec![0.0; m];
    let mut b_time = vec![0.0; m];
    for (i, r) in rows.iter().enumerate() {
        b_fix[i] = r.entries.iter().filter(|e| e.0 == full).map(|e| e.1).sum();
        b_time[i] = 1.0 / r.diag;
    }

    let (h, t) = if n <= opts.dense_cap {
        dense_solve(&rows, full, b_fix, opts.with_times.then_some(b_time))?
    } else {
        let h = gauss_seidel(&rows, full, &b_fix, opts)?;
        let t = if opts.with_times {
            Some(gauss_seidel(&rows, full, &b_time, opts)?)
        } else {
            None
        };
        (h, t)
    };
    for i in 0..m {
        fp[i + 1] = h[i].clamp(0.0, 1.0);
    }
    if let (Some(times), Some(t)) = (times.as_mut(), t) {
        times[1..(m + 1)].copy_from_slice(&t[..m]);
    }
    Ok(ExactResult { n, fp, expected_steps: times })
}

/// Gaussian elimination with partial pivoting on the row-normalized system.
fn dense_solve(
    rows: &[Row],
    full: u64,
    b_fix: Vec<f64>,
    b_time: Option<Vec<f64>>,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let m = rows.len();
    let nrhs = 1 + b_time.is_some() as usize;
    let w = m + nrhs;
    let mut a = vec![0.0f64; m * w];
    for (i, r) in rows.iter().enumerate() {
        let row = &mut a[i * w..(i + 1) * w];
        row[i] = 1.0;
        for &(next, p) in &r.entries {
            if next != 0 && next != full {
                row[next as usize - 1] -= p;
            }
        }
        row[m] = b_fix[i];
        if let Some(bt) = &b_time {
            row[m + 1] = bt[i];
        }
    }

    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))
            .unwrap();
        if !(a[pivot * w + col].abs() > 1e-300) {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for j in col..w {
                a.swap(pivot * w + j, col * w + j);
            }
        }
        let (upper, lower) = a.split_at_mut((col + 1) * w);
        let prow = &upper[col * w..];
        let inv = 1.0 / prow[col];
        for r in lower.chunks_exact_mut(w) {
            let f = r[col] * inv;
            if f != 0.0 {
                for j in col..w {
                    r[j] -= f * prow[j];
                }
            }
        }
    }

    let back = |c: usize| -> Vec<f64> {
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            let row = &a[i * w..(i + 1) * w];
            let mut s = row[m + c];
            for j in i + 1..m {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    };
    let h = back(0);
    let t = (nrhs == 2).then(|| back(1));
    Ok((h, t))
}

fn gauss_seidel(rows: &[Row], full: u64, b: &[f64], opts: &ExactOptions) -> Result<Vec<f64>> {
    let m = rows.len();
    let mut x = b.to_vec();
    for _ in 0..opts.max_sweeps {
        let mut change = 0.0f64;
        for i in 0..m {
            let mut s = b[i];
            for &(next, p) in &rows[i].entries {
                if next != 0 && next != full {
                    s += p * x[next as usize - 1];
                }
            }
            change = change.max((s - x[i]).abs());
            x[i] = s;
        }
        if change <= opts.tolerance * 1e-2 {
            let residual = (0..m)
                .map(|i| {
                    let s: f64 = rows[i]
                        .entries
                        .iter()
                        .filter(|e| e.0 != 0 && e.0 != full)
                        .map(|e| e.1 * x[e.0 as usize - 1])
                        .sum();
                    (x[i] - s - b[i]).abs()
                })
                .fold(0.0, f64::max);
            if residual <= opts.tolerance {
                return Ok(x);
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Gauss-Seidel",
        iterations: opts.max_sweeps,
    })
}

/// `Σ_{u∈S} 1/d(u) / Σ_v 1/d(v)` on neutral undirected graphs.
pub fn neutral_closed_form(g: &FitnessGraph, seed: &Configuration) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::NotUndirected);
    }
    if let Some(u) = (0..g.n()).find(|&u| g.mutant_fitness(u) != g.resident_fitness(u)) {
        return Err(Error::NotNeutral(u));
    }
    if g.n() == 1 {
        return Ok(if seed.is_empty() { 0.0 } else { 1.0 });
    }
    let inv = |u: usize| 1.0 / g.degree(u) as f64;
    let total: f64 = (0..g.n()).map(inv).sum();
    Ok(seed.iter().map(inv).sum::<f64>() / total)
}

fn lex_less(a: u64, b: u64) -> bool {
    // compare sorted member lists lexicographically
    let (mut a, mut b) = (a, b);
    loop {
        match (a == 0, b == 0) {
            (true, true) => return false,
            (true, false) => return true,
            (false, true) => return false,
            _ => {}
        }
        let (ta, tb) = (a.trailing_zeros(), b.trailing_zeros());
        if ta != tb {
            return ta < tb;
        }
        a &= a - 1;
        b &= b - 1;
    }
}

/// Values closer than this count as ties when ranking seed sets.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Best seed set of size at most `k` from a solved table; ties (within
/// [`TIE_TOLERANCE`]) go to the lexicographically smallest member list.
pub fn exhaustive_opt_table(table: &ExactResult, k: usize) -> (Configuration, f64) {
    let n = table.n;
    let mut best = (0u64, table.fp_mask(0));
    for mask in 1..(1u64 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let v = table.fp_mask(mask);
        if v > best.1 + TIE_TOLERANCE || ((v - best.1).abs() <= TIE_TOLERANCE && lex_less(mask, best.0)) {
            best = (mask, v);
        }
    }
    (Configuration::from_mask(n, best.0), best.1)
}

pub fn exhaustive_opt(g: &FitnessGraph, k: usize, opts: &ExactOptions) -> Result<(Configuration, f64)> {
    let table = solve(g, opts)?;
    Ok(exhaustive_opt_table(&table, k.min(g.n())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize, m: f64) -> FitnessGraph {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v, 1.0));
            }
        }
        FitnessGraph::build(&e, false, vec![m; n], vec![1.0; n]).unwrap()
    }

    fn star4() -> FitnessGraph {
        FitnessGraph::build(&[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], false, vec![1.0; 4], vec![1.0; 4])
            .unwrap()
    }

    #[test]
    fn k3_neutral_single_seed() {
        let g = complete(3, 1.0);
        for u in 0..3 {
            let p = exact_fixation(&g, &Configuration::from_nodes(3, [u])).unwrap();
            assert!((p - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn k2_with_advantage() {
        // 4-state chain: from {0} the flip of node 1 has prob 2/3, of node 0 1/3
        let g = FitnessGraph::build(&[(0, 1, 1.0)], false, vec![2.0, 2.0], vec![1.0, 1.0]).unwrap();
        let p = exact_fixation(&g, &Configuration::from_nodes(2, [0])).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-14);
        assert!(((1.0 - 0.5) / (1.0 - 0.25) - 2.0 / 3.0f64).abs() < 1e-15);
    }

    #[test]
    fn star_neutral_matches_closed_form() {
        let g = star4();
        let t = solve(&g, &ExactOptions::default()).unwrap();
        assert!((t.fp(&Configuration::from_nodes(4, [0])) - 0.1).abs() < 1e-12);
        assert!((t.fp(&Configuration::from_nodes(4, [2])) - 0.3).abs() < 1e-12);
        assert!((neutral_closed_form(&g, &Configuration::from_nodes(4, [0])).unwrap() - 0.1).abs() < 1e-15);
        assert!((neutral_closed_form(&g, &Configuration::from_nodes(4, [3])).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(neutral_closed_form(&g, &Configuration::full(4)).unwrap(), 1.0);
    }

    #[test]
    fn closed_form_preconditions() {
        let d = FitnessGraph::build(&[(0, 1, 1.0), (1, 0, 1.0)], true, vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(neutral_closed_form(&d, &Configuration::empty(2)), Err(Error::NotUndirected));
        let b = complete(3, 1.5);
        assert_eq!(neutral_closed_form(&b, &Configuration::empty(3)), Err(Error::NotNeutral(0)));
    }

    #[test]
    fn table_boundaries() {
        let g = complete(4, 1.3);
        let t = solve(&g, &ExactOptions::default()).unwrap();
        assert_eq!(t.fp_mask(0), 0.0);
        assert_eq!(t.fp_mask(15), 1.0);
        assert!(t.fp.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn k2_expected_time() {
        // from {0}: stay prob 0, absorbs in exactly one step
        let g = complete(2, 1.0);
        let t = solve(&g, &ExactOptions::default().with_times()).unwrap();
        assert!((t.expected_steps(&Configuration::from_nodes(2, [0])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iterative_agrees_with_dense() {
        let g = FitnessGraph::build(
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0), (0, 2, 1.0)],
            false,
            vec![1.4, 1.1, 0.9, 2.0, 1.0],
            vec![1.0, 1.2, 1.0, 1.0, 0.7],
        )
        .unwrap();
        let dense = solve(&g, &ExactOptions::default().with_times()).unwrap();
        let opts = ExactOptions { dense_cap: 0, ..ExactOptions::default().with_times() };
        let iter = solve(&g, &opts).unwrap();
        for mask in 0..32 {
            assert!((dense.fp[mask] - iter.fp[mask]).abs() < 1e-10);
            let (a, b) = (dense.expected_steps.as_ref().unwrap()[mask], iter.expected_steps.as_ref().unwrap()[mask]);
            assert!((a - b).abs() < 1e-8 * a.max(1.0));
        }
    }

    #[test]
    fn too_large_is_rejected() {
        let g = complete(5, 1.0);
        let opts = ExactOptions { sparse_cap: 4, ..Default::default() };
        assert_eq!(solve(&g, &opts), Err(Error::TooLarge { n: 5, cap: 4 }));
    }

    #[test]
    fn exhaustive_extremes() {
        let g = complete(4, 1.2);
        let (s, v) = exhaustive_opt(&g, 4, &ExactOptions::default()).unwrap();
        assert!(s.is_full());
        assert_eq!(v, 1.0);
        let (s, v) = exhaustive_opt(&g, 0, &ExactOptions::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(v, 0.0);
        // symmetric graph: every pair ties, smallest list wins
        let (s, _) = exhaustive_opt(&complete(4, 1.0), 2, &ExactOptions::default()).unwrap();
        assert!(s.iter().eq([0, 1]));
    }

    #[test]
    fn lexicographic_order() {
        assert!(lex_less(0b0001, 0b0011)); // [0] < [0,1]
        assert!(lex_less(0b0011, 0b0101)); // [0,1] < [0,2]
        assert!(lex_less(0b0101, 0b0010)); // [0,2] < [1]
        assert!(!lex_less(0b0010, 0b0010));
    }
}
