//! Fitness graphs: a strongly connected weighted digraph with per-node
//! mutant and resident fitness.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};

/// Out-weights within this distance of summing to 1 are kept as given.
const SUM_EXACT_TOL: f64 = 1e-12;
/// Out-weights within this distance are renormalized; beyond it they are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessSummary {
    pub m_max: f64,
    pub r_min: f64,
    /// Largest fitness of either type.
    pub f_max: f64,
}

/// An immutable fitness graph in compressed sparse row layout.
#[derive(Clone, PartialEq)]
pub struct FitnessGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    // Running sums of `weights` per row, for neighbor sampling.
    cumulative: Vec<f64>,
    uniform_rows: Vec<bool>,
    directed: bool,
    mutant: Vec<f64>,
    resident: Vec<f64>,
    labels: Vec<String>,
}

impl fmt::Debug for FitnessGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FitnessGraph")
            .field("n", &self.n())
            .field("arcs", &self.arc_count())
            .field("directed", &self.directed)
            .finish()
    }
}

impl FitnessGraph {
    /// Builds and validates a fitness graph.
    ///
    /// For undirected input each listed pair yields both arcs and the given
    /// weights are ignored: every node spreads uniformly over its neighbors.
    /// Directed input must give per-node out-weights summing to 1 within
    /// [`RENORMALIZE_TOL`].
    pub fn build(
        edges: &[(usize, usize, f64)],
        directed: bool,
        mutant: Vec<f64>,
        resident: Vec<f64>,
    ) -> Result<Self> {
        let n = mutant.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if resident.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: resident.len(),
            });
        }
        for u in 0..n {
            let (m, r) = (mutant[u], resident[u]);
            if !(m > 0.0 && r > 0.0 && m.is_finite() && r.is_finite()) {
                return Err(Error::NonPositiveFitness {
                    node: u,
                    mutant: m,
                    resident: r,
                });
            }
        }

        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if directed {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::BadWeight { u, v, weight: w });
                }
                if !seen.insert((u, v)) {
                    return Err(Error::DuplicateEdge(u, v));
                }
                rows[u].push((v as u32, w));
            } else {
                let key = (u.min(v), u.max(v));
                if seen.insert(key) {
                    rows[u].push((v as u32, 0.0));
                    rows[v].push((u as u32, 0.0));
                }
            }
        }

        for (u, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                if n == 1 {
                    continue;
                }
                return Err(Error::DanglingNode(u));
            }
            row.sort_by_key(|&(v, _)| v);
            if directed {
                let sum: f64 = row.iter().map(|&(_, w)| w).sum();
                let off = (sum - 1.0).abs();
                if off > RENORMALIZE_TOL {
                    return Err(Error::BadDistribution { node: u, sum });
                }
                if off > SUM_EXACT_TOL {
                    for e in row.iter_mut() {
                        e.1 /= sum;
                    }
                }
            } else {
                let w = 1.0 / row.len() as f64;
                for e in row.iter_mut() {
                    e.1 = w;
                }
            }
        }

        let g = Self::from_rows(rows, directed, mutant, resident);
        g.check_strongly_connected()?;
        Ok(g)
    }

    fn from_rows(
        rows: Vec<Vec<(u32, f64)>>,
        directed: bool,
        mutant: Vec<f64>,
        resident: Vec<f64>,
    ) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut cumulative = Vec::new();
        let mut uniform_rows = Vec::with_capacity(n);
        offsets.push(0);
        for row in rows {
            let first = row.first().map(|e| e.1);
            uniform_rows.push(row.iter().all(|e| Some(e.1) == first));
            let mut acc = 0.0;
            for (v, w) in row {
                targets.push(v);
                weights.push(w);
                acc += w;
                cumulative.push(acc);
            }
            offsets.push(targets.len());
        }
        FitnessGraph {
            offsets,
            targets,
            weights,
            cumulative,
            uniform_rows,
            directed,
            mutant,
            resident,
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    /// Replaces the node labels used for output.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// Same structure, new fitness values.
    pub fn with_fitness(&self, mutant: Vec<f64>, resident: Vec<f64>) -> Result<Self> {
        let n = self.n();
        for got in [mutant.len(), resident.len()] {
            if got != n {
                return Err(Error::LengthMismatch { expected: n, got });
            }
        }
        for u in 0..n {
            let (m, r) = (mutant[u], resident[u]);
            if !(m > 0.0 && r > 0.0 && m.is_finite() && r.is_finite()) {
                return Err(Error::NonPositiveFitness {
                    node: u,
                    mutant: m,
                    resident: r,
                });
            }
        }
        let mut g = self.clone();
        g.mutant = mutant;
        g.resident = resident;
        Ok(g)
    }

    /// Positional variant: residents have fitness 1, mutants on `active`
    /// nodes have fitness `1 + delta`, all other mutants 1.
    pub fn make_positional(&self, active: &Configuration, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::NegativeDelta(delta));
        }
        let n = self.n();
        if active.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: active.len(),
            });
        }
        let mutant = (0..n)
            .map(|u| if active.contains(u) { 1.0 + delta } else { 1.0 })
            .collect();
        self.with_fitness(mutant, vec![1.0; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.mutant.len()
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Out-degree; the degree for undirected graphs.
    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    #[inline]
    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&v, &w)| (v as usize, w))
    }

    /// `w(u, v)`, zero when there is no arc.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let range = self.offsets[u]..self.offsets[u + 1];
        match self.targets[range.clone()].binary_search(&(v as u32)) {
            Ok(i) => self.weights[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |u| self.out_edges(u).map(move |(v, w)| (u, v, w)))
    }

    /// Draws `v` with probability `w(u, v)`.
    #[inline]
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        let (start, end) = (self.offsets[u], self.offsets[u + 1]);
        debug_assert!(end > start);
        if self.uniform_rows[u] {
            return self.targets[start + rng.gen_range(0..end - start)] as usize;
        }
        let cum = &self.cumulative[start..end];
        let t = rng.gen::<f64>() * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= t).min(cum.len() - 1);
        self.targets[start + i] as usize
    }

    #[inline]
    pub fn mutant_fitness(&self, u: usize) -> f64 {
        self.mutant[u]
    }

    #[inline]
    pub fn resident_fitness(&self, u: usize) -> f64 {
        self.resident[u]
    }

    pub fn mutant(&self) -> &[f64] {
        &self.mutant
    }

    pub fn resident(&self) -> &[f64] {
        &self.resident
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, u: usize) -> &str {
        &self.labels[u]
    }

    /// `f_X(u)`: mutant fitness if `u` is in `x`, resident fitness otherwise.
    #[inline]
    pub fn fitness_of(&self, x: &Configuration, u: usize) -> f64 {
        if x.contains(u) {
            self.mutant[u]
        } else {
            self.resident[u]
        }
    }

    pub fn is_mutant_biased(&self) -> bool {
        self.mutant.iter().zip(&self.resident).all(|(m, r)| m >= r)
    }

    pub fn is_resident_biased(&self) -> bool {
        self.mutant.iter().zip(&self.resident).all(|(m, r)| m <= r)
    }

    pub fn is_neutral(&self) -> bool {
        self.mutant.iter().zip(&self.resident).all(|(m, r)| m == r)
    }

    pub fn summary(&self) -> FitnessSummary {
        let m_max = self.mutant.iter().copied().fold(f64::MIN, f64::max);
        let r_min = self.resident.iter().copied().fold(f64::MAX, f64::min);
        let r_max = self.resident.iter().copied().fold(f64::MIN, f64::max);
        FitnessSummary {
            m_max,
            r_min,
            f_max: m_max.max(r_max),
        }
    }

    fn check_strongly_connected(&self) -> Result<()> {
        let comps = strongly_connected_components(self.n(), |u| {
            self.targets[self.offsets[u]..self.offsets[u + 1]]
                .iter()
                .map(|&v| v as usize)
        });
        if comps.len() == 1 {
            return Ok(());
        }
        let largest = comps.iter().max_by_key(|c| c.len()).unwrap();
        Err(Error::NotStronglyConnected {
            components: comps.len(),
            largest: largest.len(),
            largest_members: describe_members(largest, &self.labels),
        })
    }
}

pub(crate) fn describe_members(members: &[usize], labels: &[String]) -> String {
    const SHOWN: usize = 8;
    let mut s: Vec<&str> = members
        .iter()
        .take(SHOWN)
        .map(|&u| labels[u].as_str())
        .collect();
    if members.len() > SHOWN {
        s.push("...");
    }
    s.join(",")
}

/// Tarjan's algorithm without recursion. Components come out in reverse
/// topological order; members are sorted.
pub fn strongly_connected_components<F, I>(n: usize, succ: F) -> Vec<Vec<usize>>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0;
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, succ(root).collect(), 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some((v, succs, pos)) = call.last_mut() {
            let v = *v;
            if *pos < succs.len() {
                let w = succs[*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w).collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some((parent, _, _)) = call.last() {
                low[*parent] = low[*parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> FitnessGraph {
        FitnessGraph::build(
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
            false,
            vec![1.0; 3],
            vec![1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn undirected_triangle_is_uniform() {
        let g = triangle();
        assert_eq!(g.arc_count(), 6);
        for (_, _, w) in g.arcs() {
            assert_eq!(w, 0.5);
        }
    }

    #[test]
    fn single_arc_is_not_strongly_connected() {
        let err = FitnessGraph::build(&[(0, 1, 1.0)], true, vec![1.0; 2], vec![1.0; 2]);
        assert!(matches!(err, Err(Error::DanglingNode(1))));
        let err = FitnessGraph::build(
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
            true,
            vec![1.0; 3],
            vec![1.0; 3],
        );
        assert!(matches!(
            err,
            Err(Error::NotStronglyConnected { components: 2, largest: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let e = [(0, 1, 1.0), (1, 0, 1.0)];
        assert!(matches!(
            FitnessGraph::build(&e, true, vec![1.0, 0.0], vec![1.0; 2]),
            Err(Error::NonPositiveFitness { node: 1, .. })
        ));
        assert!(matches!(
            FitnessGraph::build(&[(0, 1, 0.9), (1, 0, 1.0)], true, vec![1.0; 2], vec![1.0; 2]),
            Err(Error::BadDistribution { node: 0, .. })
        ));
        assert!(matches!(
            FitnessGraph::build(&[(0, 0, 1.0)], true, vec![1.0], vec![1.0]),
            Err(Error::SelfLoop(0))
        ));
        assert!(matches!(
            FitnessGraph::build(&[(0, 1, 0.5), (0, 1, 0.5), (1, 0, 1.0)], true, vec![1.0; 2], vec![1.0; 2]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            FitnessGraph::build(&e, true, vec![1.0; 2], vec![1.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn renormalizes_small_drift() {
        let g = FitnessGraph::build(
            &[(0, 1, 0.5 + 4e-10), (0, 2, 0.5), (1, 0, 1.0), (2, 0, 1.0)],
            true,
            vec![1.0; 3],
            vec![1.0; 3],
        )
        .unwrap();
        let s: f64 = g.out_edges(0).map(|e| e.1).sum();
        assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn single_node_graph() {
        let g = FitnessGraph::build(&[], false, vec![2.0], vec![1.0]).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.degree(0), 0);
    }

    #[test]
    fn mutant_bias() {
        let k2 = |m: Vec<f64>| FitnessGraph::build(&[(0, 1, 1.0)], false, m, vec![1.0, 1.0]).unwrap();
        assert!(k2(vec![1.1, 1.0]).is_mutant_biased());
        assert!(!k2(vec![0.9, 2.0]).is_mutant_biased());
        assert!(k2(vec![1.0, 1.0]).is_mutant_biased());
    }

    #[test]
    fn positional() {
        let g = triangle();
        let p = g.make_positional(&Configuration::empty(3), 0.5).unwrap();
        assert!(p.is_neutral());
        let p = g.make_positional(&Configuration::full(3), 0.1).unwrap();
        assert_eq!(p.mutant(), &[1.1, 1.1, 1.1]);
        let p = g.make_positional(&Configuration::from_nodes(3, [0]), 1.0).unwrap();
        assert_eq!(p.mutant(), &[2.0, 1.0, 1.0]);
        assert!(p.is_mutant_biased());
        assert!(matches!(
            g.make_positional(&Configuration::empty(3), -0.1),
            Err(Error::NegativeDelta(_))
        ));
    }

    #[test]
    fn summaries() {
        let k2 = |m: Vec<f64>| FitnessGraph::build(&[(0, 1, 1.0)], false, m, vec![1.0, 1.0]).unwrap();
        let s = k2(vec![1.0, 2.0]).summary();
        assert_eq!((s.m_max, s.r_min, s.f_max), (2.0, 1.0, 2.0));
        let s = k2(vec![1.0, 1.0]).summary();
        assert_eq!((s.m_max, s.r_min, s.f_max), (1.0, 1.0, 1.0));
        let s = k2(vec![0.5, 0.5]).summary();
        assert_eq!((s.m_max, s.r_min, s.f_max), (0.5, 1.0, 1.0));
    }

    #[test]
    fn neighbor_sampling_follows_weights() {
        use rand::SeedableRng;
        let g = FitnessGraph::build(
            &[(0, 1, 0.2), (0, 2, 0.8), (1, 0, 1.0), (2, 0, 1.0)],
            true,
            vec![1.0; 3],
            vec![1.0; 3],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let hits = (0..20_000).filter(|_| g.sample_neighbor(0, &mut rng) == 2).count();
        let p = hits as f64 / 20_000.0;
        assert!((p - 0.8).abs() < 4.0 * (0.16f64 / 20_000.0).sqrt());
    }

    fn reachable(n: usize, adj: &[Vec<usize>], from: usize) -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    proptest! {
        #[test]
        fn scc_agrees_with_reachability(n in 1usize..=8, bits in proptest::collection::vec(any::<bool>(), 64)) {
            let mut adj = vec![Vec::new(); n];
            for u in 0..n {
                for v in 0..n {
                    if u != v && bits[u * 8 + v] {
                        adj[u].push(v);
                    }
                }
            }
            let comps = strongly_connected_components(n, |u| adj[u].clone().into_iter());
            let mut rev = vec![Vec::new(); n];
            for (u, succ) in adj.iter().enumerate() {
                for &v in succ {
                    rev[v].push(u);
                }
            }
            let fwd = reachable(n, &adj, 0);
            let bwd = reachable(n, &rev, 0);
            let oracle = (0..n).all(|v| fwd[v] && bwd[v]);
            prop_assert_eq!(comps.len() == 1, oracle);
            // members of each component are mutually reachable
            for c in &comps {
                let r = reachable(n, &adj, c[0]);
                let b = reachable(n, &rev, c[0]);
                for u in 0..n {
                    prop_assert_eq!(c.contains(&u), r[u] && b[u]);
                }
            }
        }
    }
}
