//! Structure-only node scores used by the baseline heuristics. Fitness
//! values play no part here.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::FitnessGraph;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

/// Out-degree (the degree for undirected graphs).
pub fn degree(g: &FitnessGraph) -> Vec<f64> {
    (0..g.n()).map(|u| g.degree(u) as f64).collect()
}

/// Unweighted hop distances from `source` along out-arcs.
pub fn bfs_distances(g: &FitnessGraph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::from([source]);
    dist[source] = 0;
    while let Some(u) = queue.pop_front() {
        for (v, _) in g.out_edges(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// `c(u) = (n - 1) / Σ_v dist(u, v)` over outgoing shortest paths.
pub fn closeness(g: &FitnessGraph) -> Vec<f64> {
    let n = g.n();
    (0..n)
        .map(|u| {
            let total: usize = bfs_distances(g, u).iter().filter(|&&d| d != usize::MAX).sum();
            if total == 0 {
                0.0
            } else {
                (n - 1) as f64 / total as f64
            }
        })
        .collect()
}

/// PageRank by power iteration over the transition weights `w`.
pub fn pagerank(g: &FitnessGraph, damping: f64, tol: f64) -> Result<Vec<f64>> {
    let n = g.n();
    let teleport = (1.0 - damping) / n as f64;
    let mut rank = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        next.iter_mut().for_each(|x| *x = teleport);
        for u in 0..n {
            let share = damping * rank[u];
            if g.degree(u) == 0 {
                // single-node graph: keep the mass in place
                next[u] += share;
            }
            for (v, w) in g.out_edges(u) {
                next[v] += share * w;
            }
        }
        let diff: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            return Ok(rank);
        }
    }
    Err(Error::NoConvergence {
        what: "PageRank",
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, e: &[(usize, usize)]) -> FitnessGraph {
        let edges: Vec<_> = e.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        FitnessGraph::build(&edges, false, vec![1.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn path_closeness() {
        let g = undirected(3, &[(0, 1), (1, 2)]);
        assert_eq!(closeness(&g), vec![2.0 / 3.0, 1.0, 2.0 / 3.0]);
    }

    #[test]
    fn cycle_is_uniform() {
        let g = undirected(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let c = closeness(&g);
        assert!(c.iter().all(|&x| x == c[0]));
        let pr = pagerank(&g, DEFAULT_DAMPING, DEFAULT_TOLERANCE).unwrap();
        for p in &pr {
            assert!((p - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn star_pagerank() {
        let g = undirected(4, &[(0, 1), (0, 2), (0, 3)]);
        let pr = pagerank(&g, DEFAULT_DAMPING, DEFAULT_TOLERANCE).unwrap();
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(pr[1], pr[2]);
        assert_eq!(pr[2], pr[3]);
        assert!(pr[1] < pr[0]);
        // fixed point of the 4-node chain: c = 0.0375 + 0.85·3l, l = 0.0375 + 0.85·c/3
        let l = (0.0375 + 0.85 * 0.0375 / 3.0) / (1.0 - 0.85 * 0.85);
        assert!((pr[1] - l).abs() < 1e-9);
    }

    #[test]
    fn directed_pagerank_sums_to_one() {
        let g = FitnessGraph::build(
            &[(0, 1, 0.3), (0, 2, 0.7), (1, 2, 1.0), (2, 0, 0.5), (2, 1, 0.5)],
            true,
            vec![1.0; 3],
            vec![1.0; 3],
        )
        .unwrap();
        let pr = pagerank(&g, DEFAULT_DAMPING, DEFAULT_TOLERANCE).unwrap();
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
