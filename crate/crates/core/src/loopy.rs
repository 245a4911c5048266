//! The Loopy reformulation: every node reproduces at the same rate and a
//! configuration-dependent self-loop absorbs the fitness difference.
//!
//! For `u != v`, `w_X(u, v) = f_X(u) / f_max * w(u, v)`; the self-loop
//! gets `w_X(u, u) = 1 - f_X(u) / f_max * (1 - w(u, u))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::graph::{FitnessGraph, NodeId};
use crate::process::StepOutcome;

#[derive(Debug, Clone, Copy)]
pub struct LoopyKernel<'g> {
    base: &'g FitnessGraph,
    f_max: f64,
}

impl<'g> LoopyKernel<'g> {
    pub fn new(base: &'g FitnessGraph) -> Self {
        LoopyKernel {
            base,
            f_max: base.summary().f_max,
        }
    }

    pub fn base(&self) -> &'g FitnessGraph {
        self.base
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Scale applied to `u`'s outgoing arcs when its fitness is `fitness`.
    #[inline]
    fn scale(&self, fitness: f64) -> f64 {
        fitness / self.f_max
    }

    /// `w_X(u, v)`, self-loop included.
    pub fn weight(&self, x: &Configuration, u: usize, v: usize) -> f64 {
        let s = self.scale(self.base.fitness_of(x, u));
        if u == v {
            1.0 - s * (1.0 - self.base.weight(u, u))
        } else {
            s * self.base.weight(u, v)
        }
    }

    /// The full row `w_X(u, ·)`: the self-loop first, then the base arcs.
    pub fn row(&self, x: &Configuration, u: usize) -> Vec<(usize, f64)> {
        row_for_fitness(self.base, u, self.scale(self.base.fitness_of(x, u)))
    }

    /// One Loopy step: a uniform reproducer, then a target from `w_X(u, ·)`.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut Configuration, rng: &mut R) -> StepOutcome {
        let n = self.base.n();
        let u = rng.gen_range(0..n);
        let keep = rng.gen::<f64>() >= self.scale(self.base.fitness_of(x, u));
        let v = if keep || n == 1 { u } else { self.base.sample_neighbor(u, rng) };
        let changed = u != v && x.set(v, x.contains(u));
        StepOutcome {
            reproducer: NodeId(u as u32),
            target: NodeId(v as u32),
            changed,
        }
    }

    pub fn export_two_graphs(&self) -> TwoGraphsView {
        let n = self.base.n();
        let rows = |fit: &dyn Fn(usize) -> f64| -> Vec<Vec<(usize, f64)>> {
            (0..n).map(|u| row_for_fitness(self.base, u, self.scale(fit(u)))).collect()
        };
        TwoGraphsView {
            mutant: rows(&|u| self.base.mutant_fitness(u)),
            resident: rows(&|u| self.base.resident_fitness(u)),
        }
    }
}

fn row_for_fitness(base: &FitnessGraph, u: usize, scale: f64) -> Vec<(usize, f64)> {
    let own = base.weight(u, u);
    let mut row = vec![(u, 1.0 - scale * (1.0 - own))];
    row.extend(base.out_edges(u).filter(|&(v, _)| v != u).map(|(v, w)| (v, scale * w)));
    row
}

pub fn loopy_kernel(g: &FitnessGraph) -> LoopyKernel<'_> {
    LoopyKernel::new(g)
}

/// Clone-and-step convenience mirroring [`crate::process::step`].
pub fn loopy_step<R: Rng + ?Sized>(
    kernel: &LoopyKernel<'_>,
    x: &Configuration,
    rng: &mut R,
) -> (Configuration, StepOutcome) {
    let mut next = x.clone();
    let out = kernel.step(&mut next, rng);
    (next, out)
}

/// Per-type propagation graphs: `mutant[u]` is `w_X(u, ·)` with `u ∈ X`,
/// `resident[u]` the same row with `u ∉ X`. Self-loops are included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGraphsView {
    pub mutant: Vec<Vec<(usize, f64)>>,
    pub resident: Vec<Vec<(usize, f64)>>,
}

pub fn export_two_graphs(kernel: &LoopyKernel<'_>) -> TwoGraphsView {
    kernel.export_two_graphs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream_rng;

    fn path3(m: Vec<f64>, r: Vec<f64>) -> FitnessGraph {
        FitnessGraph::build(&[(0, 1, 1.0), (1, 2, 1.0)], false, m, r).unwrap()
    }

    #[test]
    fn resident_with_half_fitness_gets_half_self_loop() {
        // node 1 has two neighbors at 1/2 each, r = 1, f_max = 2
        let g = path3(vec![2.0, 1.0, 1.0], vec![1.0; 3]);
        let k = loopy_kernel(&g);
        let x = Configuration::empty(3);
        assert_eq!(k.weight(&x, 1, 0), 0.25);
        assert_eq!(k.weight(&x, 1, 2), 0.25);
        assert_eq!(k.weight(&x, 1, 1), 0.5);
    }

    #[test]
    fn max_fitness_keeps_weights() {
        let g = path3(vec![2.0, 1.0, 1.0], vec![1.0; 3]);
        let k = loopy_kernel(&g);
        let x = Configuration::from_nodes(3, [0]);
        assert_eq!(k.row(&x, 0), vec![(0, 0.0), (1, 1.0)]);
    }

    #[test]
    fn rows_are_distributions() {
        let g = FitnessGraph::build(
            &[(0, 1, 0.3), (0, 2, 0.7), (1, 0, 0.6), (1, 2, 0.4), (2, 0, 1.0)],
            true,
            vec![1.7, 0.4, 2.9],
            vec![1.2, 3.1, 0.8],
        )
        .unwrap();
        let k = loopy_kernel(&g);
        for mask in 0..8 {
            let x = Configuration::from_mask(3, mask);
            for u in 0..3 {
                let row = k.row(&x, u);
                let s: f64 = row.iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() <= 1e-12);
                assert!(row.iter().all(|e| e.1 >= 0.0));
            }
        }
        let tg = k.export_two_graphs();
        for rows in [&tg.mutant, &tg.resident] {
            for row in rows {
                let s: f64 = row.iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_graphs_export() {
        let neutral = path3(vec![1.5; 3], vec![1.5; 3]);
        let tg = loopy_kernel(&neutral).export_two_graphs();
        assert_eq!(tg.mutant, tg.resident);
        let g = path3(vec![3.0, 1.0, 1.0], vec![1.0; 3]);
        let tg = loopy_kernel(&g).export_two_graphs();
        assert_eq!(tg.mutant[0][0], (0, 0.0));
        assert_eq!(tg.resident[0][0], (0, 1.0 - 1.0 / 3.0));
    }

    #[test]
    fn absorbed_loopy_state_is_fixed() {
        let g = path3(vec![2.0, 1.0, 1.0], vec![1.0; 3]);
        let k = loopy_kernel(&g);
        let mut rng = stream_rng(2, 0);
        for _ in 0..100 {
            let (next, out) = loopy_step(&k, &Configuration::full(3), &mut rng);
            assert!(next.is_full());
            assert!(!out.changed);
        }
    }

    #[test]
    fn loopy_self_loop_frequency() {
        // resident node 1 with r = 1 and f_max = 2 keeps its type half the time
        let g = path3(vec![2.0, 1.0, 1.0], vec![1.0; 3]);
        let k = loopy_kernel(&g);
        let mut rng = stream_rng(4, 0);
        let x = Configuration::empty(3);
        let mut picked = 0;
        let mut selfs = 0;
        for _ in 0..60_000 {
            let (_, out) = loopy_step(&k, &x, &mut rng);
            if out.reproducer.index() == 1 {
                picked += 1;
                if out.target.index() == 1 {
                    selfs += 1;
                }
            }
        }
        let p = selfs as f64 / picked as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / picked as f64).sqrt());
    }
}
