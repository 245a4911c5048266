//! Random strongly connected fitness graphs, reproducible from a compact
//! descriptor.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::stream_rng;
use crate::graph::FitnessGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    /// `m = r`.
    Neutral,
    /// `m ≥ r` everywhere.
    MutantBiased,
    /// `m ≤ r` everywhere.
    ResidentBiased,
    /// `m` and `r` drawn independently.
    Arbitrary,
}

impl FitnessKind {
    pub const ALL: [FitnessKind; 4] = [
        FitnessKind::Neutral,
        FitnessKind::MutantBiased,
        FitnessKind::ResidentBiased,
        FitnessKind::Arbitrary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitnessKind::Neutral => "neutral",
            FitnessKind::MutantBiased => "mutant-biased",
            FitnessKind::ResidentBiased => "resident-biased",
            FitnessKind::Arbitrary => "arbitrary",
        }
    }

    /// Draws `(m, r)` for `n` nodes. Resident fitness is uniform on
    /// `[0.5, 2]`; biased kinds scale it by a factor in `[1, 3]`.
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..=2.0)).collect();
        let m = r
            .iter()
            .map(|&ru| match self {
                FitnessKind::Neutral => ru,
                FitnessKind::MutantBiased => ru * rng.gen_range(1.0..=3.0),
                FitnessKind::ResidentBiased => ru / rng.gen_range(1.0..=3.0),
                FitnessKind::Arbitrary => rng.gen_range(0.5..=2.0),
            })
            .collect();
        (m, r)
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to rebuild a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub n: usize,
    pub directed: bool,
    pub fitness: FitnessKind,
    pub seed: u64,
}

impl fmt::Display for InstanceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} {} {} seed={}",
            self.n,
            if self.directed { "directed" } else { "undirected" },
            self.fitness,
            self.seed
        )
    }
}

impl InstanceDescriptor {
    pub fn build(&self) -> Result<FitnessGraph> {
        let mut rng = stream_rng(self.seed, 0);
        let edges = if self.directed {
            random_directed_edges(self.n, &mut rng)
        } else {
            random_undirected_edges(self.n, &mut rng)
        };
        let (m, r) = self.fitness.sample(self.n, &mut rng);
        FitnessGraph::build(&edges, self.directed, m, r)
    }
}

/// A family of random instances: sizes in `n_min..=n_max`, fitness kinds
/// and orientation cycled by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub n_min: usize,
    pub n_max: usize,
    /// `None` alternates undirected and directed.
    pub directed: Option<bool>,
    pub kinds: Vec<FitnessKind>,
}

impl Family {
    pub fn new(n_min: usize, n_max: usize, kinds: &[FitnessKind]) -> Self {
        Family {
            n_min,
            n_max,
            directed: None,
            kinds: kinds.to_vec(),
        }
    }

    pub fn undirected(mut self) -> Self {
        self.directed = Some(false);
        self
    }

    pub fn directed(mut self) -> Self {
        self.directed = Some(true);
        self
    }

    /// The `count` descriptors of this family under `master_seed`.
    pub fn descriptors(&self, count: usize, master_seed: u64) -> Result<Vec<InstanceDescriptor>> {
        if self.n_min == 0 || self.n_min > self.n_max || self.kinds.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "bad instance family: n in {}..={}, {} fitness kinds",
                self.n_min,
                self.n_max,
                self.kinds.len()
            )));
        }
        let mut rng = stream_rng(master_seed, u64::MAX);
        Ok((0..count)
            .map(|i| InstanceDescriptor {
                n: rng.gen_range(self.n_min..=self.n_max),
                directed: self.directed.unwrap_or(i % 2 == 1),
                fitness: self.kinds[(i / 2) % self.kinds.len()],
                seed: rng.gen(),
            })
            .collect())
    }
}

/// A random spanning tree plus each remaining pair with probability 0.3.
pub fn random_undirected_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut set = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i], order[j]);
        set.insert((a.min(b), a.max(b)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.3) {
                set.insert((u, v));
            }
        }
    }
    set.into_iter().map(|(u, v)| (u, v, 1.0)).collect()
}

/// A random Hamiltonian cycle plus each remaining arc with probability
/// 0.25, with random weights normalized per source.
pub fn random_directed_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize, f64)> {
    if n == 1 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut arcs = BTreeSet::new();
    for i in 0..n {
        arcs.insert((order[i], order[(i + 1) % n]));
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(0.25) {
                arcs.insert((u, v));
            }
        }
    }
    let raw: Vec<(usize, usize, f64)> = arcs.into_iter().map(|(u, v)| (u, v, rng.gen_range(0.1..=1.0))).collect();
    let mut sums = vec![0.0; n];
    for &(u, _, w) in &raw {
        sums[u] += w;
    }
    raw.into_iter().map(|(u, v, w)| (u, v, w / sums[u])).collect()
}

/// Undirected preferential attachment: a clique on `attach + 1` nodes,
/// then each new node links to `attach` distinct earlier nodes chosen
/// with probability proportional to degree.
pub fn barabasi_albert<R: Rng + ?Sized>(n: usize, attach: usize, rng: &mut R) -> Result<Vec<(usize, usize, f64)>> {
    if attach == 0 || n <= attach {
        return Err(Error::InvalidConfig(format!(
            "preferential attachment needs 0 < attach < n, got attach={attach}, n={n}"
        )));
    }
    let core = attach + 1;
    let mut edges = Vec::new();
    // each endpoint appears once per incident edge
    let mut ends = Vec::new();
    for u in 0..core {
        for v in u + 1..core {
            edges.push((u, v, 1.0));
            ends.extend([u, v]);
        }
    }
    for u in core..n {
        let mut picked = BTreeSet::new();
        while picked.len() < attach {
            picked.insert(ends[rng.gen_range(0..ends.len())]);
        }
        for v in picked {
            edges.push((v, u, 1.0));
            ends.extend([u, v]);
        }
    }
    Ok(edges)
}
