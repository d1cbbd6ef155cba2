//! Seeded synthetic graphs and datasets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Labels, Split};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::rng::{stream_rng, streams, StreamRng};
use crate::scalar::Scalar;

/// Stochastic block model with equally sized blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    /// Standard deviation of the Gaussian noise added to the one-hot
    /// block features.
    pub noise: f64,
    pub self_loops: bool,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::EmptyBlock(0));
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.p_intra) || !unit(self.p_inter) {
            return Err(Error::InvalidConfig("edge probabilities must lie in [0, 1]".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig("noise must be a finite non-negative number".into()));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.blocks * self.nodes_per_block
    }
}

fn bernoulli_pairs(n: usize, rng: &mut StreamRng, p: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p(u, v) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Node `v` belongs to block `v / nodes_per_block`. Features are the
/// one-hot block indicator plus `N(0, noise²)` noise; labels are block ids;
/// each block is split 60/20/20 into train/val/test.
pub fn generate_sbm<F: Scalar>(spec: &SbmSpec) -> Result<Dataset<F>> {
    spec.validate()?;
    let n = spec.num_nodes();
    let block = |v: usize| v / spec.nodes_per_block;
    let mut rng = stream_rng(spec.seed, streams::GENERATOR);
    let edges = bernoulli_pairs(n, &mut rng, |u, v| if block(u) == block(v) { spec.p_intra } else { spec.p_inter });
    let graph = build_graph(&edges, n, spec.self_loops)?;

    let mut rng = stream_rng(spec.seed, streams::FEATURES);
    let normal = Normal::new(0.0, spec.noise).expect("noise validated");
    let features = Array2::from_shape_fn((n, spec.blocks), |(v, j)| {
        let hot = if j == block(v) { 1.0 } else { 0.0 };
        F::of(hot + normal.sample(&mut rng))
    });
    let labels = Labels::single((0..n).map(block).collect(), spec.blocks)?;

    let mut rng = stream_rng(spec.seed, streams::SPLIT);
    let mut split = vec![Split::Test; n];
    let per = spec.nodes_per_block;
    let n_train = (0.6 * per as f64).round() as usize;
    let n_val = (0.2 * per as f64).round() as usize;
    for b in 0..spec.blocks {
        let mut members: Vec<usize> = (b * per..(b + 1) * per).collect();
        members.shuffle(&mut rng);
        for (i, &v) in members.iter().enumerate() {
            split[v] = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Dataset::new(graph, features, labels, split)
}

/// Erdős–Rényi `G(n, p)` edge list.
pub fn er_edges(n: usize, p: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig("edge probability must lie in [0, 1]".into()));
    }
    let mut rng = stream_rng(seed, streams::GENERATOR);
    Ok(bernoulli_pairs(n, &mut rng, |_, _| p))
}

pub fn generate_er<F: Scalar>(n: usize, p: f64, seed: u64) -> Result<Graph<F>> {
    build_graph(&er_edges(n, p, seed)?, n, false)
}

/// Simple `d`-regular edge list by random stub pairing: stubs are matched
/// one pair at a time, rejecting loops and repeated pairs, and the whole
/// pairing restarts when it gets stuck.
pub fn regular_edges(d: usize, n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n == 0 || (d > 0 && d >= n) || (d * n) % 2 == 1 {
        return Err(Error::InfeasibleDegree { degree: d, nodes: n });
    }
    let mut rng = stream_rng(seed, streams::GENERATOR);
    const ATTEMPTS: usize = 1000;
    'attempt: for _ in 0..ATTEMPTS {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        let mut edges = std::collections::BTreeSet::new();
        while !stubs.is_empty() {
            let mut placed = false;
            for _ in 0..100 {
                let i = rng.random_range(0..stubs.len());
                let j = rng.random_range(0..stubs.len());
                let (u, v) = (stubs[i].min(stubs[j]), stubs[i].max(stubs[j]));
                if i == j || u == v || edges.contains(&(u, v)) {
                    continue;
                }
                edges.insert((u, v));
                let (hi, lo) = (i.max(j), i.min(j));
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                placed = true;
                break;
            }
            if !placed {
                continue 'attempt;
            }
        }
        return Ok(edges.into_iter().collect());
    }
    Err(Error::InfeasibleDegree { degree: d, nodes: n })
}

pub fn generate_regular<F: Scalar>(d: usize, n: usize, seed: u64) -> Result<Graph<F>> {
    build_graph(&regular_edges(d, n, seed)?, n, false)
}

/// Wraps a graph into a dataset with standard-normal features, uniform
/// random single labels and a random 60/20/20 split.
pub fn random_dataset<F: Scalar>(graph: Graph<F>, feature_dim: usize, classes: usize, seed: u64) -> Result<Dataset<F>> {
    if feature_dim == 0 || classes == 0 {
        return Err(Error::InvalidConfig("feature dimension and class count must be positive".into()));
    }
    let n = graph.num_nodes();
    let mut rng = stream_rng(seed, streams::FEATURES);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let features = Array2::from_shape_simple_fn((n, feature_dim), || F::of(normal.sample(&mut rng)));
    let labels = Labels::single((0..n).map(|_| rng.random_range(0..classes)).collect(), classes)?;
    let mut rng = stream_rng(seed, streams::SPLIT);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((0.6 * n as f64).round() as usize).max(1);
    let n_val = (0.2 * n as f64).round() as usize;
    let mut split = vec![Split::Test; n];
    for (i, &v) in order.iter().enumerate() {
        if i < n_train {
            split[v] = Split::Train;
        } else if i < n_train + n_val {
            split[v] = Split::Val;
        }
    }
    Dataset::new(graph, features, labels, split)
}
