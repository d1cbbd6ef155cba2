use rand::seq::IndexedRandom;
use rand::Rng;

use super::weights::{edge_weights, node_weights, EdgeWeights, NodeWeights};
use super::Sample;
use crate::error::{Error, Result};
use crate::graph::{edge_subgraph, induced_subgraph, Graph, Subgraph};
use crate::scalar::Scalar;

/// Node sampler: `n` draws with replacement from `P(u) ∝ ‖Ã[:, u]‖²`.
pub fn sample_node<F: Scalar, R: Rng + ?Sized>(g: &Graph<F>, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidConfig("node budget n must be positive".into()));
    }
    node_with(g, &node_weights(g)?, n, rng)
}

/// Approximate edge sampler: `m` draws with replacement from `P(e) ∝ w_e`.
pub fn sample_edge_approx<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    m: usize,
    rng: &mut R,
) -> Result<Sample> {
    if m == 0 {
        return Err(Error::InvalidConfig("edge budget m must be positive".into()));
    }
    edge_approx_with(g, &edge_weights(g)?, m, true, rng)
}

/// Independent edge sampler with induction; the returned mask records the
/// Bernoulli outcome of every edge.
pub fn sample_edge_independent<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    m: usize,
    rng: &mut R,
) -> Result<Sample> {
    if m == 0 {
        return Err(Error::InvalidConfig("edge budget m must be positive".into()));
    }
    let w = edge_weights(g)?;
    let p = w.inclusion_probabilities(m);
    edge_independent_with(g, &w, &p, true, rng)
}

/// Random walk sampler: `r` uniform roots, `h` uniform hops each.
pub fn sample_rw<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    r: usize,
    h: usize,
    rng: &mut R,
) -> Result<Sample> {
    if r == 0 || h == 0 {
        return Err(Error::InvalidConfig("random walk needs r >= 1 and h >= 1".into()));
    }
    rw_with(g, r, h, rng)
}

/// Multi-dimensional random walk (frontier) sampler.
pub fn sample_mrw<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<Sample> {
    if r == 0 || r >= n {
        return Err(Error::InvalidConfig("multi-dimensional walk needs 1 <= r < n".into()));
    }
    mrw_with(g, n, r, rng)
}

pub(super) fn node_with<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    w: &NodeWeights<F>,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    let picks: Vec<usize> = (0..n).map(|_| w.draw(rng)).collect();
    Ok(Sample::plain(induced_subgraph(g, &picks)?))
}

fn from_edges<F: Scalar>(g: &Graph<F>, edges: &[usize], induce: bool) -> Result<Subgraph> {
    if edges.is_empty() {
        return Ok(Subgraph::empty());
    }
    if induce {
        let endpoints: Vec<usize> = edges
            .iter()
            .flat_map(|&e| {
                let (u, v) = g.edge(e);
                [u, v]
            })
            .collect();
        induced_subgraph(g, &endpoints)
    } else {
        edge_subgraph(g, edges)
    }
}

pub(super) fn edge_approx_with<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    w: &EdgeWeights<F>,
    m: usize,
    induce: bool,
    rng: &mut R,
) -> Result<Sample> {
    let picks: Vec<usize> = (0..m).map(|_| w.draw(rng)).collect();
    Ok(Sample::plain(from_edges(g, &picks, induce)?))
}

pub(super) fn edge_independent_with<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    w: &EdgeWeights<F>,
    probs: &[F],
    induce: bool,
    rng: &mut R,
) -> Result<Sample> {
    let mut mask = vec![false; g.num_edges()];
    let mut picked = Vec::new();
    for (&e, &p) in w.edge_ids().iter().zip(probs) {
        // Draw for every edge, even saturated ones, so the stream position
        // depends only on the edge count.
        let u: f64 = rng.random();
        if u < p.as_f64() {
            mask[e] = true;
            picked.push(e);
        }
    }
    Ok(Sample {
        subgraph: from_edges(g, &picked, induce)?,
        edge_mask: Some(mask),
        early_stops: 0,
    })
}

pub(super) fn rw_with<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    r: usize,
    h: usize,
    rng: &mut R,
) -> Result<Sample> {
    let n = g.num_nodes();
    let mut visited = Vec::with_capacity(r * (h + 1));
    let mut early_stops = 0;
    for _ in 0..r {
        let mut u = rng.random_range(0..n);
        visited.push(u);
        for _ in 0..h {
            match g.neighbors(u).choose(rng) {
                Some(&next) => {
                    u = next;
                    visited.push(u);
                }
                None => {
                    early_stops += 1;
                    break;
                }
            }
        }
    }
    Ok(Sample {
        subgraph: induced_subgraph(g, &visited)?,
        edge_mask: None,
        early_stops,
    })
}

pub(super) fn mrw_with<F: Scalar, R: Rng + ?Sized>(
    g: &Graph<F>,
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<Sample> {
    let num_nodes = g.num_nodes();
    let mut frontier: Vec<usize> = (0..r).map(|_| rng.random_range(0..num_nodes)).collect();
    let mut visited = frontier.clone();
    let mut frontier_degree: usize = frontier.iter().map(|&v| g.degree(v)).sum();
    let mut early_stops = 0;
    for _ in r..n {
        if frontier_degree == 0 {
            early_stops += 1;
            break;
        }
        // Select a frontier slot with probability deg(u) / Σ deg.
        let mut target = rng.random_range(0..frontier_degree);
        let slot = frontier
            .iter()
            .position(|&v| {
                let d = g.degree(v);
                if target < d {
                    true
                } else {
                    target -= d;
                    false
                }
            })
            .expect("target below total frontier degree");
        let u = frontier[slot];
        let next = *g.neighbors(u).choose(rng).expect("selected node has degree > 0");
        frontier[slot] = next;
        frontier_degree = frontier_degree - g.degree(u) + g.degree(next);
        // `u` is already in the visited multiset (it was a root or a reached
        // node); recording the newly reached node is what grows the sample.
        visited.push(u);
        visited.push(next);
    }
    let mut sample = Sample::plain(induced_subgraph(g, &visited)?);
    sample.early_stops = early_stops;
    Ok(sample)
}
