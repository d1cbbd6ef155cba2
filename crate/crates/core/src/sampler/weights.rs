//! Topology-derived sampling distributions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Discrete distribution over `0..len` backed by a cumulative table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cumulative<F> {
    weights: Vec<F>,
    cumulative: Vec<F>,
    total: F,
}

impl<F: Scalar> Cumulative<F> {
    pub fn new(weights: Vec<F>) -> Self {
        let mut acc = F::zero();
        let cumulative = weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        Cumulative {
            weights,
            cumulative,
            total: acc,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[F] {
        &self.cumulative
    }

    pub fn total(&self) -> F {
        self.total
    }

    pub fn probability(&self, i: usize) -> F {
        self.weights[i] / self.total
    }

    pub fn probabilities(&self) -> Vec<F> {
        self.weights.iter().map(|&w| w / self.total).collect()
    }

    /// Index drawn proportionally to its weight. Requires `total > 0`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target = F::of(rng.random::<f64>()) * self.total;
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }
}

/// `P(u) ∝ ‖Ã[:, u]‖²`, the squared norm of column `u` of `D^-1 A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWeights<F> {
    dist: Cumulative<F>,
}

pub fn node_weights<F: Scalar>(g: &Graph<F>) -> Result<NodeWeights<F>> {
    let mut column_sq = vec![F::zero(); g.num_nodes()];
    for (&u, &val) in g.col_indices().iter().zip(g.norm_values()) {
        column_sq[u] += val * val;
    }
    let dist = Cumulative::new(column_sq);
    if dist.total() <= F::zero() {
        return Err(Error::AllIsolated);
    }
    Ok(NodeWeights { dist })
}

impl<F: Scalar> NodeWeights<F> {
    pub fn weight(&self, u: usize) -> F {
        self.dist.weights()[u]
    }

    pub fn probability(&self, u: usize) -> F {
        self.dist.probability(u)
    }

    pub fn distribution(&self) -> &Cumulative<F> {
        &self.dist
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.draw(rng)
    }
}

/// `w_e = 1/deg(u) + 1/deg(v)` for every non-loop edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights<F> {
    /// Graph edge id of each entry.
    edge_ids: Vec<usize>,
    dist: Cumulative<F>,
}

pub fn edge_weights<F: Scalar>(g: &Graph<F>) -> Result<EdgeWeights<F>> {
    let edge_ids: Vec<usize> = g.sampleable_edges().collect();
    if edge_ids.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let weights = edge_ids
        .iter()
        .map(|&e| {
            let (u, v) = g.edge(e);
            F::one() / F::of_usize(g.degree(u)) + F::one() / F::of_usize(g.degree(v))
        })
        .collect();
    Ok(EdgeWeights {
        edge_ids,
        dist: Cumulative::new(weights),
    })
}

impl<F: Scalar> EdgeWeights<F> {
    pub fn edge_ids(&self) -> &[usize] {
        &self.edge_ids
    }

    pub fn distribution(&self) -> &Cumulative<F> {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_ids.is_empty()
    }

    /// Probability of the `i`-th entry (not the graph edge id).
    pub fn probability(&self, i: usize) -> F {
        self.dist.probability(i)
    }

    /// Probability keyed by graph edge id.
    pub fn probability_of_edge(&self, edge: usize) -> Option<F> {
        self.edge_ids
            .binary_search(&edge)
            .ok()
            .map(|i| self.dist.probability(i))
    }

    /// Independent-inclusion probabilities `min(1, m·w_e/Σw)`, per entry.
    pub fn inclusion_probabilities(&self, m: usize) -> Vec<F> {
        let scale = F::of_usize(m) / self.dist.total();
        self.dist
            .weights()
            .iter()
            .map(|&w| (w * scale).min(F::one()))
            .collect()
    }

    /// Graph edge id drawn proportionally to its weight.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.edge_ids[self.dist.draw(rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn g(edges: &[(usize, usize)], n: usize) -> Graph<f64> {
        build_graph(edges, n, false).unwrap()
    }

    /// Column-walk oracle: scan every row for entries landing in column u.
    fn column_norm_sq(g: &Graph<f64>, u: usize) -> f64 {
        (0..g.num_nodes())
            .filter(|&v| g.neighbors(v).contains(&u))
            .map(|v| (1.0 / g.degree(v) as f64).powi(2))
            .sum()
    }

    #[test]
    fn regular_graph_is_uniform() {
        let cycle: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let w = node_weights(&g(&cycle, 6)).unwrap();
        for u in 0..6 {
            assert!((w.weight(u) - 0.5).abs() < 1e-15);
            assert!((w.probability(u) - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn star_and_path_node_probabilities() {
        let star = g(&[(0, 1), (0, 2), (0, 3)], 4);
        let w = node_weights(&star).unwrap();
        assert!((w.weight(0) - 3.0).abs() < 1e-15);
        assert!((w.weight(1) - 1.0 / 9.0).abs() < 1e-15);
        assert!((w.probability(0) - 0.9).abs() < 1e-12);

        let path = g(&[(0, 1), (1, 2)], 3);
        let w = node_weights(&path).unwrap();
        assert!((w.probability(1) - 0.8).abs() < 1e-12);
        assert!((w.probability(0) - 0.1).abs() < 1e-12);
        assert!((w.probability(2) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn node_weights_match_column_walk() {
        let graph = g(&[(0, 1), (1, 2), (2, 3), (1, 3), (3, 4), (0, 4), (5, 1)], 7);
        let w = node_weights(&graph).unwrap();
        for u in 0..graph.num_nodes() {
            assert!((w.weight(u) - column_norm_sq(&graph, u)).abs() < 1e-14);
        }
        let total: f64 = (0..7).map(|u| w.probability(u)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_isolated_is_an_error() {
        assert!(matches!(node_weights(&g(&[], 3)), Err(Error::AllIsolated)));
        assert!(matches!(edge_weights(&g(&[], 3)), Err(Error::EmptyEdgeSet)));
    }

    #[test]
    fn square_with_chord_edge_probabilities() {
        let graph = g(&[(0, 1), (1, 2), (2, 3), (1, 3)], 4);
        let w = edge_weights(&graph).unwrap();
        let expected = [((0, 1), 1.0 / 3.0), ((1, 2), 5.0 / 24.0), ((2, 3), 0.25), ((1, 3), 5.0 / 24.0)];
        for ((u, v), p) in expected {
            let e = graph.edges().iter().position(|&x| x == (u, v)).unwrap();
            assert!((w.probability_of_edge(e).unwrap() - p).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_degree_gives_uniform_edges_and_single_edge_is_certain() {
        let k4 = g(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], 4);
        let w = edge_weights(&k4).unwrap();
        for i in 0..w.len() {
            assert!((w.probability(i) - 1.0 / 6.0).abs() < 1e-15);
        }
        let single = edge_weights(&g(&[(0, 1)], 2)).unwrap();
        assert_eq!(single.probability(0), 1.0);
    }

    #[test]
    fn inclusion_probabilities_clip_at_one() {
        let tri = g(&[(0, 1), (1, 2), (0, 2)], 3);
        let w = edge_weights(&tri).unwrap();
        assert_eq!(w.inclusion_probabilities(3), vec![1.0; 3]);
        assert_eq!(w.inclusion_probabilities(10), vec![1.0; 3]);
        let p = w.inclusion_probabilities(1);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn cumulative_skips_zero_weights() {
        let c = Cumulative::new(vec![0.0, 1.0, 0.0, 3.0]);
        assert_eq!(c.cumulative(), &[0.0, 1.0, 1.0, 4.0]);
        let mut rng = crate::rng::stream_rng(1, 0);
        for _ in 0..1000 {
            let i = c.draw(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
