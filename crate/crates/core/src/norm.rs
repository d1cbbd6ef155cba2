//! Aggregator and loss normalization.
//!
//! A subgraph aggregates neighbor `u` into node `v` with weight
//! `Ã[v,u] / α(u,v)` where `α(u,v) = p(u,v) / p(v)`, which makes the
//! conditional expectation of the aggregation equal to the full-graph one.
//! Node losses are divided by `λ(v)` so that the minibatch loss is unbiased
//! for the full-graph mean loss.
//!
//! Coefficients come either from counting appearances over a presampled
//! set of subgraphs, or in closed form for the independent edge sampler.

use std::thread;

use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::sampler::{edge_weights, Sampler, SamplerConfig};
use crate::scalar::Scalar;

/// Appearance counts gathered over `subgraphs` sampler runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counters {
    /// `C_v`: subgraphs containing node `v`.
    pub node: Vec<u64>,
    /// `C_{u,v}`: subgraphs containing undirected edge `e`, by edge id.
    pub edge: Vec<u64>,
    /// `N`.
    pub subgraphs: u64,
}

impl Counters {
    pub fn new<F: Scalar>(g: &Graph<F>) -> Self {
        Counters {
            node: vec![0; g.num_nodes()],
            edge: vec![0; g.num_edges()],
            subgraphs: 0,
        }
    }

    pub fn record<F: Scalar>(&mut self, g: &Graph<F>, s: &Subgraph) {
        for &v in s.nodes() {
            self.node[v] += 1;
        }
        for e in s.edge_ids(g) {
            self.edge[e] += 1;
        }
        self.subgraphs += 1;
    }

    pub fn merge(&mut self, other: &Counters) {
        for (a, b) in self.node.iter_mut().zip(&other.node) {
            *a += b;
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a += b;
        }
        self.subgraphs += other.subgraphs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffSource {
    Empirical,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormCoeffs<F> {
    /// Per arc `(v, u)` of the parent graph (row `v`): `α(u,v)`.
    alpha: Vec<F>,
    /// Per node: `λ(v)`; zero means the node never contributes to the loss.
    lambda: Vec<F>,
    /// Whether each arc's edge was observed during estimation. Unobserved
    /// arcs carry a Laplace-smoothed alpha.
    observed: Vec<bool>,
    counters: Option<Counters>,
    source: CoeffSource,
}

impl<F: Scalar> NormCoeffs<F> {
    /// `α = C_{u,v} / C_v`, `λ = C_v / N`. Edges never counted fall back to
    /// `(C_{u,v} + 1) / (C_v + 1)`.
    pub fn from_counters(g: &Graph<F>, counters: Counters) -> Result<Self> {
        if counters.node.len() != g.num_nodes() || counters.edge.len() != g.num_edges() {
            return Err(Error::DimensionMismatch("counters do not match graph".into()));
        }
        if counters.subgraphs == 0 {
            return Err(Error::InvalidConfig("need at least one presampled subgraph".into()));
        }
        let mut alpha = Vec::with_capacity(g.num_arcs());
        let mut observed = Vec::with_capacity(g.num_arcs());
        for v in 0..g.num_nodes() {
            let c_v = counters.node[v];
            for arc in g.arc_range(v) {
                let c_e = counters.edge[g.arc_edge(arc)];
                let (num, den) = if c_e > 0 { (c_e, c_v) } else { (c_e + 1, c_v + 1) };
                alpha.push(F::of(num as f64) / F::of(den as f64));
                observed.push(c_e > 0);
            }
        }
        let n = F::of(counters.subgraphs as f64);
        let lambda = counters.node.iter().map(|&c| F::of(c as f64) / n).collect();
        Ok(NormCoeffs {
            alpha,
            lambda,
            observed,
            counters: Some(counters),
            source: CoeffSource::Empirical,
        })
    }

    /// `α ≡ 1`, `λ ≡ 1`: plain full-graph propagation and loss.
    pub fn unit(g: &Graph<F>) -> Self {
        NormCoeffs {
            alpha: vec![F::one(); g.num_arcs()],
            lambda: vec![F::one(); g.num_nodes()],
            observed: vec![true; g.num_arcs()],
            counters: None,
            source: CoeffSource::Analytic,
        }
    }

    /// Assembles coefficients read back from a cache file.
    pub fn from_parts(
        alpha: Vec<F>,
        lambda: Vec<F>,
        observed: Vec<bool>,
        counters: Option<Counters>,
        source: CoeffSource,
    ) -> Result<Self> {
        if alpha.len() != observed.len() {
            return Err(Error::DimensionMismatch("alpha and observed flags differ in length".into()));
        }
        if let Some(c) = &counters {
            if c.node.len() != lambda.len() {
                return Err(Error::DimensionMismatch("node counters and lambda differ in length".into()));
            }
        }
        Ok(NormCoeffs {
            alpha,
            lambda,
            observed,
            counters,
            source,
        })
    }

    pub fn alpha(&self, arc: usize) -> F {
        self.alpha[arc]
    }

    pub fn alphas(&self) -> &[F] {
        &self.alpha
    }

    pub fn lambda(&self, v: usize) -> F {
        self.lambda[v]
    }

    pub fn lambdas(&self) -> &[F] {
        &self.lambda
    }

    pub fn is_observed(&self, arc: usize) -> bool {
        self.observed[arc]
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn counters(&self) -> Option<&Counters> {
        self.counters.as_ref()
    }

    pub fn source(&self) -> CoeffSource {
        self.source
    }

    pub fn check_graph(&self, g: &Graph<F>) -> Result<()> {
        if self.alpha.len() != g.num_arcs() || self.lambda.len() != g.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "coefficients cover {} arcs / {} nodes, graph has {} / {}",
                self.alpha.len(),
                self.lambda.len(),
                g.num_arcs(),
                g.num_nodes()
            )));
        }
        Ok(())
    }
}

/// `Ã[v,u] / α(u,v)` for parent arc `(v, u)`.
pub fn normalized_arc_value<F: Scalar>(g: &Graph<F>, coeffs: &NormCoeffs<F>, arc: usize) -> F {
    g.norm_values()[arc] / coeffs.alpha(arc)
}

/// Default presample count `N = ⌈50·|V| / mean |V_s|⌉`, with the mean taken
/// over the first `pilot` instances.
pub fn default_presample_count<F: Scalar>(sampler: &Sampler<'_, F>, pilot: u64) -> Result<usize> {
    let mut total = 0usize;
    for i in 0..pilot.max(1) {
        total += sampler.sample(i)?.subgraph.num_nodes();
    }
    let mean = (total as f64 / pilot.max(1) as f64).max(1.0);
    let n = sampler.graph().num_nodes() as f64;
    Ok((50.0 * n / mean).ceil() as usize)
}

/// One worker's counters and its subgraphs keyed by instance.
type WorkerTally = (Counters, Vec<(usize, Subgraph)>);

/// Runs the sampler for instances `0..n_subgraphs`, counts node and edge
/// appearances, and returns the resulting coefficients together with the
/// subgraphs (in instance order) for reuse as minibatches.
///
/// Each worker keeps private counters; they are summed at the end, so the
/// result does not depend on `threads`.
pub fn estimate_coeffs<F: Scalar>(
    g: &Graph<F>,
    config: SamplerConfig,
    n_subgraphs: usize,
    threads: usize,
) -> Result<(NormCoeffs<F>, Vec<Subgraph>)> {
    if n_subgraphs == 0 {
        return Err(Error::InvalidConfig("need at least one presampled subgraph".into()));
    }
    let sampler = Sampler::new(g, config)?;
    let threads = threads.clamp(1, n_subgraphs);
    let per_worker: Vec<Result<WorkerTally>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let sampler = &sampler;
                scope.spawn(move || {
                    let mut counters = Counters::new(g);
                    let mut mine = Vec::new();
                    for i in (w..n_subgraphs).step_by(threads) {
                        let s = sampler.sample(i as u64)?.subgraph;
                        counters.record(g, &s);
                        mine.push((i, s));
                    }
                    Ok((counters, mine))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler worker panicked")).collect()
    });

    let mut counters = Counters::new(g);
    let mut cache: Vec<Option<Subgraph>> = vec![None; n_subgraphs];
    for part in per_worker {
        let (c, subgraphs) = part?;
        counters.merge(&c);
        for (i, s) in subgraphs {
            cache[i] = Some(s);
        }
    }
    let cache = cache.into_iter().map(|s| s.expect("every instance sampled")).collect();
    Ok((NormCoeffs::from_counters(g, counters)?, cache))
}

/// Closed-form coefficients for the independent edge sampler, ignoring
/// induction: `p_e = min(1, m·w_e/Σw)`, `p_v = 1 − Π(1 − p_e)` over incident
/// edges, `α = p_e / p_v`, `λ = |V|·p_v`. Self-loop arcs get `α = 1`
/// because a loop is present exactly when its node is.
pub fn analytic_coeffs_edge<F: Scalar>(g: &Graph<F>, m: usize) -> Result<NormCoeffs<F>> {
    if m == 0 {
        return Err(Error::InvalidConfig("edge budget m must be positive".into()));
    }
    let weights = edge_weights(g)?;
    let mut p_edge = vec![F::zero(); g.num_edges()];
    for (&e, p) in weights.edge_ids().iter().zip(weights.inclusion_probabilities(m)) {
        p_edge[e] = p;
    }
    let p_node: Vec<F> = (0..g.num_nodes())
        .map(|v| {
            let miss = g
                .arc_range(v)
                .filter(|&a| g.col_indices()[a] != v)
                .fold(F::one(), |acc, a| acc * (F::one() - p_edge[g.arc_edge(a)]));
            F::one() - miss
        })
        .collect();
    let mut alpha = Vec::with_capacity(g.num_arcs());
    for v in 0..g.num_nodes() {
        for arc in g.arc_range(v) {
            let a = if g.col_indices()[arc] == v || p_node[v] <= F::zero() {
                F::one()
            } else {
                p_edge[g.arc_edge(arc)] / p_node[v]
            };
            alpha.push(a);
        }
    }
    let n = F::of_usize(g.num_nodes());
    Ok(NormCoeffs {
        alpha,
        lambda: p_node.iter().map(|&p| n * p).collect(),
        observed: vec![true; g.num_arcs()],
        counters: None,
        source: CoeffSource::Analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::sampler::SamplerKind;

    fn g(edges: &[(usize, usize)], n: usize) -> Graph<f64> {
        build_graph(edges, n, false).unwrap()
    }

    fn triangle() -> Graph<f64> {
        g(&[(0, 1), (1, 2), (0, 2)], 3)
    }

    #[test]
    fn full_sampler_gives_unit_coefficients() {
        let t = triangle();
        let (c, cache) = estimate_coeffs(&t, SamplerConfig::new(SamplerKind::Full, 0), 10, 3).unwrap();
        assert_eq!(cache.len(), 10);
        assert!(c.alphas().iter().all(|&a| a == 1.0));
        assert!(c.lambdas().iter().all(|&l| l == 1.0));
        assert_eq!(c.source(), CoeffSource::Empirical);
    }

    #[test]
    fn saturated_independent_sampler_on_k3() {
        let t = triangle();
        let cfg = SamplerConfig::new(SamplerKind::EdgeIndependent { m: 3 }, 4);
        let (c, _) = estimate_coeffs(&t, cfg, 5, 1).unwrap();
        assert!(c.alphas().iter().all(|&a| a == 1.0));
        assert!(c.lambdas().iter().all(|&l| l == 1.0));
    }

    #[test]
    fn never_sampled_node_has_zero_lambda() {
        // Node 2 is isolated and never appears.
        let graph = g(&[(0, 1)], 3);
        let cfg = SamplerConfig::new(SamplerKind::Edge { m: 1 }, 0);
        let (c, _) = estimate_coeffs(&graph, cfg, 8, 2).unwrap();
        assert_eq!(c.lambda(2), 0.0);
        assert_eq!(c.lambda(0), 1.0);
    }

    #[test]
    fn unobserved_edges_get_smoothed_alpha() {
        let path = g(&[(0, 1), (1, 2), (2, 3)], 4);
        let mut counters = Counters::new(&path);
        let s = crate::graph::induced_subgraph(&path, &[0, 1]).unwrap();
        for _ in 0..3 {
            counters.record(&path, &s);
        }
        let c = NormCoeffs::from_counters(&path, counters).unwrap();
        let a01 = path.arc_lookup(0, 1).unwrap();
        let a12 = path.arc_lookup(1, 2).unwrap();
        let a23 = path.arc_lookup(2, 3).unwrap();
        assert_eq!(c.alpha(a01), 1.0);
        assert!(c.is_observed(a01));
        assert_eq!(c.alpha(a12), 1.0 / 4.0);
        assert!(!c.is_observed(a12));
        assert_eq!(c.alpha(a23), 1.0);
        assert_eq!(c.lambda(0), 1.0);
        assert_eq!(c.lambda(3), 0.0);
    }

    #[test]
    fn empirical_formula_holds_exactly() {
        let graph = g(&[(0, 1), (1, 2), (2, 3), (1, 3), (3, 4), (4, 5), (5, 0)], 6);
        let cfg = SamplerConfig::new(SamplerKind::RandomWalk { r: 2, h: 2 }, 3);
        let (c, cache) = estimate_coeffs(&graph, cfg, 200, 4).unwrap();
        let counters = c.counters().unwrap();
        assert_eq!(counters.subgraphs, 200);
        for v in 0..6 {
            assert_eq!(c.lambda(v), counters.node[v] as f64 / 200.0);
            for arc in graph.arc_range(v) {
                let ce = counters.edge[graph.arc_edge(arc)];
                assert!(ce <= counters.node[v]);
                if ce > 0 {
                    assert_eq!(c.alpha(arc), ce as f64 / counters.node[v] as f64);
                }
            }
        }
        let (c1, cache1) = estimate_coeffs(&graph, cfg, 200, 1).unwrap();
        assert_eq!(c, c1);
        assert_eq!(cache, cache1);
    }

    #[test]
    fn analytic_single_edge() {
        let c = analytic_coeffs_edge(&g(&[(0, 1)], 2), 1).unwrap();
        assert_eq!(c.alphas(), &[1.0, 1.0]);
        assert_eq!(c.lambdas(), &[2.0, 2.0]);
    }

    #[test]
    fn analytic_square_with_chord() {
        let sq = g(&[(0, 1), (1, 2), (2, 3), (1, 3)], 4);
        let c = analytic_coeffs_edge(&sq, 1).unwrap();
        // Node 0 only touches (0,1), p = 1/3.
        assert!((c.lambda(0) - 4.0 / 3.0).abs() < 1e-15);
        let a = sq.arc_lookup(0, 1).unwrap();
        assert!((c.alpha(a) - 1.0).abs() < 1e-15);
        // Node 1 touches p = 1/3, 5/24, 5/24: p_1 = 1 - (2/3)(19/24)^2.
        let p1 = 1.0 - (2.0 / 3.0) * (19.0f64 / 24.0).powi(2);
        assert!((c.lambda(1) - 4.0 * p1).abs() < 1e-14);
        let a10 = sq.arc_lookup(1, 0).unwrap();
        assert!((c.alpha(a10) - (1.0 / 3.0) / p1).abs() < 1e-14);
    }

    #[test]
    fn analytic_saturation_matches_full_graph() {
        let cycle: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let c6 = g(&cycle, 6);
        let c = analytic_coeffs_edge(&c6, 6).unwrap();
        assert!(c.alphas().iter().all(|&a| a == 1.0));
        assert!(c.lambdas().iter().all(|&l| l == 6.0));
    }

    #[test]
    fn normalized_value_divides_by_alpha() {
        let t = triangle();
        let unit = NormCoeffs::unit(&t);
        assert_eq!(normalized_arc_value(&t, &unit, 0), 0.5);
        let quarter = NormCoeffs::from_parts(vec![0.25; 6], vec![1.0; 3], vec![true; 6], None, CoeffSource::Analytic).unwrap();
        assert_eq!(normalized_arc_value(&t, &quarter, 0), 2.0);
    }

    #[test]
    fn presample_default() {
        let t = triangle();
        let s = Sampler::new(&t, SamplerConfig::new(SamplerKind::Full, 0)).unwrap();
        assert_eq!(default_presample_count(&s, 5).unwrap(), 50);
    }
}
