//! Variance of the edge-sampled aggregation estimator.
//!
//! For an undirected edge `e = (u, v)` and layer `l`, the edge aggregate is
//! `b_e(l) = Ã[v,u]·x̃_u(l) + Ã[u,v]·x̃_v(l)` with `x̃(l) = X(l)·W(l)`. Under
//! independent edge sampling with probabilities `p_e`, the estimator
//! `ζ = Σ_e c_e/p_e · 1_e` of `Σ_e c_e` (where `c_e = Σ_l b_e(l)`) has
//! variance `Σ_e ‖c_e‖²/p_e − Σ_e ‖c_e‖²`, minimized by `p_e ∝ ‖c_e‖`.

use std::thread;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gcn::forward::full_activations;
use crate::gcn::model::Model;
use crate::graph::Graph;
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

/// Per-edge aggregates over the non-loop edges of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAggregates<F> {
    /// Graph edge id of each row.
    edges: Vec<usize>,
    /// `b_e(l)` for each layer, one row per edge.
    layers: Vec<Array2<F>>,
    /// Layer sum `c_e`.
    total: Array2<F>,
    norms: Vec<F>,
}

impl<F: Scalar> EdgeAggregates<F> {
    /// Aggregates given directly as layer sums, one row per edge.
    pub fn from_totals(edges: Vec<usize>, total: Array2<F>) -> Result<Self> {
        if edges.len() != total.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} edge ids for {} aggregate rows",
                edges.len(),
                total.nrows()
            )));
        }
        let norms = total.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        Ok(EdgeAggregates {
            edges,
            layers: vec![total.clone()],
            total,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn layer(&self, l: usize) -> &Array2<F> {
        &self.layers[l]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn total(&self) -> &Array2<F> {
        &self.total
    }

    pub fn total_of(&self, i: usize) -> ArrayView1<'_, F> {
        self.total.row(i)
    }

    /// `‖c_e‖` per edge.
    pub fn norms(&self) -> &[F] {
        &self.norms
    }

    pub fn dim(&self) -> usize {
        self.total.ncols()
    }

    /// `Σ_e c_e`, the quantity `ζ` estimates.
    pub fn target(&self) -> Array1<F> {
        self.total.sum_axis(ndarray::Axis(0))
    }
}

/// Edge aggregates of every non-loop edge using activations from a
/// full-graph forward pass. All layers must have the same output width so
/// their aggregates can be summed.
pub fn edge_aggregates<F: Scalar>(g: &Graph<F>, features: &Array2<F>, model: &Model<F>) -> Result<EdgeAggregates<F>> {
    let dims = model.dims();
    if dims[1..].windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::DimensionMismatch(format!(
            "layer outputs {:?} differ; edge aggregates need equal widths",
            &dims[1..]
        )));
    }
    let acts = full_activations(model, g, features)?;
    let edges: Vec<usize> = g.sampleable_edges().collect();
    let width = model.output_dim();
    let mut layers = Vec::with_capacity(model.num_layers());
    let mut total = Array2::zeros((edges.len(), width));
    for (l, w) in model.weights().iter().enumerate() {
        let xt = acts[l].dot(w);
        let mut b = Array2::zeros((edges.len(), width));
        for (i, &e) in edges.iter().enumerate() {
            let (u, v) = g.edge(e);
            let a_vu = g.norm_values()[g.arc_lookup(v, u).expect("edge arc")];
            let a_uv = g.norm_values()[g.arc_lookup(u, v).expect("edge arc")];
            let mut row = b.row_mut(i);
            row.scaled_add(a_vu, &xt.row(u));
            row.scaled_add(a_uv, &xt.row(v));
        }
        total += &b;
        layers.push(b);
    }
    let norms = total.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    Ok(EdgeAggregates {
        edges,
        layers,
        total,
        norms,
    })
}

/// Distributes a total mass `m` proportionally to `weights`, capping each
/// entry at 1 and handing the excess to the uncapped entries until the mass
/// is placed or everything is saturated. Zero-weight entries only receive
/// mass that positive-weight entries cannot absorb.
pub fn water_fill<F: Scalar>(weights: &[F], m: F) -> Vec<F> {
    let mut p = vec![F::zero(); weights.len()];
    let mut saturated = vec![false; weights.len()];
    let mut remaining = m;
    loop {
        let free: F = weights
            .iter()
            .zip(&saturated)
            .filter(|(_, &s)| !s)
            .map(|(&w, _)| w)
            .sum();
        if free <= F::zero() || remaining <= F::zero() {
            break;
        }
        let mut clipped = false;
        for i in 0..weights.len() {
            if !saturated[i] {
                p[i] = remaining * weights[i] / free;
                if p[i] >= F::one() {
                    clipped = true;
                }
            }
        }
        if !clipped {
            remaining = F::zero();
            break;
        }
        for i in 0..weights.len() {
            if !saturated[i] && p[i] >= F::one() {
                p[i] = F::one();
                saturated[i] = true;
                remaining -= F::one();
            }
        }
    }
    let idle: Vec<usize> = (0..weights.len())
        .filter(|&i| !saturated[i] && weights[i] <= F::zero())
        .collect();
    if remaining > F::zero() && !idle.is_empty() {
        let share = (remaining / F::of_usize(idle.len())).min(F::one());
        for i in idle {
            p[i] = share;
        }
    }
    p
}

/// Variance-minimizing inclusion probabilities `p_e ∝ ‖c_e‖` with expected
/// edge count `m`.
pub fn optimal_edge_probs<F: Scalar>(aggs: &EdgeAggregates<F>, m: F) -> Result<Vec<F>> {
    if aggs.norms.iter().all(|&n| n <= F::zero()) {
        return Err(Error::ZeroAggregates);
    }
    if !(m > F::zero()) {
        return Err(Error::InvalidConfig("expected edge count must be positive".into()));
    }
    Ok(water_fill(&aggs.norms, m))
}

fn check_probs<F: Scalar>(aggs: &EdgeAggregates<F>, probs: &[F]) -> Result<()> {
    if probs.len() != aggs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for {} edges",
            probs.len(),
            aggs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|&&p| !(p >= F::zero() && p <= F::one())) {
        return Err(Error::InvalidConfig(format!("probability {p} outside [0, 1]")));
    }
    for (i, (&p, &n)) in probs.iter().zip(&aggs.norms).enumerate() {
        if p <= F::zero() && n > F::zero() {
            return Err(Error::InfiniteVariance { edge: aggs.edges[i] });
        }
    }
    Ok(())
}

/// `Σ_e ‖c_e‖² (1/p_e − 1)`, summed over output dimensions.
pub fn variance_closed_form<F: Scalar>(aggs: &EdgeAggregates<F>, probs: &[F]) -> Result<F> {
    check_probs(aggs, probs)?;
    Ok(aggs
        .norms
        .iter()
        .zip(probs)
        .filter(|(&n, _)| n > F::zero())
        .map(|(&n, &p)| n * n * (F::one() / p - F::one()))
        .sum())
}

/// `∂Var/∂p_e = −‖c_e‖² / p_e²`.
pub fn variance_gradient<F: Scalar>(aggs: &EdgeAggregates<F>, probs: &[F]) -> Result<Vec<F>> {
    check_probs(aggs, probs)?;
    Ok(aggs
        .norms
        .iter()
        .zip(probs)
        .map(|(&n, &p)| if n > F::zero() { -n * n / (p * p) } else { F::zero() })
        .collect())
}

/// Running per-dimension mean and second central moment.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Array1<f64>,
    m2: Array1<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            n: 0.0,
            mean: Array1::zeros(dim),
            m2: Array1::zeros(dim),
        }
    }

    fn push(&mut self, x: &Array1<f64>) {
        self.n += 1.0;
        let delta = x - &self.mean;
        self.mean.scaled_add(1.0 / self.n, &delta);
        let delta2 = x - &self.mean;
        self.m2 += &(&delta * &delta2);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        let delta = &other.mean - &self.mean;
        self.m2 += &other.m2;
        self.m2 += &(&delta * &delta * (self.n * other.n / n));
        self.mean.scaled_add(other.n / n, &delta);
        self.n = n;
    }

    /// Unbiased variance summed over dimensions.
    fn total_variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2.sum() / (self.n - 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    /// Sample variance of `ζ`, summed over dimensions.
    pub variance: f64,
    /// Standard error of `variance`, from batch means over chunks.
    pub std_error: f64,
    /// Sample mean of `ζ`.
    pub mean: Array1<f64>,
    pub trials: usize,
}

fn chunk_size(trials: usize) -> usize {
    if trials >= 20_000 {
        1000
    } else {
        (trials / 20).max(1)
    }
}

/// Samples `ζ` under independent edge inclusion `trials` times. Trials are
/// split into fixed chunks with their own RNG streams; chunk results are
/// merged in chunk order, so the output does not depend on `threads`.
pub fn variance_monte_carlo<F: Scalar>(
    aggs: &EdgeAggregates<F>,
    probs: &[F],
    trials: usize,
    seed: u64,
    threads: usize,
) -> Result<MonteCarloStats> {
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    check_probs(aggs, probs)?;
    let dim = aggs.dim();
    let p: Vec<f64> = probs.iter().map(|p| p.as_f64()).collect();
    let scaled: Vec<Array1<f64>> = (0..aggs.len())
        .map(|i| aggs.total_of(i).mapv(|x| if p[i] > 0.0 { x.as_f64() / p[i] } else { 0.0 }))
        .collect();
    let size = chunk_size(trials);
    let chunks = trials.div_ceil(size);
    let run_chunk = |c: usize| {
        let mut rng = stream_rng(seed, streams::MONTE_CARLO + c as u64);
        let mut mom = Moments::new(dim);
        let mut zeta = Array1::zeros(dim);
        for _ in c * size..((c + 1) * size).min(trials) {
            zeta.fill(0.0);
            for (i, s) in scaled.iter().enumerate() {
                if rng.random::<f64>() < p[i] {
                    zeta += s;
                }
            }
            mom.push(&zeta);
        }
        mom
    };
    let threads = threads.clamp(1, chunks);
    let mut parts: Vec<Option<Moments>> = vec![None; chunks];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run_chunk = &run_chunk;
                scope.spawn(move || (w..chunks).step_by(threads).map(|c| (c, run_chunk(c))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (c, m) in h.join().expect("Monte-Carlo worker panicked") {
                parts[c] = Some(m);
            }
        }
    });
    let parts: Vec<Moments> = parts.into_iter().map(|m| m.expect("chunk computed")).collect();
    let mut all = Moments::new(dim);
    for m in &parts {
        all.merge(m);
    }
    let variance = all.total_variance();
    // Batch means over full chunks: spread of per-chunk variance estimates.
    let full: Vec<f64> = parts
        .iter()
        .filter(|m| m.n as usize == size)
        .map(Moments::total_variance)
        .collect();
    let std_error = if full.len() >= 2 {
        let k = full.len() as f64;
        let mean = full.iter().sum::<f64>() / k;
        let var = full.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(MonteCarloStats {
        variance,
        std_error,
        mean: all.mean,
        trials,
    })
}

/// Probability that an input-layer node stays connected through `layers`
/// independent layer samplers that keep each of its `d` edges with
/// probability `p`: `(1 − (1−p)^d)^(layers−1)`.
pub fn survival_probability(p: f64, d: u32, layers: u32) -> f64 {
    (1.0 - (1.0 - p).powi(d as i32)).powi(layers as i32 - 1)
}

/// Simulates independent layer sampling from a uniform root: at each of the
/// `layers − 1` transitions every incident edge of the current node is kept
/// with probability `p`; the walk survives if any edge is kept and moves to
/// a uniformly chosen kept neighbor. Returns the number of surviving roots.
pub fn simulate_layer_survival<F: Scalar>(g: &Graph<F>, p: f64, layers: u32, trials: usize, seed: u64) -> Result<usize> {
    if !(0.0..=1.0).contains(&p) || layers == 0 {
        return Err(Error::InvalidConfig("need 0 <= p <= 1 and at least one layer".into()));
    }
    let mut rng = stream_rng(seed, streams::MONTE_CARLO - 1);
    let mut survived = 0;
    let mut kept = Vec::new();
    for _ in 0..trials {
        let mut v = rng.random_range(0..g.num_nodes());
        let mut alive = true;
        for _ in 1..layers {
            kept.clear();
            kept.extend(g.neighbors(v).iter().copied().filter(|&u| u != v && rng.random::<f64>() < p));
            if kept.is_empty() {
                alive = false;
                break;
            }
            v = kept[rng.random_range(0..kept.len())];
        }
        survived += alive as usize;
    }
    Ok(survived)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::model::Head;
    use crate::graph::build_graph;
    use ndarray::array;
    use proptest::prelude::*;

    fn scalar_aggs(values: &[f64]) -> EdgeAggregates<f64> {
        let total = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        EdgeAggregates::from_totals((0..values.len()).collect(), total).unwrap()
    }

    #[test]
    fn zero_features_give_zero_aggregates() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2)], 3, false).unwrap();
        let m = Model::glorot(&[2, 2], Head::Softmax, 0).unwrap();
        let a = edge_aggregates(&g, &Array2::zeros((3, 2)), &m).unwrap();
        assert!(a.total().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_edge_hand_value() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let m = Model::from_weights(vec![array![[1.0]]], Head::Softmax).unwrap();
        let a = edge_aggregates(&g, &array![[1.0], [2.0]], &m).unwrap();
        assert_eq!(a.total(), &array![[3.0]]);
        assert_eq!(a.norms(), &[3.0]);
    }

    #[test]
    fn relabeling_permutes_aggregates() {
        let edges = [(0, 1), (1, 2), (2, 3), (0, 2)];
        let perm = [2, 0, 3, 1];
        let g: Graph<f64> = build_graph(&edges, 4, false).unwrap();
        let pe: Vec<_> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let h: Graph<f64> = build_graph(&pe, 4, false).unwrap();
        let x = array![[1.0, 0.5], [-1.0, 2.0], [0.3, 0.3], [2.0, -1.0]];
        let mut xp = Array2::zeros((4, 2));
        for v in 0..4 {
            xp.row_mut(perm[v]).assign(&x.row(v));
        }
        let m = Model::glorot(&[2, 3, 3], Head::Softmax, 4).unwrap();
        let a = edge_aggregates(&g, &x, &m).unwrap();
        let b = edge_aggregates(&h, &xp, &m).unwrap();
        for (i, &e) in a.edges().iter().enumerate() {
            let (u, v) = g.edge(e);
            let (pu, pv) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
            let j = b.edges().iter().position(|&f| h.edge(f) == (pu, pv)).unwrap();
            for d in 0..3 {
                assert!((a.total()[[i, d]] - b.total()[[j, d]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unequal_layer_widths_rejected() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let m = Model::glorot(&[2, 4, 3], Head::Softmax, 0).unwrap();
        assert!(matches!(edge_aggregates(&g, &Array2::zeros((2, 2)), &m), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn optimal_probability_examples() {
        let uniform = optimal_edge_probs(&scalar_aggs(&[2.0, 2.0, 2.0, 2.0]), 1.0).unwrap();
        assert!(uniform.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(optimal_edge_probs(&scalar_aggs(&[3.0, 1.0]), 1.0).unwrap(), vec![0.75, 0.25]);
        assert_eq!(optimal_edge_probs(&scalar_aggs(&[3.0, 1.0, 0.5]), 3.0).unwrap(), vec![1.0; 3]);
        assert!(matches!(optimal_edge_probs(&scalar_aggs(&[0.0, 0.0]), 1.0), Err(Error::ZeroAggregates)));
    }

    #[test]
    fn water_fill_clips_and_renormalizes() {
        let p = water_fill(&[10.0, 1.0, 1.0], 2.0);
        assert_eq!(p, vec![1.0, 0.5, 0.5]);
        let p = water_fill(&[4.0, 0.0, 0.0], 2.0);
        assert_eq!(p, vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn closed_form_examples() {
        let a = scalar_aggs(&[3.0, 1.0]);
        assert_eq!(variance_closed_form(&a, &[1.0, 1.0]).unwrap(), 0.0);
        assert!((variance_closed_form(&a, &[0.75, 0.25]).unwrap() - 6.0).abs() < 1e-12);
        assert!((variance_closed_form(&a, &[0.5, 0.5]).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(variance_closed_form(&a, &[1.0, 0.0]), Err(Error::InfiniteVariance { edge: 1 })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = scalar_aggs(&[3.0, -1.0, 2.5]);
        let p = [0.4, 0.7, 0.55];
        let g = variance_gradient(&a, &p).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut up = p;
            up[i] += h;
            let mut dn = p;
            dn[i] -= h;
            let fd = (variance_closed_form(&a, &up).unwrap() - variance_closed_form(&a, &dn).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() / g[i].abs() < 1e-6);
        }
    }

    #[test]
    fn certain_inclusion_has_zero_empirical_variance() {
        let a = scalar_aggs(&[3.0, 1.0]);
        let s = variance_monte_carlo(&a, &[1.0, 1.0], 500, 0, 2).unwrap();
        assert!(s.variance.abs() < 1e-20);
        assert_eq!(s.mean[0], 4.0);
    }

    #[test]
    fn monte_carlo_matches_closed_form_and_optimum_wins() {
        let a = scalar_aggs(&[3.0, 1.0]);
        let opt = variance_monte_carlo(&a, &[0.75, 0.25], 100_000, 1, 4).unwrap();
        assert!((opt.variance - 6.0).abs() < 3.0 * opt.std_error, "{opt:?}");
        let uni = variance_monte_carlo(&a, &[0.5, 0.5], 100_000, 2, 4).unwrap();
        assert!((uni.variance - 10.0).abs() < 3.0 * uni.std_error, "{uni:?}");
        assert!(opt.variance <= uni.variance - 3.0 * uni.std_error);
    }

    #[test]
    fn monte_carlo_is_thread_independent() {
        let a = scalar_aggs(&[3.0, 1.0, -2.0]);
        let p = [0.3, 0.6, 0.9];
        let one = variance_monte_carlo(&a, &p, 30_000, 5, 1).unwrap();
        let many = variance_monte_carlo(&a, &p, 30_000, 5, 7).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival_probability(1.0, 3, 4), 1.0);
        assert_eq!(survival_probability(0.5, 1, 2), 0.5);
        assert_eq!(survival_probability(0.5, 2, 3), 0.5625);
    }

    #[test]
    fn simulated_survival_on_a_cycle() {
        let edges: Vec<_> = (0..30).map(|i| (i, (i + 1) % 30)).collect();
        let g: Graph<f64> = build_graph(&edges, 30, false).unwrap();
        let trials = 10_000;
        let p = 0.3;
        let expect = survival_probability(p, 2, 3);
        let hits = simulate_layer_survival(&g, p, 3, trials, 8).unwrap();
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - expect).abs() < 3.0 * sigma);
    }

    proptest! {
        #[test]
        fn optimum_beats_random_feasible_vectors(
            values in prop::collection::vec(-5.0f64..5.0, 3..=20),
            weights in prop::collection::vec(0.01f64..1.0, 20),
        ) {
            let a = scalar_aggs(&values);
            prop_assume!(a.norms().iter().filter(|&&n| n > 1e-9).count() >= 3);
            let opt = optimal_edge_probs(&a, 3.0).unwrap();
            let best = variance_closed_form(&a, &opt).unwrap();
            let other = water_fill(&weights[..values.len()], 3.0);
            prop_assert!((other.iter().sum::<f64>() - 3.0).abs() < 1e-9);
            prop_assert!(best <= variance_closed_form(&a, &other).unwrap() + 1e-9);
        }

        #[test]
        fn water_fill_places_the_mass(weights in prop::collection::vec(0.0f64..3.0, 1..30), m in 0.1f64..40.0) {
            let p = water_fill(&weights, m);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let expected = m.min(weights.len() as f64);
            prop_assert!((p.iter().sum::<f64>() - expected).abs() < 1e-9);
        }
    }
}
