//! Forward and backward propagation.
//!
//! Layer `l` computes `X(l+1) = σ(Â · X(l) · W(l))`. The product is
//! evaluated as `Â · (X W)`; the same routine serves subgraph minibatches
//! and full-graph inference, so a full "subgraph" with `α ≡ 1` reproduces
//! full-graph outputs bit for bit.

use ndarray::{Array2, Zip};
use rand::Rng;

use super::model::Model;
use super::sparse::SparseAdj;
use crate::data::Labels;
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::norm::NormCoeffs;
use crate::rng::StreamRng;
use crate::scalar::Scalar;

/// One training minibatch gathered from a sampled subgraph.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    pub subgraph: Subgraph,
    /// Rows gathered from the global feature matrix, in local order.
    pub features: Array2<F>,
    pub labels: Labels,
    /// `λ` of each local node.
    pub lambda: Vec<F>,
    /// Local nodes whose loss is counted: training nodes with `λ > 0`.
    pub in_loss: Vec<bool>,
    pub adjacency: SparseAdj<F>,
}

impl<F: Scalar> Batch<F> {
    /// `loss_mask` is indexed by global node id (typically "is a training
    /// node").
    pub fn new(
        g: &Graph<F>,
        subgraph: Subgraph,
        features: &Array2<F>,
        labels: &Labels,
        loss_mask: &[bool],
        coeffs: &NormCoeffs<F>,
    ) -> Result<Self> {
        if features.nrows() != g.num_nodes() || labels.len() != g.num_nodes() || loss_mask.len() != g.num_nodes() {
            return Err(Error::DimensionMismatch("features, labels and mask must cover every node".into()));
        }
        coeffs.check_graph(g)?;
        let nodes = subgraph.nodes();
        let lambda: Vec<F> = nodes.iter().map(|&v| coeffs.lambda(v)).collect();
        let in_loss = nodes
            .iter()
            .zip(&lambda)
            .map(|(&v, &l)| loss_mask[v] && l > F::zero())
            .collect();
        Ok(Batch {
            features: features.select(ndarray::Axis(0), nodes),
            labels: labels.gather(nodes),
            lambda,
            in_loss,
            adjacency: SparseAdj::for_subgraph(g, &subgraph, coeffs),
            subgraph,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.subgraph.num_nodes()
    }

    pub fn loss_nodes(&self) -> usize {
        self.in_loss.iter().filter(|&&b| b).count()
    }
}

/// Feature dropout applied to every layer input during training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut StreamRng,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    /// Layer inputs after dropout.
    inputs: Vec<Array2<F>>,
    pre_activations: Vec<Array2<F>>,
    /// Inverted-dropout scale per input entry (`0` or `1/(1-rate)`).
    masks: Vec<Option<Array2<F>>>,
}

impl<F> ForwardCache<F> {
    /// `Â·(X W)` of every layer, before ReLU (the last one is the scores).
    pub fn pre_activations(&self) -> &[Array2<F>] {
        &self.pre_activations
    }
}

fn relu<F: Scalar>(z: &Array2<F>) -> Array2<F> {
    z.mapv(|x| if x > F::zero() { x } else { F::zero() })
}

pub(crate) fn forward_with<F: Scalar>(
    model: &Model<F>,
    adj: &SparseAdj<F>,
    features: &Array2<F>,
    mut dropout: Option<Dropout<'_>>,
) -> Result<(Array2<F>, ForwardCache<F>)> {
    if features.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, model expects {}",
            features.ncols(),
            model.input_dim()
        )));
    }
    if features.nrows() != adj.num_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            features.nrows(),
            adj.num_rows()
        )));
    }
    let last = model.num_layers() - 1;
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(model.num_layers()),
        pre_activations: Vec::with_capacity(model.num_layers()),
        masks: Vec::with_capacity(model.num_layers()),
    };
    let mut x = features.clone();
    for (l, w) in model.weights().iter().enumerate() {
        let mask = match dropout.as_mut() {
            Some(d) if d.rate > 0.0 => {
                let scale = F::of(1.0 / (1.0 - d.rate));
                let m = Array2::from_shape_simple_fn(x.raw_dim(), || {
                    if d.rng.random::<f64>() < d.rate { F::zero() } else { scale }
                });
                x = &x * &m;
                Some(m)
            }
            _ => None,
        };
        let z = adj.propagate(x.dot(w).view());
        let next = if l == last { z.clone() } else { relu(&z) };
        cache.inputs.push(x);
        cache.pre_activations.push(z);
        cache.masks.push(mask);
        x = next;
    }
    Ok((x, cache))
}

/// Subgraph forward pass with `α`-normalized propagation.
pub fn forward_subgraph<F: Scalar>(
    model: &Model<F>,
    batch: &Batch<F>,
    dropout: Option<Dropout<'_>>,
) -> Result<(Array2<F>, ForwardCache<F>)> {
    forward_with(model, &batch.adjacency, &batch.features, dropout)
}

/// Full-graph inference: plain `D^-1 A` propagation, no dropout.
pub fn forward_full<F: Scalar>(model: &Model<F>, g: &Graph<F>, features: &Array2<F>) -> Result<Array2<F>> {
    forward_with(model, &SparseAdj::full(g), features, None).map(|(scores, _)| scores)
}

/// Per-layer activations `X(1)…X(L+1)` of a full-graph pass, without the
/// head.
pub fn full_activations<F: Scalar>(model: &Model<F>, g: &Graph<F>, features: &Array2<F>) -> Result<Vec<Array2<F>>> {
    let (scores, cache) = forward_with(model, &SparseAdj::full(g), features, None)?;
    let mut out = cache.inputs;
    out.push(scores);
    Ok(out)
}

/// Weight gradients given `∂loss/∂scores`.
pub fn backward<F: Scalar>(
    model: &Model<F>,
    adj: &SparseAdj<F>,
    cache: &ForwardCache<F>,
    d_scores: Array2<F>,
) -> Vec<Array2<F>> {
    let layers = model.num_layers();
    let mut grads = vec![Array2::zeros((0, 0)); layers];
    let mut d_out = d_scores;
    for l in (0..layers).rev() {
        let mut dz = d_out;
        if l != layers - 1 {
            Zip::from(&mut dz)
                .and(&cache.pre_activations[l])
                .for_each(|d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
        }
        let dh = adj.propagate_transpose(dz.view());
        grads[l] = cache.inputs[l].t().dot(&dh);
        if l == 0 {
            break;
        }
        let mut dx = dh.dot(&model.weights()[l].t());
        if let Some(m) = &cache.masks[l] {
            dx = &dx * m;
        }
        d_out = dx;
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::model::Head;
    use crate::graph::{build_graph, full_subgraph};
    use ndarray::array;

    #[test]
    fn zero_weights_give_zero_output() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2)], 3, false).unwrap();
        let m = Model::from_weights(vec![Array2::zeros((2, 3)), Array2::zeros((3, 2))], Head::Softmax).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert!(forward_full(&m, &g, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_single_node_outputs_zero() {
        let g: Graph<f64> = build_graph(&[], 1, false).unwrap();
        let m = Model::from_weights(vec![array![[1.0, 2.0]]], Head::Softmax).unwrap();
        assert_eq!(forward_full(&m, &g, &array![[7.0]]).unwrap(), array![[0.0, 0.0]]);
    }

    #[test]
    fn single_edge_swaps_features() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let m = Model::from_weights(vec![array![[1.0]]], Head::Softmax).unwrap();
        let out = forward_full(&m, &g, &array![[3.0], [5.0]]).unwrap();
        assert_eq!(out, array![[5.0], [3.0]]);
    }

    #[test]
    fn triangle_averages_the_other_two() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2), (0, 2)], 3, false).unwrap();
        let w = array![[2.0, 0.0], [0.0, -1.0]];
        let m = Model::from_weights(vec![w.clone()], Head::Softmax).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 8.0]];
        let out = forward_full(&m, &g, &x).unwrap();
        for v in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&u| u != v).collect();
            let mean = (&x.row(others[0]) + &x.row(others[1])) / 2.0;
            let expected = mean.dot(&w);
            for c in 0..2 {
                assert!((out[[v, c]] - expected[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_subgraph_with_unit_alpha_matches_forward_full_bitwise() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 5, true).unwrap();
        let m = Model::glorot(&[3, 4, 2], Head::Softmax, 1).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 * 0.7 - j as f64).sin());
        let labels = Labels::single(vec![0, 1, 0, 1, 0], 2).unwrap();
        let coeffs = NormCoeffs::unit(&g);
        let batch = Batch::new(&g, full_subgraph(&g), &x, &labels, &[true; 5], &coeffs).unwrap();
        let (sub, _) = forward_subgraph(&m, &batch, None).unwrap();
        let full = forward_full(&m, &g, &x).unwrap();
        assert_eq!(sub, full);
        assert_eq!(forward_full(&m, &g, &x).unwrap(), full);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let m = Model::from_weights(vec![Array2::zeros((3, 2))], Head::Softmax).unwrap();
        assert!(matches!(forward_full(&m, &g, &Array2::zeros((2, 2))), Err(Error::DimensionMismatch(_))));
        assert!(matches!(forward_full(&m, &g, &Array2::zeros((3, 3))), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dropout_zeroes_and_rescales() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, true).unwrap();
        let m = Model::from_weights(vec![Array2::eye(50)], Head::Softmax).unwrap();
        let x = Array2::from_elem((2, 50), 1.0);
        let mut rng = crate::rng::stream_rng(0, 0);
        let (_, cache) = forward_with(&m, &SparseAdj::full(&g), &x, Some(Dropout { rate: 0.5, rng: &mut rng })).unwrap();
        let input = &cache.inputs[0];
        assert!(input.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = input.iter().filter(|&&v| v == 2.0).count();
        assert!(kept > 20 && kept < 80);
    }
}
