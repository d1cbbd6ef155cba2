//! Classification losses and the `λ`-weighted minibatch objective.

use ndarray::{Array1, Array2, ArrayView1};

use super::forward::{backward, Batch, ForwardCache};
use super::model::{Head, Model};
use crate::data::Labels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How per-node losses are combined within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// `Σ L_v / λ_v`.
    #[default]
    Sum,
    /// `Σ L_v / λ_v` divided by the number of contributing nodes.
    Mean,
}

fn log_softmax<F: Scalar>(row: ArrayView1<'_, F>) -> Array1<F> {
    let max = row.fold(F::neg_infinity(), |a, &b| a.max(b));
    let lse = row.fold(F::zero(), |acc, &z| acc + (z - max).exp()).ln() + max;
    row.mapv(|z| z - lse)
}

/// `log(1 + e^z)` without overflow.
fn softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Per-row loss `L_v` and its gradient with respect to the row's scores.
fn row_loss<F: Scalar>(head: Head, scores: ArrayView1<'_, F>, labels: &Labels, row: usize) -> (F, Array1<F>) {
    match (head, labels) {
        (Head::Softmax, Labels::Single { classes, .. }) => {
            let logp = log_softmax(scores);
            let y = classes[row];
            let mut grad = logp.mapv(|l| l.exp());
            grad[y] -= F::one();
            (-logp[y], grad)
        }
        (Head::Sigmoid, Labels::Multi(m)) => {
            let y = m.row(row);
            let mut loss = F::zero();
            let grad = Array1::from_shape_fn(scores.len(), |c| {
                let z = scores[c];
                let t = F::of_usize(y[c] as usize);
                loss += softplus(z) - t * z;
                sigmoid(z) - t
            });
            (loss, grad)
        }
        _ => unreachable!("head and label mode checked by caller"),
    }
}

fn check_head<F: Scalar>(head: Head, scores: &Array2<F>, labels: &Labels) -> Result<()> {
    if Head::from(labels.mode()) != head {
        return Err(Error::DimensionMismatch(format!(
            "{head:?} head cannot score {} labels",
            labels.mode().as_str()
        )));
    }
    if scores.ncols() != labels.num_classes() || scores.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "scores are {}x{}, labels cover {} nodes and {} classes",
            scores.nrows(),
            scores.ncols(),
            labels.len(),
            labels.num_classes()
        )));
    }
    Ok(())
}

/// Unweighted loss `L_v` of every row.
pub fn node_losses<F: Scalar>(head: Head, scores: &Array2<F>, labels: &Labels) -> Result<Vec<F>> {
    check_head(head, scores, labels)?;
    Ok((0..scores.nrows())
        .map(|v| row_loss(head, scores.row(v), labels, v).0)
        .collect())
}

/// Minibatch loss and the gradient of every weight matrix.
///
/// Returns `Error::NoTrainingNodes` when no node of the batch contributes,
/// which callers treat as "skip this batch".
pub fn loss_and_grad<F: Scalar>(
    model: &Model<F>,
    batch: &Batch<F>,
    scores: &Array2<F>,
    cache: &ForwardCache<F>,
    reduction: Reduction,
) -> Result<(F, Vec<Array2<F>>)> {
    check_head(model.head(), scores, &batch.labels)?;
    let count = batch.loss_nodes();
    if count == 0 {
        return Err(Error::NoTrainingNodes);
    }
    let scale = match reduction {
        Reduction::Sum => F::one(),
        Reduction::Mean => F::one() / F::of_usize(count),
    };
    let mut loss = F::zero();
    let mut d_scores = Array2::zeros(scores.raw_dim());
    for v in 0..scores.nrows() {
        if !batch.in_loss[v] {
            continue;
        }
        let (l, g) = row_loss(model.head(), scores.row(v), &batch.labels, v);
        let w = scale / batch.lambda[v];
        loss += l * w;
        d_scores.row_mut(v).scaled_add(w, &g);
    }
    let grads = backward(model, &batch.adjacency, cache, d_scores);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::forward::forward_subgraph;
    use crate::graph::{build_graph, full_subgraph, Graph};
    use crate::norm::{CoeffSource, NormCoeffs};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs_with_lambda(g: &Graph<f64>, lambda: f64) -> NormCoeffs<f64> {
        NormCoeffs::from_parts(
            vec![1.0; g.num_arcs()],
            vec![lambda; g.num_nodes()],
            vec![true; g.num_arcs()],
            None,
            CoeffSource::Analytic,
        )
        .unwrap()
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let g: Graph<f64> = build_graph(&[], 1, true).unwrap();
        let m = Model::from_weights(vec![array![[50.0, -50.0]]], Head::Softmax).unwrap();
        let labels = Labels::single(vec![0], 2).unwrap();
        let b = Batch::new(&g, full_subgraph(&g), &array![[1.0]], &labels, &[true], &NormCoeffs::unit(&g)).unwrap();
        let (s, c) = forward_subgraph(&m, &b, None).unwrap();
        let (loss, _) = loss_and_grad(&m, &b, &s, &c, Reduction::Sum).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn no_training_nodes_is_a_skip_signal() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let m = Model::from_weights(vec![array![[1.0, 0.0]]], Head::Softmax).unwrap();
        let labels = Labels::single(vec![0, 1], 2).unwrap();
        let b = Batch::new(&g, full_subgraph(&g), &array![[1.0], [2.0]], &labels, &[false, false], &NormCoeffs::unit(&g))
            .unwrap();
        let (s, c) = forward_subgraph(&m, &b, None).unwrap();
        assert!(matches!(loss_and_grad(&m, &b, &s, &c, Reduction::Sum), Err(Error::NoTrainingNodes)));
    }

    #[test]
    fn doubling_lambda_halves_loss_and_gradients() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2), (2, 3), (0, 3)], 4, true).unwrap();
        let m = Model::glorot(&[3, 5, 2], Head::Softmax, 9).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64).cos());
        let labels = Labels::single(vec![0, 1, 1, 0], 2).unwrap();
        let run = |lambda: f64| {
            let b = Batch::new(&g, full_subgraph(&g), &x, &labels, &[true; 4], &coeffs_with_lambda(&g, lambda)).unwrap();
            let (s, c) = forward_subgraph(&m, &b, None).unwrap();
            loss_and_grad(&m, &b, &s, &c, Reduction::Sum).unwrap()
        };
        let (l1, g1) = run(0.75);
        let (l2, g2) = run(1.5);
        assert_eq!(l1 / 2.0, l2);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(&(a / 2.0), b);
        }
    }

    #[test]
    fn mean_reduction_divides_by_contributing_nodes() {
        let g: Graph<f64> = build_graph(&[(0, 1), (1, 2)], 3, true).unwrap();
        let m = Model::glorot(&[2, 2], Head::Softmax, 1).unwrap();
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let labels = Labels::single(vec![0, 1, 0], 2).unwrap();
        let b = Batch::new(&g, full_subgraph(&g), &x, &labels, &[true, false, true], &NormCoeffs::unit(&g)).unwrap();
        let (s, c) = forward_subgraph(&m, &b, None).unwrap();
        let (sum, _) = loss_and_grad(&m, &b, &s, &c, Reduction::Sum).unwrap();
        let (mean, _) = loss_and_grad(&m, &b, &s, &c, Reduction::Mean).unwrap();
        assert!((sum / 2.0 - mean).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_loss_is_stable_for_large_scores() {
        let scores: Array2<f64> = array![[800.0, -800.0]];
        let labels = Labels::multi(array![[1, 0]]).unwrap();
        let l = node_losses(Head::Sigmoid, &scores, &labels).unwrap();
        assert!(l[0].is_finite() && l[0] < 1e-300);
        let wrong = Labels::multi(array![[0, 1]]).unwrap();
        assert!((node_losses(Head::Sigmoid, &scores, &wrong).unwrap()[0] - 1600.0).abs() < 1e-9);
    }

    #[test]
    fn head_and_labels_must_agree() {
        let scores = array![[0.0, 1.0]];
        let labels = Labels::multi(array![[1, 0]]).unwrap();
        assert!(node_losses(Head::Softmax, &scores, &labels).is_err());
    }

    /// Central-difference check on a random batch.
    pub(crate) fn finite_difference_error(layers: usize, head: Head, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=12);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.35 {
                    edges.push((u, v));
                }
            }
        }
        let g: Graph<f64> = build_graph(&edges, n, true).unwrap();
        let classes = 3;
        let mut dims = vec![4];
        for _ in 1..layers {
            dims.push(5);
        }
        dims.push(classes);
        let model = Model::glorot(&dims, head, seed).unwrap();
        let x = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
        let labels = match head {
            Head::Softmax => Labels::single((0..n).map(|_| rng.random_range(0..classes)).collect(), classes).unwrap(),
            Head::Sigmoid => Labels::multi(Array2::from_shape_simple_fn((n, classes), || rng.random_range(0..2u8))).unwrap(),
        };
        let alpha: Vec<f64> = (0..g.num_arcs()).map(|_| rng.random_range(0.5..1.5)).collect();
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let coeffs = NormCoeffs::from_parts(alpha, lambda, vec![true; g.num_arcs()], None, CoeffSource::Analytic).unwrap();
        let mask: Vec<bool> = (0..n).map(|v| v % 3 != 2).collect();
        let batch = Batch::new(&g, full_subgraph(&g), &x, &labels, &mask, &coeffs).unwrap();
        let loss_of = |m: &Model<f64>| {
            let (s, c) = forward_subgraph(m, &batch, None).unwrap();
            loss_and_grad(m, &batch, &s, &c, Reduction::Sum).unwrap()
        };
        let (_, grads) = loss_of(&model);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for l in 0..layers {
            for idx in 0..grads[l].len() {
                let (r, c) = (idx / grads[l].ncols(), idx % grads[l].ncols());
                let mut plus = model.clone();
                plus.weights_mut()[l][[r, c]] += h;
                let mut minus = model.clone();
                minus.weights_mut()[l][[r, c]] -= h;
                let fd = (loss_of(&plus).0 - loss_of(&minus).0) / (2.0 * h);
                let an = grads[l][[r, c]];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for layers in 1..=3 {
            for head in [Head::Softmax, Head::Sigmoid] {
                for seed in 0..3 {
                    let err = finite_difference_error(layers, head, seed);
                    assert!(err < 1e-4, "layers {layers} head {head:?} seed {seed}: rel err {err}");
                }
            }
        }
    }
}
