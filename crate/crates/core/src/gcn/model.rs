use ndarray::Array2;
use rand::Rng;

use crate::data::LabelMode;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

/// Output head applied to the last layer's scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Softmax with cross-entropy (single-label).
    Softmax,
    /// Per-class sigmoid with binary cross-entropy (multi-label).
    Sigmoid,
}

impl From<LabelMode> for Head {
    fn from(mode: LabelMode) -> Self {
        match mode {
            LabelMode::Single => Head::Softmax,
            LabelMode::Multi => Head::Sigmoid,
        }
    }
}

/// Stack of graph convolution weights, `W(l)` of shape `f(l) × f(l+1)`.
/// Hidden layers use ReLU; the last layer emits raw class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    weights: Vec<Array2<F>>,
    head: Head,
}

impl<F: Scalar> Model<F> {
    pub fn from_weights(weights: Vec<Array2<F>>, head: Head) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DimensionMismatch("model needs at least one layer".into()));
        }
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l} outputs {} features, layer {} expects {}",
                    pair[0].ncols(),
                    l + 1,
                    pair[1].nrows()
                )));
            }
        }
        Ok(Model { weights, head })
    }

    /// Glorot-uniform initialization for layer sizes `dims = [f(1), …, f(L+1)]`.
    pub fn glorot(dims: &[usize], head: Head, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!("invalid layer sizes {dims:?}")));
        }
        let mut rng = stream_rng(seed, streams::INIT);
        let weights = dims
            .windows(2)
            .map(|d| {
                let limit = (6.0 / (d[0] + d[1]) as f64).sqrt();
                Array2::from_shape_simple_fn((d[0], d[1]), || F::of(rng.random_range(-limit..limit)))
            })
            .collect();
        Model::from_weights(weights, head)
    }

    pub fn weights(&self) -> &[Array2<F>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<F>] {
        &mut self.weights
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// `[f(1), …, f(L+1)]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.weights.iter().map(|w| w.nrows()).collect();
        d.push(self.weights.last().unwrap().ncols());
        d
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_must_chain() {
        let ok = Model::<f64>::from_weights(vec![Array2::zeros((3, 4)), Array2::zeros((4, 2))], Head::Softmax);
        assert_eq!(ok.unwrap().dims(), vec![3, 4, 2]);
        let bad = Model::<f64>::from_weights(vec![Array2::zeros((3, 4)), Array2::zeros((5, 2))], Head::Softmax);
        assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let a = Model::<f64>::glorot(&[10, 6, 3], Head::Softmax, 5).unwrap();
        let b = Model::<f64>::glorot(&[10, 6, 3], Head::Softmax, 5).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(a.weights()[0].iter().all(|w| w.abs() <= limit));
        assert_ne!(a, Model::<f64>::glorot(&[10, 6, 3], Head::Softmax, 6).unwrap());
    }
}
