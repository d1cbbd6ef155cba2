use ndarray::Array2;

use crate::data::Labels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pooled decision counts over every (node, class) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    /// `2TP / (2TP + FP + FN)`. With nothing to predict and nothing
    /// predicted the score is 1.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// Confusion counts of `scores` (raw last-layer outputs) against `labels`.
///
/// Single-label mode predicts the argmax; multi-label mode predicts class
/// `c` when its score is positive, i.e. sigmoid above one half.
pub fn confusion<F: Scalar>(scores: &Array2<F>, labels: &Labels) -> Result<ConfusionCounts> {
    if labels.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    if scores.nrows() != labels.len() || scores.ncols() != labels.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "scores are {}x{}, labels are {}x{}",
            scores.nrows(),
            scores.ncols(),
            labels.len(),
            labels.num_classes()
        )));
    }
    let mut c = ConfusionCounts::default();
    match labels {
        Labels::Single { classes, .. } => {
            for (row, &y) in scores.rows().into_iter().zip(classes) {
                let mut best = 0;
                for (k, &s) in row.iter().enumerate() {
                    if s > row[best] {
                        best = k;
                    }
                }
                if best == y {
                    c.tp += 1;
                } else {
                    c.fp += 1;
                    c.fn_ += 1;
                }
            }
        }
        Labels::Multi(m) => {
            for (&s, &y) in scores.iter().zip(m.iter()) {
                match (s > F::zero(), y == 1) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => {}
                }
            }
        }
    }
    Ok(c)
}

pub fn f1_micro<F: Scalar>(scores: &Array2<F>, labels: &Labels) -> Result<f64> {
    confusion(scores, labels).map(|c| c.f1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_and_all_wrong() {
        let scores = array![[2.0, 1.0], [0.0, 3.0]];
        assert_eq!(f1_micro(&scores, &Labels::single(vec![0, 1], 2).unwrap()).unwrap(), 1.0);
        assert_eq!(f1_micro(&scores, &Labels::single(vec![1, 0], 2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn multi_label_hand_count() {
        // node 0: predicts {0}, truth {0,1} -> TP 1, FN 1
        // node 1: predicts {1}, truth {}    -> FP 1
        let scores = array![[1.0, -1.0], [-2.0, 0.5]];
        let labels = Labels::multi(array![[1, 1], [0, 0]]).unwrap();
        let c = confusion(&scores, &labels).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1 });
        assert_eq!(c.f1(), 0.5);
    }

    #[test]
    fn single_label_f1_is_accuracy() {
        let scores = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let labels = Labels::single(vec![0, 1, 0, 2], 3).unwrap();
        assert_eq!(f1_micro(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn empty_set_is_an_error() {
        let scores = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            f1_micro(&scores, &Labels::single(vec![], 2).unwrap()),
            Err(Error::EmptyEvalSet)
        ));
    }
}
