//! In-memory dataset: graph, node features, labels and split.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// One class per node; softmax head.
    Single,
    /// Independent 0/1 per class; sigmoid head.
    Multi,
}

impl LabelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMode::Single => "single",
            LabelMode::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    Single { classes: Vec<usize>, num_classes: usize },
    Multi(Array2<u8>),
}

impl Labels {
    pub fn single(classes: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::Inconsistent(format!("class id {c} >= num_classes {num_classes}")));
        }
        Ok(Labels::Single { classes, num_classes })
    }

    pub fn multi(matrix: Array2<u8>) -> Result<Self> {
        if matrix.iter().any(|&b| b > 1) {
            return Err(Error::Inconsistent("multi-label entries must be 0 or 1".into()));
        }
        Ok(Labels::Multi(matrix))
    }

    pub fn mode(&self) -> LabelMode {
        match self {
            Labels::Single { .. } => LabelMode::Single,
            Labels::Multi(_) => LabelMode::Multi,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } => *num_classes,
            Labels::Multi(m) => m.ncols(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Single { classes, .. } => classes.len(),
            Labels::Multi(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Labels of the given rows, in order.
    pub fn gather(&self, rows: &[usize]) -> Labels {
        match self {
            Labels::Single { classes, num_classes } => Labels::Single {
                classes: rows.iter().map(|&r| classes[r]).collect(),
                num_classes: *num_classes,
            },
            Labels::Multi(m) => Labels::Multi(m.select(ndarray::Axis(0), rows)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

pub fn nodes_in(split: &[Split], which: Split) -> Vec<usize> {
    split
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == which)
        .map(|(v, _)| v)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub graph: Graph<F>,
    pub features: Array2<F>,
    pub labels: Labels,
    pub split: Vec<Split>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(graph: Graph<F>, features: Array2<F>, labels: Labels, split: Vec<Split>) -> Result<Self> {
        let n = graph.num_nodes();
        if features.nrows() != n || labels.len() != n || split.len() != n {
            return Err(Error::Inconsistent(format!(
                "graph has {n} nodes but features/labels/split have {}/{}/{} rows",
                features.nrows(),
                labels.len(),
                split.len()
            )));
        }
        if !split.contains(&Split::Train) {
            return Err(Error::Inconsistent("no training nodes".into()));
        }
        Ok(Dataset {
            graph,
            features,
            labels,
            split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn nodes_in(&self, which: Split) -> Vec<usize> {
        nodes_in(&self.split, which)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::array;

    #[test]
    fn label_validation() {
        assert!(Labels::single(vec![0, 2], 2).is_err());
        assert!(Labels::multi(array![[0, 2]]).is_err());
        let l = Labels::multi(array![[0, 1], [1, 1], [0, 0]]).unwrap();
        assert_eq!(l.gather(&[2, 0]), Labels::Multi(array![[0, 0], [0, 1]]));
    }

    #[test]
    fn dataset_checks_rows_and_train_split() {
        let g: Graph<f64> = build_graph(&[(0, 1)], 2, false).unwrap();
        let x = Array2::zeros((2, 3));
        let y = Labels::single(vec![0, 1], 2).unwrap();
        assert!(Dataset::new(g.clone(), x.clone(), y.clone(), vec![Split::Train, Split::Test]).is_ok());
        assert!(Dataset::new(g.clone(), x.clone(), y.clone(), vec![Split::Val, Split::Test]).is_err());
        assert!(Dataset::new(g, Array2::zeros((3, 3)), y, vec![Split::Train, Split::Test]).is_err());
    }
}
