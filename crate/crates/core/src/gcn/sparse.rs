use ndarray::{Array2, ArrayView2};

use crate::graph::{Graph, Subgraph};
use crate::norm::NormCoeffs;
use crate::scalar::Scalar;

/// Local propagation matrix with entries `Ã[v,u] / α(u,v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdj<F> {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<F>,
}

impl<F: Scalar> SparseAdj<F> {
    /// Full-graph `D^-1 A` with no normalization correction.
    pub fn full(g: &Graph<F>) -> Self {
        SparseAdj {
            row_offsets: g.row_offsets().to_vec(),
            col_indices: g.col_indices().to_vec(),
            values: g.norm_values().to_vec(),
        }
    }

    pub fn for_subgraph(g: &Graph<F>, s: &Subgraph, coeffs: &NormCoeffs<F>) -> Self {
        let values = s
            .arc_origin()
            .iter()
            .map(|&arc| g.norm_values()[arc] / coeffs.alpha(arc))
            .collect();
        SparseAdj {
            row_offsets: s.row_offsets().to_vec(),
            col_indices: s.col_indices().to_vec(),
            values,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// `self · h`.
    pub fn propagate(&self, h: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = Array2::zeros((self.num_rows(), h.ncols()));
        for (v, mut row) in out.rows_mut().into_iter().enumerate() {
            for arc in self.row_offsets[v]..self.row_offsets[v + 1] {
                row.scaled_add(self.values[arc], &h.row(self.col_indices[arc]));
            }
        }
        out
    }

    /// `selfᵀ · d`.
    pub fn propagate_transpose(&self, d: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = Array2::zeros((self.num_rows(), d.ncols()));
        for v in 0..self.num_rows() {
            let src = d.row(v);
            for arc in self.row_offsets[v]..self.row_offsets[v + 1] {
                out.row_mut(self.col_indices[arc]).scaled_add(self.values[arc], &src);
            }
        }
        out
    }
}
