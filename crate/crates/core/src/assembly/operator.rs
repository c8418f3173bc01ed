use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    /// Combined cell and facet velocity vector.
    Velocity,
    Density,
}

/// Assembled bilinear form in compressed-column storage.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub rows: SpaceTag,
    pub cols: SpaceTag,
    pub symmetric: bool,
    mat: SparseColMat<usize, f64>,
}

pub(crate) type Triplets = Vec<(usize, usize, f64)>;

impl SparseOperator {
    /// Builds the matrix from unsorted triplets; duplicates are summed after a
    /// stable sort so the result does not depend on how the list was produced
    /// beyond its order.
    pub(crate) fn from_triplets(
        rows: SpaceTag,
        cols: SpaceTag,
        shape: (usize, usize),
        mut triplets: Triplets,
        symmetric: bool,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (c, r));
        let t: Vec<Triplet<usize, usize, f64>> = triplets.into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::try_new_from_triplets(shape.0, shape.1, &t).expect("indices within shape");
        Self { rows, cols, symmetric, mat }
    }

    pub fn nrows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.mat.val().len()
    }

    pub fn matrix(&self) -> &SparseColMat<usize, f64> {
        &self.mat
    }

    /// Iterates stored entries as `(row, col, value)` in column order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.mat.symbolic();
        let (ptr, idx, val) = (sym.col_ptr(), sym.row_idx(), self.mat.val());
        (0..self.ncols()).flat_map(move |c| (ptr[c]..ptr[c + 1]).map(move |p| (idx[p], c, val[p])))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.mat.get(row, col).copied().unwrap_or(0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        for (r, c, v) in self.entries() {
            y[r] += v * x[c];
        }
        y
    }

    /// `|A| |x|` with entrywise absolute values.
    pub fn apply_abs(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        for (r, c, v) in self.entries() {
            y[r] += (v * x[c]).abs();
        }
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols()];
        for (r, c, v) in self.entries() {
            y[c] += v * x[r];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.entries() {
            d[(r, c)] += v;
        }
        d
    }

    /// `max |A - A^T|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.entries().map(|(r, c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max)
    }

    /// Coordinate text dump, one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.nrows(), self.ncols(), self.nnz())?;
        for (r, c, v) in self.entries() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_dump_is_readable() {
        let op = SparseOperator::from_triplets(
            SpaceTag::Density,
            SpaceTag::Density,
            (2, 2),
            vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 0.5), (1, 1, 0.0)],
            false,
        );
        assert_eq!(op.get(0, 0), 1.5);
        assert_eq!(op.nnz(), 3);
        assert_eq!(op.apply(&[1.0, 1.0]), vec![1.5, 2.0]);
        assert_eq!(op.apply_transpose(&[1.0, 1.0]), vec![3.5, 0.0]);
        assert_eq!(op.max_asymmetry(), 2.0);
        let mut buf = Vec::new();
        op.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("2 2 3\n0 0 1.5"));
    }
}
