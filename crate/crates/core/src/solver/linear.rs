//! Sparse direct solves on top of faer.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use super::SolverError;
use crate::assembly::SparseOperator;

fn solve_in_place<S: Solve<f64>>(solver: &S, rhs: &mut [f64]) {
    let n = rhs.len();
    solver.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
}

/// Restriction of a velocity operator to its free dofs, factorised once.
pub(crate) struct ReducedSpd {
    free: Vec<usize>,
    llt: Llt<usize, f64>,
}

impl ReducedSpd {
    pub fn new(op: &SparseOperator, constrained: &[bool]) -> Result<Self, SolverError> {
        let free: Vec<usize> = (0..constrained.len()).filter(|&i| !constrained[i]).collect();
        let mut local = vec![usize::MAX; constrained.len()];
        for (i, &g) in free.iter().enumerate() {
            local[g] = i;
        }
        // lower triangle only
        let t: Vec<Triplet<usize, usize, f64>> = op
            .entries()
            .filter(|&(r, c, _)| local[r] != usize::MAX && local[c] != usize::MAX && local[r] >= local[c])
            .map(|(r, c, v)| Triplet::new(local[r], local[c], v))
            .collect();
        let n = free.len();
        let mat = SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| SolverError::Factorization(format!("diffusion matrix: {e:?}")))?;
        Ok(Self { free, llt })
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Solves on the free dofs; `rhs` is indexed by free dof.
    pub fn solve(&self, rhs: &mut [f64]) {
        solve_in_place(&self.llt, rhs);
    }
}

/// LU solver for `d I + C` with a velocity-independent sparsity pattern.
pub(crate) struct ShiftedLu {
    symbolic: Option<SymbolicLu<usize>>,
}

impl ShiftedLu {
    pub fn new() -> Self {
        Self { symbolic: None }
    }

    pub fn solve(&mut self, op: &SparseOperator, shift: f64, rhs: &mut [f64]) -> Result<(), SolverError> {
        let mut mat = op.matrix().clone();
        {
            let sym = op.matrix().symbolic();
            let (ptr, idx) = (sym.col_ptr().to_vec(), sym.row_idx().to_vec());
            let val = mat.val_mut();
            for c in 0..op.ncols() {
                for p in ptr[c]..ptr[c + 1] {
                    if idx[p] == c {
                        val[p] += shift;
                    }
                }
            }
        }
        if self.symbolic.is_none() {
            let sym = SymbolicLu::try_new(mat.symbolic()).map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
            self.symbolic = Some(sym);
        }
        let sym = self.symbolic.clone().expect("symbolic factorisation present");
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
            .map_err(|e| SolverError::Factorization(format!("density matrix: {e:?}")))?;
        solve_in_place(&lu, rhs);
        Ok(())
    }
}
