//! Sparse direct solves behind a fixed sparsity pattern.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

/// Coordinate-format matrix whose pattern is assembled in the same order on
/// every Newton step, so the symbolic factorization is computed once.
pub struct SparseLuSolver {
    dim: usize,
    symbolic: Option<SymbolicLu<usize>>,
}

impl SparseLuSolver {
    pub fn new(dim: usize) -> Self {
        SparseLuSolver {
            dim,
            symbolic: None,
        }
    }

    /// Solves `A x = rhs` for `A` given as `(row, col, value)` triplets
    /// (duplicates are summed).
    pub fn solve(&mut self, entries: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.dim);
        let triplets: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.dim, self.dim, &triplets)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let b = Col::<f64>::from_fn(self.dim, |i| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..self.dim).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve(
                "singular Jacobian (non-finite solution)".into(),
            ));
        }
        Ok(out)
    }
}

/// `y = A x` for a triplet matrix.
pub fn triplet_matvec(dim: usize, entries: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; dim];
    for &(r, c, v) in entries {
        y[r] += v * x[c];
    }
    y
}
