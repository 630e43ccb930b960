//! Sparse LU through faer, with symbolic factorization reuse.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut};

use crate::linalg::{CsrMatrix, LinalgError, Preconditioner};
use crate::scalar::Real;

/// Direct solver that keeps the symbolic analysis of the last pattern.
///
/// The CSR arrays of `A` are the CSC arrays of `A^T`, so `A^T` is factored
/// without copying indices and systems are solved with the transposed factors.
#[derive(Default)]
pub struct SparseLu {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
    numeric: Option<Lu<usize, f64>>,
    n: usize,
    symbolic_reuses: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("n", &self.n)
            .field("factored", &self.numeric.is_some())
            .field("symbolic_reuses", &self.symbolic_reuses)
            .finish()
    }
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of factorizations that reused an existing symbolic analysis.
    pub fn symbolic_reuses(&self) -> usize {
        self.symbolic_reuses
    }

    pub fn factor<T: Real>(&mut self, a: &CsrMatrix<T>) -> Result<(), LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let same = matches!(&self.pattern, Some((rp, ci)) if rp == a.row_ptr() && ci == a.col_idx());
        let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        if !same || self.symbolic.is_none() {
            let s = SymbolicLu::try_new(sym).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
            self.symbolic = Some(s);
            self.pattern = Some((a.row_ptr().to_vec(), a.col_idx().to_vec()));
        } else {
            self.symbolic_reuses += 1;
        }
        let vals: Vec<f64> = a.values().iter().map(|v| v.as_f64()).collect();
        let mat = SparseColMatRef::new(sym, &vals);
        let symbolic = self.symbolic.clone().expect("symbolic analysis present");
        self.numeric = None;
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        self.numeric = Some(lu);
        self.n = n;
        Ok(())
    }

    /// Order of the factored matrix, if any.
    pub fn factored_order(&self) -> Option<usize> {
        self.numeric.as_ref().map(|_| self.n)
    }

    /// Solves with the most recent factorization.
    pub fn solve<T: Real>(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let lu = self.numeric.as_ref().ok_or(LinalgError::NotFactored)?;
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: (self.n, 1),
                got: (b.len(), 1),
            });
        }
        let mut x: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
        let n = self.n;
        lu.solve_transpose_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, n, 1));
        Ok(x.into_iter().map(T::lit).collect())
    }
}

/// A factorization of a nearby matrix serves as a preconditioner.
impl<T: Real> Preconditioner<T> for SparseLu {
    fn apply_inverse(&self, x: &mut [T]) -> Result<(), LinalgError> {
        let y: Vec<T> = self.solve(x)?;
        x.copy_from_slice(&y);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let a = CsrMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![2.0, 5.0, 1.0],
            vec![0.0, -3.0, 6.0],
        ]);
        let x = vec![1.0, -2.0, 0.5];
        let b = a.spmv(&x).unwrap();
        let mut lu = SparseLu::new();
        lu.factor(&a).unwrap();
        let y: Vec<f64> = lu.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn reuses_symbolic_analysis() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let b = a.scaled(2.0);
        let mut lu = SparseLu::new();
        lu.factor(&a).unwrap();
        lu.factor(&b).unwrap();
        assert_eq!(lu.symbolic_reuses(), 1);
        let x: Vec<f64> = lu.solve(&[6.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_point_with_zero_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.0, 1.0], vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let mut lu = SparseLu::new();
        lu.factor(&a).unwrap();
        let x: Vec<f64> = lu.solve(&[3.0, 3.0, 2.0]).unwrap();
        for (u, v) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_before_factor_is_an_error() {
        assert!(matches!(SparseLu::new().solve(&[1.0f64]), Err(LinalgError::NotFactored)));
    }
}
