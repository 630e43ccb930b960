//! Sparse storage and linear solvers.

mod csr;
mod direct;
mod iterative;

use std::time::Instant;

pub use csr::{CsrMatrix, TripletBuilder};
pub use direct::SparseLu;
pub use iterative::{gmres, GmresOptions, Ilu0, Preconditioner};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {0} has no structural diagonal entry")]
    MissingDiagonal(usize),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solve requested before factorization")]
    NotFactored,
    #[error("iterative solver stopped after {iterations} iterations at relative residual {relative_residual:e}")]
    NoConvergence { iterations: usize, relative_residual: f64 },
    #[error("relative residual {relative_residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { relative_residual: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Direct,
    Gmres,
}

impl std::str::FromStr for SolverMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" | "lu" => Ok(Self::Direct),
            "gmres" => Ok(Self::Gmres),
            other => Err(format!("unknown solver '{other}' (expected direct or gmres)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub method: SolverMethod,
    /// Accepted relative residual `|b - Ax| / |b|`.
    pub tolerance: f64,
    /// Iterative refinement sweeps after a direct solve.
    pub refinement_steps: usize,
    /// Direct method only: first try GMRES preconditioned by the previous
    /// factorization, with at most this many iterations, and factor anew only
    /// if that fails. Zero always factors.
    pub reuse_iterations: usize,
    pub gmres: GmresOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            tolerance: 1e-10,
            refinement_steps: 3,
            reuse_iterations: 30,
            gmres: GmresOptions::default(),
        }
    }
}

/// Per-solve record.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub method: SolverMethod,
    pub unknowns: usize,
    pub nonzeros: usize,
    pub iterations: usize,
    /// Whether a new numeric factorization was computed.
    pub factored: bool,
    pub relative_residual: f64,
    pub seconds: f64,
}

/// Stateful solver front end. Keeps the sparse LU so that repeated solves on
/// a fixed pattern reuse the symbolic analysis.
#[derive(Debug, Default)]
pub struct LinearSolver {
    options: SolverOptions,
    lu: SparseLu,
}

impl LinearSolver {
    pub fn new(options: SolverOptions) -> Self {
        Self {
            options,
            lu: SparseLu::new(),
        }
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn symbolic_reuses(&self) -> usize {
        self.lu.symbolic_reuses()
    }

    /// Solves `A x = b` and verifies the residual independently of the
    /// solver that produced `x`.
    pub fn solve<T: Real>(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<(Vec<T>, SolveStats), LinalgError> {
        self.solve_from(a, b, None)
    }

    /// [`solve`](Self::solve) with an initial guess. Only the factorization
    /// reuse path uses it: GMRES then solves for the correction.
    pub fn solve_from<T: Real>(
        &mut self,
        a: &CsrMatrix<T>,
        b: &[T],
        guess: Option<&[T]>,
    ) -> Result<(Vec<T>, SolveStats), LinalgError> {
        let start = Instant::now();
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.len() != a.nrows() || guess.is_some_and(|g| g.len() != a.nrows()) {
            return Err(LinalgError::DimensionMismatch {
                expected: (a.nrows(), 1),
                got: (b.len(), 1),
            });
        }
        let bnorm = norm(b);
        let relres = |x: &[T]| -> Result<(Vec<T>, f64), LinalgError> {
            let ax = a.spmv(x)?;
            let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
            let rn = norm(&r);
            let rel = if bnorm > 0.0 { rn / bnorm } else { rn };
            Ok((r, rel))
        };
        let mut factored = false;
        let reused = match self.options.method {
            SolverMethod::Direct => self.try_reuse(a, b, guess, &relres),
            SolverMethod::Gmres => None,
        };
        let (x, iterations, rel) = match (self.options.method, reused) {
            (_, Some(found)) => found,
            (SolverMethod::Direct, None) => {
                factored = true;
                self.lu.factor(a)?;
                let mut x: Vec<T> = self.lu.solve(b)?;
                let (mut r, mut rel) = relres(&x)?;
                let mut steps = 0;
                while steps < self.options.refinement_steps && rel > self.options.tolerance.min(1e-14) && rel.is_finite() {
                    let dx: Vec<T> = self.lu.solve(&r)?;
                    let trial: Vec<T> = x.iter().zip(&dx).map(|(x, d)| *x + *d).collect();
                    let (r2, rel2) = relres(&trial)?;
                    steps += 1;
                    if !(rel2 < rel) {
                        break;
                    }
                    x = trial;
                    r = r2;
                    rel = rel2;
                }
                (x, steps, rel)
            }
            (SolverMethod::Gmres, None) => {
                let ilu = Ilu0::new(a)?;
                let (x, it) = gmres(a, b, &ilu, self.options.gmres)?;
                let (_, rel) = relres(&x)?;
                (x, it, rel)
            }
        };
        let stats = SolveStats {
            method: self.options.method,
            unknowns: a.nrows(),
            nonzeros: a.nnz(),
            iterations,
            factored,
            relative_residual: rel,
            seconds: start.elapsed().as_secs_f64(),
        };
        if !(rel <= self.options.tolerance) {
            return Err(LinalgError::ResidualTooLarge {
                relative_residual: rel,
                tolerance: self.options.tolerance,
            });
        }
        Ok((x, stats))
    }
}

impl LinearSolver {
    /// GMRES preconditioned by the previous factorization, aiming at
    /// `|b - Ax| <= 1e-3 tol |b|`. Any failure, including a residual above
    /// tolerance, sends the caller to a fresh factorization.
    fn try_reuse<T: Real, F>(
        &self,
        a: &CsrMatrix<T>,
        b: &[T],
        guess: Option<&[T]>,
        relres: &F,
    ) -> Option<(Vec<T>, usize, f64)>
    where
        F: Fn(&[T]) -> Result<(Vec<T>, f64), LinalgError>,
    {
        let budget = self.options.reuse_iterations;
        if budget == 0 || self.lu.factored_order() != Some(a.nrows()) {
            return None;
        }
        let target = self.options.tolerance * 1e-3 * norm(b);
        let x0 = match guess {
            Some(g) => g.to_vec(),
            None => vec![T::zero(); b.len()],
        };
        let (r0, rel0) = relres(&x0).ok()?;
        let r0n = norm(&r0);
        if !r0n.is_finite() {
            return None;
        }
        if r0n <= target {
            return Some((x0, 0, rel0));
        }
        let opts = GmresOptions {
            restart: budget,
            max_iterations: budget,
            rtol: target / r0n,
        };
        let (d, it) = gmres(a, &r0, &self.lu, opts).ok()?;
        let x: Vec<T> = x0.iter().zip(&d).map(|(x, d)| *x + *d).collect();
        let (_, rel) = relres(&x).ok()?;
        (rel <= self.options.tolerance).then_some((x, it, rel))
    }
}

fn norm<T: Real>(x: &[T]) -> f64 {
    x.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system() -> (CsrMatrix<f64>, Vec<f64>) {
        // the saddle row keeps a structural zero diagonal, as assembled systems do
        let mut t = vec![(3, 3, 0.0)];
        let dense = [
            [4.0, -1.0, 0.0, 1.0],
            [-1.0, 4.0, -1.0, 0.0],
            [0.0, -1.0, 4.0, 2.0],
            [1.0, 0.0, 2.0, 0.0],
        ];
        for (i, row) in dense.iter().enumerate() {
            t.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (i, j, *v)));
        }
        let a = CsrMatrix::from_triplets(4, 4, &t);
        let b = vec![1.0, 2.0, 3.0, 4.0];
        (a, b)
    }

    #[test]
    fn both_methods_agree() {
        let (a, b) = system();
        let mut d = LinearSolver::new(SolverOptions::default());
        let (xd, sd) = d.solve(&a, &b).unwrap();
        let mut g = LinearSolver::new(SolverOptions {
            method: SolverMethod::Gmres,
            ..Default::default()
        });
        let (xg, sg) = g.solve(&a, &b).unwrap();
        assert!(sd.relative_residual < 1e-14 && sg.relative_residual < 1e-10);
        for (u, v) in xd.iter().zip(&xg) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn reuse_from_a_guess_refines_it() {
        let (a, b) = system();
        let mut s = LinearSolver::new(SolverOptions::default());
        let (x, first) = s.solve(&a, &b).unwrap();
        assert!(first.factored);
        let (y, exact) = s.solve_from(&a, &b, Some(&x)).unwrap();
        assert!(!exact.factored && exact.iterations <= 1);
        let nudged: Vec<f64> = x.iter().map(|v| v + 1e-3).collect();
        let (z, again) = s.solve_from(&a, &b, Some(&nudged)).unwrap();
        assert!(!again.factored && again.relative_residual <= 1e-10);
        for ((x, y), z) in x.iter().zip(&y).zip(&z) {
            assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_matrix_fails_loudly() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let mut s = LinearSolver::new(SolverOptions::default());
        assert!(s.solve(&a, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_precision_solve() {
        let a = CsrMatrix::<f32>::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let mut s = LinearSolver::new(SolverOptions {
            tolerance: 1e-6,
            ..Default::default()
        });
        let (x, _) = s.solve(&a, &[3.0f32, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("direct".parse::<SolverMethod>().unwrap(), SolverMethod::Direct);
        assert_eq!("gmres".parse::<SolverMethod>().unwrap(), SolverMethod::Gmres);
        assert!("cg".parse::<SolverMethod>().is_err());
    }
}
