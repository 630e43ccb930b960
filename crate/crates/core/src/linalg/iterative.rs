//! ILU(0)-preconditioned restarted GMRES, generic over the scalar type.

use crate::linalg::{CsrMatrix, LinalgError};
use crate::scalar::Real;

/// Incomplete LU factorization on the pattern of the input matrix.
#[derive(Clone, Debug)]
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
    /// Pivots that had to be replaced because they were (numerically) zero.
    pub shifted_pivots: usize,
}

impl<T: Real> Ilu0<T> {
    /// Every row must hold its diagonal structurally (it may be zero).
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(a.position(i, i).ok_or(LinalgError::MissingDiagonal(i))?);
        }
        let scale = a.max_abs().max(T::min_positive_value());
        let tiny = scale * T::epsilon().sqrt();
        let mut lu = a.clone();
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let mut shifted = 0;
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = k;
            }
            for kk in rp[i]..diag[i] {
                let k = ci[kk];
                let vals = lu.values_mut();
                let lik = vals[kk] / vals[diag[k]];
                vals[kk] = lik;
                for jj in (diag[k] + 1)..rp[k + 1] {
                    let m = marker[ci[jj]];
                    if m != usize::MAX {
                        let ukj = vals[jj];
                        vals[m] -= lik * ukj;
                    }
                }
            }
            let vals = lu.values_mut();
            if vals[diag[i]].abs() < tiny {
                vals[diag[i]] = if vals[diag[i]] < T::zero() { -tiny } else { tiny };
                shifted += 1;
            }
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = usize::MAX;
            }
        }
        Ok(Self {
            lu,
            diag,
            shifted_pivots: shifted,
        })
    }

    /// Applies `(LU)^{-1}` in place.
    pub fn apply(&self, x: &mut [T]) {
        let (rp, ci, v) = (self.lu.row_ptr(), self.lu.col_idx(), self.lu.values());
        let n = self.diag.len();
        for i in 0..n {
            let mut s = x[i];
            for k in rp[i]..self.diag[i] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (self.diag[i] + 1)..rp[i + 1] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

/// Approximate inverse applied in place by [`gmres`].
pub trait Preconditioner<T> {
    fn apply_inverse(&self, x: &mut [T]) -> Result<(), LinalgError>;
}

impl<T: Real> Preconditioner<T> for Ilu0<T> {
    fn apply_inverse(&self, x: &mut [T]) -> Result<(), LinalgError> {
        self.apply(x);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub rtol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 200,
            max_iterations: 4000,
            rtol: 1e-12,
        }
    }
}

fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

/// Right-preconditioned restarted GMRES. Returns the iterate and the number
/// of inner iterations; convergence is judged on the true residual.
pub fn gmres<T: Real, P: Preconditioner<T> + ?Sized>(
    a: &CsrMatrix<T>,
    b: &[T],
    precond: &P,
    opts: GmresOptions,
) -> Result<(Vec<T>, usize), LinalgError> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: (a.nrows(), a.ncols()),
            got: (n, n),
        });
    }
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok((x, 0));
    }
    let tol = T::lit(opts.rtol) * bnorm;
    let m = opts.restart.max(1);
    let mut iters = 0;
    let mut w = vec![T::zero(); n];
    loop {
        let ax = a.spmv(&x)?;
        let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        let beta = norm2(&r);
        if beta <= tol {
            return Ok((x, iters));
        }
        if iters >= opts.max_iterations {
            return Err(LinalgError::NoConvergence {
                iterations: iters,
                relative_residual: (beta / bnorm).as_f64(),
            });
        }
        let mut basis: Vec<Vec<T>> = vec![r.iter().map(|v| *v / beta).collect()];
        let mut h: Vec<Vec<T>> = Vec::new();
        let mut cs: Vec<T> = Vec::new();
        let mut sn: Vec<T> = Vec::new();
        let mut g = vec![beta];
        for j in 0..m {
            let mut z = basis[j].clone();
            precond.apply_inverse(&mut z)?;
            a.spmv_into(&z, &mut w)?;
            let mut col = Vec::with_capacity(j + 2);
            for vi in &basis {
                let hij: T = vi.iter().zip(&w).map(|(a, b)| *a * *b).sum();
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * *vk);
                col.push(hij);
            }
            let hn = norm2(&w);
            col.push(hn);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            let (c, s) = if d == T::zero() { (T::one(), T::zero()) } else { (col[j] / d, col[j + 1] / d) };
            col[j] = d;
            col[j + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] = c * g[j];
            h.push(col);
            iters += 1;
            let breakdown = hn <= T::epsilon() * beta;
            if !breakdown {
                basis.push(w.iter().map(|v| *v / hn).collect());
            }
            if g[j + 1].abs() <= tol || breakdown || iters >= opts.max_iterations {
                break;
            }
        }
        let k = h.len();
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s -= h[jj][i] * *yj;
            }
            y[i] = s / h[i][i];
        }
        let mut dx = vec![T::zero(); n];
        for (yi, vi) in y.iter().zip(&basis) {
            dx.iter_mut().zip(vi).for_each(|(d, v)| *d += *yi * *v);
        }
        precond.apply_inverse(&mut dx)?;
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += *d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn ilu_of_tridiagonal_is_exact() {
        let a = laplace_1d(20);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut y = a.spmv(&x).unwrap();
        ilu.apply(&mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_solves_saddle_point() {
        // [A B^T; B 0] with an explicit zero diagonal block
        let mut t = vec![];
        for i in 0..4 {
            t.push((i, i, 3.0 + i as f64));
        }
        t.extend([(0, 4, 1.0), (1, 4, -1.0), (2, 4, 2.0), (4, 0, 1.0), (4, 1, -1.0), (4, 2, 2.0), (4, 4, 0.0)]);
        t.extend([(0, 1, 0.5), (3, 2, -0.7)]);
        let a = CsrMatrix::from_triplets(5, 5, &t);
        let x0 = vec![1.0, 2.0, -1.0, 0.5, 3.0];
        let b = a.spmv(&x0).unwrap();
        let ilu = Ilu0::new(&a).unwrap();
        let (x, _) = gmres(&a, &b, &ilu, GmresOptions::default()).unwrap();
        for (u, v) in x.iter().zip(&x0) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn missing_diagonal_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(Ilu0::new(&a), Err(LinalgError::MissingDiagonal(0))));
    }

    #[test]
    fn restarts_still_converge() {
        let a = laplace_1d(60);
        let b = vec![1.0; 60];
        let ilu = Ilu0::new(&CsrMatrix::identity(60)).unwrap();
        let opts = GmresOptions {
            restart: 5,
            max_iterations: 5000,
            rtol: 1e-10,
        };
        let (x, it) = gmres(&a, &b, &ilu, opts).unwrap();
        assert!(it > 5);
        let r = a.spmv(&x).unwrap();
        assert!(r.iter().zip(&b).all(|(r, b)| (r - b).abs() < 1e-8));
    }
}
