//! Compressed sparse row matrices.

use std::io::{self, Write};

use crate::linalg::LinalgError;
use crate::scalar::Real;

/// CSR matrix with sorted, duplicate-free column indices in every row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept so that patterns are stable across re-assembly.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, T)> = Vec::new();
        row_ptr.push(0);
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let trip: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(move |(j, v)| (i, j, *v)))
            .collect();
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] = v;
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Position of `(i, j)` in the value array, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |k| self.values[k])
    }

    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<(), LinalgError> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch {
                expected: (self.nrows, self.ncols),
                got: (y.len(), x.len()),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let k = next[c];
                col_idx[k] = i;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `Σ c_k A_k` over matrices of equal shape, merging sparsity patterns.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Result<Self, LinalgError> {
        let (nrows, ncols) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Ok(Self::zeros(0, 0)),
        };
        if let Some((_, m)) = terms.iter().find(|(_, m)| (m.nrows, m.ncols) != (nrows, ncols)) {
            return Err(LinalgError::DimensionMismatch {
                expected: (nrows, ncols),
                got: (m.nrows, m.ncols),
            });
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, T)> = Vec::new();
        row_ptr.push(0);
        for i in 0..nrows {
            scratch.clear();
            for (c, m) in terms {
                scratch.extend(m.row(i).map(|(j, v)| (j, *c * v)));
            }
            scratch.sort_by_key(|e| e.0);
            let start = col_idx.len();
            for &(j, v) in &scratch {
                if col_idx.len() > start && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Places blocks `(row_offset, col_offset, matrix)` into an
    /// `nrows x ncols` matrix. Blocks must not overlap.
    pub fn from_blocks(nrows: usize, ncols: usize, blocks: &[(usize, usize, &CsrMatrix<T>)]) -> Self {
        for (r0, c0, b) in blocks {
            assert!(r0 + b.nrows <= nrows && c0 + b.ncols <= ncols, "block outside target");
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by_key(|&b| blocks[b].1);
        row_ptr.push(0);
        for i in 0..nrows {
            for &b in &order {
                let (r0, c0, m) = blocks[b];
                if i >= r0 && i < r0 + m.nrows {
                    for (j, v) in m.row(i - r0) {
                        col_idx.push(c0 + j);
                        values.push(v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        let out = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        debug_assert!(out.is_sorted(), "overlapping blocks");
        out
    }

    fn is_sorted(&self) -> bool {
        (0..self.nrows).all(|i| self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]].windows(2).all(|w| w[0] < w[1]))
    }

    /// Coordinate text dump, one `row col value` triple per line.
    pub fn write_coordinates<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {:e}", v.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Triplet accumulator for element assembly.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: T) {
        self.entries.push((i, j, v));
    }

    /// Adds a dense local block (row-major `rows.len() x cols.len()`).
    pub fn add_local(&mut self, rows: &[usize], cols: &[usize], local: &[T]) {
        for (a, &r) in rows.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                self.entries.push((r, c, local[a * cols.len() + b]));
            }
        }
    }

    pub fn build(self) -> CsrMatrix<T> {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(m.col_idx(), &[0, 2, 1]);
        assert_eq!(m.values(), &[2.0, 4.0, -1.0]);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn identity_times_vector() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::<f64>::identity(3).spmv(&x).unwrap(), x);
        assert_eq!(CsrMatrix::<f64>::zeros(3, 3).spmv(&x).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let err = CsrMatrix::<f64>::identity(3).spmv(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { .. }));
    }

    #[test]
    fn transpose_and_combination() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
        let t = a.transpose();
        assert_eq!(t.to_dense(), vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]]);
        let b = CsrMatrix::from_dense(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 0.0]]);
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        assert_eq!(c.to_dense(), vec![vec![2.0, 3.0, -1.0], vec![-1.0, 0.0, 6.0]]);
    }

    #[test]
    fn blocks_are_placed_at_offsets() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0]]);
        let b = CsrMatrix::<f64>::identity(2);
        let m = CsrMatrix::from_blocks(3, 4, &[(1, 2, &b), (0, 0, &a)]);
        assert_eq!(
            m.to_dense(),
            vec![vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn coordinate_dump() {
        let mut buf = Vec::new();
        CsrMatrix::<f64>::identity(2).write_coordinates(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
