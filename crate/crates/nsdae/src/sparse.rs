//! Compressed-row sparse matrices over `f64`.
//!
//! The matrices handled here are small by sparse-solver standards (a few
//! thousand rows at most), so the emphasis is on predictable semantics
//! rather than on asymptotics: construction sorts and merges duplicate
//! entries, and most structural queries walk the whole matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative gap below which a matrix passes the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-14;

/// Sparse matrix in compressed-row storage.
///
/// Invariant: within each row the column indices are strictly increasing,
/// so no duplicate `(row, col)` pairs survive construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from coordinate triplets. Duplicate entries are summed,
    /// exact zeros produced by the merge are kept (they are harmless).
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if indices.len() > indptr[r] && *indices.last().unwrap() == c && indptr[r + 1] > 0 {
                // same row, same column as the previous entry: merge
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
            }
            indptr[r + 1] = indices.len();
        }
        // fill row pointers of empty rows
        for r in 0..nrows {
            indptr[r + 1] = indptr[r + 1].max(indptr[r]);
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&DVector::from_element(n, 1.0))
    }

    pub fn from_diagonal(d: &DVector<f64>) -> Self {
        let n = d.len();
        SparseMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: d.iter().copied().collect(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut trips = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].abs() > drop_tol {
                    trips.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trips).expect("indices in bounds by construction")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of one row as `(col, value)` pairs, columns increasing.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `y = self * x`
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.ncols {
            return Err(Error::dim(format!(
                "matvec: matrix is {}x{}, vector has length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let mut y = DVector::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// `y = self^T * x`
    pub fn tr_matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.nrows {
            return Err(Error::dim(format!(
                "tr_matvec: matrix is {}x{}, vector has length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let mut y = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let trips: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trips).expect("transpose keeps bounds")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::dim(format!(
                "add: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let trips = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, trips.collect::<Vec<_>>())
    }

    /// Largest asymmetry `|a_ij - a_ji|` over all stored entries.
    pub fn symmetry_gap(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut gap = 0.0f64;
        for (r, c, v) in self.triplets() {
            gap = gap.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.triplets() {
            gap = gap.max((v - self.get(r, c)).abs());
        }
        gap
    }

    /// Symmetry check used for symmetric-flagged matrices.
    pub fn check_symmetric(&self) -> Result<()> {
        let gap = self.symmetry_gap();
        let scale = self.max_abs().max(1.0);
        if gap <= SYMMETRY_TOL * scale {
            Ok(())
        } else {
            Err(Error::NotSpd(format!(
                "asymmetry {gap:.3e} exceeds {:.3e}",
                SYMMETRY_TOL * scale
            )))
        }
    }

    /// True if all stored entries sit on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let n = self.nrows.min(self.ncols);
        DVector::from_fn(n, |i, _| self.get(i, i))
    }

    /// Half bandwidth: max |row - col| over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets()
            .map(|(r, c, _)| r.abs_diff(c))
            .max()
            .unwrap_or(0)
    }

    /// Restriction to a subset of rows (order given by `keep`).
    pub fn select_rows(&self, keep: &[usize]) -> Result<Self> {
        let mut trips = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            if old_r >= self.nrows {
                return Err(Error::IndexOutOfBounds {
                    row: old_r,
                    col: 0,
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
            for (c, v) in self.row(old_r) {
                trips.push((new_r, c, v));
            }
        }
        Self::from_triplets(keep.len(), self.ncols, trips)
    }

    /// Restriction to a subset of columns (order given by `keep`).
    pub fn select_cols(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.ncols];
        for (new_c, &old_c) in keep.iter().enumerate() {
            if old_c >= self.ncols {
                return Err(Error::IndexOutOfBounds {
                    row: 0,
                    col: old_c,
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
            pos[old_c] = new_c;
        }
        let trips: Vec<_> = self
            .triplets()
            .filter_map(|(r, c, v)| (pos[c] != usize::MAX).then(|| (r, pos[c], v)))
            .collect();
        Self::from_triplets(self.nrows, keep.len(), trips)
    }

    /// Sparse product `self * other`, used for pencil and Schur assembly.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::dim(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut trips = Vec::new();
        for r in 0..self.nrows {
            for (k, v) in self.row(r) {
                for (c, w) in other.row(k) {
                    trips.push((r, c, v * w));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// Assemble a block matrix. `blocks[i][j]` is the block at block-row `i`,
    /// block-column `j`; `None` stands for a zero block. Row and column
    /// dimensions must be consistent across the grid; zero-sized blocks are
    /// allowed (they simply contribute nothing).
    pub fn from_blocks(blocks: &[Vec<BlockEntry<'_>>]) -> Result<Self> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, |r| r.len());
        if blocks.iter().any(|r| r.len() != nbc) {
            return Err(Error::dim("ragged block grid"));
        }
        let mut row_dims = vec![None; nbr];
        let mut col_dims = vec![None; nbc];
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                let (r, c) = match b {
                    BlockEntry::Zero => continue,
                    BlockEntry::Mat(m) => (m.nrows, m.ncols),
                    BlockEntry::ZeroSized(r, c) => (*r, *c),
                };
                match row_dims[i] {
                    None => row_dims[i] = Some(r),
                    Some(d) if d != r => {
                        return Err(Error::dim(format!(
                            "block row {i}: height {r} conflicts with {d}"
                        )))
                    }
                    _ => {}
                }
                match col_dims[j] {
                    None => col_dims[j] = Some(c),
                    Some(d) if d != c => {
                        return Err(Error::dim(format!(
                            "block col {j}: width {c} conflicts with {d}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let row_dims: Vec<usize> = row_dims
            .into_iter()
            .map(|d| d.ok_or_else(|| Error::dim("block row with no sized block")))
            .collect::<Result<_>>()?;
        let col_dims: Vec<usize> = col_dims
            .into_iter()
            .map(|d| d.ok_or_else(|| Error::dim("block col with no sized block")))
            .collect::<Result<_>>()?;
        let row_off: Vec<usize> = std::iter::once(0)
            .chain(row_dims.iter().scan(0, |acc, d| {
                *acc += d;
                Some(*acc)
            }))
            .collect();
        let col_off: Vec<usize> = std::iter::once(0)
            .chain(col_dims.iter().scan(0, |acc, d| {
                *acc += d;
                Some(*acc)
            }))
            .collect();

        let mut trips = Vec::new();
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let BlockEntry::Mat(m) = b {
                    for (r, c, v) in m.triplets() {
                        trips.push((row_off[i] + r, col_off[j] + c, v));
                    }
                }
            }
        }
        Self::from_triplets(row_off[nbr], col_off[nbc], trips)
    }
}

/// One cell of a block-matrix assembly grid.
#[derive(Clone, Copy)]
pub enum BlockEntry<'a> {
    /// Zero block whose dimensions are inferred from its row and column.
    Zero,
    /// Zero block with explicit dimensions (for empty rows/columns).
    ZeroSized(usize, usize),
    Mat(&'a SparseMatrix),
}

/// Stack vectors `[top; bottom]`.
pub fn vstack(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(top.len() + bottom.len());
    out.rows_mut(0, top.len()).copy_from(top);
    out.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    out
}

/// Split a stacked vector back into `(head, tail)` of lengths `(n, len - n)`.
pub fn vsplit(x: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (
        x.rows(0, n).into_owned(),
        x.rows(n, x.len() - n).into_owned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triplets_merge_duplicates() {
        let m =
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 1), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let e = SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]);
        assert!(matches!(e, Err(Error::IndexOutOfBounds { .. })));
    }

    #[test]
    fn matvec_and_transpose_agree_with_dense() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 0, 2.0), (0, 1, -1.0), (1, 1, 4.0), (2, 0, 0.5)],
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = m.matvec(&x).unwrap();
        let yd = m.to_dense() * &x;
        assert_relative_eq!(y, yd, epsilon = 1e-15);

        let z = DVector::from_vec(vec![1.0, -1.0, 3.0]);
        let w = m.tr_matvec(&z).unwrap();
        let wd = m.to_dense().transpose() * &z;
        assert_relative_eq!(w, wd, epsilon = 1e-15);

        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let m = SparseMatrix::identity(3);
        assert!(m.matvec(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn block_assembly_with_empty_blocks() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0)]).unwrap();
        let p = SparseMatrix::from_blocks(&[
        vec![BlockEntry::Mat(&a), BlockEntry::Zero],
            vec![BlockEntry::Mat(&b), BlockEntry::ZeroSized(1, 1)],
        ])
        .unwrap();
        assert_eq!((p.nrows(), p.ncols()), (3, 3));
        assert_eq!(p.get(2, 0), 1.0);
        assert_eq!(p.get(2, 2), 0.0);

        // zero-height block row (m = 0) is representable
        let q = SparseMatrix::from_blocks(&[
            vec![BlockEntry::Mat(&a)],
            vec![BlockEntry::ZeroSized(0, 2)],
        ])
        .unwrap();
        assert_eq!((q.nrows(), q.ncols()), (2, 2));
    }

    #[test]
    fn symmetry_gap_detects_asymmetry() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0 + 1e-10)]).unwrap();
        assert!(m.symmetry_gap() > 1e-11);
        assert!(m.check_symmetric().is_err());
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(s.check_symmetric().is_ok());
    }

    #[test]
    fn row_and_col_selection() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (2, 0, 4.0)],
        )
        .unwrap();
        let r = m.select_rows(&[2, 0]).unwrap();
        assert_eq!((r.nrows(), r.ncols()), (2, 3));
        assert_eq!(r.get(0, 0), 4.0);
        assert_eq!(r.get(1, 0), 1.0);
        let c = m.select_cols(&[0, 2]).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (3, 2));
        assert_eq!(c.get(2, 1), 3.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)])
            .unwrap();
        let b = SparseMatrix::from_triplets(3, 2, vec![(0, 1, 1.0), (1, 0, -1.0), (2, 1, 0.5)])
            .unwrap();
        let p = a.matmul(&b).unwrap();
        let pd = a.to_dense() * b.to_dense();
        assert_relative_eq!(p.to_dense(), pd, epsilon = 1e-15);
    }

    #[test]
    fn bandwidth_and_diagonal() {
        let d = SparseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert!(d.is_diagonal());
        assert_eq!(d.bandwidth(), 0);
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 2, 1.0)]).unwrap();
        assert_eq!(m.bandwidth(), 2);
        assert!(!m.is_diagonal());
    }
}
