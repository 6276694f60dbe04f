//! Weighted vector norms and the SPD factorizations backing them.
//!
//! Residuals and errors are measured in norms induced by mass matrices or
//! their inverses, e.g. `||x||_M = sqrt(x' M x)`. Inverse weights are
//! applied through a cached Cholesky-type factorization, never by forming
//! an explicit inverse. The factorization picks its storage from the
//! structure of the weight: diagonal weights (lumped mass matrices) get an
//! O(n) path, narrow-band matrices a banded Cholesky, everything else a
//! dense Cholesky.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::{BlockEntry, SparseMatrix};

/// Half-bandwidth limit up to which the banded factorization is used.
const BAND_LIMIT: usize = 192;

/// Cholesky-type factorization of a symmetric positive definite matrix.
#[derive(Debug)]
pub enum SpdFactor {
    Diagonal { diag: DVector<f64> },
    Banded(BandCholesky),
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

impl SpdFactor {
    /// Factor `a`, failing with [`Error::NotSpd`] if `a` is not symmetric
    /// positive definite to working precision.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSpd(format!(
                "matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        a.check_symmetric()?;
        if a.is_diagonal() {
            let diag = a.diagonal();
            if diag.iter().any(|&d| d <= 0.0) {
                return Err(Error::NotSpd("nonpositive diagonal entry".into()));
            }
            return Ok(SpdFactor::Diagonal { diag });
        }
        let bw = a.bandwidth();
        if bw <= BAND_LIMIT && bw + 1 < a.nrows() {
            return BandCholesky::new(a).map(SpdFactor::Banded);
        }
        let chol = nalgebra::Cholesky::new(a.to_dense())
            .ok_or_else(|| Error::NotSpd("dense Cholesky failed".into()))?;
        Ok(SpdFactor::Dense(chol))
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdFactor::Diagonal { diag } => diag.len(),
            SpdFactor::Banded(b) => b.n,
            SpdFactor::Dense(c) => c.l_dirty().nrows(),
        }
    }

    /// Solve `A x = b` using the stored factorization.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim() {
            return Err(Error::dim(format!(
                "factor of dimension {}, rhs of length {}",
                self.dim(),
                b.len()
            )));
        }
        Ok(match self {
            SpdFactor::Diagonal { diag } => b.component_div(diag),
            SpdFactor::Banded(f) => f.solve(b),
            SpdFactor::Dense(c) => c.solve(b),
        })
    }

    /// Solve with a few rounds of iterative refinement against `a`
    /// (the matrix this factor was computed from). Worth it when the
    /// system is deliberately ill conditioned, e.g. penalty-shifted.
    pub fn solve_refined(&self, a: &SparseMatrix, b: &DVector<f64>, rounds: usize) -> Result<DVector<f64>> {
        let mut x = self.solve(b)?;
        for _ in 0..rounds {
            let r = b - a.matvec(&x)?;
            let rnorm = r.norm();
            if rnorm <= 1e-16 * b.norm().max(1.0) {
                break;
            }
            let dx = self.solve(&r)?;
            x += dx;
        }
        Ok(x)
    }
}

/// Cholesky factorization in lower-band storage.
///
/// `band[d]` holds the d-th subdiagonal of `L`: `band[d][j] = L[j+d, j]`.
#[derive(Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<Vec<f64>>,
}

impl BandCholesky {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        let bw = a.bandwidth();
        let mut band = vec![vec![0.0; n]; bw + 1];
        for (r, c, v) in a.triplets() {
            if r >= c {
                band[r - c][c] = v;
            }
        }
        for j in 0..n {
            let dmax = bw.min(n - 1 - j);
            for d in 0..=dmax {
                let i = j + d;
                let kmin = i.saturating_sub(bw);
                let mut s = band[d][j];
                for k in kmin..j {
                    s -= band[i - k][k] * band[j - k][k];
                }
                if d == 0 {
                    if s <= 0.0 {
                        return Err(Error::NotSpd(format!(
                            "banded Cholesky: nonpositive pivot {s:.3e} at column {j}"
                        )));
                    }
                    band[0][j] = s.sqrt();
                } else {
                    band[d][j] = s / band[0][j];
                }
            }
        }
        Ok(BandCholesky { n, bw, band })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.clone();
        for j in 0..n {
            let kmin = j.saturating_sub(bw);
            let mut s = y[j];
            for k in kmin..j {
                s -= self.band[j - k][k] * y[k];
            }
            y[j] = s / self.band[0][j];
        }
        for j in (0..n).rev() {
            let imax = (j + bw).min(n - 1);
            let mut s = y[j];
            for i in (j + 1)..=imax {
                s -= self.band[i - j][j] * y[i];
            }
            y[j] = s / self.band[0][j];
        }
        y
    }
}

/// Which bilinear form induces the norm.
#[derive(Debug, Clone)]
pub enum Weight {
    Identity,
    /// `||x|| = sqrt(x' W x)`
    Matrix(Arc<SparseMatrix>),
    /// `||x|| = sqrt(x' W^{-1} x)`, `W^{-1}` applied via factorization
    InverseMatrix(Arc<SparseMatrix>),
}

/// A weighted norm with its factorization cached at construction.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    weight: Weight,
    factor: Option<Arc<SpdFactor>>,
}

impl WeightedNorm {
    pub fn identity() -> Self {
        WeightedNorm {
            weight: Weight::Identity,
            factor: None,
        }
    }

    /// Norm induced by an SPD matrix `w`.
    pub fn matrix(w: SparseMatrix) -> Result<Self> {
        // the factorization doubles as the SPD check
        let factor = SpdFactor::new(&w)?;
        Ok(WeightedNorm {
            weight: Weight::Matrix(Arc::new(w)),
            factor: Some(Arc::new(factor)),
        })
    }

    /// Norm induced by the inverse of an SPD matrix `w`.
    pub fn inverse_matrix(w: SparseMatrix) -> Result<Self> {
        let factor = SpdFactor::new(&w)?;
        Ok(WeightedNorm {
            weight: Weight::InverseMatrix(Arc::new(w)),
            factor: Some(Arc::new(factor)),
        })
    }

    /// Norm induced by `blockdiag(ws...)^{-1}`, e.g. the `(M^{-1}, M_Q^{-1})`
    /// residual norm of coupled saddle-point solves.
    pub fn inverse_block_diag(ws: &[&SparseMatrix]) -> Result<Self> {
        let n = ws.len();
        let grid: Vec<Vec<BlockEntry>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            BlockEntry::Mat(ws[i])
                        } else {
                            BlockEntry::ZeroSized(ws[i].nrows(), ws[j].ncols())
                        }
                    })
                    .collect()
            })
            .collect();
        Self::inverse_matrix(SparseMatrix::from_blocks(&grid)?)
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.weight {
            Weight::Identity => None,
            Weight::Matrix(w) | Weight::InverseMatrix(w) => Some(w.nrows()),
        }
    }

    /// `sqrt(x' W x)` respectively `sqrt(x' W^{-1} x)`.
    pub fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::dim(format!(
                    "weighted norm of dimension {d}, vector of length {}",
                    x.len()
                )));
            }
        }
        let q = match &self.weight {
            Weight::Identity => return Ok(x.norm()),
            Weight::Matrix(w) => x.dot(&w.matvec(x)?),
            Weight::InverseMatrix(_) => {
                let factor = self.factor.as_ref().expect("factor cached at construction");
                x.dot(&factor.solve(x)?)
            }
        };
        // roundoff can push a tiny quadratic form slightly negative
        Ok(q.max(0.0).sqrt())
    }
}

/// Dense symmetric eigenvalues, ascending. Convenience for small checks.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}
