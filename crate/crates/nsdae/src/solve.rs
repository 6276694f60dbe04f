//! Direct and iterative linear solvers.
//!
//! The iterative solvers are plain unpreconditioned CG and MinRes. Their
//! stopping test is the one used throughout the experiments: the true
//! residual `b - A x`, measured in a caller-chosen weighted norm, must drop
//! below `lintol * ||b||` in that same norm. The residual is recomputed
//! from scratch for the test rather than taken from the recurrences, so a
//! solve that reports convergence always satisfies the bound post hoc.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::{SpdFactor, WeightedNorm};
use crate::sparse::SparseMatrix;

/// How a linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Direct,
    Cg,
    MinRes,
}

/// Configuration of one inner linear solve.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SolveMode,
    /// Relative-residual stopping tolerance of iterative modes.
    pub lintol: f64,
    pub max_iters: usize,
    /// Norm in which the stopping test is evaluated.
    pub norm: WeightedNorm,
    /// Start iterations from zero instead of the previous solution.
    pub zero_start: bool,
}

impl SolverConfig {
    pub fn direct() -> Self {
        SolverConfig {
            mode: SolveMode::Direct,
            lintol: 0.0,
            max_iters: 0,
            norm: WeightedNorm::identity(),
            zero_start: false,
        }
    }

    pub fn cg(lintol: f64, max_iters: usize, norm: WeightedNorm) -> Self {
        SolverConfig {
            mode: SolveMode::Cg,
            lintol,
            max_iters,
            norm,
            zero_start: false,
        }
    }

    pub fn minres(lintol: f64, max_iters: usize, norm: WeightedNorm) -> Self {
        SolverConfig {
            mode: SolveMode::MinRes,
            lintol,
            max_iters,
            norm,
            zero_start: false,
        }
    }

    pub fn is_direct(&self) -> bool {
        self.mode == SolveMode::Direct
    }

    /// Direct mode ignores `lintol`; iterative modes require a positive one.
    pub fn validate(&self) -> Result<()> {
        if !self.is_direct() {
            if !(self.lintol > 0.0) {
                return Err(Error::InvalidConfig(
                    "iterative solver requires lintol > 0".into(),
                ));
            }
            if self.max_iters == 0 {
                return Err(Error::InvalidConfig(
                    "iterative solver requires max_iters > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Result of one iterative solve.
#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: DVector<f64>,
    pub iters: usize,
    /// True relative residual in the configured norm at exit.
    pub rel_residual: f64,
    /// False when the iteration hit `max_iters` without meeting `lintol`.
    /// Callers record the flag instead of failing hard.
    pub converged: bool,
}

/// A square linear operator, possibly matrix-free.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl LinearOp for SparseMatrix {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "LinearOp requires a square matrix");
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matvec(x).expect("operator dimension enforced by caller")
    }
}

/// `x -> inner(x) + shift * x`
pub struct ShiftedOp<'a> {
    pub inner: &'a dyn LinearOp,
    pub shift: f64,
}

impl LinearOp for ShiftedOp<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = self.inner.apply(x);
        if self.shift != 0.0 {
            y.axpy(self.shift, x, 1.0);
        }
        y
    }
}

// ---------------------------------------------------------------------------
// direct solves
// ---------------------------------------------------------------------------

/// LU factorization with partial pivoting plus iterative refinement.
#[derive(Debug)]
pub struct DirectSolver {
    a: SparseMatrix,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DirectSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!(
                "direct solver needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let dense = a.to_dense();
        let lu = dense.clone().lu();
        let u = lu.u();
        let n = a.nrows();
        let umax = (0..n).fold(0.0f64, |acc, i| acc.max(u[(i, i)].abs()));
        let umin = (0..n).fold(f64::INFINITY, |acc, i| acc.min(u[(i, i)].abs()));
        if n > 0 && (umin == 0.0 || umin < (n as f64) * f64::EPSILON * umax) {
            return Err(Error::Singular);
        }
        Ok(DirectSolver { a: a.clone(), lu })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.a.nrows() {
            return Err(Error::dim(format!(
                "direct solve: matrix of dimension {}, rhs of length {}",
                self.a.nrows(),
                b.len()
            )));
        }
        let mut x = self.lu.solve(b).ok_or(Error::Singular)?;
        // refinement against the sparse matrix; exits early once the
        // residual is at roundoff level
        let bnorm = b.norm().max(1.0);
        for _ in 0..3 {
            let r = b - self.a.matvec(&x)?;
            if r.norm() <= 1e-15 * bnorm {
                break;
            }
            let dx = self.lu.solve(&r).ok_or(Error::Singular)?;
            x += dx;
        }
        Ok(x)
    }
}

/// One-shot direct solve of `A x = b`.
pub fn solve_direct(a: &SparseMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    DirectSolver::new(a)?.solve(b)
}

// ---------------------------------------------------------------------------
// Krylov solves
// ---------------------------------------------------------------------------

/// Unpreconditioned CG or MinRes per `cfg`, starting from `x0`.
pub fn solve_krylov(
    op: &dyn LinearOp,
    b: &DVector<f64>,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<KrylovOutcome> {
    cfg.validate()?;
    if b.len() != op.dim() || x0.len() != op.dim() {
        return Err(Error::dim(format!(
            "krylov solve: operator of dimension {}, rhs {}, start {}",
            op.dim(),
            b.len(),
            x0.len()
        )));
    }
    match cfg.mode {
        SolveMode::Cg => cg(op, b, cfg, x0),
        SolveMode::MinRes => minres(op, b, cfg, x0),
        SolveMode::Direct => Err(Error::InvalidConfig(
            "solve_krylov called with a direct-mode config".into(),
        )),
    }
}

fn rel_residual(
    op: &dyn LinearOp,
    b: &DVector<f64>,
    x: &DVector<f64>,
    norm: &WeightedNorm,
    bnorm: f64,
) -> Result<f64> {
    let r = b - op.apply(x);
    Ok(norm.norm(&r)? / bnorm)
}

fn cg(
    op: &dyn LinearOp,
    b: &DVector<f64>,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<KrylovOutcome> {
    let bnorm = cfg.norm.norm(b)?;
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: DVector::zeros(op.dim()),
            iters: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let mut x = if cfg.zero_start {
        DVector::zeros(op.dim())
    } else {
        x0.clone()
    };
    let mut r = b - op.apply(&x);
    let mut rel = cfg.norm.norm(&r)? / bnorm;
    if rel <= cfg.lintol {
        return Ok(KrylovOutcome {
            x,
            iters: 0,
            rel_residual: rel,
            converged: true,
        });
    }
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut iters = 0;
    while iters < cfg.max_iters {
        let q = op.apply(&p);
        let curv = p.dot(&q);
        if curv <= 0.0 {
            return Err(Error::CgBreakdown(curv));
        }
        let alpha = rr / curv;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        iters += 1;
        let rr_new = r.dot(&r);
        if cfg.norm.norm(&r)? <= cfg.lintol * bnorm {
            // confirm with the true residual; the recurrence may drift
            rel = rel_residual(op, b, &x, &cfg.norm, bnorm)?;
            if rel <= cfg.lintol {
                return Ok(KrylovOutcome {
                    x,
                    iters,
                    rel_residual: rel,
                    converged: true,
                });
            }
            r = b - op.apply(&x);
            rr = r.dot(&r);
            p = r.clone();
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = &r + &p * beta;
    }
    rel = rel_residual(op, b, &x, &cfg.norm, bnorm)?;
    Ok(KrylovOutcome {
        x,
        iters,
        rel_residual: rel,
        converged: rel <= cfg.lintol,
    })
}

/// MinRes after Paige & Saunders. The Lanczos/Givens recurrences drive the
/// iterate; the stopping test recomputes the true weighted residual.
fn minres(
    op: &dyn LinearOp,
    b: &DVector<f64>,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<KrylovOutcome> {
    let n = op.dim();
    let bnorm = cfg.norm.norm(b)?;
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: DVector::zeros(n),
            iters: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let mut x = if cfg.zero_start {
        DVector::zeros(n)
    } else {
        x0.clone()
    };
    let r1 = b - op.apply(&x);
    let mut rel = cfg.norm.norm(&r1)? / bnorm;
    if rel <= cfg.lintol {
        return Ok(KrylovOutcome {
            x,
            iters: 0,
            rel_residual: rel,
            converged: true,
        });
    }
    let beta1 = r1.norm();

    let mut y = r1.clone();
    let mut r1 = r1;
    let mut r2 = y.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w: DVector<f64> = DVector::zeros(n);
    let mut w2: DVector<f64> = DVector::zeros(n);

    let mut iters = 0;
    while iters < cfg.max_iters {
        iters += 1;
        let v = &y / beta;
        y = op.apply(&v);
        if iters >= 2 {
            y.axpy(-beta / oldb, &r1, 1.0);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2, 1.0);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = y.norm();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (&v - &w1 * oldeps - &w2 * delta) / gamma;
        x.axpy(phi, &w, 1.0);

        rel = rel_residual(op, b, &x, &cfg.norm, bnorm)?;
        if rel <= cfg.lintol {
            return Ok(KrylovOutcome {
                x,
                iters,
                rel_residual: rel,
                converged: true,
            });
        }
        if beta <= f64::EPSILON * beta1 {
            // Krylov space exhausted
            break;
        }
    }
    Ok(KrylovOutcome {
        converged: rel <= cfg.lintol,
        x,
        iters,
        rel_residual: rel,
    })
}

// ---------------------------------------------------------------------------
// Schur-complement machinery
// ---------------------------------------------------------------------------

/// Factorization handle for the inner solve of a Schur operator.
#[derive(Debug, Clone)]
pub enum InnerFactor {
    Spd(Arc<SpdFactor>),
    Lu(Arc<DirectSolver>),
}

impl InnerFactor {
    pub fn spd(f: &SparseMatrix) -> Result<Self> {
        Ok(InnerFactor::Spd(Arc::new(SpdFactor::new(f)?)))
    }

    pub fn lu(f: &SparseMatrix) -> Result<Self> {
        Ok(InnerFactor::Lu(Arc::new(DirectSolver::new(f)?)))
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            InnerFactor::Spd(f) => f.solve(b),
            InnerFactor::Lu(f) => f.solve(b),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InnerFactor::Spd(f) => f.dim(),
            InnerFactor::Lu(f) => f.dim(),
        }
    }
}

/// Matrix-free operator `p -> B F^{-1} B' p`, one inner direct solve per
/// application. Symmetric whenever `F` is; SPD whenever `F` is.
#[derive(Debug, Clone)]
pub struct SchurOperator {
    b: Arc<SparseMatrix>,
    f: InnerFactor,
}

impl SchurOperator {
    pub fn new(b: &SparseMatrix, f: InnerFactor) -> Result<Self> {
        if b.ncols() != f.dim() {
            return Err(Error::dim(format!(
                "Schur operator: B is {}x{}, F has dimension {}",
                b.nrows(),
                b.ncols(),
                f.dim()
            )));
        }
        Ok(SchurOperator {
            b: Arc::new(b.clone()),
            f,
        })
    }

    /// Schur operator for a nonsingular `F` given as a matrix (LU inside).
    pub fn from_matrices(b: &SparseMatrix, f: &SparseMatrix) -> Result<Self> {
        Self::new(b, InnerFactor::lu(f)?)
    }

    /// `F^{-1} B' p`, the inner half of an application.
    pub fn half_apply(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.f.solve(&self.b.tr_matvec(p)?)
    }

    /// Column-by-column dense assembly of `B F^{-1} B'`.
    pub fn assemble_dense(&self) -> Result<DMatrix<f64>> {
        let m = self.b.nrows();
        let mut s = DMatrix::zeros(m, m);
        let mut e = DVector::zeros(m);
        for j in 0..m {
            e[j] = 1.0;
            let col = self.b.matvec(&self.half_apply(&e)?)?;
            s.set_column(j, &col);
            e[j] = 0.0;
        }
        Ok(s)
    }
}

impl LinearOp for SchurOperator {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        self.b
            .matvec(&self.half_apply(p).expect("inner solve of Schur operator"))
            .expect("dimensions fixed at construction")
    }
}

/// Direct solver for saddle systems `[[F, B'], [B, 0]] [v; q] = [a; c]`
/// with SPD `F`, by block elimination through the dense Schur complement
/// `S = B F^{-1} B'`. Factors once, solves many times.
#[derive(Debug)]
pub struct SaddleSolver {
    f: Arc<SpdFactor>,
    b: SparseMatrix,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl SaddleSolver {
    pub fn new(f_mat: &SparseMatrix, b: &SparseMatrix) -> Result<Self> {
        if b.ncols() != f_mat.nrows() {
            return Err(Error::dim(format!(
                "saddle solver: F is {}x{}, B is {}x{}",
                f_mat.nrows(),
                f_mat.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let f = Arc::new(SpdFactor::new(f_mat)?);
        let schur = if b.nrows() == 0 {
            None
        } else {
            let op = SchurOperator::new(b, InnerFactor::Spd(f.clone()))?;
            let s = op.assemble_dense()?;
            // symmetrize away assembly roundoff before factoring
            let s = (&s + s.transpose()) * 0.5;
            Some(nalgebra::Cholesky::new(s).ok_or_else(|| {
                Error::NotSpd("Schur complement not positive definite (rank-deficient B?)".into())
            })?)
        };
        Ok(SaddleSolver {
            f,
            b: b.clone(),
            schur,
        })
    }

    pub fn nv(&self) -> usize {
        self.b.ncols()
    }

    pub fn np(&self) -> usize {
        self.b.nrows()
    }

    /// Solve for `(v, q)` given the momentum rhs `a` and constraint rhs `c`.
    pub fn solve(&self, a: &DVector<f64>, c: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let t = self.f.solve(a)?;
        let q = match &self.schur {
            None => DVector::zeros(0),
            Some(chol) => chol.solve(&(self.b.matvec(&t)? - c)),
        };
        let v = if self.np() == 0 {
            t
        } else {
            self.f.solve(&(a - self.b.tr_matvec(&q)?))?
        };
        Ok((v, q))
    }
}
