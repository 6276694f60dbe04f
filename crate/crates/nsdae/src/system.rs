//! The semi-discrete flow system and its steady-state initialization.
//!
//! A [`SemiDiscreteSystem`] carries the coefficients of
//!
//! ```text
//!   M v' + A v + N(v) - B' p = f(t)
//!   B v                      = g(t)
//! ```
//!
//! with SPD mass `M`, the linear (diffusion) part `A`, an explicit-only
//! convection evaluation `N`, a full-row-rank constraint matrix `B`, and
//! the pressure-space mass `M_Q` that induces the constraint-residual norm.
//! Systems are immutable after construction and shareable across runs.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::norm::{SpdFactor, WeightedNorm};
use crate::pencil::numerical_rank;
use crate::solve::{InnerFactor, SchurOperator};
use crate::sparse::SparseMatrix;

/// Tolerance for "the state satisfies the constraint" checks, relative to
/// the data scale.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Time-dependent right-hand-side data.
#[derive(Debug, Clone)]
pub enum TimeFn {
    Constant(DVector<f64>),
    /// Piecewise-linear tabulation over strictly increasing times.
    /// Evaluation clamps outside the tabulated range.
    PiecewiseLinear {
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
    },
}

impl TimeFn {
    pub fn zero(dim: usize) -> Self {
        TimeFn::Constant(DVector::zeros(dim))
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidConfig(
                "tabulation needs matching times/values with at least two samples".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "tabulation times must be strictly increasing".into(),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::dim("tabulated values have mixed lengths"));
        }
        Ok(TimeFn::PiecewiseLinear { times, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            TimeFn::Constant(v) => v.len(),
            TimeFn::PiecewiseLinear { values, .. } => values[0].len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFn::Constant(_))
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            TimeFn::Constant(v) => v.clone(),
            TimeFn::PiecewiseLinear { times, values } => {
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= *times.last().unwrap() {
                    return values.last().unwrap().clone();
                }
                let i = times.partition_point(|&s| s <= t);
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (t - t0) / (t1 - t0);
                &values[i - 1] * (1.0 - w) + &values[i] * w
            }
        }
    }

    /// First-order (backward-sided) time derivative: exactly zero for
    /// constant data, the active segment slope for tabulations.
    pub fn derivative(&self, t: f64) -> DVector<f64> {
        match self {
            TimeFn::Constant(v) => DVector::zeros(v.len()),
            TimeFn::PiecewiseLinear { times, values } => {
                if t <= times[0] || t > *times.last().unwrap() {
                    return DVector::zeros(values[0].len());
                }
                let i = times.partition_point(|&s| s < t).max(1);
                (&values[i] - &values[i - 1]) / (times[i] - times[i - 1])
            }
        }
    }

    /// Restrict component-wise to a subset of rows (for deflation).
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let pick = |v: &DVector<f64>| DVector::from_fn(keep.len(), |i, _| v[keep[i]]);
        match self {
            TimeFn::Constant(v) => TimeFn::Constant(pick(v)),
            TimeFn::PiecewiseLinear { times, values } => TimeFn::PiecewiseLinear {
                times: times.clone(),
                values: values.iter().map(pick).collect(),
            },
        }
    }
}

/// Jacobian-free convection evaluation.
pub trait ConvectionEval: fmt::Debug + Send + Sync {
    fn eval(&self, v: &DVector<f64>) -> DVector<f64>;
}

/// Sparse mode-3 tensor form `N(v)_j = sum_{a,b} H[j,a,b] v_a v_b`, the
/// file-representable convection of imported systems.
#[derive(Debug)]
pub struct ConvectionTensor {
    n: usize,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl ConvectionTensor {
    /// Decode from the matrix encoding: row `j`, column `a * n + b`.
    pub fn from_matrix(h: &SparseMatrix, n: usize) -> Result<Self> {
        if h.nrows() != n || h.ncols() != n * n {
            return Err(Error::dim(format!(
                "convection tensor matrix is {}x{}, expected {n}x{}",
                h.nrows(),
                h.ncols(),
                n * n
            )));
        }
        let entries = h
            .triplets()
            .map(|(j, c, v)| (j, c / n, c % n, v))
            .collect();
        Ok(ConvectionTensor { n, entries })
    }

    pub fn to_matrix(&self) -> SparseMatrix {
        let trips: Vec<_> = self
            .entries
            .iter()
            .map(|&(j, a, b, v)| (j, a * self.n + b, v))
            .collect();
        SparseMatrix::from_triplets(self.n, self.n * self.n, trips)
            .expect("indices valid by construction")
    }
}

impl ConvectionEval for ConvectionTensor {
    fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for &(j, a, b, h) in &self.entries {
            out[j] += v[a] * h * v[b];
        }
        out
    }
}

/// The convection term `N(v)` of the momentum equation.
#[derive(Debug, Clone)]
pub enum Convection {
    /// Stokes/Oseen linearization: `N == 0`.
    Zero,
    /// File-representable sparse tensor form.
    Tensor(Arc<ConvectionTensor>),
    /// Grid-attached evaluation (the staggered-grid builder).
    Eval(Arc<dyn ConvectionEval>),
}

impl Convection {
    pub fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Convection::Zero => DVector::zeros(v.len()),
            Convection::Tensor(t) => t.eval(v),
            Convection::Eval(e) => e.eval(v),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Convection::Zero)
    }
}

/// Coefficients of the semi-discrete DAE. See the module docs for the
/// equations; `K(v) = A v + N(v)` is the full momentum operator.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    pub mass: SparseMatrix,
    pub a_lin: SparseMatrix,
    pub b: SparseMatrix,
    pub convection: Convection,
    pub f: TimeFn,
    pub g: TimeFn,
    pub m_q: SparseMatrix,
    pub reynolds: f64,
    mass_factor: Arc<SpdFactor>,
    m_q_factor: Arc<SpdFactor>,
    norm_m: WeightedNorm,
    norm_m_inv: WeightedNorm,
    norm_mq_inv: WeightedNorm,
    norm_mp: WeightedNorm,
}

impl SemiDiscreteSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mass: SparseMatrix,
        a_lin: SparseMatrix,
        b: SparseMatrix,
        convection: Convection,
        f: TimeFn,
        g: TimeFn,
        m_q: SparseMatrix,
        reynolds: f64,
    ) -> Result<Self> {
        let n = mass.nrows();
        let m = b.nrows();
        if !mass.is_square() || !a_lin.is_square() || a_lin.nrows() != n || b.ncols() != n {
            return Err(Error::dim(format!(
                "system blocks: M {}x{}, A {}x{}, B {}x{}",
                mass.nrows(),
                mass.ncols(),
                a_lin.nrows(),
                a_lin.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !m_q.is_square() || m_q.nrows() != m {
            return Err(Error::dim(format!(
                "pressure mass is {}x{}, expected {m}x{m}",
                m_q.nrows(),
                m_q.ncols()
            )));
        }
        if f.dim() != n || g.dim() != m {
            return Err(Error::dim(format!(
                "rhs data: f has dimension {}, g has dimension {}, system is ({n}, {m})",
                f.dim(),
                g.dim()
            )));
        }
        if !(reynolds > 0.0) {
            return Err(Error::InvalidConfig(
                "Reynolds number must be positive".into(),
            ));
        }
        if numerical_rank(&b.to_dense()) != m {
            return Err(Error::RankDeficient(
                "B must have full row rank; deflate the pressure kernel first".into(),
            ));
        }
        let mass_factor = Arc::new(SpdFactor::new(&mass)?);
        let m_q_factor = Arc::new(SpdFactor::new(&m_q)?);
        let norm_m = WeightedNorm::matrix(mass.clone())?;
        let norm_m_inv = WeightedNorm::inverse_matrix(mass.clone())?;
        let norm_mq_inv = WeightedNorm::inverse_matrix(m_q.clone())?;
        // pressure errors use the same pressure-space mass unless a
        // separate M_P is supplied
        let norm_mp = WeightedNorm::matrix(m_q.clone())?;
        Ok(SemiDiscreteSystem {
            mass,
            a_lin,
            b,
            convection,
            f,
            g,
            m_q,
            reynolds,
            mass_factor,
            m_q_factor,
            norm_m,
            norm_m_inv,
            norm_mq_inv,
            norm_mp,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn mass_factor(&self) -> &Arc<SpdFactor> {
        &self.mass_factor
    }

    pub fn m_q_factor(&self) -> &Arc<SpdFactor> {
        &self.m_q_factor
    }

    /// `K(v) = A v + N(v)`
    pub fn momentum_operator(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.a_lin.matvec(v)? + self.convection.eval(v))
    }

    pub fn norm_m(&self) -> &WeightedNorm {
        &self.norm_m
    }

    pub fn norm_m_inv(&self) -> &WeightedNorm {
        &self.norm_m_inv
    }

    pub fn norm_mq_inv(&self) -> &WeightedNorm {
        &self.norm_mq_inv
    }

    pub fn norm_mp(&self) -> &WeightedNorm {
        &self.norm_mp
    }

    /// `||B v - g(t)||` in the `M_Q^{-1}` norm.
    pub fn constraint_residual(&self, v: &DVector<f64>, t: f64) -> Result<f64> {
        let r = self.b.matvec(v)? - self.g.eval(t);
        self.norm_mq_inv.norm(&r)
    }

    /// Check that `v` satisfies the constraint at time `t` up to the
    /// consistency tolerance.
    pub fn check_consistent(&self, v: &DVector<f64>, t: f64) -> Result<()> {
        let res = self.constraint_residual(v, t)?;
        let scale = self.norm_mq_inv.norm(&self.g.eval(t))?.max(1.0);
        if res > CONSISTENCY_TOL * scale {
            return Err(Error::InconsistentState(format!(
                "constraint residual {res:.3e} exceeds {:.3e}",
                CONSISTENCY_TOL * scale
            )));
        }
        Ok(())
    }
}

/// Steady Stokes solution, the standard initial value of the experiments.
#[derive(Debug, Clone)]
pub struct StokesState {
    pub v_s: DVector<f64>,
    pub p_s: DVector<f64>,
}

/// Solve the steady saddle system `[A, -B'; B, 0] [v; p] = [f(t); g(t)]`
/// by a direct solve.
pub fn solve_steady_stokes(sys: &SemiDiscreteSystem, t: f64) -> Result<StokesState> {
    let f = sys.f.eval(t);
    let g = sys.g.eval(t);
    let (v_s, p_s) = match crate::solve::SaddleSolver::new(&sys.a_lin, &sys.b) {
        // SPD diffusion block: block elimination with q = -p
        Ok(saddle) => {
            let (v, q) = saddle.solve(&f, &g)?;
            (v, -q)
        }
        // nonsymmetric linearizations fall back to one dense solve of the
        // full saddle matrix
        Err(_) => {
            let neg_bt = sys.b.transpose().scaled(-1.0);
            let full = SparseMatrix::from_blocks(&[
                vec![
                    crate::sparse::BlockEntry::Mat(&sys.a_lin),
                    crate::sparse::BlockEntry::Mat(&neg_bt),
                ],
                vec![
                    crate::sparse::BlockEntry::Mat(&sys.b),
                    crate::sparse::BlockEntry::ZeroSized(sys.m(), sys.m()),
                ],
            ])?;
            let rhs = crate::sparse::vstack(&f, &g);
            let x = crate::solve::solve_direct(&full, &rhs)?;
            crate::sparse::vsplit(&x, sys.n())
        }
    };
    let res = sys.b.matvec(&v_s)? - &g;
    let scale = sys.norm_mq_inv().norm(&g)?.max(1.0);
    if sys.norm_mq_inv().norm(&res)? > 1e-10 * scale {
        return Err(Error::InconsistentState(
            "steady Stokes solve failed the constraint residual check".into(),
        ));
    }
    Ok(StokesState { v_s, p_s })
}

/// Consistent initial pressure: solve the momentum equation at time `t`
/// with `v = v0` and `v' = 0` for `p` in the least-squares sense via the
/// mass-weighted Schur complement
/// `B M^{-1} B' p = B M^{-1} (A v0 + N(v0) - f(t))`.
///
/// Requires `B v0 = g(t)` up to the consistency tolerance.
pub fn consistent_initial_pressure(
    sys: &SemiDiscreteSystem,
    v0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    sys.check_consistent(v0, t)?;
    if sys.m() == 0 {
        return Ok(DVector::zeros(0));
    }
    let rhs_v = sys.momentum_operator(v0)? - sys.f.eval(t);
    let schur = SchurOperator::new(&sys.b, InnerFactor::Spd(sys.mass_factor.clone()))?;
    let s = schur.assemble_dense()?;
    let s = (&s + s.transpose()) * 0.5;
    let chol = nalgebra::Cholesky::new(s)
        .ok_or_else(|| Error::NotSpd("mass Schur complement not positive definite".into()))?;
    let rhs_p = sys.b.matvec(&sys.mass_factor.solve(&rhs_v)?)?;
    Ok(chol.solve(&rhs_p))
}
