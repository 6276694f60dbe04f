//! Coupled saddle-point steps: the implicit-explicit Euler scheme and the
//! index-reduced derivative-of-constraint scheme.
//!
//! Both advance by one solve of
//!
//! ```text
//!   [ M/tau + A   B' ] [ v_new ]   [ rhs_v ]
//!   [ B           0  ] [  -p   ] = [ rhs_c ]
//! ```
//!
//! with the convection evaluated at the old velocity. For the IMEX scheme
//! the constraint row enforces `B v_new = g(t + tau)` and the computed
//! pressure pairs with the *old* time index. The derivative-of-constraint
//! variant instead enforces the backward difference of the constraint,
//! `B (v_new - v_old) / tau = dg + eta`, where `eta` is an optional
//! constant perturbation standing in for systematic inner-solve error.
//!
//! Direct mode eliminates the pressure block through the dense Schur
//! complement; iterative mode runs MinRes on the assembled saddle matrix,
//! stopped by the relative residual in the `(M^{-1}, M_Q^{-1})` block norm,
//! warm-started from the previous step unless configured otherwise.

use nalgebra::DVector;

use crate::error::Result;
use crate::norm::WeightedNorm;
use crate::solve::{solve_krylov, SaddleSolver, SolveMode, SolverConfig};
use crate::sparse::{vsplit, vstack, BlockEntry, SparseMatrix};
use crate::system::SemiDiscreteSystem;

use super::{PressureIndexing, SchemeConfig, SolveRecord, State, StepLog, StepOutcome, Stepper};

enum SaddleMode {
    Direct(SaddleSolver),
    MinRes {
        matrix: SparseMatrix,
        cfg: SolverConfig,
    },
}

struct SaddleStep {
    sys: SemiDiscreteSystem,
    tau: f64,
    f_mat: SparseMatrix,
    mode: SaddleMode,
}

impl SaddleStep {
    fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Self> {
        let tau = cfg.tau;
        let f_mat = sys.mass.scaled(1.0 / tau).add_scaled(1.0, &sys.a_lin)?;
        let mode = match cfg.momentum_solver.mode {
            SolveMode::Direct => SaddleMode::Direct(SaddleSolver::new(&f_mat, &sys.b)?),
            _ => {
                let bt = sys.b.transpose();
                let matrix = SparseMatrix::from_blocks(&[
                    vec![BlockEntry::Mat(&f_mat), BlockEntry::Mat(&bt)],
                    vec![
                        BlockEntry::Mat(&sys.b),
                        BlockEntry::ZeroSized(sys.m(), sys.m()),
                    ],
                ])?;
                let mut krylov = cfg.momentum_solver.clone();
                krylov.mode = SolveMode::MinRes;
                krylov.norm = WeightedNorm::inverse_block_diag(&[&sys.mass, &sys.m_q])?;
                SaddleMode::MinRes {
                    matrix,
                    cfg: krylov,
                }
            }
        };
        Ok(SaddleStep {
            sys: sys.clone(),
            tau,
            f_mat: f_mat.clone(),
            mode,
        })
    }

    /// Solve the saddle step for `(v_new, p)` given the two right-hand
    /// sides; the warm start uses the previous state.
    fn solve(
        &self,
        rhs_v: &DVector<f64>,
        rhs_c: &DVector<f64>,
        state: &State,
    ) -> Result<(DVector<f64>, DVector<f64>, SolveRecord)> {
        match &self.mode {
            SaddleMode::Direct(solver) => {
                let (v, q) = solver.solve(rhs_v, rhs_c)?;
                Ok((v, -q, SolveRecord::direct()))
            }
            SaddleMode::MinRes { matrix, cfg } => {
                let b = vstack(rhs_v, rhs_c);
                let x0 = vstack(&state.v, &(-&state.p));
                let out = solve_krylov(matrix, &b, cfg, &x0)?;
                let (v, q) = vsplit(&out.x, self.sys.n());
                Ok((v, -q, SolveRecord::from_outcome(SolveMode::MinRes, &out)))
            }
        }
    }

    fn momentum_rhs(&self, state: &State, t: f64) -> Result<DVector<f64>> {
        Ok(self.sys.mass.matvec(&state.v)? / self.tau - self.sys.convection.eval(&state.v)
            + self.sys.f.eval(t))
    }

    #[allow(dead_code)]
    fn f_mat(&self) -> &SparseMatrix {
        &self.f_mat
    }
}

/// One coupled implicit-explicit Euler step per time node.
pub struct ImexStepper {
    inner: SaddleStep,
}

impl ImexStepper {
    pub fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Self> {
        Ok(ImexStepper {
            inner: SaddleStep::new(sys, cfg)?,
        })
    }
}

impl Stepper for ImexStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let rhs_v = self.inner.momentum_rhs(state, t)?;
        let rhs_c = self.inner.sys.g.eval(t + self.inner.tau);
        let (v, p, record) = self.inner.solve(&rhs_v, &rhs_c, state)?;
        Ok(StepOutcome {
            v,
            p,
            log: StepLog {
                momentum: Some(record),
                ..Default::default()
            },
        })
    }

    fn pressure_indexing(&self) -> PressureIndexing {
        PressureIndexing::AtCurrent
    }
}

/// IMEX Euler applied to the system with the constraint replaced by its
/// time derivative (the hidden constraint).
pub struct DerivativeConstraintStepper {
    inner: SaddleStep,
    eta: Option<DVector<f64>>,
}

impl DerivativeConstraintStepper {
    pub fn new(
        sys: &SemiDiscreteSystem,
        cfg: &SchemeConfig,
        eta: Option<DVector<f64>>,
    ) -> Result<Self> {
        if let Some(e) = &eta {
            if e.len() != sys.m() {
                return Err(crate::error::Error::dim(format!(
                    "eta has length {}, system has {} constraints",
                    e.len(),
                    sys.m()
                )));
            }
        }
        Ok(DerivativeConstraintStepper {
            inner: SaddleStep::new(sys, cfg)?,
            eta,
        })
    }
}

impl Stepper for DerivativeConstraintStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let sys = &self.inner.sys;
        let tau = self.inner.tau;
        let rhs_v = self.inner.momentum_rhs(state, t)?;
        // B (v_new - v_old) / tau = (g_new - g_old) / tau + eta,
        // scaled by tau so the saddle row keeps its plain B block
        let mut rhs_c = sys.b.matvec(&state.v)? + sys.g.eval(t + tau) - sys.g.eval(t);
        if let Some(e) = &self.eta {
            rhs_c += e * tau;
        }
        let (v, p, record) = self.inner.solve(&rhs_v, &rhs_c, state)?;
        Ok(StepOutcome {
            v,
            p,
            log: StepLog {
                momentum: Some(record),
                ..Default::default()
            },
        })
    }

    fn pressure_indexing(&self) -> PressureIndexing {
        PressureIndexing::AtCurrent
    }
}
