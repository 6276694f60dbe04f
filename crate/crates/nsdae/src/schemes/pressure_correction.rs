//! Decoupled pressure-correction steps: the projection scheme and the
//! SIMPLE family (including its artificial-compressibility variant, which
//! only shifts the pressure operator by `1/(beta tau)`).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::norm::WeightedNorm;
use crate::solve::{
    solve_krylov, InnerFactor, SchurOperator, ShiftedOp, SolveMode, SolverConfig,
};
use crate::sparse::SparseMatrix;
use crate::system::SemiDiscreteSystem;

use super::{SchemeConfig, SolveRecord, State, StepLog, StepOutcome, Stepper};

/// How the SPD pressure operator is solved: a cached dense Cholesky, or CG
/// on the matrix-free operator (whose applications cost one inner direct
/// solve each).
enum PressureSolve {
    Direct(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Cg {
        op: SchurOperator,
        shift: f64,
        cfg: SolverConfig,
    },
}

impl PressureSolve {
    fn new(
        op: SchurOperator,
        shift: f64,
        cfg: &SolverConfig,
        norm: WeightedNorm,
    ) -> Result<Self> {
        Ok(match cfg.mode {
            SolveMode::Direct => {
                let mut s = op.assemble_dense()?;
                for i in 0..s.nrows() {
                    s[(i, i)] += shift;
                }
                let s = (&s + s.transpose()) * 0.5;
                PressureSolve::Direct(nalgebra::Cholesky::new(s).ok_or_else(|| {
                    Error::NotSpd("pressure Schur complement not positive definite".into())
                })?)
            }
            _ => {
                let mut krylov = cfg.clone();
                krylov.mode = SolveMode::Cg;
                krylov.norm = norm;
                PressureSolve::Cg {
                    op,
                    shift,
                    cfg: krylov,
                }
            }
        })
    }

    fn solve(&self, rhs: &DVector<f64>, warm: &DVector<f64>) -> Result<(DVector<f64>, SolveRecord)> {
        match self {
            PressureSolve::Direct(chol) => Ok((chol.solve(rhs), SolveRecord::direct())),
            PressureSolve::Cg { op, shift, cfg } => {
                let shifted = ShiftedOp {
                    inner: op,
                    shift: *shift,
                };
                let out = solve_krylov(&shifted, rhs, cfg, warm)?;
                Ok((out.x.clone(), SolveRecord::from_outcome(SolveMode::Cg, &out)))
            }
        }
    }
}

/// SPD momentum-type solve: direct through the cached factorization or CG
/// on the sparse matrix with the `M^{-1}` stopping norm.
struct MomentumSolve {
    matrix: SparseMatrix,
    factor: std::sync::Arc<crate::norm::SpdFactor>,
    cfg: Option<SolverConfig>,
}

impl MomentumSolve {
    fn new(matrix: SparseMatrix, cfg: &SolverConfig, norm: WeightedNorm) -> Result<Self> {
        let factor = std::sync::Arc::new(crate::norm::SpdFactor::new(&matrix)?);
        let cfg = match cfg.mode {
            SolveMode::Direct => None,
            _ => {
                let mut krylov = cfg.clone();
                krylov.mode = SolveMode::Cg;
                krylov.norm = norm;
                Some(krylov)
            }
        };
        Ok(MomentumSolve {
            matrix,
            factor,
            cfg,
        })
    }

    fn solve(&self, rhs: &DVector<f64>, warm: &DVector<f64>) -> Result<(DVector<f64>, SolveRecord)> {
        match &self.cfg {
            None => Ok((self.factor.solve(rhs)?, SolveRecord::direct())),
            Some(cfg) => {
                let out = solve_krylov(&self.matrix, rhs, cfg, warm)?;
                Ok((out.x.clone(), SolveRecord::from_outcome(SolveMode::Cg, &out)))
            }
        }
    }

    fn factor(&self) -> std::sync::Arc<crate::norm::SpdFactor> {
        self.factor.clone()
    }
}

/// Projection step: explicit momentum with the old pressure, projection of
/// the intermediate velocity onto the constraint through the mass-weighted
/// Schur complement, and the scaled-multiplier pressure update.
pub struct ProjectionStepper {
    sys: SemiDiscreteSystem,
    tau: f64,
    momentum: MomentumSolve,
    pressure: PressureSolve,
    prev_vt: DVector<f64>,
    prev_phi: DVector<f64>,
}

impl ProjectionStepper {
    pub fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Self> {
        let mass_tau = sys.mass.scaled(1.0 / cfg.tau);
        let momentum = MomentumSolve::new(mass_tau, &cfg.momentum_solver, sys.norm_m_inv().clone())?;
        let schur = SchurOperator::new(&sys.b, InnerFactor::Spd(sys.mass_factor().clone()))?;
        let pressure = PressureSolve::new(
            schur,
            0.0,
            &cfg.pressure_solver,
            sys.norm_mq_inv().clone(),
        )?;
        Ok(ProjectionStepper {
            sys: sys.clone(),
            tau: cfg.tau,
            momentum,
            pressure,
            prev_vt: DVector::zeros(sys.n()),
            prev_phi: DVector::zeros(sys.m()),
        })
    }
}

impl Stepper for ProjectionStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let sys = &self.sys;
        let tau = self.tau;
        // (M/tau) v_tilde = (M/tau - A) v - N(v) + B'p + f
        let rhs_mom = sys.mass.matvec(&state.v)? / tau - sys.a_lin.matvec(&state.v)?
            - sys.convection.eval(&state.v)
            + sys.b.tr_matvec(&state.p)?
            + sys.f.eval(t);
        let (v_tilde, mom_record) = self.momentum.solve(&rhs_mom, &self.prev_vt)?;
        self.prev_vt = v_tilde.clone();

        // (B M^{-1} B') phi_scaled = (2/tau) (g_new - B v_tilde)
        let rhs_p = (sys.g.eval(t + tau) - sys.b.matvec(&v_tilde)?) * (2.0 / tau);
        let (phi_scaled, pres_record) = self.pressure.solve(&rhs_p, &self.prev_phi)?;
        self.prev_phi = phi_scaled.clone();

        // v_new = v_tilde + (tau/2) M^{-1} B' phi_scaled
        let correction = sys
            .mass_factor()
            .solve(&sys.b.tr_matvec(&phi_scaled)?)?
            * (tau / 2.0);
        let v_new = &v_tilde + correction;
        let p_new = &state.p + &phi_scaled;
        Ok(StepOutcome {
            v: v_new,
            p: p_new,
            log: StepLog {
                momentum: Some(mom_record),
                pressure: Some(pres_record),
                correction: None,
            },
        })
    }
}

/// SIMPLE step (three solves: tentative momentum, pressure correction on
/// `S_A = B (M/tau + A)^{-1} B'`, velocity correction), with an optional
/// diagonal shift of the pressure operator for artificial compressibility.
/// A zero shift reproduces plain SIMPLE exactly: it is the same code path.
pub struct SimpleStepper {
    sys: SemiDiscreteSystem,
    tau: f64,
    momentum: MomentumSolve,
    pressure: PressureSolve,
    shift: f64,
    prev_vt: DVector<f64>,
    prev_pd: DVector<f64>,
    prev_vd: DVector<f64>,
}

impl SimpleStepper {
    pub fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig, shift: f64) -> Result<Self> {
        let f_mat = sys.mass.scaled(1.0 / cfg.tau).add_scaled(1.0, &sys.a_lin)?;
        let momentum = MomentumSolve::new(f_mat, &cfg.momentum_solver, sys.norm_m_inv().clone())?;
        let schur = SchurOperator::new(&sys.b, InnerFactor::Spd(momentum.factor()))?;
        let pressure = PressureSolve::new(
            schur,
            shift,
            &cfg.pressure_solver,
            sys.norm_mq_inv().clone(),
        )?;
        Ok(SimpleStepper {
            sys: sys.clone(),
            tau: cfg.tau,
            momentum,
            pressure,
            shift,
            prev_vt: DVector::zeros(sys.n()),
            prev_pd: DVector::zeros(sys.m()),
            prev_vd: DVector::zeros(sys.n()),
        })
    }

    /// The shift applied to the pressure operator (`1/(beta tau)` for the
    /// artificial-compressibility variant, zero for plain SIMPLE).
    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl Stepper for SimpleStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let sys = &self.sys;
        let tau = self.tau;
        // (M/tau + A) v_tilde = M v / tau + B'p + f - N(v)
        let rhs1 = sys.mass.matvec(&state.v)? / tau + sys.b.tr_matvec(&state.p)? + sys.f.eval(t)
            - sys.convection.eval(&state.v);
        let (v_tilde, mom_record) = self.momentum.solve(&rhs1, &self.prev_vt)?;
        self.prev_vt = v_tilde.clone();

        // (S_A + shift I) p_delta = g_new - B v_tilde
        let rhs2 = sys.g.eval(t + tau) - sys.b.matvec(&v_tilde)?;
        let (p_delta, pres_record) = self.pressure.solve(&rhs2, &self.prev_pd)?;
        self.prev_pd = p_delta.clone();

        // (M/tau + A) v_delta = B' p_delta
        let rhs3 = sys.b.tr_matvec(&p_delta)?;
        let (v_delta, corr_record) = self.momentum.solve(&rhs3, &self.prev_vd)?;
        self.prev_vd = v_delta.clone();

        Ok(StepOutcome {
            v: &v_tilde + &v_delta,
            p: &state.p + &p_delta,
            log: StepLog {
                momentum: Some(mom_record),
                pressure: Some(pres_record),
                correction: Some(corr_record),
            },
        })
    }
}
