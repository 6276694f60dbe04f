//! Implicit trapezoidal (Crank-Nicolson type) reference integrator.
//!
//! Each step solves the coupled system
//!
//! ```text
//!   (M/tau + A/2) v_new - B' p_mid
//!       = (M/tau - A/2) v_old - (N(v_old) + N(v_new)) / 2 + (f_old + f_new) / 2
//!   B v_new = g_new
//! ```
//!
//! with the implicit convection evaluation resolved by fixed-point
//! iteration and direct inner solves only. The multiplier approximates the
//! pressure at the step midpoint, which the trajectory records so that
//! comparisons against node-located pressure sequences can average it back
//! onto the grid.


use crate::error::{Error, Result};
use crate::solve::SaddleSolver;
use crate::sparse::SparseMatrix;
use crate::system::SemiDiscreteSystem;

use super::{
    PressureLocation, SchemeConfig, SolveRecord, State, StepLog, StepOutcome, Stepper,
    PICARD_MAX_ITERS,
};

pub struct TrapezoidStepper {
    sys: SemiDiscreteSystem,
    tau: f64,
    picard_tol: f64,
    f_minus: SparseMatrix,
    solver: SaddleSolver,
}

impl TrapezoidStepper {
    pub fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Self> {
        if !cfg.momentum_solver.is_direct() || !cfg.pressure_solver.is_direct() {
            return Err(Error::InvalidConfig(
                "the trapezoidal reference runs with direct solves only".into(),
            ));
        }
        let f_plus = sys.mass.scaled(1.0 / cfg.tau).add_scaled(0.5, &sys.a_lin)?;
        let f_minus = sys.mass.scaled(1.0 / cfg.tau).add_scaled(-0.5, &sys.a_lin)?;
        Ok(TrapezoidStepper {
            sys: sys.clone(),
            tau: cfg.tau,
            picard_tol: cfg.picard_tol,
            f_minus,
            solver: SaddleSolver::new(&f_plus, &sys.b)?,
        })
    }
}

impl Stepper for TrapezoidStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let sys = &self.sys;
        let tau = self.tau;
        let rhs_base = self.f_minus.matvec(&state.v)?
            + (sys.f.eval(t) + sys.f.eval(t + tau)) * 0.5;
        let n_old = sys.convection.eval(&state.v);
        let g_new = sys.g.eval(t + tau);

        let mut guess = state.v.clone();
        let mut result = None;
        let passes = if sys.convection.is_zero() {
            1
        } else {
            PICARD_MAX_ITERS
        };
        let mut last_update = f64::INFINITY;
        for _ in 0..passes {
            let rhs_v = &rhs_base - (&n_old + sys.convection.eval(&guess)) * 0.5;
            let (v_new, q) = self.solver.solve(&rhs_v, &g_new)?;
            let update = sys.norm_m().norm(&(&v_new - &guess))?;
            let scale = sys.norm_m().norm(&v_new)?.max(1.0);
            let converged = update <= self.picard_tol * scale;
            last_update = update;
            guess = v_new.clone();
            result = Some((v_new, -q));
            if converged {
                break;
            }
            if sys.convection.is_zero() {
                break;
            }
        }
        let (v_new, p_mid) = result.expect("at least one pass runs");
        if !sys.convection.is_zero() && last_update > self.picard_tol {
            let scale = sys.norm_m().norm(&v_new)?.max(1.0);
            if last_update > self.picard_tol * scale {
                return Err(Error::PicardDiverged {
                    max_iters: PICARD_MAX_ITERS,
                    last_update,
                });
            }
        }
        Ok(StepOutcome {
            v: v_new,
            p: p_mid,
            log: StepLog {
                momentum: Some(SolveRecord::direct()),
                ..Default::default()
            },
        })
    }

    fn pressure_location(&self) -> PressureLocation {
        PressureLocation::Midpoint
    }
}
