//! Fully discrete time-stepping schemes for the semi-discrete system.
//!
//! All schemes march an equidistant grid `t_k = k * tau` and produce a
//! [`Trajectory`] of `(v_k, p_k)` pairs plus per-step inner-solver records.
//! The nonlinearity is always evaluated explicitly at the old velocity;
//! only the trapezoidal reference iterates on it.
//!
//! Pressure indexing follows the recurrences: the coupled IMEX step and the
//! derivative-of-constraint step determine the pressure that pairs with the
//! step's *old* time index, the correction-type schemes update it at the
//! new index, and the trapezoidal reference produces midpoint values. The
//! trajectory records which convention applies so the diagnostics can align
//! pressure sequences.

mod imex;
mod minimal_extension;
mod nilpotent;
mod penalty;
mod pressure_correction;
mod trapezoid;

pub use imex::{DerivativeConstraintStepper, ImexStepper};
pub use minimal_extension::{find_b2_permutation, ColumnPermutation, MinimalExtensionStepper};
pub use nilpotent::{
    nilpotent_example_recursion, nilpotent_example_solve, nilpotent_recursion_residual,
};
pub use penalty::PenaltyStepper;
pub use pressure_correction::{ProjectionStepper, SimpleStepper};
pub use trapezoid::TrapezoidStepper;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::solve::{SolveMode, SolverConfig};
use crate::system::SemiDiscreteSystem;

/// Which integrator a [`SchemeConfig`] selects.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    ImexEuler,
    Projection,
    Simple,
    ArtificialCompressibility { beta: f64 },
    Penalty { beta: f64 },
    /// Index reduction by differentiating the constraint. The optional
    /// vector is a constant perturbation of the discrete hidden constraint,
    /// modelling a systematic inner-solve error.
    DerivativeConstraint { eta: Option<DVector<f64>> },
    MinimalExtension,
    ReferenceTrapezoid,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::ImexEuler => "imex-euler",
            SchemeKind::Projection => "projection",
            SchemeKind::Simple => "simple",
            SchemeKind::ArtificialCompressibility { .. } => "artificial-compressibility",
            SchemeKind::Penalty { .. } => "penalty",
            SchemeKind::DerivativeConstraint { .. } => "derivative-constraint",
            SchemeKind::MinimalExtension => "minimal-extension",
            SchemeKind::ReferenceTrapezoid => "reference-trapezoid",
        }
    }
}

/// Default iteration cap of the iterative inner solvers.
pub const DEFAULT_MAX_ITERS: usize = 20_000;

/// Default update tolerance of the reference scheme's fixed-point loop.
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;

/// Cap on fixed-point iterations of the reference scheme.
pub const PICARD_MAX_ITERS: usize = 50;

/// One configured integrator run.
///
/// The residual norms of the inner stopping tests are part of the scheme
/// definitions (mass-inverse weighted norms); the steppers therefore
/// install those norms and only take mode, tolerance, iteration cap, and
/// warm-start choice from the solver configs given here.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub tau: f64,
    pub t_end: f64,
    pub momentum_solver: SolverConfig,
    pub pressure_solver: SolverConfig,
    /// Update tolerance of the reference scheme's iteration on `N`.
    pub picard_tol: f64,
}

impl SchemeConfig {
    /// Exact inner solves.
    pub fn direct(scheme: SchemeKind, tau: f64, t_end: f64) -> Self {
        SchemeConfig {
            scheme,
            tau,
            t_end,
            momentum_solver: SolverConfig::direct(),
            pressure_solver: SolverConfig::direct(),
            picard_tol: DEFAULT_PICARD_TOL,
        }
    }

    /// Iterative inner solves stopped at relative residual `lintol`
    /// (MinRes for the coupled saddle schemes, CG for the SPD solves of
    /// the decoupled schemes).
    pub fn iterative(scheme: SchemeKind, tau: f64, t_end: f64, lintol: f64) -> Self {
        let mom_mode = match scheme {
            SchemeKind::ImexEuler | SchemeKind::DerivativeConstraint { .. } => SolveMode::MinRes,
            _ => SolveMode::Cg,
        };
        SchemeConfig {
            scheme,
            tau,
            t_end,
            momentum_solver: SolverConfig {
                mode: mom_mode,
                lintol,
                max_iters: DEFAULT_MAX_ITERS,
                norm: crate::norm::WeightedNorm::identity(),
                zero_start: false,
            },
            pressure_solver: SolverConfig {
                mode: SolveMode::Cg,
                lintol,
                max_iters: DEFAULT_MAX_ITERS,
                norm: crate::norm::WeightedNorm::identity(),
                zero_start: false,
            },
            picard_tol: DEFAULT_PICARD_TOL,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidConfig("t_end must be nonnegative".into()));
        }
        let steps = self.t_end / self.tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau = {} does not divide t_end = {} into whole steps",
                self.tau, self.t_end
            )));
        }
        match &self.scheme {
            SchemeKind::ArtificialCompressibility { beta } | SchemeKind::Penalty { beta } => {
                if !(*beta > 0.0) {
                    return Err(Error::InvalidConfig("beta must be positive".into()));
                }
            }
            SchemeKind::ReferenceTrapezoid => {
                if !(self.picard_tol > 0.0) {
                    return Err(Error::InvalidConfig("picard_tol must be positive".into()));
                }
            }
            _ => {}
        }
        self.momentum_solver.validate()?;
        self.pressure_solver.validate()?;
        Ok(())
    }
}

/// Record of one inner linear solve. Direct solves report zero iterations
/// and a zero residual by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRecord {
    pub mode: SolveMode,
    pub iters: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

impl SolveRecord {
    pub(crate) fn direct() -> Self {
        SolveRecord {
            mode: SolveMode::Direct,
            iters: 0,
            rel_residual: 0.0,
            converged: true,
        }
    }

    pub(crate) fn from_outcome(mode: SolveMode, out: &crate::solve::KrylovOutcome) -> Self {
        SolveRecord {
            mode,
            iters: out.iters,
            rel_residual: out.rel_residual,
            converged: out.converged,
        }
    }
}

/// Inner-solve records of one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepLog {
    pub momentum: Option<SolveRecord>,
    pub pressure: Option<SolveRecord>,
    pub correction: Option<SolveRecord>,
}

/// `(v, p)` at one time node.
#[derive(Debug, Clone)]
pub struct State {
    pub v: DVector<f64>,
    pub p: DVector<f64>,
}

/// What a stepper returns for one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub v: DVector<f64>,
    pub p: DVector<f64>,
    pub log: StepLog,
}

/// Where the pressure produced by step `k -> k+1` belongs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureIndexing {
    /// Paired with the old index `k` (coupled saddle solves).
    AtCurrent,
    /// Paired with the new index `k + 1` (correction updates).
    AtNext,
}

/// Where pressure samples live in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureLocation {
    /// At the grid nodes `t_k`.
    Node,
    /// At step midpoints `t_k + tau/2` (trapezoidal reference).
    Midpoint,
}

/// One integrator, with its factorizations prepared for a fixed `tau`.
pub trait Stepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome>;

    fn pressure_indexing(&self) -> PressureIndexing {
        PressureIndexing::AtNext
    }

    fn pressure_location(&self) -> PressureLocation {
        PressureLocation::Node
    }
}

/// Build the stepper selected by `cfg`.
pub fn make_stepper(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Box<dyn Stepper>> {
    cfg.validate()?;
    Ok(match &cfg.scheme {
        SchemeKind::ImexEuler => Box::new(ImexStepper::new(sys, cfg)?),
        SchemeKind::Projection => Box::new(ProjectionStepper::new(sys, cfg)?),
        SchemeKind::Simple => Box::new(SimpleStepper::new(sys, cfg, 0.0)?),
        SchemeKind::ArtificialCompressibility { beta } => {
            let shift = if beta.is_infinite() { 0.0 } else { 1.0 / (beta * cfg.tau) };
            Box::new(SimpleStepper::new(sys, cfg, shift)?)
        }
        SchemeKind::Penalty { beta } => Box::new(PenaltyStepper::new(sys, cfg, *beta)?),
        SchemeKind::DerivativeConstraint { eta } => {
            Box::new(DerivativeConstraintStepper::new(sys, cfg, eta.clone())?)
        }
        SchemeKind::MinimalExtension => Box::new(MinimalExtensionStepper::new(sys, cfg)?),
        SchemeKind::ReferenceTrapezoid => Box::new(TrapezoidStepper::new(sys, cfg)?),
    })
}

/// Time-indexed output of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: SchemeKind,
    pub tau: f64,
    /// Stopping tolerance of the inner solves, 0 for direct runs.
    pub lintol: f64,
    pub times: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    /// Pressure samples; `pressure_valid` marks the indices the scheme
    /// actually defined (the rest are placeholders).
    pub p: Vec<DVector<f64>>,
    pub pressure_valid: std::ops::Range<usize>,
    pub pressure_location: PressureLocation,
    pub solver_log: Vec<StepLog>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Pressure attributed to the time node `t_k`, if the scheme defines
    /// one there. Midpoint-located sequences are averaged onto the node
    /// (one-sided at the final node).
    pub fn pressure_at_node(&self, k: usize) -> Option<DVector<f64>> {
        match self.pressure_location {
            PressureLocation::Node => {
                if self.pressure_valid.contains(&k) {
                    Some(self.p[k].clone())
                } else {
                    None
                }
            }
            PressureLocation::Midpoint => {
                let last = self.times.len() - 1;
                if k == 0 {
                    Some(self.p[0].clone())
                } else if k < last {
                    Some((&self.p[k] + &self.p[k + 1]) * 0.5)
                } else {
                    Some(self.p[last].clone())
                }
            }
        }
    }

    /// True when any recorded inner solve failed to reach its tolerance.
    pub fn any_unconverged(&self) -> bool {
        self.solver_log.iter().any(|l| {
            [l.momentum, l.pressure, l.correction]
                .iter()
                .flatten()
                .any(|r| !r.converged)
        })
    }
}

/// Run the configured scheme from the consistent initial state `(v0, p0)`.
///
/// Inner-solver non-convergence is recorded in the log, not escalated;
/// hard solver failures (breakdowns, singular systems) abort the run.
pub fn run(
    sys: &SemiDiscreteSystem,
    cfg: &SchemeConfig,
    v0: &DVector<f64>,
    p0: &DVector<f64>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if v0.len() != sys.n() || p0.len() != sys.m() {
        return Err(Error::dim(format!(
            "initial state has dimensions ({}, {}), system is ({}, {})",
            v0.len(),
            p0.len(),
            sys.n(),
            sys.m()
        )));
    }
    sys.check_consistent(v0, 0.0)?;

    let steps = cfg.steps();
    let mut stepper = make_stepper(sys, cfg)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    let mut p = vec![p0.clone(); steps + 1];
    let mut solver_log = Vec::with_capacity(steps);
    times.push(0.0);
    v.push(v0.clone());

    let mut state = State {
        v: v0.clone(),
        p: p0.clone(),
    };
    for k in 0..steps {
        let t = k as f64 * cfg.tau;
        let out = stepper.step(&state, t)?;
        times.push((k + 1) as f64 * cfg.tau);
        v.push(out.v.clone());
        match stepper.pressure_indexing() {
            PressureIndexing::AtCurrent => p[k] = out.p.clone(),
            PressureIndexing::AtNext => p[k + 1] = out.p.clone(),
        }
        solver_log.push(out.log);
        state = State { v: out.v, p: out.p };
    }

    let pressure_valid = match stepper.pressure_indexing() {
        // the slot at the final node was never written
        PressureIndexing::AtCurrent if steps > 0 => 0..steps,
        _ => 0..steps + 1,
    };
    Ok(Trajectory {
        scheme: cfg.scheme.clone(),
        tau: cfg.tau,
        lintol: if cfg.momentum_solver.is_direct() {
            0.0
        } else {
            cfg.momentum_solver.lintol
        },
        times,
        v,
        p,
        pressure_valid,
        pressure_location: stepper.pressure_location(),
        solver_log,
    })
}
