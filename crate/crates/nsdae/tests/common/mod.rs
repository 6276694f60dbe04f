//! Shared fixtures for the integration suites: desk-scale problems and
//! their standard initialization (steady Stokes velocity, consistent
//! initial pressure).

use nalgebra::DVector;
use nsdae::mac::MacGridSpec;
use nsdae::system::{
    consistent_initial_pressure, solve_steady_stokes, Convection, SemiDiscreteSystem,
};

/// Small obstacle-channel problem with inflow.
#[allow(dead_code)]
pub fn small_channel(ny: usize, reynolds: f64) -> SemiDiscreteSystem {
    MacGridSpec::obstacle_channel(ny, reynolds, 1.0)
        .build()
        .expect("valid desk problem")
}

/// Lid-driven cavity, nonzero forcing through the lift, `g = 0`.
#[allow(dead_code)]
pub fn small_cavity(n: usize, reynolds: f64, lid: f64) -> SemiDiscreteSystem {
    MacGridSpec::lid_driven(n, reynolds, lid)
        .build()
        .expect("valid cavity")
}

/// The Stokes linearization of a system: same coefficients, `N == 0`.
#[allow(dead_code)]
pub fn stokes_of(sys: &SemiDiscreteSystem) -> SemiDiscreteSystem {
    let mut s = sys.clone();
    s.convection = Convection::Zero;
    s
}

/// Standard initialization: steady Stokes velocity and the consistent
/// initial pressure of the full system at `t = 0`.
#[allow(dead_code)]
pub fn init_state(sys: &SemiDiscreteSystem) -> (DVector<f64>, DVector<f64>) {
    let stokes = solve_steady_stokes(sys, 0.0).expect("steady Stokes solve");
    let p0 = consistent_initial_pressure(sys, &stokes.v_s, 0.0).expect("consistent pressure");
    (stokes.v_s, p0)
}

/// One scalar ODE `v' = -v` dressed up as a constraint-free system.
#[allow(dead_code)]
pub fn scalar_decay() -> SemiDiscreteSystem {
    use nsdae::sparse::SparseMatrix;
    use nsdae::system::TimeFn;
    SemiDiscreteSystem::new(
        SparseMatrix::identity(1),
        SparseMatrix::identity(1),
        SparseMatrix::zeros(0, 1),
        Convection::Zero,
        TimeFn::zero(1),
        TimeFn::zero(0),
        SparseMatrix::zeros(0, 0),
        1.0,
    )
    .expect("scalar system")
}

/// Scalar system `v' = f` with no stiffness at all.
#[allow(dead_code)]
pub fn scalar_forced(f: f64) -> SemiDiscreteSystem {
    use nsdae::sparse::SparseMatrix;
    use nsdae::system::TimeFn;
    SemiDiscreteSystem::new(
        SparseMatrix::identity(1),
        SparseMatrix::zeros(1, 1),
        SparseMatrix::zeros(0, 1),
        Convection::Zero,
        TimeFn::Constant(DVector::from_element(1, f)),
        TimeFn::zero(0),
        SparseMatrix::zeros(0, 0),
        1.0,
    )
    .expect("scalar system")
}
