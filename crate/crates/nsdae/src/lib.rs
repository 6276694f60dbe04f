//! Semi-discretized incompressible flow as a differential-algebraic
//! equation, the fully discrete time-stepping schemes built on it, and the
//! index analysis of the matrix pencils those schemes define.
//!
//! The crate is organized along the pipeline:
//!
//! * [`sparse`], [`norm`], [`solve`] -- matrix/vector kernels, weighted
//!   norms, direct and Krylov solvers with relative-residual stopping;
//! * [`pencil`] -- regularity, Kronecker index, and causality of
//!   difference-equation pencils, plus the strangeness rank checks;
//! * [`mac`], [`system`], [`import`] -- semi-discrete systems from the
//!   built-in staggered-grid discretization or from MatrixMarket files;
//! * [`schemes`] -- the time integrators (coupled IMEX Euler, projection,
//!   SIMPLE, artificial compressibility, penalty, index-reduced variants,
//!   and the trapezoidal reference);
//! * [`diagnostics`] -- integrated error/residual metrics, convergence
//!   order fits, and constraint-drift slopes.

pub mod diagnostics;
pub mod error;
pub mod import;
pub mod mac;
pub mod mmio;
pub mod norm;
pub mod pencil;
pub mod schemes;
pub mod solve;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};
pub use norm::{SpdFactor, WeightedNorm};
pub use pencil::{MatrixPair, PencilReport, SaddleSystemDescriptor};
pub use solve::{KrylovOutcome, SolveMode, SolverConfig};
pub use sparse::SparseMatrix;
