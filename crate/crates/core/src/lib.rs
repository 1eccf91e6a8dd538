//! Numerical core of the `diffuse` solver.
//!
//! Integrates the surface heat equation du/dt = div(nu grad u) on the unit
//! sphere, discretized on a logically rectangular, possibly non-uniform
//! (theta, phi) grid:
//!
//! * [`grid`] — grid construction with exact cap-based cell areas and a
//!   periodic phi seam,
//! * [`operator`] — the conservative second-order flux-form stencil and its
//!   Gershgorin spectral-radius bound,
//! * [`integrator`] — RKL2 super-time-stepping (an s-stage explicit scheme
//!   whose stability region grows like s^2),
//! * [`exec`] — the execution-plan abstraction the kernels are routed
//!   through (serial, parallel sweeps with ordered reductions, or fully
//!   parallel including reductions),
//! * [`synth`] — analytic and pseudo-random initial conditions.
//!
//! The crate is `no_std`-compatible (allocation required): disable the
//! default `std` feature and enable `libm` instead. File formats, threads,
//! and the CLI live in the companion `diffuse` crate.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("diffuse-core needs a math backend: enable the `std` feature (default) or `libm`");

extern crate alloc;

mod error;
pub(crate) mod math;

pub mod exec;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod operator;
pub mod synth;

pub use error::Error;
pub use exec::{ExecPlan, ExecutionMode, ReductionMode};
pub use field::ScalarField;
pub use grid::SphericalGrid;
pub use integrator::{AdvanceStats, Rkl2Plan, StepWorkspace};
pub use operator::StencilOperator;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
