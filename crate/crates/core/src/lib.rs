//! Numerical laboratory for a nonlocal delayed reaction–diffusion equation
//!
//! ```text
//! ∂ₜu = Δu − μu + σu(t−τ) + ε ∫ Γ_ι(x−y) b(u(y, t−τ)) dy + g(x)
//! ```
//!
//! on a periodic truncation of ℝ^d (d = 1, 2).
//!
//! - [`model`]: coefficients, the nonlinearity catalogue and hypothesis checks.
//! - [`field`]: grid functions with exact-symbol heat semigroup and Gaussian convolution.
//! - [`integrator`]: method-of-steps integration of the mild formulation.
//! - [`spectral`]: Dirichlet spectrum and dominant delayed characteristic roots.
//! - [`bounds`]: absorbing radius, squeezing rates, contraction factor, dimension bound.
//! - [`harness`]: empirical absorption, contraction and dimension checks.
//! - [`config`] and [`cli`]: the `delay-attractor` command-line driver.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{apply_mask, Field, FieldEngine, Grid, Mask};
pub use integrator::{Segment, Semiflow, Trajectory};
pub use model::{
    effective_bound_m, validate, ModelParams, NonlinKind, NonlinSpec, ValidationReport,
};
