//! Numerical laboratory for the radially symmetric chemotaxis-consumption
//! system
//!
//! ```text
//! u_t = ∇·(D(u)∇u) − ∇·(u∇v),   0 = Δv − u v    in B_R ⊂ R^n,
//! (D(u)∇u − u∇v)·ν = 0,          v = M          on ∂B_R,
//! ```
//!
//! with the power-law diffusion `D(ξ) = κ(ξ+1)^(-α)`.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod lab;
pub mod model;
pub mod record;
pub mod stepper;
pub mod svg;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{RadialGrid, RadialProfile};
pub use model::{BoundaryDatum, DiffusionLaw, Geometry, InitialData, RunConfig};
pub use stepper::{SimState, StepStatus};
