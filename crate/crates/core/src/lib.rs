//! Hard-phase relativistic stars: steady states with a free boundary, the
//! rescaled phase plane, the linearized radial-oscillation operator, its
//! smallest eigenvalue, and the linearized time evolution.
//!
//! Physics and ODE code runs in `f64`. The tridiagonal pencil solver is
//! generic over [`Real`], so the same routines run in `f32`, `f64` or
//! double-double ([`Dd`]).

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod eos;
pub mod error;
pub mod evolution;
pub mod family_analysis;
pub mod linear_operator;
pub mod ode;
pub mod phase_plane;
pub mod scalar;
pub mod spectrum;
pub mod steady_state;

pub use eos::EosSpec;
pub use error::{Error, Result};
pub use linear_operator::{OperatorAssembly, SymTridiag};
pub use scalar::{Dd, Real};
pub use steady_state::{StarProfile, SteadyConfig};
pub use spectrum::{Classification, Pencil, SpectralResult};

/// Pencil solver in the working precisions.
pub type PencilF32 = spectrum::Pencil<f32>;
pub type PencilF64 = spectrum::Pencil<f64>;
pub type PencilDd = spectrum::Pencil<Dd>;
