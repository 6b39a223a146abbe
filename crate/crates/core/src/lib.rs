//! Variational multiscale (ASGS) finite elements with dynamic subscales for
//! incompressible Casson flow coupled to variable-coefficient
//! advection-diffusion-reaction transport, on structured P1 triangulations.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// quadrature abscissae are kept at full tabulated precision
#![allow(clippy::excessive_precision)]

pub mod app;
pub mod assembly;
pub mod cavity;
pub mod error;
pub mod fe;
pub mod linsolve;
pub mod manufactured;
pub mod mesh;
pub mod rheology;
pub mod solver;
pub mod sparse;
pub mod stabilization;
pub mod verification;

pub use error::{Error, Result};
