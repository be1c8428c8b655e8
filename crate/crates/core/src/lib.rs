//! Desk-scale laboratory for the 2D incompressible Euler equations in
//! vorticity form. The crate simulates the flow on a periodic square,
//! measures the norms that control its regularity (Sobolev, Lorentz,
//! Dini), and machine-checks the chain of a priori inequalities those
//! norms satisfy, fitting empirical constants where the theory only
//! asserts existence.

mod error;
mod real;

pub mod biot_savart;
pub mod estimates;
pub mod fields;
pub mod flow;
pub mod norms;
pub mod rearrange;
pub mod solver;

pub use error::{Error, Result};
pub use real::Real;

/// Concrete f64 instantiations; the CLI and the file formats speak these.
pub type Grid = fields::Grid2D<f64>;
pub type Field = fields::ScalarField<f64>;
pub type Velocity = fields::VelocityField<f64>;
