//! Lagrangian time-Taylor (CL) solver for the 2D incompressible Euler
//! equation on the periodic square, with Eulerian reference integrators and
//! analyticity diagnostics.

pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod interpolation;
pub mod lagrangian;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{GridField, Spectral, SpectralField};
