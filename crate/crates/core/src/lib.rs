//! Numerical toolkit for scattering by penetrable media with corners.

pub mod cgo;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod incident;
pub mod laplace;
pub mod lsolver;
pub mod mie;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
