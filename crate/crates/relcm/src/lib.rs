//! Hyperbolic gamma function, relativistic conical functions, attractive
//! eigenfunctions and the eigenfunction transforms they generate.

pub mod attractive;
pub mod error;
pub mod hypgamma;
pub mod numerics;
pub mod repulsive;
pub mod special_n;
pub mod scattering;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
