//! Verification kernels for the linear Poisson structure on sl2(C).

pub mod error;
pub mod exterior;
pub mod flat;
pub mod cohomology;
pub mod flow;
pub mod frame;
pub mod homotopy;
pub mod modp;
pub mod poisson;
pub mod poly;
pub mod sampling;
pub mod skeleton;
pub mod sl2;

pub use error::{Error, Result};
