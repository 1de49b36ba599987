//! Time-dependent error channels of a driven qubit under colored noise.
//!
//! The pipeline runs from a noise power spectral density to filtered
//! integrals, then to analytic channels and gate errors. A stochastic
//! Langevin simulator and simulated process tomography serve as
//! independent checks.

pub mod error;
pub mod errormap;
pub mod filters;
pub mod io;
pub mod langevin;
pub mod linalg;
pub mod noisegen;
pub mod quad;
pub mod tomography;

pub use error::{Error, Result};
pub use filters::{FilteredIntegrals, FilteredPoint};
pub use linalg::{C64, Mat2, Mat4};
pub use noisegen::NoisePsd;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
