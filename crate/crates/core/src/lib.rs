//! Stochastic rotating shallow water equations under location uncertainty on
//! an icosahedral spherical grid, discretised with mimetic variational
//! operators and stabilised either by Casimir (potential-enstrophy)
//! dissipation or by biharmonic diffusion.

pub mod error;
pub mod diagnostics;
pub mod geom;
pub mod harness;
pub mod integrator;
pub mod mesh;
pub mod ops;
pub mod rsw;
pub mod scenario;
pub mod stabilization;
pub mod stochastic;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use mesh::{validate_mesh, Mesh, ValidationReport};
