//! Periodic pseudo-spectral solver for the coupled transport of ionic
//! concentrations, velocity, and temperature in an incompressible
//! Boussinesq fluid with electrostatic forcing, together with the
//! entropy/energy diagnostics used to certify its conservation and decay
//! properties.
//!
//! The governing system on the unit torus couples Nernst-Planck ion
//! transport (advection, diffusion, temperature-dependent
//! electromigration), a Poisson equation for the electric potential,
//! Navier-Stokes momentum with thermal/saline buoyancy and electric
//! forcing, and a heat equation. A Gaussian Fourier mollifier J_eta can
//! be switched on to run the regularized variant of the system; eta = 0
//! recovers the plain equations.

pub mod diagnostics;
pub mod error;
pub mod model;
pub mod spectral;
pub mod state;
pub mod timestepper;

pub use error::Error;
pub use spectral::{Grid, ScalarField, VectorField};
pub use state::{PhysParams, SimState};
