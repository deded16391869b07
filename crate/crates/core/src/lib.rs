//! Minimal-dissipation slow-driving protocols for spin systems in contact
//! with a thermal bath.
//!
//! The thermodynamic metric `g = d^2 ln Z` turns the slow-driving dissipated
//! work into a curve energy; optimal protocols are its geodesics and the
//! dissipation is bounded below by `L^2 / (beta tau)`.

pub mod analysis;
pub mod analytic;
pub mod cli;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod jet;
pub mod models;
pub mod steps;
pub mod tensor;
pub mod thermo;

pub use error::{Error, Result};
pub use models::{Model, ModelSpec};
pub use thermo::{ControlPoint, DissipationReport, ThermalState, Trajectory, UnitsContext};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
