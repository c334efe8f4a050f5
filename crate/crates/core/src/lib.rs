//! Josephson oscillations and relative-phase dephasing of two coupled
//! Bose-Einstein condensates: mean-field integration, collective
//! phase/number fluctuation moments, analytic hydrodynamic solutions,
//! perturbative dephasing rates and an exact two-mode quantum reference.

pub mod cli;
pub mod error;
pub mod fit;
pub mod gpe;
pub mod grid;
pub mod hydro;
pub mod moments;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod perturbation;
pub mod table;
pub mod two_mode;

pub use error::{Error, Result};
pub use grid::{field_norm, integrate_radial, RadialField, RadialGrid};
pub use params::{PhysicalParams, RawParams};
