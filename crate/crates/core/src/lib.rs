//! Workbench for multistate Landau–Zener models that admit a commuting
//! partner linear in `t` and containing `1/τ` terms.

pub mod error;
pub mod integrability;
pub mod io;
pub mod matrix;
pub mod models;
pub mod optimize;
pub mod propagator;
pub mod semiclassical;
pub mod spectrum;

pub use error::{MlzError, Result};
