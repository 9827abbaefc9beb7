//! Spectral-Galerkin simulation and analysis of the quasilinear thermoelastic
//! Kirchhoff–Love plate with Cattaneo heat conduction, in the reduced
//! variables `z = A w`, `θ`, `p = div q` on boxes with hinged boundaries.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
