//! Numerical laboratory for fully nonlinear curvature flows of closed hypersurfaces.
pub mod certify;
pub mod cli;
pub mod cone;
pub mod error;
pub mod flow;
pub mod io;
pub mod monitors;
pub mod pinching;
pub mod speed;
pub mod surface;
pub mod symmetric;
pub use error::{Error, Result};
