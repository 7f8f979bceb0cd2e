//! Monte Carlo estimators: crossing medians, the distance exponent, the
//! critical `xi` bracket, tightness across scales, annulus ratios and the
//! thick-point census.

mod campaign;
mod exponent;
pub mod stats;

pub use campaign::*;
pub use exponent::*;
