#![no_std]
//! Liouville first passage percolation on a periodic lattice.
//!
//! The crate samples log-correlated Gaussian fields, mollifies them with the
//! heat kernel, builds the exponentially weighted 8-neighbor metric and
//! evaluates distances, annulus crossings and separating cycles. On top of
//! that sit Monte Carlo estimators for the distance exponent and executable
//! checks of the metric axioms. Everything here is allocation-only and
//! deterministic given a seed; IO and thread pools live in the `lfpp` crate.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimators;
pub mod fft;
pub mod field;
pub mod grid;
pub mod metric;
pub mod properties;
pub mod rng;

pub use error::{Error, Result};
pub use field::{FieldGrid, MollifiedField, Normalization};
pub use grid::{GridSpec, LatticeField, Point};
pub use metric::{AnnulusSpec, GeodesicPath, LatticeMetric};
