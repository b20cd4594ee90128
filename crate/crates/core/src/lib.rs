//! Dyadic harmonic analysis on `[0,1)^d`: weights, Haar shifts, corona
//! decompositions and the estimates built from them.

// `!(x > 0.0)` is used on purpose so that NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corona;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod io;
pub mod shifts;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{haar_basis, inner_product, CubeSums, DyadicCube, DyadicGrid, GridFunction, HaarFunction, Measure};
pub use weights::{a2_characteristic, Weight};
