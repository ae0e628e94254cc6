//! Digital twin of a random-Delaunay liquid-conductor sensing skin.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod geometry;
pub mod io;
pub mod localization;
pub mod logic;
pub mod stimulus;

pub use error::{Result, SkinError};
