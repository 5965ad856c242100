//! Preference-conditioned layout synthesis for small indoor rooms.
//!
//! The pipeline turns annotated scenes into typed relation graphs, learns a
//! conditional graph generator over them, and instantiates generated graphs
//! back into concrete furniture placements.

// Index loops mirror the matrix formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod condgen;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod graph;
pub mod instantiate;
pub mod numeric;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
