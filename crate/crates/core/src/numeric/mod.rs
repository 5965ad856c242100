//! Small dense linear algebra and neural building blocks.
//!
//! Graphs handled here have at most a few dozen nodes, so everything is dense
//! and single-threaded; gradients are derived by hand for each fixed
//! architecture.

mod assignment;
mod gradcheck;
mod matrix;
pub mod nn;
mod spectral;

pub use assignment::min_cost_assignment;
pub use gradcheck::{grad_check, DEFAULT_EPSILON};
pub use matrix::Matrix;
pub use nn::{fnn_forward, gcn_forward, kl_gaussian, LayerParams, Params};
pub use spectral::{
    laplacian_spectral_gap, normalize_adjacency, normalize_adjacency_backward, normalized_laplacian,
    spectral_embedding, symmetric_eigen,
};
