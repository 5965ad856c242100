//! Command-line tools and HTTP service around `roomgraph-core`.

pub mod app;
pub mod pipeline;
pub mod service;
