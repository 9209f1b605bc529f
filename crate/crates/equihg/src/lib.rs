//! Molecular property regression on hypergraphs.
//!
//! The pipeline: parse molecules (`chemio`), perceive conjugated systems and
//! lift them to hyperedges (`hypergraph`), encode 3D structure with an
//! E(3)-equivariant message-passing stack (`geo`), propagate over the
//! vertex/hyperedge bipartite graph (`allset`), and regress a scalar target
//! (`model`, `trainer`). Everything runs on a small reverse-mode autodiff
//! core (`tensor`, `nn`) with 64-bit floats throughout.

pub mod allset;
pub mod check;
pub mod chemio;
pub mod config;
pub mod error;
pub mod geo;
pub mod hypergraph;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
