//! Spectral algorithms for coloring and independent sets in one-sided expanders.
//!
//! The crate covers threshold ranks of normalized adjacency matrices,
//! recovery of hidden partitions from extreme eigenspaces, rounding to
//! colorings and independent sets, the random-planting recovery pipeline,
//! and generators for test instances.

pub mod error;
pub mod graph;
pub mod io;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Graph, ModelMatrix, Partition};
pub mod eval;
pub mod recovery;
pub mod coloring;
pub mod instances;
pub mod planting;
