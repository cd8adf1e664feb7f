//! Exact random-walk quantities on weighted graphs: heat kernels, exit-time
//! laws, mean exit times, resistances, Green functions and Harnack constants,
//! plus numerical checks of exit-time tail bounds and heat-kernel lower bounds.

pub mod cli;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod potential;
pub mod scales;
pub mod stopping;
pub mod verifier;
pub mod walk;

pub use error::{Error, GraphError, Result};
pub use graph::{InteriorMargin, VertexSet, WeightedGraph};
