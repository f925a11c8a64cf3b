//! Ride-sharing fleet simulation with insertion-based car-pooling,
//! per-context tabular Q-learning dispatch and Dirichlet change-point
//! detection that switches between contexts.

pub mod citygrid;
pub mod cpd;
pub mod demand;
pub mod error;
pub mod exec;
pub mod harness;
pub mod matching;
pub mod qdispatch;
pub mod routing;
pub mod simcore;

pub use error::{Error, Result};
