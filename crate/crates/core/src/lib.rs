//! Averaging process on finite graphs.
//!
//! Each edge carries a rate-1 Poisson clock; when it rings the two endpoint
//! masses are replaced by their average. The crate provides Monte Carlo
//! simulation, the random-walk duality oracles, exact L2 formulas on complete
//! bipartite graphs and hypercubes, entropy tools and the `avgproc` CLI.

pub mod bipartite;
pub mod cli;
pub mod duality;
pub mod ehrenfest;
pub mod entropy;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mc;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{Family, Graph, Part};
