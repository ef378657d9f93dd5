//! Graph approximations of Laakso spaces.
//!
//! [`space`] holds the construction (scales, wormholes, fibers, cells),
//! [`graph`] the level-`N` metric graph with its energy and Laplacian,
//! [`folding`] the folding maps and the averaging projection `Θ`,
//! [`spectral`] eigenpairs, heat kernels and Besov norms, [`walker`] the
//! Monte Carlo engine, and [`verify`] the checks that tie them together.

pub mod cli;
pub mod error;
pub mod folding;
pub mod graph;
pub mod space;
pub mod spectral;
pub mod stats;
pub mod verify;
pub mod walker;

pub use error::{LaaksoError, Result};
