//! Stable (subordinated) heat semigroups on homogeneous trees.

pub mod band;
pub mod error;
pub mod heat;
pub mod potential;
pub mod process;
pub mod quad;
pub mod special;
pub mod stable;
pub mod stats;
pub mod subordinator;
pub mod tree;

pub use error::{Error, Result};
pub use tree::{distance, Ball, TreeParams, Vertex};

/// Library version, echoed in experiment headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
