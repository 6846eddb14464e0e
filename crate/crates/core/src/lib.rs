//! Exact graph Fourier transforms built from a hierarchical partition of the
//! graph: dense eigendecompositions at the leaves, then one orthogonal
//! Cauchy-like factor per bridge edge on the way up.

pub mod bench;
pub mod error;
pub mod filter;
pub mod graph;
pub mod hgf;
pub mod linalg;
pub mod partition;
pub mod secular;
pub mod sparsify;

pub use error::{Error, Result};
