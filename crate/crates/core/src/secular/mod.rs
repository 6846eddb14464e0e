//! Rank-one symmetric eigenvalue updates: deflation, secular roots, and the
//! orthogonal Cauchy-like factor relating old and new eigenbases.

mod deflate;
mod factor;
mod solve;

pub use deflate::{deflate, DeflationRecord, DeflationTolerances, HouseholderBlock};
pub use factor::{apply_factor, build_cauchy_factor, rank_one_factor, CauchyFactor};
pub use solve::{solve_secular, SecularRoot, SecularSolution};
