//! Hierarchical factorization: merge plans and the factorized transform.

mod factorize;
mod plan;

pub use factorize::{FactorizedGft, InterfaceFactors, LeafBasis, DENSE_LIMIT};
pub use plan::{HgfPlan, NodeKind, PlanTree, TreeNode};
