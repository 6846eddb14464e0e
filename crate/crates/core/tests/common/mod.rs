#![allow(dead_code)]

use cauchy_gft::graph::{build_laplacian, Edge, Graph, LaplacianKind};
use cauchy_gft::hgf::{HgfPlan, PlanTree};
use nalgebra::{DMatrix, SymmetricEigen};

/// Plan that splits the sorted node list in halves `levels` times, putting
/// every crossing edge on the interface of the split that separates it.
pub fn halving_plan(g: &Graph, levels: usize) -> HgfPlan {
    fn build(g: &Graph, nodes: Vec<usize>, levels: usize) -> PlanTree {
        if levels == 0 || nodes.len() < 2 {
            return PlanTree::Leaf(nodes);
        }
        let (a, b) = nodes.split_at(nodes.len() / 2);
        let in_a: std::collections::HashSet<usize> = a.iter().copied().collect();
        let in_b: std::collections::HashSet<usize> = b.iter().copied().collect();
        let crossing: Vec<Edge> = g
            .edges()
            .iter()
            .filter(|e| {
                (in_a.contains(&e.u) && in_b.contains(&e.v))
                    || (in_b.contains(&e.u) && in_a.contains(&e.v))
            })
            .copied()
            .collect();
        PlanTree::merge(
            build(g, a.to_vec(), levels - 1),
            build(g, b.to_vec(), levels - 1),
            crossing,
        )
    }
    HgfPlan::from_tree(g.n(), build(g, (0..g.n()).collect(), levels)).unwrap()
}

pub fn dense_laplacian(g: &Graph, kind: LaplacianKind) -> DMatrix<f64> {
    build_laplacian(g, kind).unwrap().to_dense()
}

/// Ascending eigenvalues straight from nalgebra.
pub fn oracle_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
