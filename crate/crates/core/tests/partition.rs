mod common;

use cauchy_gft::graph::{barabasi_albert, Edge, Graph, LaplacianKind};
use cauchy_gft::hgf::{FactorizedGft, HgfPlan, NodeKind};
use cauchy_gft::partition::{
    bisect, build_plan, fiedler_vector, fiedler_vector_with, CostModel, FiedlerOptions,
    PartitionConfig, SparsifyMode, SparsifyPolicy,
};
use cauchy_gft::sparsify::SampleTarget;
use common::{dense_laplacian, max_abs_diff, oracle_eigenvalues};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn complete(n: usize) -> Vec<(usize, usize, f64)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            e.push((i, j, 1.0));
        }
    }
    e
}

fn two_cliques(size: usize) -> Graph {
    let mut e = complete(size);
    let shifted: Vec<_> = e.iter().map(|&(u, v, w)| (u + size, v + size, w)).collect();
    e.extend(shifted);
    e.push((0, size, 1.0));
    Graph::from_edges(2 * size, &e).unwrap()
}

fn rayleigh(g: &Graph, v: &[f64]) -> f64 {
    g.edges().iter().map(|e| e.w * (v[e.u] - v[e.v]).powi(2)).sum::<f64>()
        / v.iter().map(|x| x * x).sum::<f64>()
}

fn dense_lambda2(g: &Graph) -> f64 {
    oracle_eigenvalues(&dense_laplacian(g, LaplacianKind::Combinatorial))[1]
}

#[test]
fn p4_sign_pattern_matches_dense_eigenvector() {
    let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
    let f = fiedler_vector(&g).unwrap();
    let eig = SymmetricEigen::new(dense_laplacian(&g, LaplacianKind::Combinatorial));
    let i2 = (0..4)
        .min_by(|&a, &b| {
            let key = |i: usize| if eig.eigenvalues[i] < 1e-9 { f64::INFINITY } else { eig.eigenvalues[i] };
            key(a).total_cmp(&key(b))
        })
        .unwrap();
    let oracle = eig.eigenvectors.column(i2);
    let sign = oracle.dot(&nalgebra::DVector::from_vec(f.vector.clone())).signum();
    for i in 0..4 {
        assert_eq!((f.vector[i] * sign).signum(), oracle[i].signum());
    }
    assert!(f.vector[0].signum() == f.vector[1].signum());
    assert!(f.vector[0].signum() != f.vector[3].signum());
}

#[test]
fn k4_rayleigh_is_four() {
    let g = Graph::from_edges(4, &complete(4)).unwrap();
    let f = fiedler_vector(&g).unwrap();
    assert!((rayleigh(&g, &f.vector) - 4.0).abs() < 1e-10);
    assert!(f.vector.iter().sum::<f64>().abs() < 1e-10);
}

#[test]
fn two_triangles_are_separated() {
    let g = Graph::from_edges(
        6,
        &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
    )
    .unwrap();
    let f = fiedler_vector(&g).unwrap();
    let s = f.vector[0].signum();
    assert!(f.vector[..3].iter().all(|v| v.signum() == s));
    assert!(f.vector[3..].iter().all(|v| v.signum() == -s));
    let cut = bisect(&g, &[0.5]).unwrap();
    assert_eq!(cut.crossing_edges, vec![Edge::new(2, 3, 1.0)]);
}

#[test]
fn lobpcg_matches_dense_connectivity() {
    for (n, seed) in [(80, 0), (150, 1), (300, 2)] {
        let g = barabasi_albert(n, 2, seed).unwrap();
        let f = fiedler_vector(&g).unwrap();
        let norm: f64 = f.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(f.vector.iter().sum::<f64>().abs() < 1e-8);
        let l2 = dense_lambda2(&g);
        let q = rayleigh(&g, &f.vector);
        assert!((q - l2).abs() <= 0.05 * l2, "n={n}: {q} vs {l2}");
        assert!((f.rayleigh - q).abs() <= 1e-8 * q.max(1.0));
    }
}

#[test]
fn iteration_cap_returns_flagged_iterate() {
    let g = barabasi_albert(200, 2, 4).unwrap();
    let opts = FiedlerOptions { max_iterations: 1, tolerance: 1e-14, seed: 0 };
    let f = fiedler_vector_with(&g, opts).unwrap();
    assert!(!f.converged);
    assert_eq!(f.iterations, 1);
    assert!(f.vector.iter().all(|v| v.is_finite()));
}

#[test]
fn fiedler_preconditions() {
    assert!(fiedler_vector(&Graph::empty(1)).is_err());
    let g = Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(fiedler_vector(&g).is_err());
}

#[test]
fn star_cut_crosses_an_edge() {
    let g = Graph::from_edges(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]).unwrap();
    let cut = bisect(&g, &cauchy_gft::partition::default_quantiles()).unwrap();
    assert!(!cut.crossing_edges.is_empty());
    assert_eq!(cut.side_a.len() + cut.side_b.len(), 5);
}

#[test]
fn cut_sides_partition_nodes() {
    let g = barabasi_albert(200, 2, 9).unwrap();
    let cut = bisect(&g, &cauchy_gft::partition::default_quantiles()).unwrap();
    let mut all: Vec<usize> = cut.side_a.iter().chain(&cut.side_b).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..200).collect::<Vec<_>>());
    let in_a: std::collections::HashSet<_> = cut.side_a.iter().copied().collect();
    let expected: Vec<Edge> = g
        .edges()
        .iter()
        .filter(|e| in_a.contains(&e.u) != in_a.contains(&e.v))
        .copied()
        .collect();
    assert_eq!(cut.crossing_edges, expected);
    assert!((cut.balance - cut.side_a.len() as f64 / 200.0).abs() < 1e-15);
    assert!((0.45..=0.55).contains(&cut.balance));
}

#[test]
fn two_cliques_split_once() {
    let g = two_cliques(10);
    let out = build_plan(&g, &PartitionConfig::default()).unwrap();
    assert_eq!(out.plan.num_leaves(), 2);
    let mut leaves = out.plan.leaf_sets();
    leaves.sort();
    assert_eq!(leaves, vec![(0..10).collect::<Vec<_>>(), (10..20).collect::<Vec<_>>()]);
    assert_eq!(out.plan.nodes[out.plan.root()].interface(), &[Edge::new(0, 10, 1.0)][..]);
}

#[test]
fn complete_graph_stays_whole() {
    let g = Graph::from_edges(20, &complete(20)).unwrap();
    let out = build_plan(&g, &PartitionConfig::default()).unwrap();
    assert_eq!(out.plan.num_leaves(), 1);
    assert_eq!(out.splits.len(), 1);
    assert!(!out.splits[0].accepted);
}

#[test]
fn every_split_satisfies_the_cost_inequality() {
    let g = barabasi_albert(300, 2, 5).unwrap();
    let cfg = PartitionConfig::default();
    let out = build_plan(&g, &cfg).unwrap();
    assert!(out.plan.num_leaves() > 1);
    check_merges(&out.plan, &cfg.cost);
    assert!(cfg.cost.plan_cost(&out.plan) <= cfg.cost.eig_cost(300));
}

fn check_merges(plan: &HgfPlan, cost: &CostModel) {
    for t in &plan.nodes {
        if let NodeKind::Merge { left, right, interface } = &t.kind {
            let (a, b) = (plan.nodes[*left].len, plan.nodes[*right].len);
            let connected_split = !interface.is_empty();
            if connected_split {
                assert!(cost.accepts(t.len, interface.len(), a, b));
            }
        }
    }
}

#[test]
fn plan_reproduces_spectrum() {
    let g = barabasi_albert(250, 2, 6).unwrap();
    let out = build_plan(&g, &PartitionConfig::default()).unwrap();
    out.plan.validate_for(&out.graph).unwrap();
    let f = FactorizedGft::factorize(&out.graph, &out.plan, LaplacianKind::Combinatorial).unwrap();
    let oracle = oracle_eigenvalues(&dense_laplacian(&g, LaplacianKind::Combinatorial));
    assert!(max_abs_diff(&f.lambda_final, &oracle) < 1e-8);
}

#[test]
fn deterministic_under_seed() {
    let g = barabasi_albert(400, 2, 2).unwrap();
    let cfg = PartitionConfig {
        sparsify: SparsifyPolicy {
            mode: SparsifyMode::Always,
            target: SampleTarget::Count { k: 3 },
            eps_jl: 0.5,
        },
        seed: 17,
        ..Default::default()
    };
    let a = build_plan(&g, &cfg).unwrap();
    let b = build_plan(&g, &cfg).unwrap();
    assert_eq!(a.plan.hash(), b.plan.hash());
    assert_eq!(a.graph.edges(), b.graph.edges());
}

#[test]
fn sparsified_plan_is_valid_for_returned_graph() {
    let g = barabasi_albert(300, 2, 8).unwrap();
    let cfg = PartitionConfig {
        sparsify: SparsifyPolicy {
            mode: SparsifyMode::Always,
            target: SampleTarget::Count { k: 2 },
            eps_jl: 0.5,
        },
        ..Default::default()
    };
    let out = build_plan(&g, &cfg).unwrap();
    out.plan.validate_for(&out.graph).unwrap();
    assert!(out.plan.max_interface() <= 2);
    assert!(out.graph.num_edges() < g.num_edges());
    check_merges(&out.plan, &cfg.cost);
    let f = FactorizedGft::factorize(&out.graph, &out.plan, LaplacianKind::Combinatorial).unwrap();
    let oracle = oracle_eigenvalues(&dense_laplacian(&out.graph, LaplacianKind::Combinatorial));
    assert!(max_abs_diff(&f.lambda_final, &oracle) < 1e-8);
}

#[test]
fn fallback_rescues_dense_cuts() {
    let g = Graph::from_edges(20, &complete(20)).unwrap();
    let cfg = PartitionConfig {
        sparsify: SparsifyPolicy {
            mode: SparsifyMode::Fallback,
            target: SampleTarget::Count { k: 2 },
            eps_jl: 0.5,
        },
        ..Default::default()
    };
    let out = build_plan(&g, &cfg).unwrap();
    assert!(out.plan.num_leaves() > 1);
    assert!(out.splits[0].sparsified && out.splits[0].accepted);
    out.plan.validate_for(&out.graph).unwrap();
}

#[test]
fn one_level_preset() {
    let g = barabasi_albert(120, 2, 1).unwrap();
    let out = build_plan(&g, &PartitionConfig::one_level()).unwrap();
    assert_eq!(out.plan.levels(), 1);
    assert_eq!(out.plan.num_leaves(), 2);
}

#[test]
fn disconnected_input_gets_empty_interfaces() {
    let mut e = complete(5);
    e.extend(complete(4).into_iter().map(|(u, v, w)| (u + 5, v + 5, w)));
    let g = Graph::from_edges(12, &e).unwrap();
    let out = build_plan(&g, &PartitionConfig::default()).unwrap();
    out.plan.validate_for(&g).unwrap();
    assert_eq!(out.plan.nodes[out.plan.root()].interface(), &[][..]);
    let mut leaves = out.plan.leaf_sets();
    leaves.sort();
    assert_eq!(leaves.len(), 5);
    let f = FactorizedGft::factorize(&g, &out.plan, LaplacianKind::Combinatorial).unwrap();
    let oracle = oracle_eigenvalues(&dense_laplacian(&g, LaplacianKind::Combinatorial));
    assert!(max_abs_diff(&f.lambda_final, &oracle) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn plans_are_valid_and_no_costlier(n in 10usize..160, seed in any::<u64>(), merge in 0.0f64..3.0) {
        let g = barabasi_albert(n, 2, seed).unwrap();
        let cfg = PartitionConfig {
            cost: CostModel { eig_coeff: 1.0, merge_coeff: merge },
            seed,
            ..Default::default()
        };
        let out = build_plan(&g, &cfg).unwrap();
        out.plan.validate_for(&out.graph).unwrap();
        prop_assert!(cfg.cost.plan_cost(&out.plan) <= cfg.cost.eig_cost(n) + 1e-9);
        let f = FactorizedGft::factorize(&out.graph, &out.plan, LaplacianKind::Combinatorial).unwrap();
        let oracle = oracle_eigenvalues(&dense_laplacian(&g, LaplacianKind::Combinatorial));
        prop_assert!(max_abs_diff(&f.lambda_final, &oracle) < 1e-8);
    }
}
