mod common;

use cauchy_gft::filter::{
    apply_layer, euler_step, eval_bank, hierarchical_mix, Basis, Filter, FilterBank,
    L2gLayerConfig,
};
use cauchy_gft::graph::{barabasi_albert, Graph, LaplacianKind};
use cauchy_gft::hgf::FactorizedGft;
use cauchy_gft::partition::{build_plan, PartitionConfig, SparsifyMode, SparsifyPolicy};
use cauchy_gft::sparsify::SampleTarget;
use cauchy_gft::Error;
use common::dense_laplacian;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

fn random_signal(n: usize, c: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, c, |_, _| rng.random_range(-1.0..1.0))
}

fn factorized(n: usize, seed: u64, kind: LaplacianKind) -> (Graph, FactorizedGft) {
    let g = barabasi_albert(n, 2, seed).unwrap();
    let out = build_plan(&g, &PartitionConfig::default()).unwrap();
    assert!(out.plan.num_leaves() > 1);
    let f = FactorizedGft::factorize(&g, &out.plan, kind).unwrap();
    (g, f)
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn p3() -> (Graph, FactorizedGft) {
    let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let out = build_plan(&g, &PartitionConfig::one_level()).unwrap();
    let f = FactorizedGft::factorize(&g, &out.plan, LaplacianKind::Combinatorial).unwrap();
    (g, f)
}

#[test]
fn spline_banks_partition_unity() {
    for size in [1, 2, 4, 5, 8, 13] {
        let bank = FilterBank::spline(size).unwrap();
        let g = eval_bank(&bank, &grid(1000)).unwrap();
        for i in 0..1000 {
            assert!((g.row(i).sum() - 1.0).abs() <= 1e-9, "size {size}");
        }
    }
}

#[test]
fn unnormalized_cubic_splines_sum_to_one() {
    let mut bank = FilterBank::spline(4).unwrap();
    bank.normalize = false;
    let g = eval_bank(&bank, &grid(1000)).unwrap();
    for i in 0..1000 {
        assert!((g.row(i).sum() - 1.0).abs() <= 1e-12);
        assert!(g.row(i).iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn rbf_banks_partition_unity_and_nonnegative() {
    for size in [1, 3, 6, 10] {
        let bank = FilterBank::rbf(size).unwrap();
        let g = eval_bank(&bank, &grid(1000)).unwrap();
        for i in 0..1000 {
            assert!((g.row(i).sum() - 1.0).abs() <= 1e-9);
            assert!(g.row(i).iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn custom_knots_and_coefficients() {
    let bank = FilterBank {
        basis: Basis::Spline {
            size: 5,
            degree: 2,
            knots: Some(vec![0.0, 0.0, 0.0, 0.2, 0.7, 1.0, 1.0, 1.0]),
        },
        coefficients: vec![vec![1.0, 0.5, 0.0, 0.0, 0.0], vec![0.0, 0.5, 1.0, 1.0, 1.0]],
        normalize: true,
    };
    let g = eval_bank(&bank, &grid(1000)).unwrap();
    for i in 0..1000 {
        assert!((g.row(i).sum() - 1.0).abs() <= 1e-9);
    }
    assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((g[(999, 1)] - 1.0).abs() < 1e-15);
}

#[test]
fn bank_config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    let bank = FilterBank::rbf(4).unwrap();
    std::fs::write(&path, bank.to_json().unwrap()).unwrap();
    assert_eq!(FilterBank::load(&path).unwrap(), bank);
}

#[test]
fn unit_layer_is_identity() {
    for kind in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
        let (_, f) = factorized(150, 3, kind);
        let x = random_signal(150, 4, 1);
        let cfg = L2gLayerConfig::unit(&f);
        let y = apply_layer(&f, &cfg, &x).unwrap();
        assert!((&y - &x).abs().max() <= 1e-8);
        let mix = hierarchical_mix(&f, &cfg, &x).unwrap();
        assert!((mix - f.forward(&x).unwrap()).abs().max() <= 1e-9);
    }
}

#[test]
fn powers_match_dense_laplacian() {
    for kind in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
        let (g, f) = factorized(180, 4, kind);
        let l = dense_laplacian(&g, kind);
        let x = random_signal(180, 3, 2);
        let mut expect = x.clone();
        for d in 1..=3u32 {
            expect = &l * expect;
            let cfg = L2gLayerConfig::global(&f, Filter::Power { degree: d });
            let y = apply_layer(&f, &cfg, &x).unwrap();
            let scale = l.norm().powi(d as i32) * x.norm();
            assert!((&y - &expect).norm() <= 1e-6 * scale, "d = {d}");
            assert!(rel(&y, &expect) < 1e-8, "d = {d}");
        }
    }
}

#[test]
fn p3_laplacian_times_unit_vector() {
    let (_, f) = p3();
    let cfg = L2gLayerConfig::global(&f, Filter::Power { degree: 1 });
    let y = apply_layer(&f, &cfg, &DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
    for (a, b) in y.iter().zip([1.0, -1.0, 0.0]) {
        assert!((a - b).abs() <= 1e-7);
    }
}

#[test]
fn heat_kernel_matches_matrix_exponential() {
    let (g, f) = p3();
    let l = dense_laplacian(&g, LaplacianKind::Combinatorial);
    let cfg = L2gLayerConfig::global(&f, Filter::Heat { t: 1.0 });
    let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let y = apply_layer(&f, &cfg, &e1).unwrap();
    let expect = (-&l).exp().column(0).clone_owned();
    assert!((y.column(0) - expect).abs().max() <= 1e-7);

    for (t, kind) in [(0.3, LaplacianKind::Combinatorial), (2.0, LaplacianKind::Normalized)] {
        let (g, f) = factorized(200, 6, kind);
        let l = dense_laplacian(&g, kind);
        let x = random_signal(200, 2, 8);
        let cfg = L2gLayerConfig::global(&f, Filter::Heat { t });
        let y = apply_layer(&f, &cfg, &x).unwrap();
        let expect = (&l * -t).exp() * &x;
        assert!((y - expect).abs().max() <= 1e-7);
    }
}

#[test]
fn low_pass_root_filter_masks_upper_half() {
    let g = barabasi_albert(100, 2, 2).unwrap();
    let out = build_plan(&g, &PartitionConfig::one_level()).unwrap();
    let f = FactorizedGft::factorize(&g, &out.plan, LaplacianKind::Combinatorial).unwrap();
    let root = f.plan.root();
    let top = f.lambda_final[99];
    let cutoff = 0.5 * (f.lambda_final[49] + f.lambda_final[50]) / top;
    let cfg = L2gLayerConfig::unit(&f).with_node(root, Filter::LowPass { cutoff });
    let x = random_signal(100, 3, 4);
    let mix = hierarchical_mix(&f, &cfg, &x).unwrap();
    let fwd = f.forward(&x).unwrap();
    for i in 0..100 {
        let keep = f.lambda_final[i] / top < cutoff;
        for c in 0..3 {
            let expect = if keep { fwd[(i, c)] } else { 0.0 };
            assert!((mix[(i, c)] - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn bounded_filters_do_not_grow_norms() {
    let (_, f) = factorized(100, 9, LaplacianKind::Combinatorial);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bank = FilterBank {
        basis: Basis::Spline { size: 6, degree: 3, knots: None },
        coefficients: (0..3).map(|_| (0..6).map(|_| rng.random_range(0.0..1.0)).collect()).collect(),
        normalize: false,
    };
    let mut cfg = L2gLayerConfig::global(&f, Filter::Bank { bank: bank.clone() });
    for node in 0..f.plan.nodes.len() {
        cfg = cfg.with_node(node, Filter::Bank { bank: bank.clone() });
    }
    let x = random_signal(100, 5, 5);
    let y = hierarchical_mix(&f, &cfg, &x).unwrap();
    let z = apply_layer(&f, &cfg, &x).unwrap();
    for c in 0..5 {
        assert!(y.column(c).norm() <= x.column(c).norm() * (1.0 + 1e-8));
        assert!(z.column(c).norm() <= x.column(c).norm() * (1.0 + 1e-8));
    }
}

#[test]
fn channels_cycle_through_bank_filters() {
    let (_, f) = factorized(80, 1, LaplacianKind::Combinatorial);
    let bank = FilterBank::spline(4).unwrap();
    let cfg = L2gLayerConfig::global(&f, Filter::Bank { bank: bank.clone() });
    let x = random_signal(80, 1, 0);
    let wide = DMatrix::from_fn(80, 6, |i, _| x[(i, 0)]);
    let y = apply_layer(&f, &cfg, &wide).unwrap();
    let top = f.lambda_final[79];
    let lam: Vec<f64> = f.lambda_final.iter().map(|l| l / top).collect();
    let g = eval_bank(&bank, &lam).unwrap();
    let fwd = f.forward(&x).unwrap();
    for c in 0..6 {
        let spec = DMatrix::from_fn(80, 1, |i, _| fwd[(i, 0)] * g[(i, c % 4)]);
        let expect = f.inverse(&spec).unwrap();
        assert!((y.column(c) - expect.column(0)).abs().max() <= 1e-10);
    }
}

#[test]
fn euler_step_adds_scaled_layer() {
    let (g, f) = factorized(60, 2, LaplacianKind::Combinatorial);
    let l = dense_laplacian(&g, LaplacianKind::Combinatorial);
    let x = random_signal(60, 2, 7);
    let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]);
    let cfg = L2gLayerConfig::global(&f, Filter::Power { degree: 1 });
    let y = euler_step(&f, &cfg, &x, &w, -0.1).unwrap();
    let expect = &x - &l * &x * &w * 0.1;
    assert!((y - expect).abs().max() <= 1e-9);
    assert!(euler_step(&f, &cfg, &x, &DMatrix::identity(3, 3), 0.1).is_err());
}

#[test]
fn mismatched_config_rejected() {
    let (_, f) = factorized(60, 2, LaplacianKind::Combinatorial);
    let (_, other) = factorized(60, 3, LaplacianKind::Combinatorial);
    let x = random_signal(60, 1, 0);
    let cfg = L2gLayerConfig::unit(&other);
    assert!(matches!(apply_layer(&f, &cfg, &x), Err(Error::ConfigMismatch(_))));
    let mut cfg = L2gLayerConfig::unit(&f);
    cfg.nodes.pop();
    assert!(matches!(hierarchical_mix(&f, &cfg, &x), Err(Error::ConfigMismatch(_))));
    assert!(apply_layer(&f, &L2gLayerConfig::unit(&f), &random_signal(59, 1, 0)).is_err());
    let back = L2gLayerConfig::from_json(&L2gLayerConfig::unit(&f).to_json().unwrap()).unwrap();
    assert_eq!(back, L2gLayerConfig::unit(&f));
}

#[test]
fn sparsified_factorization_stays_close() {
    let g = barabasi_albert(200, 2, 12).unwrap();
    let exact_plan = build_plan(&g, &PartitionConfig::default()).unwrap();
    let exact = FactorizedGft::factorize(&g, &exact_plan.plan, LaplacianKind::Combinatorial).unwrap();
    let cfg = PartitionConfig {
        sparsify: SparsifyPolicy {
            mode: SparsifyMode::Always,
            target: SampleTarget::Fraction { rho: 0.5 },
            eps_jl: 0.5,
        },
        ..PartitionConfig::one_level()
    };
    let sparse_plan = build_plan(&g, &cfg).unwrap();
    let sparse =
        FactorizedGft::factorize(&sparse_plan.graph, &sparse_plan.plan, LaplacianKind::Combinatorial).unwrap();
    let x = random_signal(200, 3, 1);
    let a = apply_layer(&exact, &L2gLayerConfig::global(&exact, Filter::Power { degree: 1 }), &x).unwrap();
    let b = apply_layer(&sparse, &L2gLayerConfig::global(&sparse, Filter::Power { degree: 1 }), &x).unwrap();
    let deviation = rel(&b, &a);
    assert!(deviation.is_finite() && deviation <= 10.0, "{deviation}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unit_layer_identity_on_random_graphs(n in 5usize..120, seed in any::<u64>()) {
        let g = barabasi_albert(n, 2, seed).unwrap();
        let out = build_plan(&g, &PartitionConfig::default()).unwrap();
        let f = FactorizedGft::factorize(&g, &out.plan, LaplacianKind::Combinatorial).unwrap();
        let x = random_signal(n, 2, seed);
        let y = apply_layer(&f, &L2gLayerConfig::unit(&f), &x).unwrap();
        prop_assert!((&y - &x).abs().max() <= 1e-8);
    }

    #[test]
    fn normalized_banks_sum_to_one(size in 1usize..16, rbf in any::<bool>(), x in 0.0f64..=1.0) {
        let bank = if rbf { FilterBank::rbf(size) } else { FilterBank::spline(size) }.unwrap();
        let g = eval_bank(&bank, &[x]).unwrap();
        prop_assert!((g.row(0).sum() - 1.0).abs() <= 1e-9);
    }
}
