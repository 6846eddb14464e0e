//! Interface sparsification by effective-resistance sampling.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, Laplacian, SparseSym};
use crate::linalg::symmetric_eig;

/// Relative residual at which the Laplacian solves stop.
pub const CG_TOLERANCE: f64 = 1e-8;
/// Dense generalized-eigenvalue check is only attempted up to this size.
pub const DENSE_CHECK_LIMIT: usize = 300;
const CG_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceEstimate {
    pub values: Vec<f64>,
    pub projection_dim: usize,
    pub epsilon_jl: f64,
}

/// Number of random projections for `n` nodes: `max(20, ⌈24 ln n / ε²⌉)`.
pub fn projection_dim(n: usize, eps_jl: f64) -> usize {
    let k = (24.0 * (n.max(2) as f64).ln() / (eps_jl * eps_jl)).ceil() as usize;
    k.max(20)
}

fn edge_laplacian(g: &Graph) -> SparseSym {
    let mut trip = Vec::with_capacity(4 * g.num_edges());
    for e in g.edges() {
        trip.push((e.u, e.u, e.w));
        trip.push((e.v, e.v, e.w));
        trip.push((e.u, e.v, -e.w));
        trip.push((e.v, e.u, -e.w));
    }
    SparseSym::from_triplets(g.n(), trip)
}

fn remove_column_means(x: &mut [f64], n: usize, k: usize) {
    let mut mean = vec![0.0; k];
    for row in x.chunks(k) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in x.chunks_mut(k) {
        row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
}

/// Jacobi-preconditioned conjugate gradients on `k` right-hand sides at once
/// (row-major `n × k`), each column solving the singular but consistent
/// system `L x = b` in the complement of the constant vector.
fn block_cg(l: &SparseSym, b: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = l.n();
    let inv_diag: Vec<f64> = l.diagonal().iter().map(|&d| 1.0 / d).collect();
    let max_iter = 10 * n + 100;
    let mut r = b.to_vec();
    remove_column_means(&mut r, n, k);
    let b_norm: Vec<f64> = column_dots(&r, &r, k).into_iter().map(f64::sqrt).collect();
    let mut x = vec![0.0; n * k];
    let mut z = precondition(&r, &inv_diag, k);
    let mut p = z.clone();
    let mut rz = column_dots(&r, &z, k);
    let mut active: Vec<bool> = b_norm.iter().map(|&v| v > 0.0).collect();
    let mut ap = vec![0.0; n * k];
    for _ in 0..max_iter {
        if !active.iter().any(|&a| a) {
            remove_column_means(&mut x, n, k);
            return Ok(x);
        }
        for i in 0..n {
            let out = &mut ap[i * k..(i + 1) * k];
            out.iter_mut().for_each(|v| *v = 0.0);
            for (j, w) in l.row(i) {
                let src = &p[j * k..(j + 1) * k];
                out.iter_mut().zip(src).for_each(|(o, s)| *o += w * s);
            }
        }
        let pap = column_dots(&p, &ap, k);
        let alpha: Vec<f64> = (0..k)
            .map(|c| if active[c] && pap[c] > 0.0 { rz[c] / pap[c] } else { 0.0 })
            .collect();
        for i in 0..n {
            for c in 0..k {
                x[i * k + c] += alpha[c] * p[i * k + c];
                r[i * k + c] -= alpha[c] * ap[i * k + c];
            }
        }
        let r_norm: Vec<f64> = column_dots(&r, &r, k).into_iter().map(f64::sqrt).collect();
        for c in 0..k {
            if active[c] && (r_norm[c] <= CG_TOLERANCE * b_norm[c] || pap[c] <= 0.0) {
                active[c] = false;
            }
        }
        z = precondition(&r, &inv_diag, k);
        let rz_new = column_dots(&r, &z, k);
        for c in 0..k {
            let beta = if active[c] { rz_new[c] / rz[c] } else { 0.0 };
            for i in 0..n {
                p[i * k + c] = z[i * k + c] + beta * p[i * k + c];
            }
        }
        rz = rz_new;
    }
    let worst = column_dots(&r, &r, k)
        .into_iter()
        .zip(&b_norm)
        .map(|(rr, bn)| rr.sqrt() / bn.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Err(Error::SolverNotConverged {
        iterations: max_iter,
        residual: worst,
    })
}

fn precondition(r: &[f64], inv_diag: &[f64], k: usize) -> Vec<f64> {
    let n = inv_diag.len();
    let mut z: Vec<f64> = r
        .chunks(k)
        .zip(inv_diag)
        .flat_map(|(row, d)| row.iter().map(move |v| v * d))
        .collect();
    remove_column_means(&mut z, n, k);
    z
}

fn column_dots(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (ra, rb) in a.chunks(k).zip(b.chunks(k)) {
        for c in 0..k {
            out[c] += ra[c] * rb[c];
        }
    }
    out
}

/// Approximate effective resistances of `edges` (each an edge of `g`): a
/// random ±1/√k projection of the weighted incidence matrix is pushed
/// through Laplacian solves, and `R̃_e = ‖Z (e_u − e_v)‖²`.
pub fn estimate_resistances(
    g: &Graph,
    edges: &[Edge],
    eps_jl: f64,
    seed: u64,
) -> Result<ResistanceEstimate> {
    if !(eps_jl > 0.0 && eps_jl < 1.0) {
        return Err(Error::InvalidParams(format!("eps_jl must lie in (0, 1), got {eps_jl}")));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = g.n();
    for e in edges {
        if e.u >= n || e.v >= n || e.u == e.v {
            return Err(Error::InvalidParams(format!("edge ({}, {}) not in graph", e.u, e.v)));
        }
    }
    let k = projection_dim(n, eps_jl);
    let l = edge_laplacian(g);
    let scale = 1.0 / (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; edges.len()];
    let mut done = 0;
    while done < k {
        let kc = CG_BLOCK.min(k - done);
        let mut y = vec![0.0; n * kc];
        for c in 0..kc {
            for e in g.edges() {
                let q = if rng.random_bool(0.5) { scale } else { -scale } * e.w.sqrt();
                y[e.u * kc + c] += q;
                y[e.v * kc + c] -= q;
            }
        }
        let z = block_cg(&l, &y, kc)?;
        for (val, e) in values.iter_mut().zip(edges) {
            let (zu, zv) = (&z[e.u * kc..(e.u + 1) * kc], &z[e.v * kc..(e.v + 1) * kc]);
            *val += zu.iter().zip(zv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        done += kc;
    }
    Ok(ResistanceEstimate {
        values,
        projection_dim: k,
        epsilon_jl: eps_jl,
    })
}

/// How many samples an interface keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleTarget {
    /// `q = max(1, ⌈ρ·|interface|⌉)` draws with replacement.
    Fraction { rho: f64 },
    /// Draw until `k` distinct edges are held (all edges if `k ≥ |interface|`).
    Count { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifiedInterface {
    pub kept_edges: Vec<Edge>,
    pub original_count: usize,
    pub kept_fraction: f64,
    pub sample_count: usize,
}

/// Samples interface edges with replacement, `p_e ∝ w_e R̃_e`, each draw
/// contributing weight `w_e / (q p_e)`; repeated draws of an edge add up.
pub fn sparsify_interface(
    edges: &[Edge],
    resistances: &[f64],
    target: SampleTarget,
    seed: u64,
) -> Result<SparsifiedInterface> {
    if edges.is_empty() {
        return Err(Error::EmptyInterface);
    }
    if resistances.len() != edges.len() {
        return Err(Error::DimensionMismatch {
            expected: edges.len(),
            got: resistances.len(),
        });
    }
    if resistances.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParams("resistances must be positive".into()));
    }
    let m = edges.len();
    let importance: Vec<f64> = edges.iter().zip(resistances).map(|(e, r)| e.w * r).collect();
    let total: f64 = importance.iter().sum();
    let dist = WeightedIndex::new(&importance)
        .map_err(|e| Error::InvalidParams(format!("sampling weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let (q, kept_fraction) = match target {
        SampleTarget::Fraction { rho } => {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::InvalidParams(format!("keep fraction must lie in (0, 1], got {rho}")));
            }
            let q = ((rho * m as f64).ceil() as usize).max(1);
            for _ in 0..q {
                *counts.entry(dist.sample(&mut rng)).or_default() += 1;
            }
            (q, rho)
        }
        SampleTarget::Count { k } => {
            if k == 0 {
                return Err(Error::InvalidParams("interface target count must be positive".into()));
            }
            if k >= m {
                return Ok(SparsifiedInterface {
                    kept_edges: edges.to_vec(),
                    original_count: m,
                    kept_fraction: 1.0,
                    sample_count: 0,
                });
            }
            let mut q = 0;
            while counts.len() < k {
                *counts.entry(dist.sample(&mut rng)).or_default() += 1;
                q += 1;
            }
            (q, k as f64 / m as f64)
        }
    };
    let kept_edges = counts
        .into_iter()
        .map(|(i, c)| {
            let e = edges[i];
            let p = importance[i] / total;
            Edge::new(e.u, e.v, c as f64 * e.w / (q as f64 * p))
        })
        .collect();
    Ok(SparsifiedInterface {
        kept_edges,
        original_count: m,
        kept_fraction,
        sample_count: q,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBoundReport {
    /// Extremes of `xᵀL'x / xᵀLx` over the random trial vectors.
    pub sampled_min: f64,
    pub sampled_max: f64,
    /// Extreme generalized eigenvalues of `(L', L)` on the range of `L`,
    /// when the dense check ran.
    pub generalized: Option<(f64, f64)>,
    pub eps: f64,
    pub pass: bool,
}

impl SpectralBoundReport {
    /// Tightest known extremes: generalized eigenvalues when available.
    pub fn extremes(&self) -> (f64, f64) {
        self.generalized.unwrap_or((self.sampled_min, self.sampled_max))
    }
}

/// Compares the quadratic forms of two Laplacians on the same nodes.
pub fn verify_spectral_bound(
    l_orig: &Laplacian,
    l_sparse: &Laplacian,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<SpectralBoundReport> {
    let n = l_orig.n();
    if l_sparse.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l_sparse.n(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..trials {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let a: f64 = x.iter().zip(l_orig.matrix.mul_vec(&x)).map(|(p, q)| p * q).sum();
        let b: f64 = x.iter().zip(l_sparse.matrix.mul_vec(&x)).map(|(p, q)| p * q).sum();
        if a > 0.0 {
            lo = lo.min(b / a);
            hi = hi.max(b / a);
        }
    }
    let generalized = if n <= DENSE_CHECK_LIMIT && n > 1 {
        Some(generalized_extremes(&l_orig.to_dense(), &l_sparse.to_dense())?)
    } else {
        None
    };
    let (emin, emax) = generalized.unwrap_or((lo, hi));
    Ok(SpectralBoundReport {
        sampled_min: lo,
        sampled_max: hi,
        generalized,
        eps,
        pass: emin >= 1.0 - eps && emax <= 1.0 + eps,
    })
}

/// Extreme eigenvalues of `Λ^{-1/2} Uᵀ L' U Λ^{-1/2}` over the nonzero
/// spectrum `U Λ Uᵀ` of `L`.
fn generalized_extremes(l: &DMatrix<f64>, l_sparse: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = symmetric_eig(l.clone())?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > 1e-10 * top.max(1e-300))
        .collect();
    if keep.is_empty() {
        return Ok((1.0, 1.0));
    }
    let n = l.nrows();
    let basis = DMatrix::from_fn(n, keep.len(), |r, c| {
        eig.vectors[(r, keep[c])] / eig.values[keep[c]].sqrt()
    });
    let m = basis.transpose() * l_sparse * &basis;
    let inner = symmetric_eig((&m + m.transpose()) * 0.5)?;
    Ok((inner.values[0], *inner.values.last().unwrap()))
}
