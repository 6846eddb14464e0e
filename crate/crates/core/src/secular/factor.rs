use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::deflate::{deflate, DeflationRecord, DeflationTolerances};
use super::solve::{solve_secular, SecularSolution};
use crate::error::{Error, Result};

/// Structured orthogonal transform produced by one rank-one update.
///
/// Acts on the `dim` coordinates starting at `offset` of a length
/// `global_dim` spectral vector. Within that window it applies the
/// deflation reflectors, then the orthogonal Cauchy-like block on the kept
/// coordinates; every other coordinate passes through untouched. Only
/// O(|kept|) numbers are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyFactor {
    pub global_dim: usize,
    pub offset: usize,
    pub dim: usize,
    pub deflation: DeflationRecord,
    pub solution: SecularSolution,
    /// Projection recomputed from the computed roots; makes the columns
    /// orthogonal to working precision even for clustered spectra.
    pub weights: Vec<f64>,
    /// Signed reciprocal column norms.
    pub column_scales: Vec<f64>,
}

impl CauchyFactor {
    pub fn identity(global_dim: usize, offset: usize, dim: usize) -> Self {
        CauchyFactor {
            global_dim,
            offset,
            dim,
            deflation: DeflationRecord {
                kept: Vec::new(),
                dropped_zero: (0..dim).collect(),
                rotated: Vec::new(),
                householder_blocks: Vec::new(),
                z_deflated: Vec::new(),
            },
            solution: SecularSolution {
                lambda_old: Vec::new(),
                lambda_new: Vec::new(),
                roots: Vec::new(),
                z: Vec::new(),
                rho: 0.0,
            },
            weights: Vec::new(),
            column_scales: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.deflation.kept.is_empty() && self.deflation.householder_blocks.is_empty()
    }

    /// Global indices of the coordinates the Cauchy block mixes, ascending.
    pub fn affected(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.deflation.kept.iter().map(|&i| i + self.offset).collect();
        out.sort_unstable();
        out
    }

    /// Global indices touched at all (Cauchy block plus reflector blocks).
    pub fn support(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .deflation
            .kept
            .iter()
            .chain(self.deflation.householder_blocks.iter().flat_map(|b| &b.indices))
            .map(|&i| i + self.offset)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Replaces the kept eigenvalues of a window-local spectrum by the roots.
    pub fn update_spectrum(&self, lambda_local: &mut [f64]) {
        for (j, &i) in self.deflation.kept.iter().enumerate() {
            lambda_local[i] = self.solution.lambda_new[j];
        }
    }

    /// Dense |kept|×|kept| orthogonal block; column `j` is the eigenvector
    /// of the deflated problem for root `j`.
    pub fn cauchy_block(&self) -> DMatrix<f64> {
        let k = self.deflation.kept.len();
        DMatrix::from_fn(k, k, |i, j| {
            self.weights[i] / self.solution.gap(i, j) * self.column_scales[j]
        })
    }

    /// Dense window-local realization `D` of the forward map.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::identity(self.dim, self.dim);
        if self.dim > 0 {
            let mut cols: Vec<&mut [f64]> = d.as_mut_slice().chunks_mut(self.dim).collect();
            self.apply_many(&mut cols, false);
        }
        d
    }

    /// Applies the factor in place to window-local data: `D y` when
    /// `transpose` is false, `Dᵀ y` otherwise.
    pub fn apply_local(&self, y: &mut [f64], transpose: bool) {
        self.apply_many(&mut [y], transpose);
    }

    /// Batched [`apply_local`](Self::apply_local); Cauchy entries are formed
    /// once and reused across all vectors.
    pub fn apply_many(&self, ys: &mut [&mut [f64]], transpose: bool) {
        let kept = &self.deflation.kept;
        let k = kept.len();
        let p = ys.len();
        if !transpose {
            for b in &self.deflation.householder_blocks {
                ys.iter_mut().for_each(|y| b.apply(y));
            }
        }
        if k > 0 && p > 0 {
            let gathered = DMatrix::from_fn(k, p, |i, v| ys[v][kept[i]]);
            let c = self.cauchy_block();
            let out = if transpose {
                c * gathered
            } else {
                c.tr_mul(&gathered)
            };
            for (v, y) in ys.iter_mut().enumerate() {
                for (i, &idx) in kept.iter().enumerate() {
                    y[idx] = out[(i, v)];
                }
            }
        }
        if transpose {
            for b in self.deflation.householder_blocks.iter().rev() {
                ys.iter_mut().for_each(|y| b.apply(y));
            }
        }
    }
}

/// Applies `f` (or its transpose) to a full-length vector.
pub fn apply_factor(f: &CauchyFactor, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
    if x.len() != f.global_dim {
        return Err(Error::DimensionMismatch {
            expected: f.global_dim,
            got: x.len(),
        });
    }
    let mut y = x.to_vec();
    f.apply_local(&mut y[f.offset..f.offset + f.dim], transpose);
    Ok(y)
}

/// Recomputes the projection from the computed roots so that the Cauchy
/// columns are numerically orthogonal: `ρ ẑ_i² = −Π_j (λ_i − μ_j) / Π_{k≠i} (λ_i − λ_k)`.
fn recompute_weights(sol: &SecularSolution) -> Vec<f64> {
    let k = sol.len();
    (0..k)
        .map(|i| {
            let li = sol.lambda_old[i];
            let mut w = -sol.gap(i, i);
            let mut exp2: i32 = 0;
            // Alternate factors from either side so the running product
            // stays near unit scale.
            let (mut left, mut right) = (i, i + 1);
            while left > 0 || right < k {
                if left > 0 {
                    left -= 1;
                    w *= sol.gap(i, left) / (li - sol.lambda_old[left]);
                }
                if right < k {
                    w *= sol.gap(i, right) / (li - sol.lambda_old[right]);
                    right += 1;
                }
                let a = w.abs();
                if !(1e-150..=1e150).contains(&a) && a != 0.0 {
                    let e = a.log2().floor() as i32;
                    w *= 2f64.powi(-e);
                    exp2 += e;
                }
            }
            let mag = (w / sol.rho).abs().sqrt() * 2f64.powf(exp2 as f64 / 2.0);
            mag.copysign(sol.z[i])
        })
        .collect()
}

/// Assembles the factor from a deflation record and its secular solution.
pub fn build_cauchy_factor(
    record: DeflationRecord,
    solution: SecularSolution,
    global_dim: usize,
    offset: usize,
) -> CauchyFactor {
    let dim = record.dim();
    let k = solution.len();
    if k == 0 {
        let mut f = CauchyFactor::identity(global_dim, offset, dim);
        f.deflation = record;
        return f;
    }
    let weights = if k == 1 {
        vec![solution.z[0]]
    } else {
        recompute_weights(&solution)
    };
    // First entry of every column is made positive. The root of column `j`
    // lies above λ_0, so its sign is −sign(ẑ_0) for all columns.
    let sign = -weights[0].signum();
    let column_scales = (0..k)
        .map(|j| {
            let norm = (0..k)
                .map(|i| {
                    let c = weights[i] / solution.gap(i, j);
                    c * c
                })
                .sum::<f64>()
                .sqrt();
            sign / norm
        })
        .collect();
    CauchyFactor {
        global_dim,
        offset,
        dim,
        deflation: record,
        solution,
        weights,
        column_scales,
    }
}

/// Deflates, solves, and builds the factor for `diag(λ) + ρ z zᵀ` on a
/// window of a spectral vector. `lambda` may be in any order.
pub fn rank_one_factor(
    lambda: &[f64],
    z: &[f64],
    rho: f64,
    tol: Option<DeflationTolerances>,
    global_dim: usize,
    offset: usize,
) -> Result<CauchyFactor> {
    if lambda.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            got: z.len(),
        });
    }
    let tol = tol.unwrap_or_else(|| DeflationTolerances::standard(lambda, z, rho));
    let record = deflate(lambda, z, tol);
    let kept_lambda: Vec<f64> = record.kept.iter().map(|&i| lambda[i]).collect();
    let solution = solve_secular(&kept_lambda, &record.z_deflated, rho)?;
    Ok(build_cauchy_factor(record, solution, global_dim, offset))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orth_err(m: &DMatrix<f64>) -> f64 {
        (m.transpose() * m - DMatrix::identity(m.ncols(), m.ncols())).norm()
    }

    #[test]
    fn identity_when_nothing_kept() {
        let f = rank_one_factor(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], 1.0, None, 3, 0).unwrap();
        assert!(f.is_identity());
        let x = [1.0, -2.0, 0.5];
        assert_eq!(apply_factor(&f, &x, false).unwrap(), x.to_vec());
    }

    #[test]
    fn two_by_two_matches_eigenvectors() {
        let f = rank_one_factor(&[1.0, 3.0], &[1.0, 1.0], 1.0, None, 2, 0).unwrap();
        let c = f.cauchy_block();
        assert!(orth_err(&c) < 1e-14);
        // Each column v satisfies (diag(1,3) + 11ᵀ) v = μ v.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]);
        for j in 0..2 {
            let v = c.column(j);
            let r = &a * v - v * f.solution.lambda_new[j];
            assert!(r.norm() < 1e-13);
            assert!(v[0] > 0.0);
        }
    }

    #[test]
    fn apply_to_unit_vector_gives_dense_column() {
        let f = rank_one_factor(&[1.0, 3.0], &[1.0, 1.0], 1.0, None, 4, 1).unwrap();
        let y = apply_factor(&f, &[0.0, 1.0, 0.0, 0.0], false).unwrap();
        let d = f.to_dense();
        assert_eq!(y[0], 0.0);
        assert_eq!(y[3], 0.0);
        assert!((y[1] - d[(0, 0)]).abs() < 1e-15 && (y[2] - d[(1, 0)]).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let f = CauchyFactor::identity(3, 0, 3);
        assert!(matches!(
            apply_factor(&f, &[1.0], false),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_with_deflation() {
        let lambda = [0.0, 0.0, 1.0, 2.0, 2.0, 5.0];
        let z = [0.3, -0.4, 0.0, 0.2, 0.7, -0.1];
        let f = rank_one_factor(&lambda, &z, 1.5, None, 6, 0).unwrap();
        assert_eq!(f.deflation.kept.len(), 3);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = apply_factor(&f, &x, false).unwrap();
        let back = apply_factor(&f, &y, true).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(orth_err(&f.to_dense()) < 1e-13);
    }
}
