use serde::{Deserialize, Serialize};

/// Thresholds below which a projection entry counts as zero (`tol_z`) and
/// two eigenvalues count as equal (`tol_lambda`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflationTolerances {
    pub tol_z: f64,
    pub tol_lambda: f64,
}

impl DeflationTolerances {
    /// `8 ε (‖z‖√ρ + d)` and `8 ε (d + ρ‖z‖²)`, `d` the spectral diameter.
    pub fn standard(lambda: &[f64], z: &[f64], rho: f64) -> Self {
        let eps = f64::EPSILON;
        let (lo, hi) = lambda
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(l), hi.max(l))
            });
        let diameter = if lambda.is_empty() { 0.0 } else { hi - lo };
        let znorm2: f64 = z.iter().map(|v| v * v).sum();
        let rho = rho.abs();
        DeflationTolerances {
            tol_z: 8.0 * eps * (znorm2.sqrt() * rho.sqrt() + diameter),
            tol_lambda: 8.0 * eps * (diameter + rho * znorm2),
        }
    }
}

/// Householder reflector `H = I − 2 v vᵀ` (unit `v`) acting on `indices`,
/// mapping the block's projection onto `‖z_block‖ e_first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholderBlock {
    pub indices: Vec<usize>,
    pub reflector: Vec<f64>,
}

impl HouseholderBlock {
    /// `y[indices] ← H y[indices]`. H is symmetric and involutory, so this is
    /// also its transpose and inverse.
    pub fn apply(&self, y: &mut [f64]) {
        let dot: f64 = self
            .indices
            .iter()
            .zip(&self.reflector)
            .map(|(&i, &v)| y[i] * v)
            .sum();
        let s = 2.0 * dot;
        for (&i, &v) in self.indices.iter().zip(&self.reflector) {
            y[i] -= s * v;
        }
    }
}

/// Outcome of removing spectral directions the update cannot touch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationRecord {
    /// Affected indices, ordered by ascending eigenvalue.
    pub kept: Vec<usize>,
    /// Indices whose projection was already (numerically) zero.
    pub dropped_zero: Vec<usize>,
    /// Indices zeroed by a reflector inside a repeated-eigenvalue block.
    pub rotated: Vec<usize>,
    pub householder_blocks: Vec<HouseholderBlock>,
    /// Projection over `kept`; every entry exceeds `tol_z` in magnitude.
    pub z_deflated: Vec<f64>,
}

impl DeflationRecord {
    pub fn dim(&self) -> usize {
        self.kept.len() + self.dropped_zero.len() + self.rotated.len()
    }
}

/// Unit vector `v` with `(I − 2vvᵀ) z = ‖z‖ e_0`, or `None` when `z` already
/// has that form.
fn reflector_to_first(z: &[f64]) -> Option<Vec<f64>> {
    let tail: f64 = z[1..].iter().map(|x| x * x).sum();
    if tail == 0.0 && z[0] >= 0.0 {
        return None;
    }
    let alpha = (z[0] * z[0] + tail).sqrt();
    let mut v = z.to_vec();
    v[0] = if z[0] > 0.0 {
        -tail / (z[0] + alpha)
    } else {
        z[0] - alpha
    };
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Deflates the update `diag(λ) + ρ z zᵀ`.
///
/// Entries with `|z_i| ≤ tol_z` are dropped. Remaining indices whose
/// eigenvalues chain together within `tol_lambda` form a block; a reflector
/// concentrates the block's projection into its first index and the rest
/// are dropped. `lambda` need not be sorted.
pub fn deflate(lambda: &[f64], z: &[f64], tol: DeflationTolerances) -> DeflationRecord {
    assert_eq!(lambda.len(), z.len(), "lambda and z lengths differ");
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]).then(a.cmp(&b)));

    let mut dropped_zero = Vec::new();
    let mut live = Vec::with_capacity(order.len());
    for &i in &order {
        if z[i].abs() <= tol.tol_z {
            dropped_zero.push(i);
        } else {
            live.push(i);
        }
    }

    let mut kept = Vec::with_capacity(live.len());
    let mut z_deflated = Vec::with_capacity(live.len());
    let mut rotated = Vec::new();
    let mut householder_blocks = Vec::new();
    let mut start = 0;
    while start < live.len() {
        let mut end = start + 1;
        while end < live.len() && lambda[live[end]] - lambda[live[end - 1]] <= tol.tol_lambda {
            end += 1;
        }
        let block = &live[start..end];
        if block.len() == 1 {
            kept.push(block[0]);
            z_deflated.push(z[block[0]]);
        } else {
            let zb: Vec<f64> = block.iter().map(|&i| z[i]).collect();
            let norm = zb.iter().map(|x| x * x).sum::<f64>().sqrt();
            if let Some(v) = reflector_to_first(&zb) {
                householder_blocks.push(HouseholderBlock {
                    indices: block.to_vec(),
                    reflector: v,
                });
            }
            kept.push(block[0]);
            z_deflated.push(norm);
            rotated.extend_from_slice(&block[1..]);
        }
        start = end;
    }
    dropped_zero.sort_unstable();
    rotated.sort_unstable();
    DeflationRecord {
        kept,
        dropped_zero,
        rotated,
        householder_blocks,
        z_deflated,
    }
}
