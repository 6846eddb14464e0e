//! Roots of `w(μ) = 1 + ρ Σ z_i² / (λ_i − μ)`, one per interleaving bracket.
//!
//! Each root is stored as an offset from one of the two poles bounding its
//! bracket, so differences `λ_i − μ_j` near a pole keep full relative
//! accuracy. Iteration fits a two-pole rational model of `w` (value and
//! slope on either side) and solves it in closed form; steps that leave the
//! current bracket fall back to bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RATIONAL_STEPS: usize = 100;
const MAX_TOTAL_STEPS: usize = MAX_RATIONAL_STEPS + 2200;

/// Root `μ = λ[origin] + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularRoot {
    pub origin: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularSolution {
    pub lambda_old: Vec<f64>,
    pub lambda_new: Vec<f64>,
    pub roots: Vec<SecularRoot>,
    pub z: Vec<f64>,
    pub rho: f64,
}

impl SecularSolution {
    pub fn len(&self) -> usize {
        self.lambda_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_old.is_empty()
    }

    /// `λ_i − μ_j`, computed relative to the root's anchoring pole.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        let r = self.roots[j];
        (self.lambda_old[i] - self.lambda_old[r.origin]) - r.offset
    }

    /// `w(μ_j)` evaluated through the shifted differences.
    pub fn residual(&self, j: usize) -> f64 {
        1.0 + self.rho
            * (0..self.len())
                .map(|i| self.z[i] * self.z[i] / self.gap(i, j))
                .sum::<f64>()
    }

    /// `1 + ρ Σ |z_i² / (λ_i − μ_j)|`, the scale against which the residual
    /// of root `j` is meaningful.
    pub fn residual_scale(&self, j: usize) -> f64 {
        1.0 + self.rho.abs()
            * (0..self.len())
                .map(|i| (self.z[i] * self.z[i] / self.gap(i, j)).abs())
                .sum::<f64>()
    }
}

/// Solves the secular equation for strictly ascending `lambda_old`, nonzero
/// `z`, and any sign of `rho` (negative updates are reflected onto the
/// positive case).
pub fn solve_secular(lambda_old: &[f64], z: &[f64], rho: f64) -> Result<SecularSolution> {
    let n = lambda_old.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.len(),
        });
    }
    if lambda_old.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParams(
            "secular solve needs strictly ascending eigenvalues".into(),
        ));
    }
    if z.iter().any(|&v| v == 0.0 || !v.is_finite()) || !rho.is_finite() {
        return Err(Error::InvalidParams(
            "secular solve needs finite, nonzero projections".into(),
        ));
    }
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let roots = if rho == 0.0 {
        (0..n)
            .map(|i| SecularRoot {
                origin: i,
                offset: 0.0,
            })
            .collect()
    } else if rho > 0.0 {
        solve_positive(lambda_old, &z2, rho)?
    } else {
        let d: Vec<f64> = lambda_old.iter().rev().map(|v| -v).collect();
        let zr: Vec<f64> = z2.iter().rev().copied().collect();
        let reflected = solve_positive(&d, &zr, -rho)?;
        (0..n)
            .map(|j| {
                let r = reflected[n - 1 - j];
                SecularRoot {
                    origin: n - 1 - r.origin,
                    offset: -r.offset,
                }
            })
            .collect()
    };
    let lambda_new = roots
        .iter()
        .map(|r: &SecularRoot| lambda_old[r.origin] + r.offset)
        .collect();
    Ok(SecularSolution {
        lambda_old: lambda_old.to_vec(),
        lambda_new,
        roots,
        z: z.to_vec(),
        rho,
    })
}

fn solve_positive(d: &[f64], z2: &[f64], rho: f64) -> Result<Vec<SecularRoot>> {
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![SecularRoot {
            origin: 0,
            offset: rho * z2[0],
        }]);
    }
    let znorm2: f64 = z2.iter().sum();
    (0..n).map(|j| solve_root(d, z2, rho, znorm2, j)).collect()
}

struct Eval {
    g: f64,
    psi: f64,
    dpsi: f64,
    phi: f64,
    dphi: f64,
    magnitude: f64,
}

/// `w/ρ` split at the pole pair: `ψ` sums indices `≤ split`, `φ` the rest.
fn evaluate(d: &[f64], z2: &[f64], rho_inv: f64, origin: usize, tau: f64, split: usize) -> Eval {
    let base = d[origin];
    let (mut psi, mut dpsi, mut phi, mut dphi) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..=split {
        let t = (d[i] - base) - tau;
        let term = z2[i] / t;
        psi += term;
        dpsi += term / t;
    }
    for i in split + 1..d.len() {
        let t = (d[i] - base) - tau;
        let term = z2[i] / t;
        phi += term;
        dphi += term / t;
    }
    Eval {
        g: rho_inv + psi + phi,
        psi,
        dpsi,
        phi,
        dphi,
        magnitude: rho_inv + phi.abs() + psi.abs(),
    }
}

fn solve_root(d: &[f64], z2: &[f64], rho: f64, znorm2: f64, j: usize) -> Result<SecularRoot> {
    let n = d.len();
    let rho_inv = 1.0 / rho;
    let eps = f64::EPSILON;
    // Poles used by the rational model, and the split between ψ and φ.
    let (p, q) = if j + 1 < n { (j, j + 1) } else { (n - 2, n - 1) };

    let (origin, mut lo, mut hi, mut tau) = if j + 1 < n {
        let gap = d[j + 1] - d[j];
        let mid = 0.5 * gap;
        let e = evaluate(d, z2, rho_inv, j, mid, p);
        if !e.g.is_finite() {
            return Err(Error::BracketFailure {
                index: j,
                detail: "non-finite value at bracket midpoint".into(),
            });
        }
        if e.g >= 0.0 {
            (j, 0.0, mid, mid)
        } else {
            let m = -(gap - mid);
            (j + 1, m, 0.0, m)
        }
    } else {
        let top = rho * znorm2;
        (n - 1, 0.0, top, top)
    };
    let delta_p = d[p] - d[origin];
    let delta_q = d[q] - d[origin];

    for step in 0..MAX_TOTAL_STEPS {
        let e = evaluate(d, z2, rho_inv, origin, tau, p);
        if !e.g.is_finite() {
            return Err(Error::BracketFailure {
                index: j,
                detail: format!("non-finite secular value at offset {tau:e}"),
            });
        }
        if e.g == 0.0 {
            break;
        }
        if e.g < 0.0 {
            lo = lo.max(tau);
        } else {
            hi = hi.min(tau);
        }
        let slope = e.dpsi + e.dphi;
        let tol = eps * (8.0 * e.magnitude + tau.abs() * slope);
        if e.g.abs() <= tol {
            break;
        }
        if hi - lo <= 2.0 * eps * lo.abs().max(hi.abs()) {
            break;
        }

        let mut next = f64::NAN;
        if step < MAX_RATIONAL_STEPS {
            let dp = delta_p - tau;
            let dq = delta_q - tau;
            let wp = e.dpsi * dp * dp;
            let wq = e.dphi * dq * dq;
            let c = rho_inv + (e.psi - wp / dp) + (e.phi - wq / dq);
            let a = c * (dp + dq) + wp + wq;
            let b = dp * dq * e.g;
            let mut eta = if c == 0.0 {
                b / a
            } else {
                let disc = (a * a - 4.0 * b * c).abs().sqrt();
                if a <= 0.0 {
                    (a - disc) / (2.0 * c)
                } else {
                    2.0 * b / (a + disc)
                }
            };
            if !(e.g * eta < 0.0) {
                eta = -e.g / slope;
            }
            next = tau + eta;
        }
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == tau {
            break;
        }
        tau = next;
        if step + 1 == MAX_TOTAL_STEPS {
            return Err(Error::BracketFailure {
                index: j,
                detail: "iteration budget exhausted".into(),
            });
        }
    }
    Ok(SecularRoot {
        origin,
        offset: tau,
    })
}
