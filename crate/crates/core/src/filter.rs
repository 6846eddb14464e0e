//! Spectral filters evaluated through a factorized transform: basis banks,
//! the per-tree-node local-to-global mix, and full layer application.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianKind;
use crate::hgf::{FactorizedGft, NodeKind};

/// Slack allowed above the top of a filter's domain.
const DOMAIN_SLACK: f64 = 1e-6;

/// Basis functions on the normalized spectrum `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// B-splines of the given degree on a clamped knot vector; uniform
    /// interior knots unless `knots` (the full vector, length `size + degree + 1`)
    /// is supplied.
    Spline {
        size: usize,
        degree: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        knots: Option<Vec<f64>>,
    },
    /// Unit-height Gaussians `exp(-(λ-μ)² / (2σ²))`; σ defaults to the
    /// spacing between neighbouring centers.
    Rbf {
        centers: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        widths: Option<Vec<f64>>,
    },
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Spline { size, .. } => *size,
            Basis::Rbf { centers, .. } => centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            Basis::Spline { size, degree, knots } => {
                if *size == 0 || *size < degree + 1 {
                    return Err(Error::InvalidParams(format!(
                        "a degree-{degree} spline basis needs at least {} functions, got {size}",
                        degree + 1
                    )));
                }
                if let Some(k) = knots {
                    if k.len() != size + degree + 1 {
                        return Err(Error::InvalidParams(format!(
                            "expected {} knots, got {}",
                            size + degree + 1,
                            k.len()
                        )));
                    }
                    if k.windows(2).any(|w| w[1] < w[0]) || k[*degree] != 0.0 || k[*size] != 1.0 {
                        return Err(Error::InvalidParams(
                            "knots must be nondecreasing and span [0, 1]".into(),
                        ));
                    }
                }
            }
            Basis::Rbf { centers, widths } => {
                if centers.is_empty() {
                    return Err(Error::InvalidParams("rbf basis needs centers".into()));
                }
                if centers.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::InvalidParams("rbf centers must lie in [0, 1]".into()));
                }
                if let Some(w) = widths {
                    if w.len() != centers.len() || w.iter().any(|&s| !(s > 0.0)) {
                        return Err(Error::InvalidParams(
                            "rbf widths must be positive, one per center".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Basis values at a normalized eigenvalue, written into `out`.
    fn eval_into(&self, x: f64, out: &mut [f64]) {
        match self {
            Basis::Spline { size, degree, knots } => {
                let uniform;
                let t = match knots {
                    Some(k) => k.as_slice(),
                    None => {
                        uniform = clamped_uniform_knots(*size, *degree);
                        uniform.as_slice()
                    }
                };
                bspline_values(t, *degree, x, out);
            }
            Basis::Rbf { centers, widths } => {
                for (k, (o, &mu)) in out.iter_mut().zip(centers).enumerate() {
                    let s = match widths {
                        Some(w) => w[k],
                        None => default_width(centers, k),
                    };
                    *o = (-(x - mu).powi(2) / (2.0 * s * s)).exp();
                }
            }
        }
    }
}

fn default_width(centers: &[f64], k: usize) -> f64 {
    if centers.len() == 1 {
        return 1.0;
    }
    let left = k.checked_sub(1).map(|j| centers[k] - centers[j]);
    let right = centers.get(k + 1).map(|c| c - centers[k]);
    let s = match (left, right) {
        (Some(a), Some(b)) => 0.5 * (a.abs() + b.abs()),
        (Some(a), None) => a.abs(),
        (None, Some(b)) => b.abs(),
        (None, None) => 1.0,
    };
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn clamped_uniform_knots(size: usize, degree: usize) -> Vec<f64> {
    let spans = size - degree;
    let mut t = vec![0.0; degree + 1];
    t.extend((1..spans).map(|i| i as f64 / spans as f64));
    t.extend(std::iter::repeat_n(1.0, degree + 1));
    t
}

/// Cox–de Boor recursion for all `t.len() - degree - 1` basis functions.
/// The right end of the domain belongs to the last nonempty span.
fn bspline_values(t: &[f64], degree: usize, x: f64, out: &mut [f64]) {
    let size = t.len() - degree - 1;
    let hi = t[size];
    let x = x.clamp(t[degree], hi);
    let mut span = degree;
    while span + 1 < size && t[span + 1] <= x {
        span += 1;
    }
    // Degenerate (zero-length) spans at the right end fall back.
    while span > degree && t[span + 1] <= t[span] {
        span -= 1;
    }
    let mut n = vec![0.0; degree + 1];
    n[0] = 1.0;
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    for j in 1..=degree {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let tmp = if denom > 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    for (r, v) in n.into_iter().enumerate() {
        out[span - degree + r] = v;
    }
}

/// A set of filters sharing one basis: filter `f` is `Σ_k α[f][k] B_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    #[serde(flatten)]
    pub basis: Basis,
    pub coefficients: Vec<Vec<f64>>,
    /// Rescale so the filters sum to one at every eigenvalue.
    pub normalize: bool,
}

impl FilterBank {
    /// One filter per cubic B-spline, normalized.
    pub fn spline(size: usize) -> Result<Self> {
        let degree = 3.min(size.saturating_sub(1));
        Self::with_identity(Basis::Spline {
            size,
            degree,
            knots: None,
        })
    }

    /// One filter per Gaussian, centers evenly spread over `[0, 1]`, normalized.
    pub fn rbf(size: usize) -> Result<Self> {
        let centers = match size {
            0 => Vec::new(),
            1 => vec![0.5],
            _ => (0..size).map(|i| i as f64 / (size - 1) as f64).collect(),
        };
        Self::with_identity(Basis::Rbf {
            centers,
            widths: None,
        })
    }

    fn with_identity(basis: Basis) -> Result<Self> {
        let k = basis.len();
        let coefficients = (0..k)
            .map(|f| (0..k).map(|j| if j == f { 1.0 } else { 0.0 }).collect())
            .collect();
        let bank = FilterBank {
            basis,
            coefficients,
            normalize: true,
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn num_filters(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.coefficients.is_empty() {
            return Err(Error::InvalidParams("filter bank has no filters".into()));
        }
        let k = self.basis.len();
        if let Some(bad) = self.coefficients.iter().find(|c| c.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: bad.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bank: FilterBank = serde_json::from_str(s)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Filter responses at normalized eigenvalues in `[0, 1]`: entry `(i, f)` is
/// filter `f` at `lambdas[i]`.
pub fn eval_bank(bank: &FilterBank, lambdas: &[f64]) -> Result<DMatrix<f64>> {
    bank.validate()?;
    let nf = bank.num_filters();
    let mut basis = vec![0.0; bank.basis.len()];
    let mut out = DMatrix::zeros(lambdas.len(), nf);
    for (i, &x) in lambdas.iter().enumerate() {
        if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
            return Err(Error::Domain { value: x, max: 1.0 });
        }
        bank.basis.eval_into(x.clamp(0.0, 1.0), &mut basis);
        for (f, alpha) in bank.coefficients.iter().enumerate() {
            out[(i, f)] = alpha.iter().zip(&basis).map(|(a, b)| a * b).sum();
        }
        if bank.normalize {
            let total: f64 = out.row(i).sum();
            if total != 0.0 {
                out.row_mut(i).scale_mut(1.0 / total);
            } else {
                out.row_mut(i).fill(1.0 / nf as f64);
            }
        }
    }
    Ok(out)
}

/// A diagonal spectral multiplier. `Power` and `Heat` act on raw
/// eigenvalues; `Bank` and `LowPass` act on eigenvalues normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Filter {
    #[default]
    Unit,
    Power { degree: u32 },
    Heat { t: f64 },
    /// Keeps normalized eigenvalues strictly below `cutoff`.
    LowPass { cutoff: f64 },
    /// Channel `c` uses filter `c mod num_filters`.
    Bank { bank: FilterBank },
}

impl Filter {
    pub fn is_unit(&self) -> bool {
        matches!(self, Filter::Unit)
    }

    /// Responses for `channels` channels: entry `(i, c)` multiplies spectral
    /// coordinate `i` of channel `c`.
    pub fn response(&self, lambdas: &[f64], scale: f64, channels: usize) -> Result<DMatrix<f64>> {
        let m = lambdas.len();
        let per_lambda = |g: &dyn Fn(f64) -> f64| {
            let col: Vec<f64> = lambdas.iter().map(|&l| g(l)).collect();
            DMatrix::from_fn(m, channels, |i, _| col[i])
        };
        let normalized = || -> Result<Vec<f64>> {
            lambdas
                .iter()
                .map(|&l| {
                    let x = l / scale;
                    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
                        Err(Error::Domain { value: l, max: scale })
                    } else {
                        Ok(x.clamp(0.0, 1.0))
                    }
                })
                .collect()
        };
        Ok(match self {
            Filter::Unit => DMatrix::from_element(m, channels, 1.0),
            Filter::Power { degree } => per_lambda(&|l| l.powi(*degree as i32)),
            Filter::Heat { t } => per_lambda(&|l| (-t * l).exp()),
            Filter::LowPass { cutoff } => {
                let x = normalized()?;
                DMatrix::from_fn(m, channels, |i, _| if x[i] < *cutoff { 1.0 } else { 0.0 })
            }
            Filter::Bank { bank } => {
                let g = eval_bank(bank, &normalized()?)?;
                let nf = bank.num_filters();
                DMatrix::from_fn(m, channels, |i, c| g[(i, c % nf)])
            }
        })
    }
}

/// Filters for one layer: one per plan tree node (post-order, leaves
/// included) plus the global filter on the final spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2gLayerConfig {
    pub plan_hash: String,
    pub global: Filter,
    pub nodes: Vec<Filter>,
}

impl L2gLayerConfig {
    /// Every filter identically one.
    pub fn unit(f: &FactorizedGft) -> Self {
        L2gLayerConfig {
            plan_hash: f.plan_hash.clone(),
            global: Filter::Unit,
            nodes: vec![Filter::Unit; f.plan.nodes.len()],
        }
    }

    /// `global` on the final spectrum, unit filters inside the tree.
    pub fn global(f: &FactorizedGft, global: Filter) -> Self {
        L2gLayerConfig {
            global,
            ..Self::unit(f)
        }
    }

    pub fn with_node(mut self, node: usize, filter: Filter) -> Self {
        self.nodes[node] = filter;
        self
    }

    pub fn check(&self, f: &FactorizedGft) -> Result<()> {
        if self.plan_hash != f.plan_hash {
            return Err(Error::ConfigMismatch("layer config was built for a different plan".into()));
        }
        if self.nodes.len() != f.plan.nodes.len() {
            return Err(Error::ConfigMismatch(format!(
                "{} node filters for {} tree nodes",
                self.nodes.len(),
                f.plan.nodes.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Divisor that maps a spectrum into `[0, 1]`.
fn spectrum_scale(kind: LaplacianKind, lambdas: &[f64]) -> f64 {
    match kind {
        LaplacianKind::Normalized => 2.0,
        LaplacianKind::Combinatorial => {
            let top = lambdas.iter().copied().fold(0.0, f64::max);
            if top > 0.0 {
                top
            } else {
                1.0
            }
        }
    }
}

fn check_rows(f: &FactorizedGft, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: x.nrows(),
        });
    }
    Ok(())
}

/// Forward transform with the tree-node filter applied to each subgraph's
/// spectrum as soon as that subgraph is diagonalized. Rows of the result
/// are in ascending eigenvalue order, like [`FactorizedGft::forward`].
pub fn hierarchical_mix(
    f: &FactorizedGft,
    cfg: &L2gLayerConfig,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    cfg.check(f)?;
    check_rows(f, x)?;
    let channels = x.ncols();
    let leaves: HashMap<usize, usize> =
        f.leaf_bases.iter().enumerate().map(|(i, l)| (l.node, i)).collect();
    let merges: HashMap<usize, usize> =
        f.interfaces.iter().enumerate().map(|(i, m)| (m.node, i)).collect();
    let mut y = f.to_positions(x);
    for (id, t) in f.plan.nodes.iter().enumerate() {
        match t.kind {
            NodeKind::Leaf => {
                let leaf = &f.leaf_bases[leaves[&id]];
                f.apply_leaf(leaf, &mut y, true);
            }
            NodeKind::Merge { .. } => {
                if let Some(&i) = merges.get(&id) {
                    f.apply_interface(&f.interfaces[i], &mut y, false);
                }
            }
        }
        let filter = &cfg.nodes[id];
        if filter.is_unit() {
            continue;
        }
        let lam = &f.level_lambdas[id];
        let g = filter.response(lam, spectrum_scale(f.kind, lam), channels)?;
        let mut block = y.rows_mut(t.start, t.len);
        block.component_mul_assign(&g);
    }
    Ok(f.to_ascending(&y))
}

/// `U diag(g(λ)) · hierarchical_mix(X)`.
pub fn apply_layer(f: &FactorizedGft, cfg: &L2gLayerConfig, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut y = hierarchical_mix(f, cfg, x)?;
    if !cfg.global.is_unit() {
        let lam = &f.lambda_final;
        let g = cfg.global.response(lam, spectrum_scale(f.kind, lam), x.ncols())?;
        y.component_mul_assign(&g);
    }
    f.inverse(&y)
}

/// One explicit Euler step `X + step · layer(X) · W`.
pub fn euler_step(
    f: &FactorizedGft,
    cfg: &L2gLayerConfig,
    x: &DMatrix<f64>,
    weights: &DMatrix<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    if weights.nrows() != x.ncols() || weights.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: weights.nrows(),
        });
    }
    let layer = apply_layer(f, cfg, x)?;
    Ok(x + layer * weights * step)
}
