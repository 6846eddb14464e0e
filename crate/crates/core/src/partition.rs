//! Recursive spectral bisection into a merge plan, accepting a split only
//! when the modeled factorization cost drops.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_laplacian, Edge, Graph, LaplacianKind, SparseSym};
use crate::hgf::{HgfPlan, NodeKind, PlanTree};
use crate::linalg::symmetric_eig;
use crate::sparsify::{estimate_resistances, sparsify_interface, SampleTarget};

/// Subgraphs at most this large get their Fiedler vector from a dense solve.
const DENSE_FIEDLER_LIMIT: usize = 32;

/// `f(n) = eig_coeff·n³` for a dense leaf and `merge_coeff·n²·k` for a merge
/// of `n` nodes across `k` bridge edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub eig_coeff: f64,
    pub merge_coeff: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            eig_coeff: 1.0,
            merge_coeff: 1.0,
        }
    }
}

impl CostModel {
    pub fn eig_cost(&self, n: usize) -> f64 {
        self.eig_coeff * (n as f64).powi(3)
    }

    pub fn merge_cost(&self, n: usize, k: usize) -> f64 {
        self.merge_coeff * (n as f64).powi(2) * k as f64
    }

    /// `merge(n, k) + max(f(n_a), f(n_b)) < f(n)`.
    pub fn accepts(&self, n: usize, k: usize, n_a: usize, n_b: usize) -> bool {
        self.merge_cost(n, k) + self.eig_cost(n_a).max(self.eig_cost(n_b)) < self.eig_cost(n)
    }

    /// Modeled cost of executing `plan`: dense leaves plus every merge.
    pub fn plan_cost(&self, plan: &HgfPlan) -> f64 {
        plan.nodes
            .iter()
            .map(|t| match &t.kind {
                NodeKind::Leaf => self.eig_cost(t.len),
                NodeKind::Merge { interface, .. } => self.merge_cost(t.len, interface.len()),
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiedlerResult {
    pub vector: Vec<f64>,
    pub rayleigh: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; the vector is the best iterate.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiedlerOptions {
    pub max_iterations: usize,
    /// Residual threshold relative to the Gershgorin bound on `‖L‖`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for FiedlerOptions {
    fn default() -> Self {
        FiedlerOptions {
            max_iterations: 40,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

pub fn fiedler_vector(g: &Graph) -> Result<FiedlerResult> {
    fiedler_vector_with(g, FiedlerOptions::default())
}

/// Eigenvector of the second-smallest combinatorial Laplacian eigenvalue:
/// block-2 LOBPCG with a diagonal preconditioner, run orthogonally to the
/// constant vector. Sign is fixed so the largest-magnitude entry is positive.
pub fn fiedler_vector_with(g: &Graph, opts: FiedlerOptions) -> Result<FiedlerResult> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParams("Fiedler vector needs at least two nodes".into()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let no_loops = Graph::new(n, g.edges().to_vec(), Default::default())?;
    let l = build_laplacian(&no_loops, LaplacianKind::Combinatorial)?.matrix;
    let mut result = if n <= DENSE_FIEDLER_LIMIT {
        let eig = symmetric_eig(l.to_dense())?;
        FiedlerResult {
            vector: eig.vectors.column(1).iter().copied().collect(),
            rayleigh: eig.values[1],
            iterations: 0,
            converged: true,
        }
    } else {
        lobpcg(&l, opts)?
    };
    let pivot = result
        .vector
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if pivot < 0.0 {
        result.vector.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(result)
}

fn project_out_constant(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
}

/// Orthonormalizes the columns of `s` (two Gram–Schmidt passes), dropping
/// columns that are numerically dependent on earlier ones.
fn orthonormalize(s: DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for c in s.column_iter() {
        let mut v = c.clone_owned();
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &cols {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-10 * original {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

fn lobpcg(l: &SparseSym, opts: FiedlerOptions) -> Result<FiedlerResult> {
    let n = l.n();
    let block = 2;
    let diag = l.diagonal();
    let bound = 2.0 * diag.iter().copied().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    project_out_constant(&mut x);
    x = orthonormalize(x);
    let mut ax = l.mul_dense(&x);
    let small = x.transpose() * &ax;
    let ritz = symmetric_eig((&small + small.transpose()) * 0.5)?;
    x = &x * &ritz.vectors;
    ax = &ax * &ritz.vectors;
    let mut theta = ritz.values;
    let mut p: Option<DMatrix<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut r = ax.clone();
        for j in 0..x.ncols() {
            r.column_mut(j).axpy(-theta[j], &x.column(j), 1.0);
        }
        if r.column(0).norm() <= opts.tolerance * bound {
            converged = true;
            break;
        }
        iterations += 1;
        let mut w = r;
        for (i, d) in diag.iter().enumerate() {
            w.row_mut(i).scale_mut(1.0 / d);
        }
        let mut parts = vec![x.clone(), w];
        if let Some(p) = &p {
            parts.push(p.clone());
        }
        let width: usize = parts.iter().map(|m| m.ncols()).sum();
        let mut s = DMatrix::zeros(n, width);
        let mut at = 0;
        for m in &parts {
            s.columns_mut(at, m.ncols()).copy_from(m);
            at += m.ncols();
        }
        project_out_constant(&mut s);
        let s = orthonormalize(s);
        let as_ = l.mul_dense(&s);
        let small = s.transpose() * &as_;
        let ritz = symmetric_eig((&small + small.transpose()) * 0.5)?;
        let c = ritz.vectors.columns(0, block).clone_owned();
        let x_new = &s * &c;
        // The search direction is the part of the update outside span(X).
        let overlap = x.transpose() * &x_new;
        p = Some(&x_new - &x * overlap);
        ax = &as_ * &c;
        x = x_new;
        theta = ritz.values[..block].to_vec();
    }
    let v = x.column(0);
    let norm = v.norm();
    Ok(FiedlerResult {
        vector: v.iter().map(|a| a / norm).collect(),
        rayleigh: theta[0],
        iterations,
        converged,
    })
}

/// A two-way split of a (sub)graph's nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCandidate {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
    pub crossing_edges: Vec<Edge>,
    pub balance: f64,
    pub quantile: f64,
}

/// `n` evenly spaced quantiles over `[lo, hi]`.
pub fn quantile_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn default_quantiles() -> Vec<f64> {
    quantile_grid(0.45, 0.55, 11)
}

pub fn bisect(g: &Graph, quantiles: &[f64]) -> Result<CutCandidate> {
    let f = fiedler_vector(g)?;
    best_cut(g, &f.vector, quantiles)
}

/// Splits the nodes sorted by `score` at each quantile and keeps the cut
/// with fewest crossing edges, preferring balance near one half on ties.
pub fn best_cut(g: &Graph, score: &[f64], quantiles: &[f64]) -> Result<CutCandidate> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParams("cannot bisect fewer than two nodes".into()));
    }
    if quantiles.is_empty() {
        return Err(Error::InvalidParams("empty quantile grid".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &u) in order.iter().enumerate() {
        rank[u] = r;
    }
    let mut best: Option<(usize, f64, usize, f64)> = None;
    for &q in quantiles {
        let t = ((q * n as f64).round() as usize).clamp(1, n - 1);
        let crossing = g
            .edges()
            .iter()
            .filter(|e| (rank[e.u] < t) != (rank[e.v] < t))
            .count();
        let balance = t as f64 / n as f64;
        let better = match best {
            None => true,
            Some((c, b, _, _)) => {
                crossing < c || (crossing == c && (balance - 0.5).abs() < (b - 0.5).abs())
            }
        };
        if better {
            best = Some((crossing, balance, t, q));
        }
    }
    let (_, balance, t, quantile) = best.expect("nonempty quantile grid");
    let mut side_a = order[..t].to_vec();
    let mut side_b = order[t..].to_vec();
    side_a.sort_unstable();
    side_b.sort_unstable();
    let crossing_edges = g
        .edges()
        .iter()
        .filter(|e| (rank[e.u] < t) != (rank[e.v] < t))
        .copied()
        .collect();
    Ok(CutCandidate {
        side_a,
        side_b,
        crossing_edges,
        balance,
        quantile,
    })
}

/// When interface edges are resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SparsifyMode {
    #[default]
    None,
    /// Only when a split fails the cost test with its full interface.
    Fallback,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyPolicy {
    pub mode: SparsifyMode,
    pub target: SampleTarget,
    pub eps_jl: f64,
}

impl Default for SparsifyPolicy {
    fn default() -> Self {
        SparsifyPolicy {
            mode: SparsifyMode::None,
            target: SampleTarget::Fraction { rho: 0.5 },
            eps_jl: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub cost: CostModel,
    pub max_levels: Option<usize>,
    pub quantiles: Vec<f64>,
    pub sparsify: SparsifyPolicy,
    pub fiedler_iterations: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            cost: CostModel::default(),
            max_levels: None,
            quantiles: default_quantiles(),
            sparsify: SparsifyPolicy::default(),
            fiedler_iterations: FiedlerOptions::default().max_iterations,
            seed: 0,
        }
    }
}

impl PartitionConfig {
    /// Exactly `levels` rounds of bisection wherever a subgraph has at least
    /// two nodes, regardless of the cost model.
    pub fn fixed_levels(levels: usize) -> Self {
        PartitionConfig {
            cost: CostModel {
                eig_coeff: 1.0,
                merge_coeff: 0.0,
            },
            max_levels: Some(levels),
            ..Default::default()
        }
    }

    /// A single bisection into two subgraphs.
    pub fn one_level() -> Self {
        Self::fixed_levels(1)
    }
}

/// Outcome of one attempted bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub depth: usize,
    pub n: usize,
    pub crossing: usize,
    pub interface: usize,
    pub balance: f64,
    pub accepted: bool,
    pub sparsified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOutcome {
    pub plan: HgfPlan,
    /// Input graph with sparsified interfaces substituted.
    pub graph: Graph,
    pub splits: Vec<SplitRecord>,
}

/// Serialized plan with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub config: PartitionConfig,
    pub plan: HgfPlan,
    pub splits: Vec<SplitRecord>,
}

impl PlanDocument {
    pub fn new(config: &PartitionConfig, outcome: &PartitionOutcome) -> Self {
        PlanDocument {
            config: config.clone(),
            plan: outcome.plan.clone(),
            splits: outcome.splits.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PlanDocument = serde_json::from_str(s)?;
        doc.plan.positions()?;
        Ok(doc)
    }
}

struct Builder<'a> {
    g: &'a Graph,
    cfg: &'a PartitionConfig,
    splits: Vec<SplitRecord>,
    removed: Vec<(usize, usize)>,
    added: Vec<Edge>,
    counter: u64,
}

pub fn build_plan(g: &Graph, cfg: &PartitionConfig) -> Result<PartitionOutcome> {
    if g.n() == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    let mut b = Builder {
        g,
        cfg,
        splits: Vec::new(),
        removed: Vec::new(),
        added: Vec::new(),
        counter: 0,
    };
    let tree = b.split((0..g.n()).collect(), 0)?;
    let graph = if b.removed.is_empty() {
        g.clone()
    } else {
        g.with_replaced_edges(&b.removed, &b.added)?
    };
    let plan = HgfPlan::from_tree(g.n(), tree)?;
    Ok(PartitionOutcome {
        plan,
        graph,
        splits: b.splits,
    })
}

fn component_tree(mut parts: Vec<PlanTree>) -> PlanTree {
    if parts.len() == 1 {
        return parts.pop().unwrap();
    }
    let right = parts.split_off(parts.len() / 2);
    PlanTree::merge(component_tree(parts), component_tree(right), Vec::new())
}

impl Builder<'_> {
    fn next_seed(&mut self) -> u64 {
        self.counter += 1;
        self.cfg
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.counter)
    }

    fn split(&mut self, nodes: Vec<usize>, depth: usize) -> Result<PlanTree> {
        if nodes.len() < 2 || self.cfg.max_levels.is_some_and(|m| depth >= m) {
            return Ok(PlanTree::Leaf(nodes));
        }
        let sub = self.g.induced(&nodes);
        let comps = sub.components();
        if comps.len() > 1 {
            let mut parts = Vec::with_capacity(comps.len());
            for c in comps {
                let global: Vec<usize> = c.iter().map(|&i| nodes[i]).collect();
                parts.push(self.split(global, depth + 1)?);
            }
            return Ok(component_tree(parts));
        }
        let opts = FiedlerOptions {
            max_iterations: self.cfg.fiedler_iterations,
            seed: self.next_seed(),
            ..Default::default()
        };
        let fiedler = fiedler_vector_with(&sub, opts)?;
        let cut = best_cut(&sub, &fiedler.vector, &self.cfg.quantiles)?;
        let n = nodes.len();
        let (na, nb) = (cut.side_a.len(), cut.side_b.len());
        let crossing = cut.crossing_edges.len();
        let cost = &self.cfg.cost;
        let policy = self.cfg.sparsify;
        let mut interface = cut.crossing_edges.clone();
        let mut sparsified = false;
        let mut accepted = cost.accepts(n, crossing, na, nb);
        let try_sparsify = match policy.mode {
            SparsifyMode::None => false,
            SparsifyMode::Fallback => !accepted,
            SparsifyMode::Always => true,
        };
        if try_sparsify && !interface.is_empty() {
            let seed = self.next_seed();
            let res = estimate_resistances(&sub, &interface, policy.eps_jl, seed)?;
            let s = sparsify_interface(&interface, &res.values, policy.target, seed)?;
            if s.kept_edges != interface {
                interface = s.kept_edges;
                sparsified = true;
            }
            accepted = cost.accepts(n, interface.len(), na, nb);
        }
        self.splits.push(SplitRecord {
            depth,
            n,
            crossing,
            interface: interface.len(),
            balance: cut.balance,
            accepted,
            sparsified,
        });
        if !accepted {
            return Ok(PlanTree::Leaf(nodes));
        }
        let to_global = |e: &Edge| Edge::new(nodes[e.u], nodes[e.v], e.w);
        let global_interface: Vec<Edge> = interface.iter().map(to_global).collect();
        if sparsified {
            self.removed
                .extend(cut.crossing_edges.iter().map(|e| to_global(e).key()));
            self.added.extend(global_interface.iter().copied());
        }
        let side_a: Vec<usize> = cut.side_a.iter().map(|&i| nodes[i]).collect();
        let side_b: Vec<usize> = cut.side_b.iter().map(|&i| nodes[i]).collect();
        let left = self.split(side_a, depth + 1)?;
        let right = self.split(side_b, depth + 1)?;
        Ok(PlanTree::merge(left, right, global_interface))
    }
}
