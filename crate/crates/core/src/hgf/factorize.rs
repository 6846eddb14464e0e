use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::plan::{HgfPlan, NodeKind};
use crate::error::{Error, Result};
use crate::graph::{node_scaling, Graph, LaplacianKind};
use crate::linalg::symmetric_eig;
use crate::secular::{rank_one_factor, CauchyFactor};

/// Largest `n` for which [`FactorizedGft::reconstruct_operator`] will
/// materialize a dense matrix.
pub const DENSE_LIMIT: usize = 2048;

/// Dense eigenbasis of one leaf; column `j` is the eigenvector for the
/// `j`-th leaf eigenvalue, rows follow plan positions `start..start + len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafBasis {
    pub node: usize,
    pub start: usize,
    pub len: usize,
    #[serde(with = "row_major")]
    pub vectors: DMatrix<f64>,
}

/// Factors produced while merging one tree node, as a range of the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceFactors {
    pub node: usize,
    pub start: usize,
    pub len: usize,
    pub first: usize,
    pub count: usize,
}

/// Graph Fourier transform stored as leaf bases plus one Cauchy factor per
/// bridge edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizedGft {
    pub version: u32,
    pub kind: LaplacianKind,
    pub n: usize,
    pub plan: HgfPlan,
    pub plan_hash: String,
    pub leaf_bases: Vec<LeafBasis>,
    pub history: Vec<CauchyFactor>,
    pub interfaces: Vec<InterfaceFactors>,
    /// Per tree node, the spectrum of its merged subgraph in the node's
    /// spectral coordinate order.
    pub level_lambdas: Vec<Vec<f64>>,
    pub lambda_final: Vec<f64>,
    /// Ascending eigenvalue index → spectral coordinate.
    pub spectral_order: Vec<usize>,
}

const FORMAT_VERSION: u32 = 1;

/// Spectral representations of `e_u` for bridge endpoints still awaiting
/// their merge, relative to the start of the tree node that currently
/// contains them.
#[derive(Default)]
struct Tracked {
    nodes: Vec<usize>,
    segments: Vec<Vec<f64>>,
}

impl FactorizedGft {
    pub fn factorize(g: &Graph, plan: &HgfPlan, kind: LaplacianKind) -> Result<Self> {
        plan.validate_for(g)?;
        let n = g.n();
        let pos = plan.positions()?;
        let scale = node_scaling(g, kind)?;

        let mut leaf_id = vec![usize::MAX; n];
        for (id, t) in plan.nodes.iter().enumerate() {
            if t.is_leaf() {
                for p in t.range() {
                    leaf_id[p] = id;
                }
            }
        }
        let mut leaf_edges: HashMap<usize, Vec<(usize, usize, f64)>> = HashMap::new();
        for e in g.edges() {
            let (pu, pv) = (pos[e.u], pos[e.v]);
            if leaf_id[pu] == leaf_id[pv] {
                leaf_edges.entry(leaf_id[pu]).or_default().push((pu, pv, e.w));
            }
        }
        let mut needed_until: Vec<Option<usize>> = vec![None; n];
        for (id, t) in plan.nodes.iter().enumerate() {
            for e in t.interface() {
                needed_until[e.u] = Some(needed_until[e.u].map_or(id, |x| x.max(id)));
                needed_until[e.v] = Some(needed_until[e.v].map_or(id, |x| x.max(id)));
            }
        }

        let mut lam = vec![0.0; n];
        let mut level_lambdas = vec![Vec::new(); plan.nodes.len()];
        let mut leaf_bases = Vec::new();
        let mut history = Vec::new();
        let mut interfaces = Vec::new();
        let mut tracked: Vec<Option<Tracked>> = (0..plan.nodes.len()).map(|_| None).collect();

        for (id, t) in plan.nodes.iter().enumerate() {
            let range = t.range();
            match &t.kind {
                NodeKind::Leaf => {
                    let mut m = DMatrix::zeros(t.len, t.len);
                    for &(pu, pv, w) in leaf_edges.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                        let (u, v) = (plan.order[pu], plan.order[pv]);
                        let (a, b) = (pu - t.start, pv - t.start);
                        let (su, sv) = (scale[u], scale[v]);
                        m[(a, a)] += w * su * su;
                        m[(b, b)] += w * sv * sv;
                        m[(a, b)] -= w * su * sv;
                        m[(b, a)] -= w * su * sv;
                    }
                    for (&u, &w) in g.self_loops() {
                        if range.contains(&pos[u]) {
                            let a = pos[u] - t.start;
                            m[(a, a)] += w * scale[u] * scale[u];
                        }
                    }
                    let eig = symmetric_eig(m)?;
                    lam[range.clone()].copy_from_slice(&eig.values);
                    let mut tr = Tracked::default();
                    for p in range.clone() {
                        let u = plan.order[p];
                        if needed_until[u].is_some() {
                            tr.nodes.push(u);
                            tr.segments
                                .push(eig.vectors.row(p - t.start).iter().copied().collect());
                        }
                    }
                    tracked[id] = Some(tr);
                    leaf_bases.push(LeafBasis {
                        node: id,
                        start: t.start,
                        len: t.len,
                        vectors: eig.vectors,
                    });
                }
                NodeKind::Merge { left, right, interface } => {
                    let mut tr = Tracked::default();
                    for &child in [left, right] {
                        let c = &plan.nodes[child];
                        let sub = tracked[child].take().expect("children precede parents");
                        let shift = c.start - t.start;
                        for (u, seg) in sub.nodes.into_iter().zip(sub.segments) {
                            let mut full = vec![0.0; t.len];
                            full[shift..shift + c.len].copy_from_slice(&seg);
                            tr.nodes.push(u);
                            tr.segments.push(full);
                        }
                    }
                    let index: HashMap<usize, usize> =
                        tr.nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
                    let mut zs: Vec<Vec<f64>> = interface
                        .iter()
                        .map(|e| {
                            let (a, b) = (&tr.segments[index[&e.u]], &tr.segments[index[&e.v]]);
                            let r = e.w.sqrt();
                            let (su, sv) = (r * scale[e.u], r * scale[e.v]);
                            a.iter().zip(b).map(|(x, y)| su * x - sv * y).collect()
                        })
                        .collect();
                    let keep: Vec<bool> = tr.nodes.iter().map(|&u| needed_until[u] != Some(id)).collect();
                    let mut it = keep.iter();
                    tr.nodes.retain(|_| *it.next().unwrap());
                    let mut it = keep.iter();
                    tr.segments.retain(|_| *it.next().unwrap());

                    let first = history.len();
                    for i in 0..zs.len() {
                        let (head, rest) = zs.split_at_mut(i + 1);
                        let f = rank_one_factor(&lam[range.clone()], &head[i], 1.0, None, n, t.start)?;
                        f.update_spectrum(&mut lam[range.clone()]);
                        let mut targets: Vec<&mut [f64]> = rest
                            .iter_mut()
                            .chain(tr.segments.iter_mut())
                            .map(Vec::as_mut_slice)
                            .collect();
                        f.apply_many(&mut targets, false);
                        history.push(f);
                    }
                    interfaces.push(InterfaceFactors {
                        node: id,
                        start: t.start,
                        len: t.len,
                        first,
                        count: history.len() - first,
                    });
                    tracked[id] = Some(tr);
                }
            }
            level_lambdas[id] = lam[range].to_vec();
        }

        let mut spectral_order: Vec<usize> = (0..n).collect();
        spectral_order.sort_by(|&a, &b| lam[a].total_cmp(&lam[b]));
        let lambda_final = spectral_order.iter().map(|&p| lam[p]).collect();
        Ok(FactorizedGft {
            version: FORMAT_VERSION,
            kind,
            n,
            plan: plan.clone(),
            plan_hash: plan.hash(),
            leaf_bases,
            history,
            interfaces,
            level_lambdas,
            lambda_final,
            spectral_order,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_rows(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.nrows(),
            });
        }
        Ok(())
    }

    /// Rows of `x` reordered into plan positions.
    pub(crate) fn to_positions(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, x.ncols(), |p, c| x[(self.plan.order[p], c)])
    }

    pub(crate) fn from_positions(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, y.ncols());
        for (p, &u) in self.plan.order.iter().enumerate() {
            out.row_mut(u).copy_from(&y.row(p));
        }
        out
    }

    pub(crate) fn to_ascending(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, y.ncols(), |i, c| y[(self.spectral_order[i], c)])
    }

    pub(crate) fn from_ascending(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, y.ncols());
        for (i, &p) in self.spectral_order.iter().enumerate() {
            out.row_mut(p).copy_from(&y.row(i));
        }
        out
    }

    pub(crate) fn apply_leaf(&self, leaf: &LeafBasis, y: &mut DMatrix<f64>, transpose: bool) {
        let block = y.rows(leaf.start, leaf.len).clone_owned();
        let out = if transpose {
            leaf.vectors.tr_mul(&block)
        } else {
            &leaf.vectors * block
        };
        y.rows_mut(leaf.start, leaf.len).copy_from(&out);
    }

    pub(crate) fn apply_interface(&self, itf: &InterfaceFactors, y: &mut DMatrix<f64>, transpose: bool) {
        let factors = &self.history[itf.first..itf.first + itf.count];
        if y.ncols() == 0 || self.n == 0 {
            return;
        }
        let n = self.n;
        let mut cols: Vec<&mut [f64]> = y
            .as_mut_slice()
            .chunks_mut(n)
            .map(|c| &mut c[itf.start..itf.start + itf.len])
            .collect();
        let mut run = |f: &CauchyFactor| {
            let off = f.offset - itf.start;
            let mut windows: Vec<&mut [f64]> =
                cols.iter_mut().map(|c| &mut c[off..off + f.dim]).collect();
            f.apply_many(&mut windows, transpose);
        };
        if transpose {
            factors.iter().rev().for_each(&mut run);
        } else {
            factors.iter().for_each(&mut run);
        }
    }

    /// Spectral coefficients `Uᵀ X`, rows in ascending eigenvalue order.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(x)?;
        let mut y = self.to_positions(x);
        for leaf in &self.leaf_bases {
            self.apply_leaf(leaf, &mut y, true);
        }
        for itf in &self.interfaces {
            self.apply_interface(itf, &mut y, false);
        }
        Ok(self.to_ascending(&y))
    }

    /// Synthesis `U Y` for `Y` with rows in ascending eigenvalue order.
    pub fn inverse(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(y)?;
        let mut z = self.from_ascending(y);
        for itf in self.interfaces.iter().rev() {
            self.apply_interface(itf, &mut z, true);
        }
        for leaf in &self.leaf_bases {
            self.apply_leaf(leaf, &mut z, false);
        }
        Ok(self.from_positions(&z))
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.forward(&DMatrix::from_column_slice(x.len(), 1, x))?;
        Ok(y.as_slice().to_vec())
    }

    pub fn inverse_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = self.inverse(&DMatrix::from_column_slice(y.len(), 1, y))?;
        Ok(x.as_slice().to_vec())
    }

    /// Dense eigenvector matrix `U`, columns in ascending eigenvalue order.
    pub fn dense_basis(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                n: self.n,
                limit: DENSE_LIMIT,
            });
        }
        self.inverse(&DMatrix::identity(self.n, self.n))
    }

    /// `U diag(multiplier) Uᵀ` as a dense matrix.
    pub fn reconstruct_operator(&self, multiplier: &[f64]) -> Result<DMatrix<f64>> {
        if multiplier.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: multiplier.len(),
            });
        }
        let u = self.dense_basis()?;
        let mut scaled = u.clone();
        for (j, &g) in multiplier.iter().enumerate() {
            scaled.column_mut(j).scale_mut(g);
        }
        let m = scaled * u.transpose();
        Ok((&m + m.transpose()) * 0.5)
    }

    /// Checks that every factor acts only inside the tree node whose
    /// interface produced it.
    pub fn check_locality(&self) -> Result<()> {
        for itf in &self.interfaces {
            let (left, right) = match &self.plan.nodes[itf.node].kind {
                NodeKind::Merge { left, right, .. } => (*left, *right),
                NodeKind::Leaf => return Err(Error::PlanMismatch("factors on a leaf".into())),
            };
            let span = self.plan.nodes[left].start..self.plan.nodes[right].start + self.plan.nodes[right].len;
            for f in &self.history[itf.first..itf.first + itf.count] {
                if f.offset != itf.start || f.dim != itf.len || f.global_dim != self.n {
                    return Err(Error::PlanMismatch(format!(
                        "factor window {}..{} differs from tree node {}",
                        f.offset,
                        f.offset + f.dim,
                        itf.node
                    )));
                }
                if f.support().iter().any(|p| !span.contains(p)) {
                    return Err(Error::PlanMismatch(format!(
                        "factor of tree node {} touches coordinates outside its subtrees",
                        itf.node
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: FactorizedGft = serde_json::from_str(s)?;
        if f.version != FORMAT_VERSION {
            return Err(Error::InvalidParams(format!(
                "unsupported factorization format version {}",
                f.version
            )));
        }
        if f.plan.hash() != f.plan_hash {
            return Err(Error::PlanMismatch("stored plan hash does not match plan".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data = m.transpose().as_slice().to_vec();
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let dense = Dense::deserialize(d)?;
        if dense.data.len() != dense.rows * dense.cols {
            return Err(serde::de::Error::custom("dense matrix data length mismatch"));
        }
        Ok(DMatrix::from_row_slice(dense.rows, dense.cols, &dense.data))
    }
}
