use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    #[default]
    Combinatorial,
    Normalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "combinatorial" => Ok(LaplacianKind::Combinatorial),
            "normalized" => Ok(LaplacianKind::Normalized),
            other => Err(format!("unknown Laplacian kind `{other}`")),
        }
    }
}

/// Symmetric matrix in compressed sparse row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let y = self.mul_vec(&col);
            out.column_mut(j).copy_from_slice(&y);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub kind: LaplacianKind,
    pub matrix: SparseSym,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// Per-node scaling `s` such that the requested Laplacian is `S L S` with
/// `L` combinatorial. Identity for the combinatorial kind, `D^{-1/2}` for the
/// normalized one.
pub fn node_scaling(g: &Graph, kind: LaplacianKind) -> Result<Vec<f64>> {
    match kind {
        LaplacianKind::Combinatorial => Ok(vec![1.0; g.n()]),
        LaplacianKind::Normalized => g
            .degrees()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d.sqrt())
                } else {
                    Err(Error::ZeroDegreeNode(i))
                }
            })
            .collect(),
    }
}

/// L = D − W + V, or D^{-1/2} L D^{-1/2} for the normalized kind.
pub fn build_laplacian(g: &Graph, kind: LaplacianKind) -> Result<Laplacian> {
    let s = node_scaling(g, kind)?;
    let mut trip = Vec::with_capacity(4 * g.num_edges() + g.n());
    for e in g.edges() {
        trip.push((e.u, e.u, e.w * s[e.u] * s[e.u]));
        trip.push((e.v, e.v, e.w * s[e.v] * s[e.v]));
        trip.push((e.u, e.v, -e.w * s[e.u] * s[e.v]));
        trip.push((e.v, e.u, -e.w * s[e.u] * s[e.v]));
    }
    for (&i, &w) in g.self_loops() {
        trip.push((i, i, w * s[i] * s[i]));
    }
    Ok(Laplacian {
        kind,
        matrix: SparseSym::from_triplets(g.n(), trip),
    })
}

/// `rho · v vᵀ` with `v` holding at most two nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUpdate {
    pub v: Vec<(usize, f64)>,
    pub rho: f64,
}

impl RankOneUpdate {
    pub fn add_to(&self, m: &mut DMatrix<f64>) {
        for &(i, a) in &self.v {
            for &(j, b) in &self.v {
                m[(i, j)] += self.rho * a * b;
            }
        }
    }
}

/// One update per edge (`e_u − e_v`, `w`) followed by one per self-loop
/// (`e_i`, `v_ii`), in storage order.
pub fn edge_updates(g: &Graph) -> Vec<RankOneUpdate> {
    let mut out: Vec<RankOneUpdate> = g
        .edges()
        .iter()
        .map(|e| RankOneUpdate {
            v: vec![(e.u, 1.0), (e.v, -1.0)],
            rho: e.w,
        })
        .collect();
    out.extend(g.self_loops().iter().map(|(&i, &w)| RankOneUpdate {
        v: vec![(i, 1.0)],
        rho: w,
    }));
    out
}
