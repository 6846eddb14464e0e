//! Weighted undirected graphs, their Laplacians, and the rank-one edge
//! decomposition L = Σ w (e_u − e_v)(e_u − e_v)ᵀ + Σ v_ii e_i e_iᵀ.

mod generate;
mod io;
mod laplacian;

pub use generate::barabasi_albert;
pub use io::{parse_graph, read_graph, write_graph};
pub use laplacian::{
    build_laplacian, edge_updates, node_scaling, Laplacian, LaplacianKind, RankOneUpdate,
    SparseSym,
};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, w: f64) -> Self {
        if u <= v {
            Edge { u, v, w }
        } else {
            Edge { u: v, v: u, w }
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

/// Undirected weighted graph with optional self-loops.
///
/// Edges are stored with `u < v`; self-loops live in a separate map so the
/// Laplacian can carry them on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    self_loops: BTreeMap<usize, f64>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<Edge>, self_loops: BTreeMap<usize, f64>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let e = Edge::new(e.u, e.v, e.w);
            if e.v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) is a self-loop; pass it as a self-loop weight",
                    e.u, e.v
                )));
            }
            if !(e.w.is_finite() && e.w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.u, e.v, e.w
                )));
            }
            if !seen.insert(e.key()) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.u, e.v
                )));
            }
            normalized.push(e);
        }
        for (&i, &w) in &self_loops {
            if i >= n {
                return Err(Error::InvalidGraph(format!("self-loop on node {i} out of range")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "self-loop on node {i} has negative weight {w}"
                )));
            }
        }
        Ok(Graph {
            n,
            edges: normalized,
            self_loops,
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            n,
            edges.iter().map(|&(u, v, w)| Edge::new(u, v, w)).collect(),
            BTreeMap::new(),
        )
    }

    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: Vec::new(),
            self_loops: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn self_loops(&self) -> &BTreeMap<usize, f64> {
        &self.self_loops
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Weighted degree from the adjacency only (self-loops excluded).
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        d
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        adj
    }

    /// Connected components, each sorted ascending, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(x) = stack.pop() {
                members.push(x);
                for &(y, _) in &adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = id;
                        stack.push(y);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `nodes`, relabelled to `0..nodes.len()` in the
    /// given order. Self-loops are carried over.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let mut local = vec![usize::MAX; self.n];
        for (i, &x) in nodes.iter().enumerate() {
            local[x] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| local[e.u] != usize::MAX && local[e.v] != usize::MAX)
            .map(|e| Edge::new(local[e.u], local[e.v], e.w))
            .collect();
        let self_loops = self
            .self_loops
            .iter()
            .filter(|(&i, _)| local[i] != usize::MAX)
            .map(|(&i, &w)| (local[i], w))
            .collect();
        Graph {
            n: nodes.len(),
            edges,
            self_loops,
        }
    }

    /// Copy of this graph with every edge in `remove` dropped and `add`
    /// inserted (weights of edges already present are summed).
    pub fn with_replaced_edges(&self, remove: &[(usize, usize)], add: &[Edge]) -> Result<Graph> {
        let drop: HashSet<(usize, usize)> = remove
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut order = Vec::new();
        for e in self.edges.iter().filter(|e| !drop.contains(&e.key())) {
            merged.insert(e.key(), e.w);
            order.push(e.key());
        }
        for a in add {
            let a = Edge::new(a.u, a.v, a.w);
            match merged.get_mut(&a.key()) {
                Some(w) => *w += a.w,
                None => {
                    merged.insert(a.key(), a.w);
                    order.push(a.key());
                }
            }
        }
        let edges = order
            .into_iter()
            .map(|(u, v)| Edge::new(u, v, merged[&(u, v)]))
            .collect();
        Graph::new(self.n, edges, self.self_loops.clone())
    }

    /// Edge set as a sorted list of `(u, v, w)` triples.
    pub fn sorted_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<_> = self.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}
