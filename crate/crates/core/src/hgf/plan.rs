use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Recursive description of a merge tree, convenient for building plans by
/// hand or from a partitioner.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanTree {
    Leaf(Vec<usize>),
    Merge(Box<PlanTree>, Box<PlanTree>, Vec<Edge>),
}

impl PlanTree {
    pub fn merge(left: PlanTree, right: PlanTree, interface: Vec<Edge>) -> Self {
        PlanTree::Merge(Box::new(left), Box::new(right), interface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Leaf,
    Merge {
        left: usize,
        right: usize,
        interface: Vec<Edge>,
    },
}

/// One node of the merge tree. Its graph nodes occupy positions
/// `start..start + len` of the plan ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub start: usize,
    pub len: usize,
    pub depth: usize,
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }

    pub fn interface(&self) -> &[Edge] {
        match &self.kind {
            NodeKind::Leaf => &[],
            NodeKind::Merge { interface, .. } => interface,
        }
    }
}

/// Merge tree over a node ordering in which every tree node owns a
/// contiguous block of positions. Nodes are stored in post-order, so
/// children precede parents and the root is last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgfPlan {
    pub n: usize,
    /// Position → graph node.
    pub order: Vec<usize>,
    pub nodes: Vec<TreeNode>,
}

impl HgfPlan {
    pub fn single_leaf(n: usize) -> Self {
        HgfPlan::from_tree(n, PlanTree::Leaf((0..n).collect())).expect("trivial plan is valid")
    }

    /// Flattens `tree`, checking that leaves partition `0..n` and that every
    /// interface edge joins the two subtrees it is attached to. Interface
    /// edges are ordered by `(min endpoint, max endpoint)`.
    pub fn from_tree(n: usize, tree: PlanTree) -> Result<Self> {
        let mut plan = HgfPlan {
            n,
            order: Vec::with_capacity(n),
            nodes: Vec::new(),
        };
        plan.flatten(tree, 0)?;
        if plan.order.len() != n {
            return Err(Error::PlanMismatch(format!(
                "leaves cover {} nodes, graph has {n}",
                plan.order.len()
            )));
        }
        let pos = plan.positions()?;
        for node in &plan.nodes {
            if let NodeKind::Merge { left, right, interface } = &node.kind {
                let (l, r) = (plan.nodes[*left].range(), plan.nodes[*right].range());
                for e in interface {
                    let (pu, pv) = (pos[e.u], pos[e.v]);
                    let crosses = (l.contains(&pu) && r.contains(&pv))
                        || (r.contains(&pu) && l.contains(&pv));
                    if !crosses {
                        return Err(Error::PlanMismatch(format!(
                            "interface edge ({}, {}) does not join its subtrees",
                            e.u, e.v
                        )));
                    }
                }
            }
        }
        Ok(plan)
    }

    fn flatten(&mut self, tree: PlanTree, depth: usize) -> Result<usize> {
        let start = self.order.len();
        let kind = match tree {
            PlanTree::Leaf(nodes) => {
                if nodes.is_empty() {
                    return Err(Error::PlanMismatch("empty leaf".into()));
                }
                if let Some(&bad) = nodes.iter().find(|&&u| u >= self.n) {
                    return Err(Error::PlanMismatch(format!("leaf node {bad} out of range")));
                }
                self.order.extend(nodes);
                NodeKind::Leaf
            }
            PlanTree::Merge(l, r, mut interface) => {
                let left = self.flatten(*l, depth + 1)?;
                let right = self.flatten(*r, depth + 1)?;
                interface.sort_by(|a, b| a.key().cmp(&b.key()));
                NodeKind::Merge { left, right, interface }
            }
        };
        self.nodes.push(TreeNode {
            start,
            len: self.order.len() - start,
            depth,
            kind,
        });
        Ok(self.nodes.len() - 1)
    }

    /// Graph node → position; errors if the ordering is not a permutation.
    pub fn positions(&self) -> Result<Vec<usize>> {
        let mut pos = vec![usize::MAX; self.n];
        if self.order.len() != self.n {
            return Err(Error::PlanMismatch("ordering length differs from n".into()));
        }
        for (p, &u) in self.order.iter().enumerate() {
            if u >= self.n || pos[u] != usize::MAX {
                return Err(Error::PlanMismatch(format!("node {u} repeated or out of range")));
            }
            pos[u] = p;
        }
        Ok(pos)
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|t| t.is_leaf())
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Number of merge levels along the deepest root-to-leaf path.
    pub fn levels(&self) -> usize {
        self.nodes.iter().map(|t| t.depth).max().unwrap_or(0)
    }

    /// Largest interface size `k`.
    pub fn max_interface(&self) -> usize {
        self.nodes.iter().map(|t| t.interface().len()).max().unwrap_or(0)
    }

    pub fn num_bridges(&self) -> usize {
        self.nodes.iter().map(|t| t.interface().len()).sum()
    }

    /// Leaf index → graph nodes, in plan order.
    pub fn leaf_sets(&self) -> Vec<Vec<usize>> {
        self.leaves()
            .map(|t| self.order[t.range()].to_vec())
            .collect()
    }

    /// Checks that the plan is consistent with `g`: every edge lies inside a
    /// leaf or belongs to exactly one interface with the same weight.
    pub fn validate_for(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n {
            return Err(Error::PlanMismatch(format!(
                "plan has {} nodes, graph has {}",
                self.n,
                g.n()
            )));
        }
        let pos = self.positions()?;
        let mut leaf_of = vec![0usize; self.n];
        for (id, t) in self.nodes.iter().enumerate() {
            if t.is_leaf() {
                for p in t.range() {
                    leaf_of[p] = id;
                }
            }
        }
        let mut bridges: HashMap<(usize, usize), f64> = HashMap::new();
        for t in &self.nodes {
            for e in t.interface() {
                if bridges.insert(e.key(), e.w).is_some() {
                    return Err(Error::PlanMismatch(format!(
                        "edge ({}, {}) assigned to two interfaces",
                        e.u, e.v
                    )));
                }
            }
        }
        let mut seen = 0;
        for e in g.edges() {
            match bridges.get(&e.key()) {
                Some(&w) => {
                    if w != e.w {
                        return Err(Error::PlanMismatch(format!(
                            "edge ({}, {}) has weight {} in the graph but {w} in the plan",
                            e.u, e.v, e.w
                        )));
                    }
                    seen += 1;
                }
                None if leaf_of[pos[e.u]] != leaf_of[pos[e.v]] => {
                    return Err(Error::PlanMismatch(format!(
                        "edge ({}, {}) crosses leaves but is in no interface",
                        e.u, e.v
                    )));
                }
                None => {}
            }
        }
        if seen != bridges.len() {
            return Err(Error::PlanMismatch(
                "interface edge missing from the graph".into(),
            ));
        }
        Ok(())
    }

    /// Returns a copy with each interface replaced by `new_interfaces[node]`
    /// where present (used after sparsification).
    pub fn with_interfaces(&self, new_interfaces: &BTreeMap<usize, Vec<Edge>>) -> Result<Self> {
        let mut plan = self.clone();
        for (&id, edges) in new_interfaces {
            match plan.nodes.get_mut(id).map(|t| &mut t.kind) {
                Some(NodeKind::Merge { interface, .. }) => {
                    *interface = edges.clone();
                    interface.sort_by(|a, b| a.key().cmp(&b.key()));
                }
                _ => return Err(Error::PlanMismatch(format!("tree node {id} is not a merge"))),
            }
        }
        Ok(plan)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        hex(&Sha256::digest(&json))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: HgfPlan = serde_json::from_str(s)?;
        plan.positions()?;
        Ok(plan)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
