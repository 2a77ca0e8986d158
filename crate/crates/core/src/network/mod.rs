//! Rooted radial networks.
//!
//! Node `0` is always the root (substation). Every other node `i` owns the
//! single branch connecting it to its parent, stored at `branches()[i - 1]`.
//! All quantities are per-unit; voltages and current limits are squared
//! magnitudes.

mod io;

pub use io::{parse_network, BranchRecord, NetworkFile, NetworkSource, NodeRecord};

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub type NodeId = usize;

/// The line connecting `child` to its unique `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub child: NodeId,
    pub parent: NodeId,
    /// Resistance `r`.
    pub r: f64,
    /// Reactance `x`.
    pub x: f64,
    /// Upper bound on the squared current magnitude.
    pub l_max: f64,
}

impl Branch {
    /// `|z|² = r² + x²`
    pub fn z_sq(&self) -> f64 {
        self.r * self.r + self.x * self.x
    }

    pub fn ratio(&self) -> f64 {
        self.r / self.x
    }
}

/// Bounds on a non-root node: squared voltage and net power injection.
///
/// Injections are positive when power enters the network, so a load shows up
/// as negative `p_min`/`p_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLimits {
    pub v_min: f64,
    pub v_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl NodeLimits {
    /// A node with fixed injection `(p, q)` and the given voltage window.
    pub fn fixed(p: f64, q: f64, v_min: f64, v_max: f64) -> Self {
        Self {
            v_min,
            v_max,
            p_min: p,
            p_max: p,
            q_min: q,
            q_max: q,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ValidationError {
    #[error("reference voltage v0 = {0} must be positive and finite")]
    BadReference(f64),
    #[error("node `{0}` is declared more than once")]
    DuplicateNode(String),
    #[error("branch {child} -> {parent}: endpoint `{name}` is not a declared node or the root")]
    UnknownEndpoint { child: String, parent: String, name: String },
    #[error("branch at node `{0}` connects the node to itself")]
    SelfLoop(String),
    #[error("node `{0}` has more than one parent branch")]
    MultipleParents(String),
    #[error("no root: every branch parent is a declared node")]
    NoRoot,
    #[error("more than one root candidate: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("node `{0}` is disconnected: it has no parent branch")]
    Disconnected(String),
    #[error("node `{0}` lies on a cycle and is unreachable from the root")]
    Cycle(String),
    #[error("branch {child} -> {parent}: resistance and reactance must be positive (r = {r}, x = {x})")]
    NonPositiveImpedance { child: String, parent: String, r: f64, x: f64 },
    #[error("branch {child} -> {parent}: current limit must be positive (l_max = {l_max})")]
    NonPositiveCurrentLimit { child: String, parent: String, l_max: f64 },
    #[error("node `{node}`: voltage bounds must satisfy v_max > v0 > v_min > 0 (v_min = {v_min}, v0 = {v0}, v_max = {v_max})")]
    VoltageBounds { node: String, v_min: f64, v0: f64, v_max: f64 },
    #[error("node `{node}`: injection bounds are inverted ({what}_min = {lo} > {what}_max = {hi})")]
    InjectionBounds { node: String, what: &'static str, lo: f64, hi: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// A validated radial network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    v0: f64,
    names: Vec<String>,
    limits: Vec<NodeLimits>,
    branches: Vec<Branch>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
    bfs: Vec<NodeId>,
}

impl Network {
    /// Builds a network from dense ids: `limits[i - 1]` and `parents[i - 1]`
    /// describe node `i`, and `impedances[i - 1] = (r, x, l_max)` its branch.
    pub fn from_parts(
        v0: f64,
        limits: Vec<NodeLimits>,
        parents: Vec<NodeId>,
        impedances: Vec<(f64, f64, f64)>,
    ) -> Result<Self, ValidationError> {
        let n = limits.len();
        assert_eq!(parents.len(), n, "one parent per node");
        assert_eq!(impedances.len(), n, "one impedance per node");
        let names: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
        let branches = parents
            .iter()
            .zip(&impedances)
            .enumerate()
            .map(|(k, (&parent, &(r, x, l_max)))| Branch {
                child: k + 1,
                parent,
                r,
                x,
                l_max,
            })
            .collect();
        Self::assemble(v0, names, limits, branches)
    }

    /// Validates and indexes. `branches[i - 1].child` must equal `i`.
    pub(crate) fn assemble(
        v0: f64,
        names: Vec<String>,
        limits: Vec<NodeLimits>,
        branches: Vec<Branch>,
    ) -> Result<Self, ValidationError> {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(ValidationError::BadReference(v0));
        }
        let n = limits.len();
        debug_assert_eq!(names.len(), n + 1);
        debug_assert_eq!(branches.len(), n);
        let mut children = vec![Vec::new(); n + 1];
        for b in &branches {
            if b.parent > n {
                return Err(ValidationError::UnknownEndpoint {
                    child: names[b.child].clone(),
                    parent: b.parent.to_string(),
                    name: b.parent.to_string(),
                });
            }
            if b.parent == b.child {
                return Err(ValidationError::SelfLoop(names[b.child].clone()));
            }
            children[b.parent].push(b.child);
        }
        for b in &branches {
            let (child, parent) = (names[b.child].clone(), names[b.parent].clone());
            if !(b.r.is_finite() && b.x.is_finite() && b.l_max.is_finite()) {
                return Err(ValidationError::NonFinite(format!("branch {child} -> {parent}")));
            }
            if b.r <= 0.0 || b.x <= 0.0 {
                return Err(ValidationError::NonPositiveImpedance {
                    child,
                    parent,
                    r: b.r,
                    x: b.x,
                });
            }
            if b.l_max <= 0.0 {
                return Err(ValidationError::NonPositiveCurrentLimit {
                    child,
                    parent,
                    l_max: b.l_max,
                });
            }
        }
        for (k, l) in limits.iter().enumerate() {
            let node = names[k + 1].clone();
            let vals = [l.v_min, l.v_max, l.p_min, l.p_max, l.q_min, l.q_max];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ValidationError::NonFinite(format!("bounds of node {node}")));
            }
            if !(l.v_max > v0 && v0 > l.v_min && l.v_min > 0.0) {
                return Err(ValidationError::VoltageBounds {
                    node,
                    v_min: l.v_min,
                    v0,
                    v_max: l.v_max,
                });
            }
            if l.p_min > l.p_max {
                return Err(ValidationError::InjectionBounds {
                    node,
                    what: "p",
                    lo: l.p_min,
                    hi: l.p_max,
                });
            }
            if l.q_min > l.q_max {
                return Err(ValidationError::InjectionBounds {
                    node,
                    what: "q",
                    lo: l.q_min,
                    hi: l.q_max,
                });
            }
        }
        // Breadth-first cover from the root.
        let mut depth = vec![usize::MAX; n + 1];
        let mut bfs = Vec::with_capacity(n + 1);
        let mut queue = VecDeque::from([0usize]);
        depth[0] = 0;
        while let Some(u) = queue.pop_front() {
            bfs.push(u);
            for &k in &children[u] {
                if depth[k] == usize::MAX {
                    depth[k] = depth[u] + 1;
                    queue.push_back(k);
                }
            }
        }
        if let Some(i) = (1..=n).find(|&i| depth[i] == usize::MAX) {
            return Err(ValidationError::Cycle(names[i].clone()));
        }
        Ok(Self {
            v0,
            names,
            limits,
            branches,
            children,
            depth,
            bfs,
        })
    }

    /// Squared voltage magnitude at the root.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Number of non-root nodes (equal to the number of branches).
    pub fn num_nodes(&self) -> usize {
        self.limits.len()
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// The branch from non-root node `i` to its parent.
    pub fn branch(&self, i: NodeId) -> &Branch {
        &self.branches[i - 1]
    }

    pub fn parent(&self, i: NodeId) -> NodeId {
        self.branches[i - 1].parent
    }

    pub fn limits(&self, i: NodeId) -> &NodeLimits {
        &self.limits[i - 1]
    }

    pub fn all_limits(&self) -> &[NodeLimits] {
        &self.limits
    }

    pub fn name(&self, i: NodeId) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn depth(&self, i: NodeId) -> usize {
        self.depth[i]
    }

    /// Nodes in breadth-first order from the root (root first).
    pub fn bfs_order(&self) -> &[NodeId] {
        &self.bfs
    }

    /// Non-root nodes with every child before its parent (leaves first).
    pub fn bottom_up(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.bfs.iter().rev().copied().filter(|&i| i != 0)
    }

    fn check_node(&self, i: NodeId) -> Result<(), NetworkError> {
        if i > self.num_nodes() {
            Err(NetworkError::UnknownNode(i))
        } else {
            Ok(())
        }
    }

    /// Nodes `k` with a branch `(k, i)`; empty for leaves.
    pub fn children(&self, i: NodeId) -> Result<&[NodeId], NetworkError> {
        self.check_node(i)?;
        Ok(&self.children[i])
    }

    pub(crate) fn kids(&self, i: NodeId) -> &[NodeId] {
        &self.children[i]
    }

    /// The branches from `i` up to the root, child-first.
    pub fn path_to_root(&self, i: NodeId) -> Result<Vec<&Branch>, NetworkError> {
        if i == 0 {
            return Err(NetworkError::UnknownNode(i));
        }
        self.check_node(i)?;
        Ok(self.path_nodes(i).map(|k| self.branch(k)).collect())
    }

    /// Child endpoints of the branches on the path from `i` to the root.
    pub(crate) fn path_nodes(&self, i: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let mut cur = i;
        std::iter::from_fn(move || {
            if cur == 0 {
                None
            } else {
                let k = cur;
                cur = self.parent(k);
                Some(k)
            }
        })
    }

    pub(crate) fn rename(&mut self, f: impl Fn(usize) -> String) {
        for (i, name) in self.names.iter_mut().enumerate() {
            *name = f(i);
        }
    }

    /// Copy with replaced node limits, re-validated.
    pub fn with_limits(&self, limits: Vec<NodeLimits>) -> Result<Self, ValidationError> {
        assert_eq!(limits.len(), self.num_nodes());
        Self::assemble(self.v0, self.names.clone(), limits, self.branches.clone())
    }

    /// Copy with replaced branches (same topology), re-validated.
    pub fn with_branches(&self, branches: Vec<Branch>) -> Result<Self, ValidationError> {
        assert_eq!(branches.len(), self.num_branches());
        for (k, b) in branches.iter().enumerate() {
            assert_eq!(b.child, k + 1);
            assert_eq!(b.parent, self.branches[k].parent, "topology must not change");
        }
        Self::assemble(self.v0, self.names.clone(), self.limits.clone(), branches)
    }
}
