//! Branch-flow OPF relaxation and its two `(τ, β)` restrictions as conic programs.
//!
//! Branch quantities are indexed by `child − 1` (the branch owned by a node),
//! node quantities by node id with index `0` the root.

mod cr;
mod reform;

pub use cr::{build_opf_cr, CrProgram};
pub use reform::{build_opf_socp1, build_opf_socp2, ReformProgram, ReformVariant};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::network::{Network, NetworkError, NodeId};
use crate::program::ConicProgram;

/// Affine objective over injections `p`, squared voltages `v` and squared
/// currents `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// `Σ r·ℓ` over all branches.
    TotalLoss,
    Linear(LinearObjective),
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec::TotalLoss
    }
}

/// Dense weights: `p` and `v` by node id (root included; the root voltage is
/// a constant), `l` by branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
}

impl LinearObjective {
    pub fn zeros(net: &Network) -> Self {
        let n = net.num_nodes();
        Self {
            p: vec![0.0; n + 1],
            v: vec![0.0; n + 1],
            l: vec![0.0; n],
        }
    }

    /// Parses `{"p": {"<node>": w, ...}, "v": {...}, "l": {"<child node>": w}}`.
    /// Missing sections default to zero.
    pub fn from_json(net: &Network, s: &str) -> Result<Self, NetworkError> {
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            p: HashMap<String, f64>,
            #[serde(default)]
            v: HashMap<String, f64>,
            #[serde(default)]
            l: HashMap<String, f64>,
        }
        let f: File = serde_json::from_str(s).map_err(|e| NetworkError::Parse(e.to_string()))?;
        let mut out = Self::zeros(net);
        let lookup = |name: &str| {
            net.node_by_name(name)
                .ok_or_else(|| NetworkError::Parse(format!("objective names unknown node `{name}`")))
        };
        for (k, w) in f.p {
            out.p[lookup(&k)?] = w;
        }
        for (k, w) in f.v {
            out.v[lookup(&k)?] = w;
        }
        for (k, w) in f.l {
            let i = lookup(&k)?;
            if i == 0 {
                return Err(NetworkError::Parse("the root owns no branch".into()));
            }
            out.l[i - 1] = w;
        }
        Ok(out)
    }
}

impl ObjectiveSpec {
    pub fn coefficients(&self, net: &Network) -> LinearObjective {
        match self {
            ObjectiveSpec::TotalLoss => {
                let mut c = LinearObjective::zeros(net);
                c.l = net.branches().iter().map(|b| b.r).collect();
                c
            }
            ObjectiveSpec::Linear(c) => {
                assert_eq!(c.p.len(), net.num_nodes() + 1, "objective sized for another network");
                c.clone()
            }
        }
    }

    pub fn evaluate(&self, net: &Network, pt: &PhysicalPoint) -> f64 {
        let c = self.coefficients(net);
        let mut f = 0.0;
        for i in 0..=net.num_nodes() {
            f += c.p[i] * pt.p[i] + c.v[i] * pt.v[i];
        }
        for k in 0..net.num_branches() {
            f += c.l[k] * pt.l[k];
        }
        f
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ObjectiveSpec::TotalLoss => "total_loss",
            ObjectiveSpec::Linear(_) => "linear",
        }
    }
}

/// Physical operating point. Branch vectors have one entry per branch; node
/// vectors have `n + 1` entries with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPoint {
    /// Active branch flow `P` leaving the child end towards the parent.
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    /// Squared current magnitude `ℓ`.
    pub l: Vec<f64>,
    /// Squared voltage magnitude; `v[0]` is the root reference.
    pub v: Vec<f64>,
    /// Net injections; `p[0]`, `q[0]` belong to the root.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PhysicalPoint {
    pub fn zeros(net: &Network) -> Self {
        let n = net.num_nodes();
        let mut v = vec![0.0; n + 1];
        v[0] = net.v0();
        Self {
            flow_p: vec![0.0; n],
            flow_q: vec![0.0; n],
            l: vec![0.0; n],
            v,
            p: vec![0.0; n + 1],
            q: vec![0.0; n + 1],
        }
    }
}

/// Per-branch reformulation variables: `τ ≥ 0` and `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformPoint {
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Maps `(τ, β)` to flows, currents, injections and voltages:
/// `S = z(τ − β)/|z|²`, `ℓ = τ/|z|²`, node injections from the branch
/// balance, and `v_i = v0 + Σ_path (τ − 2β)`.
pub fn reform_to_physical(net: &Network, rp: &ReformPoint) -> PhysicalPoint {
    let n = net.num_nodes();
    assert_eq!(rp.tau.len(), n);
    assert_eq!(rp.beta.len(), n);
    let mut pt = PhysicalPoint::zeros(net);
    for (k, b) in net.branches().iter().enumerate() {
        let zz = b.z_sq();
        let d = rp.tau[k] - rp.beta[k];
        pt.flow_p[k] = b.r * d / zz;
        pt.flow_q[k] = b.x * d / zz;
        pt.l[k] = rp.tau[k] / zz;
        // the branch term belongs to its child; the β term to its parent
        pt.p[b.child] += b.r * d / zz;
        pt.q[b.child] += b.x * d / zz;
        pt.p[b.parent] += b.r * rp.beta[k] / zz;
        pt.q[b.parent] += b.x * rp.beta[k] / zz;
    }
    for &i in net.bfs_order().iter().skip(1) {
        let k = i - 1;
        pt.v[i] = pt.v[net.parent(i)] + rp.tau[k] - 2.0 * rp.beta[k];
    }
    pt
}

/// Signed constraint residuals of a physical point.
///
/// Equality residuals are `lhs − rhs`. Bound entries are
/// `max(lo − x, x − hi)`, so they are `≤ 0` exactly when the bound holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Active/reactive branch balance at each non-root node.
    pub balance_p: Vec<f64>,
    pub balance_q: Vec<f64>,
    /// Root balance.
    pub root_p: f64,
    pub root_q: f64,
    /// Voltage drop along each branch.
    pub voltage_drop: Vec<f64>,
    pub current_bound: Vec<f64>,
    pub voltage_bound: Vec<f64>,
    pub p_bound: Vec<f64>,
    pub q_bound: Vec<f64>,
    /// `v_i ℓ − (P² + Q²)`, nonnegative when the relaxed cone holds.
    pub cone_slack: Vec<f64>,
    /// `|ℓ − (P² + Q²)/v_i|`; `None` where `v_i ≤ 0`.
    pub flow_gap: Vec<Option<f64>>,
}

impl ResidualReport {
    pub fn max_equality(&self) -> f64 {
        self.balance_p
            .iter()
            .chain(&self.balance_q)
            .chain(&self.voltage_drop)
            .chain([&self.root_p, &self.root_q])
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn max_bound_violation(&self) -> f64 {
        self.current_bound
            .iter()
            .chain(&self.voltage_bound)
            .chain(&self.p_bound)
            .chain(&self.q_bound)
            .fold(f64::NEG_INFINITY, |m, &r| m.max(r))
    }

    pub fn min_cone_slack(&self) -> f64 {
        self.cone_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest exactness gap, or `None` if any branch has `v_i ≤ 0`.
    pub fn max_flow_gap(&self) -> Option<f64> {
        self.flow_gap.iter().try_fold(0.0f64, |m, g| g.map(|g| m.max(g)))
    }

    /// Relaxation feasibility within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_equality() <= tol && self.max_bound_violation() <= tol && self.min_cone_slack() >= -tol
    }
}

fn interval_violation(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi)
}

pub fn residuals(net: &Network, pt: &PhysicalPoint) -> ResidualReport {
    let n = net.num_nodes();
    // Σ_k (S_ki − z ℓ_ki) arriving at each node from its children
    let mut arrive_p = vec![0.0; n + 1];
    let mut arrive_q = vec![0.0; n + 1];
    for (k, b) in net.branches().iter().enumerate() {
        arrive_p[b.parent] += pt.flow_p[k] - b.r * pt.l[k];
        arrive_q[b.parent] += pt.flow_q[k] - b.x * pt.l[k];
    }
    let mut rep = ResidualReport {
        balance_p: vec![0.0; n],
        balance_q: vec![0.0; n],
        root_p: pt.p[0] + arrive_p[0],
        root_q: pt.q[0] + arrive_q[0],
        voltage_drop: vec![0.0; n],
        current_bound: vec![0.0; n],
        voltage_bound: vec![0.0; n],
        p_bound: vec![0.0; n],
        q_bound: vec![0.0; n],
        cone_slack: vec![0.0; n],
        flow_gap: vec![None; n],
    };
    for (k, b) in net.branches().iter().enumerate() {
        let i = b.child;
        let lim = net.limits(i);
        let (fp, fq, l) = (pt.flow_p[k], pt.flow_q[k], pt.l[k]);
        let vi = pt.v[i];
        let vj = if b.parent == 0 { net.v0() } else { pt.v[b.parent] };
        rep.balance_p[k] = pt.p[i] - (fp - arrive_p[i]);
        rep.balance_q[k] = pt.q[i] - (fq - arrive_q[i]);
        rep.voltage_drop[k] = (vi - vj) - (2.0 * (b.r * fp + b.x * fq) - b.z_sq() * l);
        rep.current_bound[k] = interval_violation(l, 0.0, b.l_max);
        rep.voltage_bound[k] = interval_violation(vi, lim.v_min, lim.v_max);
        rep.p_bound[k] = interval_violation(pt.p[i], lim.p_min, lim.p_max);
        rep.q_bound[k] = interval_violation(pt.q[i], lim.q_min, lim.q_max);
        let s2 = fp * fp + fq * fq;
        rep.cone_slack[k] = vi * l - s2;
        rep.flow_gap[k] = (vi > 0.0).then(|| (l - s2 / vi).abs());
    }
    rep
}

/// Variables whose value follows from one equality row once every other
/// variable in that row is known (bound slacks, cone links).
#[derive(Debug, Clone, Default)]
pub(crate) struct Dependents(Vec<(usize, usize)>);

impl Dependents {
    pub(crate) fn push(&mut self, var: usize, row: usize) {
        self.0.push((var, row));
    }

    /// Completes `x` in place, in registration order.
    pub(crate) fn fill(&self, program: &ConicProgram, x: &mut [f64]) {
        let at = program.a.transpose();
        for &(var, row) in &self.0 {
            let mut acc = program.b[row];
            let mut coef = 0.0;
            for (j, a) in at.col(row) {
                if j == var {
                    coef = a;
                } else {
                    acc -= a * x[j];
                }
            }
            x[var] = acc / coef;
        }
    }
}

pub(crate) fn branch_label(net: &Network, i: NodeId) -> String {
    format!("{}_{}", net.name(i), net.name(net.parent(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeLimits;

    fn single() -> Network {
        let l = NodeLimits {
            v_min: 0.81,
            v_max: 1.21,
            p_min: -1.0,
            p_max: 1.0,
            q_min: -1.0,
            q_max: 1.0,
        };
        Network::from_parts(1.0, vec![l], vec![0], vec![(0.03, 0.04, 4.0)]).unwrap()
    }

    #[test]
    fn substitution_by_hand() {
        let net = single();
        let pt = reform_to_physical(
            &net,
            &ReformPoint {
                tau: vec![0.0025],
                beta: vec![0.0],
            },
        );
        assert!((pt.l[0] - 1.0).abs() < 1e-12);
        assert!((pt.flow_p[0] - 0.03).abs() < 1e-12);
        assert!((pt.flow_q[0] - 0.04).abs() < 1e-12);
    }

    #[test]
    fn tau_twice_beta_keeps_reference_voltage() {
        let net = Network::from_parts(
            1.0,
            vec![single().limits(1).to_owned(); 3],
            vec![0, 1, 1],
            vec![(0.01, 0.02, 4.0), (0.02, 0.01, 4.0), (0.03, 0.03, 4.0)],
        )
        .unwrap();
        let tau = vec![0.001, 0.002, 0.003];
        let beta = tau.iter().map(|t| t / 2.0).collect();
        let pt = reform_to_physical(&net, &ReformPoint { tau, beta });
        assert!(pt.v.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn balanced_leaf_has_zero_injection() {
        let net = single();
        let pt = reform_to_physical(
            &net,
            &ReformPoint {
                tau: vec![0.01],
                beta: vec![0.01],
            },
        );
        assert_eq!(pt.p[1], 0.0);
        assert_eq!(pt.q[1], 0.0);
    }

    #[test]
    fn zero_point_on_zero_load_network() {
        let l = NodeLimits::fixed(0.0, 0.0, 0.81, 1.21);
        let net = Network::from_parts(1.0, vec![l; 2], vec![0, 1], vec![(0.01, 0.02, 1.0); 2]).unwrap();
        let mut pt = PhysicalPoint::zeros(&net);
        pt.v.iter_mut().for_each(|v| *v = 1.0);
        let rep = residuals(&net, &pt);
        assert_eq!(rep.max_equality(), 0.0);
        assert_eq!(rep.min_cone_slack(), 0.0);
        assert_eq!(rep.max_flow_gap(), Some(0.0));
        assert!(rep.max_bound_violation() <= 0.0);
    }

    #[test]
    fn nonpositive_voltage_leaves_gap_undefined() {
        let net = single();
        let mut pt = PhysicalPoint::zeros(&net);
        pt.v[1] = 0.0;
        assert_eq!(residuals(&net, &pt).flow_gap[0], None);
        assert_eq!(residuals(&net, &pt).max_flow_gap(), None);
    }

    #[test]
    fn linear_objective_file() {
        let net = single();
        let obj = LinearObjective::from_json(&net, r#"{"p": {"0": -1.0}, "l": {"1": 2.0}}"#).unwrap();
        assert_eq!(obj.p, vec![-1.0, 0.0]);
        assert_eq!(obj.l, vec![2.0]);
        assert!(LinearObjective::from_json(&net, r#"{"v": {"nope": 1.0}}"#).is_err());
    }
}
