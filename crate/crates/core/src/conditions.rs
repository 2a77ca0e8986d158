//! Closed-form strong-duality conditions C1–C3 and constructive Slater points
//! for the voltage-floor restriction.
//!
//! A point of the restriction is parametrized by `μ ≥ 1` and per-branch
//! `λ`: `τ = |z|²ℓ̄/μ`, `β = λτ`. With
//!
//! ```text
//! δᵖ = 1 − λ + Σ_k λ_k r_k ℓ̄_k / (r ℓ̄)        δ^q likewise with x
//! ```
//!
//! the injection rows read `p̲ ≤ r ℓ̄ δᵖ / μ ≤ p̄`, and the cone holds strictly
//! once `(1 − λ)² |z|² ℓ̄ / μ < v̲`. Choosing `λ` leaves-first fixes the sign
//! of `δᵖ, δ^q` per branch; growing `μ` then closes every row.

use serde::{Deserialize, Serialize};

use crate::formulation::ReformPoint;
use crate::network::{Network, NodeId};

/// Relative strictness required of every cone margin.
pub const CONE_STRICTNESS: f64 = 1e-8;
/// Largest `μ` tried by the certificate search.
pub const MU_MAX: f64 = 1e12;
const MU_START: f64 = 10.0;
/// Absolute slack allowed on affine rows of the constructed point.
const AFFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    C1,
    C2,
    C3,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::C1 => "c1",
            Condition::C2 => "c2",
            Condition::C3 => "c3",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Condition::C1),
            "c2" => Ok(Condition::C2),
            "c3" => Ok(Condition::C3),
            _ => Err(format!("unknown condition '{s}' (expected c1, c2 or c3)")),
        }
    }
}

/// Sign patterns of C1 at one node, cases (i) to (iv).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct C1Cases {
    pub node: NodeId,
    pub cases: [bool; 4],
}

impl C1Cases {
    pub fn any(&self) -> bool {
        self.cases.iter().any(|&c| c)
    }
}

/// Ratio comparison between the branch of node `parent` and that of its child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioFlag {
    /// Node owning the parent-side branch `(i, j)`.
    pub parent: NodeId,
    /// Node owning the child branch `(k, i)`.
    pub child: NodeId,
    pub parent_ratio: f64,
    pub child_ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Node { node: NodeId, name: String },
    Pair { parent: NodeId, child: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub nodes: Vec<C1Cases>,
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// C2 or C3: ratio monotonicity plus per-node sign patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratios: Vec<RatioFlag>,
    /// Indexed by node id minus one.
    pub signs: Vec<bool>,
    pub holds: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1: C1Report,
    pub c2: RatioReport,
    pub c3: RatioReport,
}

impl ConditionReport {
    pub fn holds(&self, c: Condition) -> bool {
        match c {
            Condition::C1 => self.c1.holds,
            Condition::C2 => self.c2.holds,
            Condition::C3 => self.c3.holds,
        }
    }

    pub fn satisfied(&self) -> Vec<Condition> {
        [Condition::C1, Condition::C2, Condition::C3]
            .into_iter()
            .filter(|&c| self.holds(c))
            .collect()
    }
}

fn node_witness(net: &Network, node: NodeId) -> Witness {
    Witness::Node {
        node,
        name: net.name(node).to_string(),
    }
}

pub fn check_c1(net: &Network) -> C1Report {
    let nodes: Vec<C1Cases> = (1..=net.num_nodes())
        .map(|i| {
            let l = net.limits(i);
            let (pl, pu, ql, qu) = (l.p_min, l.p_max, l.q_min, l.q_max);
            C1Cases {
                node: i,
                cases: [
                    pl <= 0.0 && 0.0 <= pu && ql < 0.0 && 0.0 < qu,
                    pl < 0.0 && 0.0 < pu && ql <= 0.0 && 0.0 <= qu,
                    pl < 0.0 && 0.0 <= pu && ql < 0.0 && 0.0 <= qu,
                    pl <= 0.0 && 0.0 < pu && ql <= 0.0 && 0.0 < qu,
                ],
            }
        })
        .collect();
    let witness = nodes.iter().find(|c| !c.any()).map(|c| node_witness(net, c.node));
    C1Report {
        holds: witness.is_none(),
        nodes,
        witness,
    }
}

fn check_ratio(net: &Network, decreasing: bool, sign: impl Fn(f64, f64, f64, f64) -> bool) -> RatioReport {
    let mut ratios = Vec::new();
    for i in 1..=net.num_nodes() {
        let pr = net.branch(i).ratio();
        for &k in net.kids(i) {
            let cr = net.branch(k).ratio();
            ratios.push(RatioFlag {
                parent: i,
                child: k,
                parent_ratio: pr,
                child_ratio: cr,
                holds: if decreasing { pr >= cr } else { pr <= cr },
            });
        }
    }
    let signs: Vec<bool> = net
        .all_limits()
        .iter()
        .map(|l| sign(l.p_min, l.p_max, l.q_min, l.q_max))
        .collect();
    let witness = ratios
        .iter()
        .find(|f| !f.holds)
        .map(|f| Witness::Pair {
            parent: f.parent,
            child: f.child,
        })
        .or_else(|| signs.iter().position(|s| !s).map(|k| node_witness(net, k + 1)));
    RatioReport {
        holds: witness.is_none(),
        ratios,
        signs,
        witness,
    }
}

/// Non-increasing `r/x` away from the root; `p̲ < 0 ≤ p̄`, `q̲ ≤ 0 ≤ q̄`.
pub fn check_c2(net: &Network) -> RatioReport {
    check_ratio(net, true, |pl, pu, ql, qu| pl < 0.0 && 0.0 <= pu && ql <= 0.0 && 0.0 <= qu)
}

/// Non-decreasing `r/x` away from the root; `p̲ ≤ 0 ≤ p̄`, `q̲ < 0 ≤ q̄`.
pub fn check_c3(net: &Network) -> RatioReport {
    check_ratio(net, false, |pl, pu, ql, qu| pl <= 0.0 && 0.0 <= pu && ql < 0.0 && 0.0 <= qu)
}

pub fn check_conditions(net: &Network) -> ConditionReport {
    ConditionReport {
        c1: check_c1(net),
        c2: check_c2(net),
        c3: check_c3(net),
    }
}

/// How `λ` is picked on a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    DeltaPZero,
    DeltaQZero,
    /// `max(δᵖ, δ^q) ≤ 0`
    BothNonpos,
    /// `min(δᵖ, δ^q) ≥ 0`
    BothNonneg,
}

impl Target {
    /// Target matching the first C1 case that holds, in the order (iv), (iii), (ii), (i).
    pub fn for_c1_cases(cases: &[bool; 4]) -> Option<Target> {
        [
            (3, Target::BothNonneg),
            (2, Target::BothNonpos),
            (1, Target::DeltaQZero),
            (0, Target::DeltaPZero),
        ]
        .into_iter()
        .find(|&(k, _)| cases[k])
        .map(|(_, t)| t)
    }
}

/// Slack of each constraint of the restriction at a constructed point.
/// Interval slacks are `(value − lo, hi − value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `(v̲τ − (τ − β)²) / (v̲τ)` per branch.
    pub cone: Vec<f64>,
    pub tau: Vec<(f64, f64)>,
    pub voltage: Vec<(f64, f64)>,
    pub p: Vec<(f64, f64)>,
    pub q: Vec<(f64, f64)>,
}

impl Margins {
    pub fn min_cone(&self) -> f64 {
        self.cone.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_affine(&self) -> f64 {
        self.tau
            .iter()
            .chain(&self.voltage)
            .chain(&self.p)
            .chain(&self.q)
            .fold(f64::INFINITY, |m, &(a, b)| m.min(a).min(b))
    }

    pub fn is_strict(&self) -> bool {
        self.min_cone() > CONE_STRICTNESS && self.min_affine() >= -AFFINE_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterCertificate {
    pub mu: f64,
    /// Per branch, indexed by child node minus one.
    pub targets: Vec<Target>,
    pub lambda: Vec<f64>,
    pub delta_p: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub point: ReformPoint,
    pub margins: Margins,
}

/// Children sums `Σ_k λ_k r_k ℓ̄_k` and `Σ_k λ_k x_k ℓ̄_k` at node `i`.
fn child_sums(net: &Network, lambda: &[f64], i: NodeId) -> (f64, f64) {
    net.kids(i).iter().fold((0.0, 0.0), |(sp, sq), &k| {
        let b = net.branch(k);
        let w = lambda[k - 1] * b.l_max;
        (sp + w * b.r, sq + w * b.x)
    })
}

/// `λ` leaves-first for the per-branch targets.
pub fn solve_lambda(net: &Network, targets: &[Target]) -> Vec<f64> {
    assert_eq!(targets.len(), net.num_nodes());
    let mut lambda = vec![0.0; net.num_nodes()];
    for i in net.bottom_up() {
        let b = net.branch(i);
        let (sp, sq) = child_sums(net, &lambda, i);
        let zero_p = 1.0 + sp / (b.r * b.l_max);
        let zero_q = 1.0 + sq / (b.x * b.l_max);
        lambda[i - 1] = match targets[i - 1] {
            Target::DeltaPZero => zero_p,
            Target::DeltaQZero => zero_q,
            Target::BothNonpos => zero_p.max(zero_q),
            Target::BothNonneg => zero_p.min(zero_q),
        };
    }
    lambda
}

/// `(δᵖ, δ^q)` for every branch at the given `λ`.
pub fn deltas(net: &Network, lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (1..=net.num_nodes())
        .map(|i| {
            let b = net.branch(i);
            let (sp, sq) = child_sums(net, lambda, i);
            let base = 1.0 - lambda[i - 1];
            (base + sp / (b.r * b.l_max), base + sq / (b.x * b.l_max))
        })
        .unzip()
}

/// Margins of `(τ, β)` in the voltage-floor restriction.
pub fn restriction_margins(net: &Network, rp: &ReformPoint) -> Margins {
    let n = net.num_nodes();
    let mut m = Margins {
        cone: vec![0.0; n],
        tau: vec![(0.0, 0.0); n],
        voltage: vec![(0.0, 0.0); n],
        p: vec![(0.0, 0.0); n],
        q: vec![(0.0, 0.0); n],
    };
    // Σ_path (τ − 2β), accumulated root-down
    let mut drop = vec![0.0; n + 1];
    for &i in net.bfs_order().iter().skip(1) {
        drop[i] = drop[net.parent(i)] + rp.tau[i - 1] - 2.0 * rp.beta[i - 1];
    }
    for i in 1..=n {
        let k = i - 1;
        let b = net.branch(i);
        let l = net.limits(i);
        let (t, be) = (rp.tau[k], rp.beta[k]);
        let floor = l.v_min * t;
        m.cone[k] = (floor - (t - be) * (t - be)) / floor;
        m.tau[k] = (t, b.z_sq() * b.l_max - t);
        let v0 = net.v0();
        m.voltage[k] = (drop[i] - (l.v_min - v0), (l.v_max - v0) - drop[i]);
        let (mut p, mut q) = ((t - be) * b.r / b.z_sq(), (t - be) * b.x / b.z_sq());
        for &c in net.kids(i) {
            let bc = net.branch(c);
            p += rp.beta[c - 1] * bc.r / bc.z_sq();
            q += rp.beta[c - 1] * bc.x / bc.z_sq();
        }
        m.p[k] = (p - l.p_min, l.p_max - p);
        m.q[k] = (q - l.q_min, l.q_max - q);
    }
    m
}

/// The point for one `μ` and a per-branch target choice.
pub fn construct_slater_point_with(net: &Network, targets: &[Target], mu: f64) -> SlaterCertificate {
    assert!(mu >= 1.0, "μ must be at least 1");
    let lambda = solve_lambda(net, targets);
    let (delta_p, delta_q) = deltas(net, &lambda);
    let tau: Vec<f64> = net.branches().iter().map(|b| b.z_sq() * b.l_max / mu).collect();
    let beta: Vec<f64> = tau.iter().zip(&lambda).map(|(t, l)| l * t).collect();
    let point = ReformPoint { tau, beta };
    let margins = restriction_margins(net, &point);
    SlaterCertificate {
        mu,
        targets: targets.to_vec(),
        lambda,
        delta_p,
        delta_q,
        point,
        margins,
    }
}

/// The point for one `μ` with the same target on every branch.
pub fn construct_slater_point(net: &Network, target: Target, mu: f64) -> SlaterCertificate {
    construct_slater_point_with(net, &vec![target; net.num_nodes()], mu)
}

/// Per-branch targets for a condition, or `None` if it does not hold.
pub fn targets_for(net: &Network, report: &ConditionReport, condition: Condition) -> Option<Vec<Target>> {
    if !report.holds(condition) {
        return None;
    }
    let n = net.num_nodes();
    Some(match condition {
        Condition::C1 => report
            .c1
            .nodes
            .iter()
            .map(|c| Target::for_c1_cases(&c.cases).expect("C1 holds at every node"))
            .collect(),
        Condition::C2 => vec![Target::DeltaQZero; n],
        Condition::C3 => vec![Target::DeltaPZero; n],
    })
}

/// Doubles `μ` from 10 until the point is strictly feasible.
pub fn search_certificate(net: &Network, targets: &[Target]) -> Result<SlaterCertificate, SlaterCertificate> {
    let mut mu = MU_START;
    loop {
        let cert = construct_slater_point_with(net, targets, mu);
        if cert.margins.is_strict() {
            return Ok(cert);
        }
        if mu * 2.0 > MU_MAX {
            return Err(cert);
        }
        mu *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConditionsMet,
    /// A condition holds but no `μ` up to [`MU_MAX`] gave strict margins.
    SearchExhausted,
    ConditionsNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub verdict: Verdict,
    /// The condition the certificate was built from.
    pub condition: Option<Condition>,
    pub certificate: Option<SlaterCertificate>,
    /// Last point tried when the search ran out of `μ`.
    pub last_attempt: Option<SlaterCertificate>,
    pub report: ConditionReport,
}

/// Checks C1–C3 and, when one holds, builds a strictly feasible point of the
/// voltage-floor restriction. Conditions are tried in the order C1, C2, C3.
pub fn certify_strong_duality(net: &Network) -> Certification {
    certify_in_order(net, &[Condition::C1, Condition::C2, Condition::C3])
}

/// Like [`certify_strong_duality`] but only through `condition`.
pub fn certify_with(net: &Network, condition: Condition) -> Certification {
    certify_in_order(net, &[condition])
}

fn certify_in_order(net: &Network, order: &[Condition]) -> Certification {
    let report = check_conditions(net);
    let mut last_attempt = None;
    let mut tried = None;
    for &condition in order {
        let Some(targets) = targets_for(net, &report, condition) else { continue };
        tried.get_or_insert(condition);
        match search_certificate(net, &targets) {
            Ok(cert) => {
                return Certification {
                    verdict: Verdict::ConditionsMet,
                    condition: Some(condition),
                    certificate: Some(cert),
                    last_attempt: None,
                    report,
                }
            }
            Err(cert) => {
                log::warn!("no strict point for {condition} up to μ = {MU_MAX:e}");
                last_attempt.get_or_insert(cert);
            }
        }
    }
    Certification {
        verdict: if tried.is_some() {
            Verdict::SearchExhausted
        } else {
            Verdict::ConditionsNotMet
        },
        condition: tried,
        certificate: None,
        last_attempt,
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeLimits;

    fn limits(p: (f64, f64), q: (f64, f64)) -> NodeLimits {
        NodeLimits {
            v_min: 0.81,
            v_max: 1.21,
            p_min: p.0,
            p_max: p.1,
            q_min: q.0,
            q_max: q.1,
        }
    }

    fn chain(ratios: &[f64], lim: NodeLimits) -> Network {
        let n = ratios.len();
        let parents = (0..n).collect();
        let br = ratios.iter().map(|&k| (0.01 * k, 0.01, 2.0)).collect();
        Network::from_parts(1.0, vec![lim; n], parents, br).unwrap()
    }

    #[test]
    fn c1_case_patterns() {
        let net = chain(&[1.0], limits((-1.0, 1.0), (-1.0, 1.0)));
        assert_eq!(check_c1(&net).nodes[0].cases, [true; 4]);
        let net = chain(&[1.0], limits((0.0, 1.0), (0.0, 1.0)));
        let r = check_c1(&net);
        assert_eq!(r.nodes[0].cases, [false, false, false, true]);
        assert!(r.holds);
        let net = chain(&[1.0], limits((-0.5, -0.5), (-0.1, 0.0)));
        let r = check_c1(&net);
        assert!(!r.holds);
        assert_eq!(r.witness, Some(Witness::Node { node: 1, name: "1".into() }));
    }

    #[test]
    fn ratio_flags() {
        let lim = limits((-1.0, 1.0), (-1.0, 1.0));
        assert!(check_c2(&chain(&[1.0, 0.8, 0.6], lim)).holds);
        assert!(check_c2(&chain(&[0.7, 0.7, 0.7], lim)).holds);
        assert!(check_c3(&chain(&[0.6, 0.8, 1.0], lim)).holds);
        let r = check_c3(&chain(&[1.0, 0.8], lim));
        assert!(!r.holds);
        assert_eq!(r.witness, Some(Witness::Pair { parent: 1, child: 2 }));
        // star: no adjacent pairs
        let star = Network::from_parts(1.0, vec![lim; 3], vec![0, 0, 0], vec![(0.01, 0.02, 2.0), (0.05, 0.01, 2.0), (0.02, 0.02, 2.0)]).unwrap();
        assert!(check_c2(&star).ratios.is_empty());
        assert!(check_c2(&star).holds && check_c3(&star).holds);
        // c3 needs q̲ < 0
        assert!(!check_c3(&chain(&[0.5, 0.6], limits((-1.0, 1.0), (0.0, 1.0)))).holds);
    }

    #[test]
    fn lambda_by_hand() {
        let net = chain(&[1.0], limits((-1.0, 1.0), (-1.0, 1.0)));
        let c = construct_slater_point(&net, Target::DeltaPZero, 10.0);
        assert_eq!(c.lambda, vec![1.0]);
        // equal r·ℓ̄ on both branches
        let net = chain(&[1.0, 1.0], limits((-1.0, 1.0), (-1.0, 1.0)));
        let c = construct_slater_point(&net, Target::DeltaPZero, 10.0);
        assert_eq!(c.lambda, vec![2.0, 1.0]);
        assert!(c.delta_p.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn c2_network_certifies_with_delta_q_zero() {
        let net = chain(&[1.0, 0.8, 0.6], limits((-1.0, 0.0), (0.0, 0.0)));
        let cert = certify_strong_duality(&net);
        assert_eq!(cert.verdict, Verdict::ConditionsMet);
        assert_eq!(cert.condition, Some(Condition::C2));
        let c = cert.certificate.unwrap();
        assert!(c.targets.iter().all(|&t| t == Target::DeltaQZero));
        assert!(c.delta_q.iter().all(|d| d.abs() < 1e-12));
        assert!(c.delta_p.iter().all(|&d| d <= 1e-12));
        assert!(c.margins.min_cone() > CONE_STRICTNESS);
    }

    #[test]
    fn failing_network_is_not_certified() {
        let net = chain(&[1.0, 2.0], limits((-0.5, -0.5), (-0.1, 0.0)));
        let cert = certify_strong_duality(&net);
        assert_eq!(cert.verdict, Verdict::ConditionsNotMet);
        assert!(cert.certificate.is_none() && cert.condition.is_none());
    }

    #[test]
    fn tie_break_order() {
        assert_eq!(Target::for_c1_cases(&[true; 4]), Some(Target::BothNonneg));
        assert_eq!(Target::for_c1_cases(&[true, true, true, false]), Some(Target::BothNonpos));
        assert_eq!(Target::for_c1_cases(&[true, true, false, false]), Some(Target::DeltaQZero));
        assert_eq!(Target::for_c1_cases(&[true, false, false, false]), Some(Target::DeltaPZero));
        assert_eq!(Target::for_c1_cases(&[false; 4]), None);
    }

    #[test]
    fn report_serializes() {
        let net = chain(&[1.0, 0.8], limits((-1.0, 1.0), (-1.0, 1.0)));
        let cert = certify_strong_duality(&net);
        let s = serde_json::to_string(&cert).unwrap();
        let back: Certification = serde_json::from_str(&s).unwrap();
        assert_eq!(back.verdict, cert.verdict);
        assert_eq!(back.report, cert.report);
    }
}
