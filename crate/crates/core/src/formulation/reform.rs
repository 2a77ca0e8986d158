//! Restricted programs over the per-branch variables `(τ, β)`.
//!
//! Both variants share the affine rows
//!
//! ```text
//! 0 ≤ τ_ij ≤ |z_ij|² ℓ̄_ij
//! v̲_i − v0 ≤ Σ_path(i) (τ − 2β) ≤ v̄_i − v0
//! p̲_i ≤ r_ij/|z_ij|² (τ_ij − β_ij) + Σ_k r_ki/|z_ki|² β_ki ≤ p̄_i      (likewise q with x)
//! ```
//!
//! and differ in the cone on each branch:
//!
//! * [`ReformVariant::PathVoltage`]: `(v0 + Σ_path (τ − 2β))·τ ≥ (τ − β)²`
//! * [`ReformVariant::VoltageFloor`]: `v̲_i·τ ≥ (τ − β)²`
//!
//! Each cone is a rotated block `(u, w, t)` tied to `τ, β` by equality rows.

use super::{branch_label, Dependents, ObjectiveSpec, ReformPoint};
use crate::network::Network;
use crate::program::{ConeKind, ConicProgram, ProgramBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReformVariant {
    /// Cone first entry is the path voltage `v0 + Σ_path (τ − 2β)`.
    PathVoltage,
    /// Cone first entry is the constant voltage floor `v̲_i`.
    VoltageFloor,
}

#[derive(Debug, Clone)]
pub struct ReformProgram {
    pub program: ConicProgram,
    pub variant: ReformVariant,
    tau: usize,
    beta: usize,
    n: usize,
    dependents: Dependents,
}

pub fn build_opf_socp1(net: &Network, obj: &ObjectiveSpec) -> ReformProgram {
    build(net, obj, ReformVariant::PathVoltage)
}

pub fn build_opf_socp2(net: &Network, obj: &ObjectiveSpec) -> ReformProgram {
    build(net, obj, ReformVariant::VoltageFloor)
}

fn build(net: &Network, obj: &ObjectiveSpec, variant: ReformVariant) -> ReformProgram {
    let n = net.num_nodes();
    let mut pb = ProgramBuilder::new();
    let mut cone = vec![0; n];
    for i in 1..=n {
        let tag = branch_label(net, i);
        cone[i - 1] = pb.add_block(
            ConeKind::RotatedSecondOrder,
            [format!("u_{tag}"), format!("w_{tag}"), format!("t_{tag}")],
        );
    }
    let tau = pb.add_block(ConeKind::Nonnegative, (1..=n).map(|i| format!("tau_{}", branch_label(net, i))));
    let beta = pb.add_block(ConeKind::Free, (1..=n).map(|i| format!("beta_{}", branch_label(net, i))));
    let t = |i: usize| tau + i - 1;
    let bt = |i: usize| beta + i - 1;

    // Σ_path(i) (τ − 2β) as coefficients
    let path_sum = |i: usize| -> Vec<(usize, f64)> {
        net.path_nodes(i).flat_map(|k| [(t(k), 1.0), (bt(k), -2.0)]).collect()
    };
    // r/|z|² (τ − β) + Σ_k r_k/|z_k|² β_k, or the same with x
    let injection = |i: usize, reactive: bool| -> Vec<(usize, f64)> {
        let w = |k: usize| {
            let b = net.branch(k);
            (if reactive { b.x } else { b.r }) / b.z_sq()
        };
        let mut row = vec![(t(i), w(i)), (bt(i), -w(i))];
        row.extend(net.kids(i).iter().map(|&k| (bt(k), w(k))));
        row
    };

    let mut dependents = Dependents::default();
    for i in 1..=n {
        let tag = branch_label(net, i);
        let (u, w, tt) = (cone[i - 1], cone[i - 1] + 1, cone[i - 1] + 2);
        let r = match variant {
            ReformVariant::PathVoltage => {
                let mut row = vec![(u, 1.0)];
                row.extend(path_sum(i).into_iter().map(|(j, a)| (j, -a)));
                pb.add_row(format!("link_u_{tag}"), &row, net.v0())
            }
            ReformVariant::VoltageFloor => pb.add_row(format!("link_u_{tag}"), &[(u, 1.0)], net.limits(i).v_min),
        };
        dependents.push(u, r);
        let r = pb.add_row(format!("link_w_{tag}"), &[(w, 1.0), (t(i), -1.0)], 0.0);
        dependents.push(w, r);
        let r = pb.add_row(format!("link_t_{tag}"), &[(tt, 1.0), (t(i), -1.0), (bt(i), 1.0)], 0.0);
        dependents.push(tt, r);
    }

    let mut two_sided = |pb: &mut ProgramBuilder, label: String, expr: Vec<(usize, f64)>, lo: Option<f64>, hi: f64| {
        if lo == Some(hi) {
            pb.add_row(format!("{label}_fix"), &expr, hi);
            return;
        }
        if let Some(lo) = lo {
            let s = pb.add_block(ConeKind::Nonnegative, [format!("s_{label}_min")]);
            let mut row = expr.clone();
            row.push((s, -1.0));
            let r = pb.add_row(format!("{label}_min"), &row, lo);
            dependents.push(s, r);
        }
        let s = pb.add_block(ConeKind::Nonnegative, [format!("s_{label}_max")]);
        let mut row = expr;
        row.push((s, 1.0));
        let r = pb.add_row(format!("{label}_max"), &row, hi);
        dependents.push(s, r);
    };
    for i in 1..=n {
        let b = net.branch(i);
        let lim = net.limits(i);
        let name = net.name(i);
        let v0 = net.v0();
        two_sided(&mut pb, format!("tau_{}", branch_label(net, i)), vec![(t(i), 1.0)], None, b.z_sq() * b.l_max);
        two_sided(&mut pb, format!("v_{name}"), path_sum(i), Some(lim.v_min - v0), lim.v_max - v0);
        two_sided(&mut pb, format!("p_{name}"), injection(i, false), Some(lim.p_min), lim.p_max);
        two_sided(&mut pb, format!("q_{name}"), injection(i, true), Some(lim.q_min), lim.q_max);
    }

    // objective through the substitution
    let c = obj.coefficients(net);
    let v0 = net.v0();
    pb.add_offset(c.v.iter().sum::<f64>() * v0);
    for i in 1..=n {
        let b = net.branch(i);
        pb.add_cost(t(i), c.l[i - 1] / b.z_sq());
        for (j, a) in injection(i, false) {
            pb.add_cost(j, c.p[i] * a);
        }
        for (j, a) in path_sum(i) {
            pb.add_cost(j, c.v[i] * a);
        }
    }
    for &k in net.kids(0) {
        let b = net.branch(k);
        pb.add_cost(bt(k), c.p[0] * b.r / b.z_sq());
    }

    ReformProgram {
        program: pb.build(),
        variant,
        tau,
        beta,
        n,
        dependents,
    }
}

impl ReformProgram {
    pub fn reform_point(&self, x: &[f64]) -> ReformPoint {
        ReformPoint {
            tau: x[self.tau..self.tau + self.n].to_vec(),
            beta: x[self.beta..self.beta + self.n].to_vec(),
        }
    }

    /// Conic vector for `(τ, β)` with cone links and slacks completed.
    pub fn point_to_x(&self, rp: &ReformPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        x[self.tau..self.tau + self.n].copy_from_slice(&rp.tau);
        x[self.beta..self.beta + self.n].copy_from_slice(&rp.beta);
        self.dependents.fill(&self.program, &mut x);
        x
    }

    /// Whether `(τ, β)` satisfies every row and cone within `tol`.
    pub fn contains(&self, rp: &ReformPoint, tol: f64) -> bool {
        self.program.check_point(&self.point_to_x(rp)).is_feasible(tol)
    }
}
