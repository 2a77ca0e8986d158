//! The relaxed branch-flow OPF as a standard-form conic program.

use super::{branch_label, Dependents, ObjectiveSpec, PhysicalPoint};
use crate::network::Network;
use crate::program::{ConeKind, ConicProgram, ProgramBuilder};

/// Relaxed OPF program plus the variable layout needed to move between
/// conic vectors and physical points.
///
/// Per branch `(i, j)` the rotated block is `(v_i, ℓ_ij, P_ij, Q_ij)`, i.e.
/// `v_i·ℓ_ij ≥ P_ij² + Q_ij²`. Injections are free variables; every finite
/// box uses a pair of nonnegative slacks, and an equal-bound box becomes a
/// single fixing row.
#[derive(Debug, Clone)]
pub struct CrProgram {
    pub program: ConicProgram,
    cone_start: Vec<usize>,
    p_var: Vec<usize>,
    q_var: Vec<usize>,
    dependents: Dependents,
}

pub fn build_opf_cr(net: &Network, obj: &ObjectiveSpec) -> CrProgram {
    let n = net.num_nodes();
    let mut pb = ProgramBuilder::new();

    let mut cone_start = vec![0; n];
    for i in 1..=n {
        let tag = branch_label(net, i);
        cone_start[i - 1] = pb.add_block(
            ConeKind::RotatedSecondOrder,
            [
                format!("v_{}", net.name(i)),
                format!("l_{tag}"),
                format!("P_{tag}"),
                format!("Q_{tag}"),
            ],
        );
    }
    let v = |i: usize| cone_start[i - 1];
    let l = |i: usize| cone_start[i - 1] + 1;
    let fp = |i: usize| cone_start[i - 1] + 2;
    let fq = |i: usize| cone_start[i - 1] + 3;

    let names = (0..=n)
        .map(|i| format!("p_{}", net.name(i)))
        .chain((0..=n).map(|i| format!("q_{}", net.name(i))));
    let free = pb.add_block(ConeKind::Free, names);
    let p_var: Vec<usize> = (0..=n).map(|i| free + i).collect();
    let q_var: Vec<usize> = (0..=n).map(|i| free + n + 1 + i).collect();

    // branch balance at every node, including the root
    for i in 0..=n {
        let name = net.name(i);
        let mut row_p = vec![(p_var[i], 1.0)];
        let mut row_q = vec![(q_var[i], 1.0)];
        if i > 0 {
            row_p.push((fp(i), -1.0));
            row_q.push((fq(i), -1.0));
        }
        for &k in net.kids(i) {
            let b = net.branch(k);
            row_p.extend([(fp(k), 1.0), (l(k), -b.r)]);
            row_q.extend([(fq(k), 1.0), (l(k), -b.x)]);
        }
        pb.add_row(format!("balance_p_{name}"), &row_p, 0.0);
        pb.add_row(format!("balance_q_{name}"), &row_q, 0.0);
    }

    // voltage drop: v_i − v_j − 2(rP + xQ) + |z|²ℓ = 0
    for i in 1..=n {
        let b = net.branch(i);
        let mut row = vec![(v(i), 1.0), (fp(i), -2.0 * b.r), (fq(i), -2.0 * b.x), (l(i), b.z_sq())];
        let rhs = if b.parent == 0 {
            net.v0()
        } else {
            row.push((v(b.parent), -1.0));
            0.0
        };
        pb.add_row(format!("drop_{}", branch_label(net, i)), &row, rhs);
    }

    let mut dependents = Dependents::default();
    let mut bound = |pb: &mut ProgramBuilder, label: String, var: usize, lo: Option<f64>, hi: f64| {
        // lo == None means the lower bound is implied by the cone
        match lo {
            Some(lo) if lo == hi => {
                pb.add_row(format!("{label}_fix"), &[(var, 1.0)], lo);
            }
            _ => {
                if let Some(lo) = lo {
                    let s = pb.add_block(ConeKind::Nonnegative, [format!("s_{label}_min")]);
                    let r = pb.add_row(format!("{label}_min"), &[(var, 1.0), (s, -1.0)], lo);
                    dependents.push(s, r);
                }
                let s = pb.add_block(ConeKind::Nonnegative, [format!("s_{label}_max")]);
                let r = pb.add_row(format!("{label}_max"), &[(var, 1.0), (s, 1.0)], hi);
                dependents.push(s, r);
            }
        }
    };
    for i in 1..=n {
        let b = net.branch(i);
        let lim = net.limits(i);
        let name = net.name(i);
        bound(&mut pb, format!("l_{}", branch_label(net, i)), l(i), None, b.l_max);
        bound(&mut pb, format!("v_{name}"), v(i), Some(lim.v_min), lim.v_max);
        bound(&mut pb, format!("p_{name}"), p_var[i], Some(lim.p_min), lim.p_max);
        bound(&mut pb, format!("q_{name}"), q_var[i], Some(lim.q_min), lim.q_max);
    }

    let c = obj.coefficients(net);
    for i in 0..=n {
        pb.add_cost(p_var[i], c.p[i]);
    }
    pb.add_offset(c.v[0] * net.v0());
    for i in 1..=n {
        pb.add_cost(v(i), c.v[i]);
        pb.add_cost(l(i), c.l[i - 1]);
    }

    CrProgram {
        program: pb.build(),
        cone_start,
        p_var,
        q_var,
        dependents,
    }
}

impl CrProgram {
    pub fn physical_point(&self, net: &Network, x: &[f64]) -> PhysicalPoint {
        let mut pt = PhysicalPoint::zeros(net);
        for (k, &c) in self.cone_start.iter().enumerate() {
            pt.v[k + 1] = x[c];
            pt.l[k] = x[c + 1];
            pt.flow_p[k] = x[c + 2];
            pt.flow_q[k] = x[c + 3];
        }
        for i in 0..=net.num_nodes() {
            pt.p[i] = x[self.p_var[i]];
            pt.q[i] = x[self.q_var[i]];
        }
        pt
    }

    /// Conic vector for a physical point, with bound slacks completed.
    pub fn point_to_x(&self, pt: &PhysicalPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        for (k, &c) in self.cone_start.iter().enumerate() {
            x[c] = pt.v[k + 1];
            x[c + 1] = pt.l[k];
            x[c + 2] = pt.flow_p[k];
            x[c + 3] = pt.flow_q[k];
        }
        for (i, (&pv, &qv)) in self.p_var.iter().zip(&self.q_var).enumerate() {
            x[pv] = pt.p[i];
            x[qv] = pt.q[i];
        }
        self.dependents.fill(&self.program, &mut x);
        x
    }
}
