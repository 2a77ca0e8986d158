//! Homogeneous self-dual embedding with Mehrotra predictor-corrector steps.
//!
//! Internal form: `min qᵀx  s.t.  A x + s = b,  s ∈ {0}^m_eq × K`.

use super::cones::ConeSet;
use super::kkt::{Kkt, KktMethod};
use crate::sparse::{dot, norm2, CscMatrix};

/// Iterations without a 10% improvement of the best iterate before giving up.
const STALL_ITERS: usize = 25;

/// Convergence measures on the caller's (original) program.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Metrics {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Metrics {
    fn score(&self, p: &Params) -> f64 {
        (self.primal / p.tol_feas).max(self.dual / p.tol_feas).max(self.gap / p.tol_gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Exit {
    Converged,
    PrimalInfeasible,
    DualInfeasible,
    MaxIters,
    Stalled,
}

pub(crate) struct Problem<'a> {
    pub a: &'a CscMatrix,
    pub b: &'a [f64],
    pub q: &'a [f64],
    pub m_eq: usize,
}

pub(crate) struct Params {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    pub max_iters: usize,
    pub method: KktMethod,
}

#[derive(Clone)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Slacks of the conic rows only.
    pub s: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
}

pub(crate) struct Outcome {
    pub exit: Exit,
    pub it: Iterate,
    pub iterations: usize,
}

/// Runs the method. `monitor` receives `(x, z, s)` normalized by `τ` and
/// reports residuals on the original program.
pub(crate) fn run(
    prob: &Problem,
    cones: &mut ConeSet,
    params: &Params,
    mut monitor: impl FnMut(&[f64], &[f64], &[f64]) -> Metrics,
) -> Outcome {
    let a = prob.a;
    let (m, n, m_eq) = (a.nrows(), a.ncols(), prob.m_eq);
    let mc = m - m_eq;
    debug_assert_eq!(cones.dim(), mc);
    let nu = cones.degree() as f64;
    let mut kkt = Kkt::new(a, m_eq, cones, params.method);

    // starting point from two least-squares style solves with H = I
    let e = cones.identity();
    cones.update_scaling(&e, &e);
    kkt.update(cones);
    let mut rhs = vec![0.0; n + m];
    rhs[n..].copy_from_slice(prob.b);
    let (sol, _) = kkt.solve(cones, &rhs);
    let x = sol[..n].to_vec();
    let mut s: Vec<f64> = sol[n + m_eq..].iter().map(|v| -v).collect();
    cones.shift_to_interior(&mut s);
    rhs.fill(0.0);
    for j in 0..n {
        rhs[j] = -prob.q[j];
    }
    let (sol, _) = kkt.solve(cones, &rhs);
    let mut z = sol[n..].to_vec();
    cones.shift_to_interior(&mut z[m_eq..]);
    let mut it = Iterate { x, z, s, tau: 1.0, kappa: 1.0 };

    let mut best: Option<(Iterate, Metrics)> = None;
    let mut since_best = 0;
    let mut rx = vec![0.0; n];
    let mut rz = vec![0.0; m];
    for iter in 0..params.max_iters {
        // residuals
        rx.iter_mut().zip(prob.q).for_each(|(r, q)| *r = q * it.tau);
        a.gemv_t(1.0, &it.z, &mut rx);
        rz.iter_mut().zip(prob.b).for_each(|(r, b)| *r = -b * it.tau);
        a.gemv(1.0, &it.x, &mut rz);
        for k in 0..mc {
            rz[m_eq + k] += it.s[k];
        }
        let qx = dot(prob.q, &it.x);
        let bz = dot(prob.b, &it.z);
        let rtau = it.kappa + qx + bz;

        let inv = 1.0 / it.tau;
        let xs: Vec<f64> = it.x.iter().map(|v| v * inv).collect();
        let zs: Vec<f64> = it.z.iter().map(|v| v * inv).collect();
        let ss: Vec<f64> = it.s.iter().map(|v| v * inv).collect();
        let metrics = monitor(&xs, &zs, &ss);
        if metrics.primal <= params.tol_feas && metrics.dual <= params.tol_feas && metrics.gap <= params.tol_gap {
            return Outcome { exit: Exit::Converged, it, iterations: iter };
        }
        let score = metrics.score(params);
        if score.is_finite() && best.as_ref().is_none_or(|(_, bm)| score < 0.9 * bm.score(params)) {
            best = Some((it.clone(), metrics));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > STALL_ITERS {
                let it = best.map_or(it, |(b, _)| b);
                return Outcome { exit: Exit::Stalled, it, iterations: iter };
            }
        }
        if bz < 0.0 && norm2(&a.mul_t_vec(&it.z)) <= params.tol_infeas * -bz {
            return Outcome { exit: Exit::PrimalInfeasible, it, iterations: iter };
        }
        if qx < 0.0 {
            let mut ax = a.mul_vec(&it.x);
            for k in 0..mc {
                ax[m_eq + k] += it.s[k];
            }
            if norm2(&ax) <= params.tol_infeas * -qx {
                return Outcome { exit: Exit::DualInfeasible, it, iterations: iter };
            }
        }

        if !cones.update_scaling(&it.s, &it.z[m_eq..]) {
            let it = best.map_or(it, |(b, _)| b);
            return Outcome { exit: Exit::Stalled, it, iterations: iter };
        }
        kkt.update(cones);
        let mu = (dot(&it.s, &it.z[m_eq..]) + it.tau * it.kappa) / (nu + 1.0);

        // constant part: K [x1; z1] = [−q; b]
        for j in 0..n {
            rhs[j] = -prob.q[j];
        }
        rhs[n..].copy_from_slice(prob.b);
        // a poor solve here means the factorization lost accuracy
        let sol1 = loop {
            let (sol, res) = kkt.solve(cones, &rhs);
            if res <= 1e-8 || !kkt.strengthen(cones) {
                break sol;
            }
        };
        let (x1, z1) = sol1.split_at(n);
        let den = dot(prob.q, x1) + dot(prob.b, z1) - it.kappa / it.tau;

        let lam = cones.lambda.clone();
        let mut ds = vec![0.0; mc];
        cones.circ(&lam, &lam, &mut ds);
        let dkappa = it.kappa * it.tau;

        let solve_dir = |eta: f64, ds: &[f64], dkappa: f64, kkt: &Kkt, cones: &ConeSet| {
            let mut rhs = vec![0.0; n + m];
            for j in 0..n {
                rhs[j] = -eta * rx[j];
            }
            for i in 0..m {
                rhs[n + i] = -eta * rz[i];
            }
            let mut tmp = vec![0.0; mc];
            let mut wt = vec![0.0; mc];
            cones.lambda_div(ds, &mut tmp);
            cones.w_mul(&tmp, &mut wt);
            for k in 0..mc {
                rhs[n + m_eq + k] += wt[k];
            }
            let (sol2, _) = kkt.solve(cones, &rhs);
            let (x2, z2) = sol2.split_at(n);
            let dtau = (-eta * rtau + dkappa / it.tau - dot(prob.q, x2) - dot(prob.b, z2)) / den;
            let dx: Vec<f64> = (0..n).map(|j| x2[j] + dtau * x1[j]).collect();
            let dz: Vec<f64> = (0..m).map(|i| z2[i] + dtau * z1[i]).collect();
            // Δs = −W(λ\d_s) − WᵀW Δz
            let mut h = vec![0.0; mc];
            cones.wtw_mul(&dz[m_eq..], &mut h);
            let dsv: Vec<f64> = (0..mc).map(|k| -wt[k] - h[k]).collect();
            let dk = -(dkappa + it.kappa * dtau) / it.tau;
            (dx, dz, dsv, dtau, dk)
        };
        let step = |dz: &[f64], dsv: &[f64], dtau: f64, dk: f64, cones: &ConeSet| {
            let mut alpha = cones.max_step_scaled(dsv, &dz[m_eq..], 1.0);
            if dtau < 0.0 {
                alpha = alpha.min(-it.tau / dtau);
            }
            if dk < 0.0 {
                alpha = alpha.min(-it.kappa / dk);
            }
            alpha
        };

        // predictor
        let (_, dz_a, ds_a, dtau_a, dk_a) = solve_dir(1.0, &ds, dkappa, &kkt, cones);
        let alpha_a = step(&dz_a, &ds_a, dtau_a, dk_a, cones);
        let sigma = (1.0 - alpha_a).powi(3);

        // corrector with second-order term (W⁻ᵀΔs_a) ∘ (WΔz_a)
        let mut u = vec![0.0; mc];
        let mut v = vec![0.0; mc];
        let mut cross = vec![0.0; mc];
        cones.w_inv_mul(&ds_a, &mut u);
        cones.w_mul(&dz_a[m_eq..], &mut v);
        cones.circ(&u, &v, &mut cross);
        let e = cones.identity();
        let ds_c: Vec<f64> = (0..mc).map(|k| ds[k] + cross[k] - sigma * mu * e[k]).collect();
        let dkappa_c = dkappa + dk_a * dtau_a - sigma * mu;
        let (dx, dz, dsv, dtau, dk) = solve_dir(1.0 - sigma, &ds_c, dkappa_c, &kkt, cones);
        let alpha = (0.99 * step(&dz, &dsv, dtau, dk, cones)).min(1.0);
        let finite = dx.iter().chain(&dz).chain(&dsv).all(|v| v.is_finite()) && dtau.is_finite() && dk.is_finite();
        if !finite || !(alpha > 1e-10) {
            let it = best.map_or(it, |(b, _)| b);
            return Outcome { exit: Exit::Stalled, it, iterations: iter };
        }
        // rounding can still leave the cone right at the boundary; back off
        let mut alpha = alpha;
        loop {
            let s_new: Vec<f64> = (0..mc).map(|k| it.s[k] + alpha * dsv[k]).collect();
            let z_new: Vec<f64> = (0..m).map(|i| it.z[i] + alpha * dz[i]).collect();
            let (t_new, k_new) = (it.tau + alpha * dtau, it.kappa + alpha * dk);
            if cones.is_interior(&s_new) && cones.is_interior(&z_new[m_eq..]) && t_new > 0.0 && k_new > 0.0 {
                it.s = s_new;
                it.z = z_new;
                it.tau = t_new;
                it.kappa = k_new;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                let it = best.map_or(it, |(b, _)| b);
                return Outcome { exit: Exit::Stalled, it, iterations: iter };
            }
        }
        for j in 0..n {
            it.x[j] += alpha * dx[j];
        }

        // keep the homogeneous scale bounded
        let scale = it.tau.max(it.kappa);
        if scale > 1e8 || scale < 1e-8 {
            let f = 1.0 / scale;
            it.x.iter_mut().chain(it.z.iter_mut()).chain(it.s.iter_mut()).for_each(|v| *v *= f);
            it.tau *= f;
            it.kappa *= f;
        }
    }
    let iterations = params.max_iters;
    let it = best.map_or(it, |(b, _)| b);
    Outcome { exit: Exit::MaxIters, it, iterations }
}
