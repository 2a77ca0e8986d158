#![allow(dead_code)]

use rand::Rng;
use radopf_core::formulation::ReformPoint;
use radopf_core::network::{Network, NodeLimits};

/// Solutions of the exact branch-flow equations on one root-to-leaf chain,
/// found by scanning the leaf voltage and bisecting on the root mismatch.
/// Every node must have at most one child. Returns the loss `Σ r·ℓ` of each
/// feasible solution.
fn chain_losses(net: &Network, chain: &[usize]) -> Vec<f64> {
    // chain[0] hangs off the root, chain.last() is the leaf
    let sweep = |v_leaf: f64| -> Option<(f64, f64, bool)> {
        let (mut fp, mut fq) = (0.0, 0.0);
        let mut v = v_leaf;
        let mut loss = 0.0;
        let mut ok = true;
        for (pos, &i) in chain.iter().enumerate().rev() {
            let b = net.branch(i);
            let lim = net.limits(i);
            // S_i = s_i + (S_child − z ℓ_child), carried in (fp, fq)
            let p = lim.p_min + fp;
            let q = lim.q_min + fq;
            if v <= 0.0 {
                return None;
            }
            let l = (p * p + q * q) / v;
            ok &= v >= lim.v_min && v <= lim.v_max && l <= b.l_max;
            loss += b.r * l;
            let v_up = v - 2.0 * (b.r * p + b.x * q) + b.z_sq() * l;
            fp = p - b.r * l;
            fq = q - b.x * l;
            v = v_up;
            if pos == 0 {
                return Some((v - net.v0(), loss, ok));
            }
        }
        unreachable!()
    };
    let (lo, hi, steps) = (1e-3, 3.0, 20_000);
    let h = (hi - lo) / steps as f64;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let x = lo + h * k as f64;
        let Some((f, _, _)) = sweep(x) else {
            prev = None;
            continue;
        };
        if let Some((xp, fpv)) = prev {
            if fpv.signum() != f.signum() {
                let (mut a, mut b, mut fa) = (xp, x, fpv);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = sweep(m).unwrap().0;
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                let (_, loss, ok) = sweep(0.5 * (a + b)).unwrap();
                if ok {
                    out.push(loss);
                }
            }
        }
        prev = Some((x, f));
    }
    out
}

/// Minimum loss over the exact (nonconvex) power flow with fixed injections,
/// for networks whose nodes have at most one child each. `None` when no
/// solution satisfies the bounds.
pub fn brute_force_loss(net: &Network) -> Option<f64> {
    let mut total = 0.0;
    for &top in net.children(0).unwrap() {
        let mut chain = vec![top];
        loop {
            let kids = net.children(*chain.last().unwrap()).unwrap();
            assert!(kids.len() <= 1, "oracle handles chains hanging off the root only");
            match kids.first() {
                Some(&k) => chain.push(k),
                None => break,
            }
        }
        let best = chain_losses(net, &chain).into_iter().reduce(f64::min)?;
        total += best;
    }
    Some(total)
}

pub fn fixed_load<R: Rng>(rng: &mut R) -> NodeLimits {
    let p = rng.gen_range(0.01..0.3);
    let q = p * rng.gen_range(0.1..0.8);
    NodeLimits::fixed(-p, -q, 0.64, 1.44)
}

pub fn impedance<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let r = rng.gen_range(0.005..0.05);
    (r, r * rng.gen_range(0.4..2.5), 5.0)
}

/// Small networks of at most five nodes with boxes that contain zero.
pub fn small_flexible<R: Rng>(rng: &mut R) -> Network {
    let n = rng.gen_range(1..=4);
    let parents = (0..n).map(|k| if k == 0 { 0 } else { rng.gen_range(0..=k) }).collect();
    let imp = (0..n).map(|_| impedance(rng)).collect();
    let limits = (0..n)
        .map(|_| NodeLimits {
            v_min: rng.gen_range(0.7..0.9),
            v_max: rng.gen_range(1.05..1.3),
            p_min: -rng.gen_range(0.05..0.5),
            p_max: rng.gen_range(0.05..0.5),
            q_min: -rng.gen_range(0.05..0.5),
            q_max: rng.gen_range(0.05..0.5),
        })
        .collect();
    Network::from_parts(1.0, limits, parents, imp).unwrap()
}

/// A random `(τ, β)` with `τ = |z|²ℓ̄·10^u` and `β = λτ`. `u` reaches a
/// little past the current bound so some draws are rejected.
pub fn random_reform_point<R: Rng>(rng: &mut R, net: &Network) -> ReformPoint {
    let tau: Vec<f64> = net
        .branches()
        .iter()
        .map(|b| b.z_sq() * b.l_max * 10f64.powf(rng.gen_range(-3.0..0.3)))
        .collect();
    let beta = tau.iter().map(|t| t * rng.gen_range(-3.0..5.0)).collect();
    ReformPoint { tau, beta }
}
