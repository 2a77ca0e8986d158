//! Built-in test networks.
//!
//! * [`ieee33`]: the 33-bus Baran–Wu feeder (12.66 kV, 10 MVA base) with
//!   fixed loads.
//! * [`synthetic56`]: a seeded 56-node radial feeder. It is a stand-in with
//!   realistic magnitudes, not the Southern California Edison data set.
//! * [`random_radial`]: small random trees used by the property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Network, NodeLimits};

/// `(from, to, r Ω, x Ω)` with bus 1 the substation.
const IEEE33_BRANCHES: [(usize, usize, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470),
    (2, 3, 0.4930, 0.2511),
    (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070),
    (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351),
    (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650),
    (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260),
    (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083),
    (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447),
    (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
];

/// Loads in kW / kvar at buses 2..=33.
const IEEE33_LOADS: [(f64, f64); 32] = [
    (100.0, 60.0),
    (90.0, 40.0),
    (120.0, 80.0),
    (60.0, 30.0),
    (60.0, 20.0),
    (200.0, 100.0),
    (200.0, 100.0),
    (60.0, 20.0),
    (60.0, 20.0),
    (45.0, 30.0),
    (60.0, 35.0),
    (60.0, 35.0),
    (120.0, 80.0),
    (60.0, 10.0),
    (60.0, 20.0),
    (60.0, 20.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 50.0),
    (420.0, 200.0),
    (420.0, 200.0),
    (60.0, 25.0),
    (60.0, 25.0),
    (60.0, 20.0),
    (120.0, 70.0),
    (200.0, 600.0),
    (150.0, 70.0),
    (210.0, 100.0),
    (60.0, 40.0),
];

const IEEE33_KV: f64 = 12.66;
const IEEE33_MVA: f64 = 10.0;

/// Squared-voltage window used by the built-in cases: 0.9 to 1.1 p.u.
pub const V_MIN: f64 = 0.81;
pub const V_MAX: f64 = 1.21;

/// The 33-bus feeder with fixed loads (negative injections), `v0 = 1`, a
/// 0.9–1.1 p.u. voltage window and a 1 p.u. squared-current limit.
pub fn ieee33() -> Network {
    let z_base = IEEE33_KV * IEEE33_KV / IEEE33_MVA;
    let kw_base = IEEE33_MVA * 1000.0;
    let mut parents = vec![0; 32];
    let mut imp = vec![(0.0, 0.0, 0.0); 32];
    for &(from, to, r, x) in &IEEE33_BRANCHES {
        // bus b ↦ node b − 1, so the substation (bus 1) is node 0
        parents[to - 2] = from - 1;
        imp[to - 2] = (r / z_base, x / z_base, 1.0);
    }
    let limits = IEEE33_LOADS
        .iter()
        .map(|&(p, q)| NodeLimits::fixed(-p / kw_base, -q / kw_base, V_MIN, V_MAX))
        .collect();
    let mut net = Network::from_parts(1.0, limits, parents, imp).expect("33-bus data is valid");
    net.rename(|i| (i + 1).to_string());
    net
}

/// Seeded 56-node radial feeder (55 branches, mostly long laterals) with fixed loads.
/// Topology and data are invented; it is not a real utility feeder.
pub fn synthetic56(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 55;
    let mut parents = Vec::with_capacity(n);
    let mut imp = Vec::with_capacity(n);
    let mut limits = Vec::with_capacity(n);
    for i in 1..=n {
        let parent = if i == 1 {
            0
        } else if rng.gen_bool(0.75) {
            i - 1
        } else {
            rng.gen_range(0..i - 1)
        };
        parents.push(parent);
        let r = rng.gen_range(0.0015..0.008);
        let x = r * rng.gen_range(0.5..2.0);
        imp.push((r, x, 2.0));
        let p = rng.gen_range(0.005..0.02);
        let q = p * rng.gen_range(0.2..0.6);
        limits.push(NodeLimits::fixed(-p, -q, V_MIN, V_MAX));
    }
    Network::from_parts(1.0, limits, parents, imp).expect("synthetic feeder is valid")
}

/// Shape of the injection boxes drawn by [`random_radial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxStyle {
    /// Every node is a fixed load.
    FixedLoads,
    /// Every box contains zero with some room on each side.
    Flexible,
    /// Each node independently fixed or flexible.
    Mixed,
}

/// Random tree on `nodes` non-root nodes with modest impedances and loads.
pub fn random_radial<R: Rng>(rng: &mut R, nodes: usize, style: BoxStyle) -> Network {
    let mut parents = Vec::with_capacity(nodes);
    let mut imp = Vec::with_capacity(nodes);
    let mut limits = Vec::with_capacity(nodes);
    for i in 1..=nodes {
        parents.push(if i == 1 { 0 } else { rng.gen_range(0..i) });
        let r = rng.gen_range(0.001..0.01);
        let x = r * rng.gen_range(0.3..3.0);
        imp.push((r, x, rng.gen_range(0.5..3.0)));
        let p = rng.gen_range(0.002..0.02);
        let q = p * rng.gen_range(0.1..0.7);
        let fixed = match style {
            BoxStyle::FixedLoads => true,
            BoxStyle::Flexible => false,
            BoxStyle::Mixed => rng.gen_bool(0.5),
        };
        let v_min = rng.gen_range(0.75..0.9);
        let v_max = rng.gen_range(1.05..1.25);
        limits.push(if fixed {
            NodeLimits::fixed(-p, -q, v_min, v_max)
        } else {
            NodeLimits {
                v_min,
                v_max,
                p_min: -p,
                p_max: rng.gen_range(0.0..0.02),
                q_min: -q,
                q_max: rng.gen_range(0.0..0.02),
            }
        });
    }
    Network::from_parts(1.0, limits, parents, imp).expect("random feeder is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ieee33_shape() {
        let net = ieee33();
        assert_eq!(net.num_branches(), 32);
        assert_eq!(net.name(0), "1");
        let total_p: f64 = net.all_limits().iter().map(|l| -l.p_min).sum();
        assert!((total_p - 0.3715).abs() < 1e-12);
        // laterals at buses 2, 3, 6
        assert_eq!(net.children(1).unwrap().len(), 2);
    }

    #[test]
    fn synthetic56_is_deterministic() {
        assert_eq!(synthetic56(7), synthetic56(7));
        assert_eq!(synthetic56(7).num_branches(), 55);
    }
}
