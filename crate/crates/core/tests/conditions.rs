mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radopf_core::cases::{self, BoxStyle};
use radopf_core::conditions::{
    certify_strong_duality, check_conditions, construct_slater_point, construct_slater_point_with, deltas, solve_lambda,
    Condition, Target, Verdict,
};
use radopf_core::experiment::modify_network;
use radopf_core::formulation::{build_opf_socp2, ObjectiveSpec};
use radopf_core::network::{Network, NodeLimits};

const TARGETS: [Target; 4] = [Target::DeltaPZero, Target::DeltaQZero, Target::BothNonpos, Target::BothNonneg];

fn flexible(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=30);
    cases::random_radial(&mut rng, n, BoxStyle::Flexible)
}

/// Tree whose `x/r` ratio grows away from the root.
fn increasing_ratio(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=20);
    let parents: Vec<usize> = (0..n).map(|k| rng.gen_range(0..=k)).collect();
    let mut ratio = vec![0.0; n + 1];
    let mut imp = Vec::new();
    for (k, &p) in parents.iter().enumerate() {
        let base = if p == 0 { rng.gen_range(0.2..1.0) } else { ratio[p] };
        ratio[k + 1] = base * rng.gen_range(1.0..2.0);
        let r = rng.gen_range(0.005..0.05);
        imp.push((r, r * ratio[k + 1], rng.gen_range(1.0..5.0)));
    }
    let limits = (0..n).map(|_| NodeLimits { v_min: 0.8, v_max: 1.2, p_min: -1.0, p_max: 1.0, q_min: -1.0, q_max: 1.0 }).collect();
    Network::from_parts(1.0, limits, parents, imp).unwrap()
}

fn random_targets(seed: u64, n: usize) -> Vec<Target> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| TARGETS[rng.gen_range(0..4)]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn targeted_delta_vanishes(seed in any::<u64>()) {
        let net = flexible(seed);
        for (target, pick) in [(Target::DeltaPZero, 0), (Target::DeltaQZero, 1)] {
            let lambda = solve_lambda(&net, &vec![target; net.num_nodes()]);
            let d = deltas(&net, &lambda);
            let d = if pick == 0 { d.0 } else { d.1 };
            for (k, v) in d.iter().enumerate() {
                prop_assert!(v.abs() < 1e-12 * lambda[k].max(1.0), "branch {}: δ = {v}", k + 1);
            }
        }
    }

    #[test]
    fn lambda_at_least_one(seed in any::<u64>()) {
        let net = flexible(seed);
        let lambda = solve_lambda(&net, &random_targets(seed, net.num_nodes()));
        prop_assert!(lambda.iter().all(|&l| l >= 1.0));
    }

    #[test]
    fn growing_ratio_orders_deltas(seed in any::<u64>()) {
        let net = increasing_ratio(seed);
        let lambda = solve_lambda(&net, &random_targets(seed, net.num_nodes()));
        let (dp, dq) = deltas(&net, &lambda);
        for k in 0..net.num_nodes() {
            prop_assert!(dp[k] <= dq[k] + 1e-12 * lambda[k].max(1.0), "branch {}: {} > {}", k + 1, dp[k], dq[k]);
        }
        // the C3 target then makes both nonnegative
        let (dp, dq) = deltas(&net, &solve_lambda(&net, &vec![Target::DeltaPZero; net.num_nodes()]));
        prop_assert!(dp.iter().chain(&dq).all(|&d| d > -1e-10));
    }

    #[test]
    fn larger_mu_only_slackens(seed in any::<u64>(), target in 0usize..4) {
        let net = common::small_flexible(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut prev = construct_slater_point(&net, TARGETS[target], 10.0);
        for mu in [20.0, 80.0, 1e3, 1e6] {
            let next = construct_slater_point(&net, TARGETS[target], mu);
            for (a, b) in prev.margins.cone.iter().zip(&next.margins.cone) {
                prop_assert!(b >= a);
            }
            // zero flow lies inside every box, so strictness is kept
            prop_assert!(!prev.margins.is_strict() || next.margins.is_strict());
            prev = next;
        }
    }

    #[test]
    fn certified_points_are_feasible_for_the_restriction(seed in any::<u64>()) {
        let net = flexible(seed);
        let cert = certify_strong_duality(&net);
        if let Some(c) = cert.certificate {
            let socp2 = build_opf_socp2(&net, &ObjectiveSpec::TotalLoss);
            let chk = socp2.program.check_point(&socp2.point_to_x(&c.point));
            prop_assert!(chk.equality_residual < 1e-10, "{chk:?}");
            prop_assert!(chk.min_cone_margin > 0.0, "{chk:?}");
        } else {
            prop_assert_ne!(cert.verdict, Verdict::ConditionsMet);
        }
    }
}

#[test]
fn modified_cases_certify_under_every_condition() {
    for base in [cases::ieee33(), cases::synthetic56(5)] {
        for cond in [Condition::C1, Condition::C2, Condition::C3] {
            let net = modify_network(&base, cond).network;
            assert!(check_conditions(&net).holds(cond));
            let cert = radopf_core::conditions::certify_with(&net, cond);
            assert_eq!(cert.verdict, Verdict::ConditionsMet, "{cond}");
            assert_eq!(cert.condition, Some(cond));
        }
    }
}

#[test]
fn unmodified_ieee33_is_not_certified() {
    // fixed loads leave no interior in the restriction
    let net = cases::ieee33();
    let cert = certify_strong_duality(&net);
    assert_ne!(cert.verdict, Verdict::ConditionsMet);
    let c = construct_slater_point_with(&net, &vec![Target::DeltaPZero; net.num_nodes()], 1e6);
    assert!(!c.margins.is_strict());
}
