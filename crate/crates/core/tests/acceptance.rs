//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radopf_core::cases::{self, BoxStyle};
use radopf_core::conditions::{certify_with, Certification, Condition, Target, Verdict, CONE_STRICTNESS};
use radopf_core::dual::build_dual;
use radopf_core::experiment::{
    generate_instances, measure_gap, modify_network, run_gap_study, sci, InstanceSpec, DEFAULT_THRESHOLD,
};
use radopf_core::formulation::{build_opf_cr, build_opf_socp1, build_opf_socp2, reform_to_physical, residuals, ObjectiveSpec};
use radopf_core::conditions::restriction_margins;
use radopf_core::network::Network;
use radopf_core::program::{Cone, ConicProgram};
use radopf_core::solver::{program_from_triplets, solve, SolverOptions, Status};
use radopf_core::sparse::Triplets;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const CONDITIONS: [Condition; 3] = [Condition::C1, Condition::C2, Condition::C3];

fn strong_duality_on_modified() -> Check {
    let mut notes = Vec::new();
    let bases = [("ieee33", cases::ieee33(), 200), ("syn56", cases::synthetic56(1), 50)];
    for (name, base, count) in bases {
        for (k, &cond) in CONDITIONS.iter().enumerate() {
            let m = modify_network(&base, cond);
            let spec = InstanceSpec {
                count,
                seed: 2024 + k as u64,
                ..Default::default()
            };
            let instances = generate_instances(&m.network, &spec).map_err(|e| e.to_string())?;
            for (i, inst) in instances.iter().enumerate() {
                let cert = certify_with(inst, cond);
                ensure(cert.verdict == Verdict::ConditionsMet, || format!("{name} {cond} instance {i} not certified"))?;
            }
            let r = run_gap_study(&instances, &ObjectiveSpec::TotalLoss, DEFAULT_THRESHOLD, 0);
            let s = &r.summary;
            ensure(s.failed == 0 && s.r_strong == 1.0, || {
                format!("{name} {cond}: {}/{} strong, failures {:?}", s.n_strong, s.total, s.failures)
            })?;
            notes.push(format!("{name}/{cond} n={} G+={}", s.total, sci(s.max_gap.unwrap_or(0.0))));
        }
    }
    Ok(notes.join(", "))
}

fn check_certificate(net: &Network, cond: Condition, cert: &Certification) -> Result<(), String> {
    let c = cert.certificate.as_ref().ok_or_else(|| format!("{cond}: verdict {:?}", cert.verdict))?;
    ensure(c.margins.min_cone() > CONE_STRICTNESS, || format!("{cond}: cone margin {}", c.margins.min_cone()))?;
    for (k, t) in c.targets.iter().enumerate() {
        let (dp, dq) = (c.delta_p[k], c.delta_q[k]);
        let ok = match t {
            Target::DeltaPZero => dp.abs() < 1e-12,
            Target::DeltaQZero => dq.abs() < 1e-12,
            Target::BothNonpos => dp.max(dq) < 1e-12,
            Target::BothNonneg => dp.min(dq) > -1e-12,
        };
        ensure(ok, || format!("{cond}: branch {} target {t:?} has δ = ({dp}, {dq})", k + 1))?;
    }
    let socp2 = build_opf_socp2(net, &ObjectiveSpec::TotalLoss);
    ensure(socp2.contains(&c.point, 1e-12), || format!("{cond}: point outside the restriction"))?;
    let rep = residuals(net, &reform_to_physical(net, &c.point));
    ensure(rep.max_equality() < 1e-10, || format!("{cond}: equality residual {}", rep.max_equality()))?;
    ensure(rep.min_cone_slack() > 0.0, || format!("{cond}: cone slack {}", rep.min_cone_slack()))?;
    ensure(rep.max_bound_violation() <= 1e-12, || format!("{cond}: bound violation {}", rep.max_bound_violation()))
}

fn certificate_validity() -> Check {
    let mut slowest = Duration::ZERO;
    let mut mus = Vec::new();
    for base in [cases::ieee33(), cases::synthetic56(1)] {
        for cond in CONDITIONS {
            let net = modify_network(&base, cond).network;
            let t = Instant::now();
            let cert = certify_with(&net, cond);
            slowest = slowest.max(t.elapsed());
            check_certificate(&net, cond, &cert)?;
            mus.push(cert.certificate.unwrap().mu);
        }
    }
    ensure(slowest < Duration::from_secs(1), || format!("slowest certification {slowest:?}"))?;
    Ok(format!("6 networks, μ = {mus:?}, slowest {slowest:?}"))
}

fn weak_duality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let styles = [BoxStyle::FixedLoads, BoxStyle::Flexible, BoxStyle::Mixed];
    let total = 500;
    let mut solved = 0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..total {
        let nodes = rng.gen_range(2..=55);
        let net = cases::random_radial(&mut rng, nodes, styles[k % 3]);
        let r = measure_gap(&net, &ObjectiveSpec::TotalLoss, DEFAULT_THRESHOLD, &SolverOptions::default());
        if let (Some(p), Some(d)) = (r.primal_obj, r.dual_obj) {
            solved += 1;
            let excess = (d - p) / p.abs().max(1.0);
            worst = worst.max(excess);
            ensure(excess <= 1e-6, || format!("network {k}: dual {d} exceeds primal {p}"))?;
        }
    }
    ensure(solved * 10 >= total * 9, || format!("only {solved}/{total} pairs solved"))?;
    Ok(format!("{solved}/{total} pairs solved, max (dual - primal)/max(1,|primal|) = {}", sci(worst)))
}

fn brute_force_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut compared, mut exact) = (0, 0);
    let shapes: [&[usize]; 3] = [&[0], &[0, 1], &[0, 0]];
    for shape in shapes {
        for _ in 0..60 {
            let n = shape.len();
            let limits = (0..n).map(|_| common::fixed_load(&mut rng)).collect();
            let imp = (0..n).map(|_| common::impedance(&mut rng)).collect();
            let net = Network::from_parts(1.0, limits, shape.to_vec(), imp).unwrap();
            let Some(oracle) = common::brute_force_loss(&net) else { continue };
            let cr = build_opf_cr(&net, &ObjectiveSpec::TotalLoss);
            let sol = solve(&cr.program, &SolverOptions::default()).unwrap();
            ensure(sol.status == Status::Optimal, || format!("{shape:?}: {}", sol.status))?;
            let socp = sol.primal_objective;
            compared += 1;
            ensure(socp <= oracle + 1e-4 * oracle.abs() + 1e-12, || format!("{shape:?}: socp {socp} above oracle {oracle}"))?;
            let gap = residuals(&net, &cr.physical_point(&net, &sol.x)).max_flow_gap().unwrap_or(f64::INFINITY);
            if gap < 1e-8 {
                exact += 1;
                ensure((socp - oracle).abs() <= 1e-4 * oracle.abs(), || format!("{shape:?}: exact relaxation {socp} vs oracle {oracle}"))?;
            }
        }
    }
    ensure(compared >= 150, || format!("only {compared} oracle comparisons"))?;
    Ok(format!("{compared} networks compared, {exact} with exact relaxation matched"))
}

fn restriction_chain() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut accepted, mut tried, mut nets) = (0, 0, 0);
    let mut worst = 0.0f64;
    while accepted < 1000 {
        let net = common::small_flexible(&mut rng);
        nets += 1;
        let socp1 = build_opf_socp1(&net, &ObjectiveSpec::TotalLoss);
        for _ in 0..20 {
            tried += 1;
            let rp = common::random_reform_point(&mut rng, &net);
            let m = restriction_margins(&net, &rp);
            if !(m.min_cone() >= 0.0 && m.min_affine() >= 0.0) {
                continue;
            }
            accepted += 1;
            ensure(socp1.contains(&rp, 1e-12), || format!("point {accepted} not in the path-voltage restriction"))?;
            let rep = residuals(&net, &reform_to_physical(&net, &rp));
            let err = rep.max_equality().max(rep.max_bound_violation()).max(-rep.min_cone_slack());
            worst = worst.max(err);
            ensure(err < 1e-9, || format!("point {accepted}: relaxation residual {err}"))?;
        }
        ensure(tried < 5_000_000, || "sampler acceptance too low".into())?;
    }
    Ok(format!("{accepted} points from {nets} networks ({tried} draws), worst residual {}", sci(worst)))
}

fn unit_program(c: Vec<f64>, entries: &[(usize, usize, f64)], b: Vec<f64>, cones: Vec<Cone>) -> ConicProgram {
    let mut t = Triplets::default();
    for &(i, j, v) in entries {
        t.push(i, j, v);
    }
    program_from_triplets(c, b.len(), &t, b, cones).unwrap()
}

fn solver_battery() -> Check {
    let opts = SolverOptions::default();
    let value = |p: &ConicProgram| -> Result<f64, String> {
        let s = solve(p, &opts).map_err(|e| e.to_string())?;
        ensure(s.status == Status::Optimal, || format!("status {}", s.status))?;
        Ok(s.primal_objective)
    };
    // t ≥ |1|
    let soc = unit_program(vec![1.0, 0.0], &[(0, 1, 1.0)], vec![1.0], vec![Cone::SecondOrder(2)]);
    let v1 = value(&soc)?;
    ensure((v1 - 1.0).abs() <= 1e-8, || format!("second-order optimum {v1}"))?;
    // u·w ≥ 1
    let rot = unit_program(vec![1.0, 1.0, 0.0], &[(0, 2, 1.0)], vec![1.0], vec![Cone::RotatedSecondOrder(3)]);
    let v2 = value(&rot)?;
    ensure((v2 - 2.0).abs() <= 1e-8, || format!("rotated optimum {v2}"))?;
    // min x s.t. x = 1, x ≥ 0, through its dual
    let lp = unit_program(vec![1.0], &[(0, 0, 1.0)], vec![1.0], vec![Cone::Nonnegative(1)]);
    let d = build_dual(&lp);
    let v3 = d.dual_value(value(&d.program)?);
    ensure((v3 - 1.0).abs() <= 1e-8, || format!("LP dual optimum {v3}"))?;
    // bidual of the 33-bus relaxation
    let cr = build_opf_cr(&cases::ieee33(), &ObjectiveSpec::TotalLoss).program;
    let primal = value(&cr)?;
    let bidual = value(&build_dual(&build_dual(&cr).program).program)?;
    ensure((primal - bidual).abs() <= 1e-7, || format!("bidual {bidual} vs primal {primal}"))?;
    Ok(format!("optima {v1:.9} {v2:.9} {v3:.9}; bidual differs by {}", sci((primal - bidual).abs())))
}

fn original_networks() -> Check {
    let mut notes = Vec::new();
    for (name, base) in [("ieee33", cases::ieee33()), ("syn56", cases::synthetic56(1))] {
        let spec = InstanceSpec {
            count: 200,
            seed: 7,
            ..Default::default()
        };
        let instances = generate_instances(&base, &spec).map_err(|e| e.to_string())?;
        let r = run_gap_study(&instances, &ObjectiveSpec::TotalLoss, DEFAULT_THRESHOLD, 0);
        let s = &r.summary;
        ensure(s.n_strong + s.n_weak + s.failed == s.total, || format!("{name}: accounting broken"))?;
        for inst in r.instances.iter().filter(|i| i.strong_duality == Some(false)) {
            println!("    {name} instance {} has relative gap {}", inst.instance_id, sci(inst.rel_gap.unwrap()));
        }
        notes.push(format!(
            "{name}: solved {}/{} Avg-G {} G+ {} N_SD {}",
            s.solved,
            s.total,
            s.avg_gap.map(sci).unwrap_or_default(),
            s.max_gap.map(sci).unwrap_or_default(),
            s.n_strong
        ));
    }
    Ok(notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("strong duality on modified networks", strong_duality_on_modified),
        ("slater certificate validity", certificate_validity),
        ("weak duality on random networks", weak_duality),
        ("brute-force oracle on 2- and 3-bus networks", brute_force_oracle),
        ("restriction chain inclusion", restriction_chain),
        ("solver unit battery", solver_battery),
        ("original-network gap study", original_networks),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
