//! Gap studies: network modifications toward C1–C3, random DG instances, and
//! batch primal/dual solves with summary statistics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{check_c1, Condition};
use crate::dual::{build_dual, duality_gap};
use crate::formulation::{build_opf_cr, ObjectiveSpec};
use crate::network::{Branch, Network, NodeId, NodeLimits, ValidationError};
use crate::solver::{solve, SolverOptions, Status};

/// Minimum opening given to a bound that must become strict.
pub const EPSILON_G: f64 = 1e-3;
/// Relative gap below which an instance counts as strongly dual.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;
/// How relative gaps are normalized; written into every report.
pub const GAP_NORMALIZATION: &str = "(primal - dual) / max(1, |primal|)";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid DG range for {what}: [{lo}, {hi}]")]
    BadRange { what: &'static str, lo: f64, hi: f64 },
    #[error("unknown DG node id {0}")]
    UnknownNode(NodeId),
    #[error("instance {instance}: {source}")]
    Invalid {
        instance: usize,
        #[source]
        source: ValidationError,
    },
}

/// One changed field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Change {
    /// Node name, or `child->parent` for a branch.
    pub element: String,
    pub field: String,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedNetwork {
    pub network: Network,
    pub log: Vec<Change>,
}

struct Editor<'a> {
    net: &'a Network,
    log: Vec<Change>,
}

impl Editor<'_> {
    fn set(&mut self, element: String, field: &str, slot: &mut f64, new: f64) {
        if *slot != new {
            self.log.push(Change {
                element,
                field: field.to_string(),
                old: *slot,
                new,
            });
            *slot = new;
        }
    }

    /// `p_min ≤ p.0`, `p_max ≥ p.1`, and likewise for `q`.
    fn node(&mut self, i: NodeId, l: &mut NodeLimits, p: (f64, f64), q: (f64, f64)) {
        let name = self.net.name(i).to_string();
        let fields = [
            ("p_min", &mut l.p_min, p.0, true),
            ("p_max", &mut l.p_max, p.1, false),
            ("q_min", &mut l.q_min, q.0, true),
            ("q_max", &mut l.q_max, q.1, false),
        ];
        for (field, slot, bound, lower) in fields {
            let new = if lower { slot.min(bound) } else { slot.max(bound) };
            self.set(name.clone(), field, slot, new);
        }
    }
}

/// Adjusts `net` until it satisfies `condition`.
///
/// * C1: nodes failing every case get boxes widened to `[min(·,0), max(·,ε_g)]`.
/// * C2: `p̲ ≤ −ε_g`, `p̄ ≥ 0`, `q̲ ≤ 0 ≤ q̄` everywhere, and `x` of each
///   branch raised just enough that `r/x` never increases away from the root.
/// * C3: the mirror image, with `q̲ ≤ −ε_g` and `r/x` never decreasing.
pub fn modify_network(net: &Network, condition: Condition) -> ModifiedNetwork {
    let mut ed = Editor { net, log: Vec::new() };
    let mut limits = net.all_limits().to_vec();
    let eps = EPSILON_G;
    match condition {
        Condition::C1 => {
            let report = check_c1(net);
            for c in report.nodes.iter().filter(|c| !c.any()) {
                ed.node(c.node, &mut limits[c.node - 1], (0.0, eps), (0.0, eps));
            }
        }
        Condition::C2 => {
            for (k, l) in limits.iter_mut().enumerate() {
                ed.node(k + 1, l, (-eps, 0.0), (0.0, 0.0));
            }
        }
        Condition::C3 => {
            for (k, l) in limits.iter_mut().enumerate() {
                ed.node(k + 1, l, (0.0, 0.0), (-eps, 0.0));
            }
        }
    }

    let mut branches: Vec<Branch> = net.branches().to_vec();
    if condition != Condition::C1 {
        let decreasing = condition == Condition::C2;
        for &i in net.bfs_order().iter().skip(1) {
            let j = net.parent(i);
            if j == 0 {
                continue;
            }
            let cap = branches[j - 1].ratio();
            let b = &mut branches[i - 1];
            let violates = |b: &Branch| if decreasing { b.ratio() > cap } else { b.ratio() < cap };
            if violates(b) {
                let mut x = b.r / cap;
                // rounding of r / (r / cap) can land on the wrong side of cap
                let nudge = if decreasing { 1.0 + f64::EPSILON } else { 1.0 - f64::EPSILON };
                while violates(&Branch { x, ..*b }) {
                    x *= nudge;
                }
                let element = format!("{}->{}", net.name(i), net.name(j));
                ed.set(element, "x", &mut b.x, x);
            }
        }
    }

    let log = ed.log;
    if log.is_empty() {
        return ModifiedNetwork {
            network: net.clone(),
            log,
        };
    }
    let network = net
        .with_limits(limits)
        .and_then(|n| n.with_branches(branches))
        .expect("widened boxes and positive reactances stay valid");
    ModifiedNetwork { network, log }
}

/// How a DG draw changes a node's injection box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgMode {
    /// `p̄ += g_p` and `[q̲, q̄]` widened by `g_q` on both sides.
    #[default]
    Dispatchable,
    /// The whole box shifted by `(g_p, g_q)`.
    FixedInjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub count: usize,
    pub seed: u64,
    pub mode: DgMode,
    /// Uniform range of the active DG draw, per unit.
    pub p_range: (f64, f64),
    /// Uniform range of the reactive DG draw, per unit.
    pub q_range: (f64, f64),
    /// Nodes carrying DG; `None` means every non-root node.
    pub nodes: Option<Vec<NodeId>>,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            mode: DgMode::Dispatchable,
            p_range: (0.0, 0.03),
            q_range: (0.0, 0.015),
            nodes: None,
        }
    }
}

fn draw<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// `spec.count` copies of `base` with seeded DG draws applied.
pub fn generate_instances(base: &Network, spec: &InstanceSpec) -> Result<Vec<Network>, ExperimentError> {
    for (what, (lo, hi)) in [("p", spec.p_range), ("q", spec.q_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ExperimentError::BadRange { what, lo, hi });
        }
    }
    let nodes: Vec<NodeId> = match &spec.nodes {
        Some(v) => v.clone(),
        None => (1..=base.num_nodes()).collect(),
    };
    if let Some(&bad) = nodes.iter().find(|&&i| i == 0 || i > base.num_nodes()) {
        return Err(ExperimentError::UnknownNode(bad));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|instance| {
            let mut limits = base.all_limits().to_vec();
            for &i in &nodes {
                let (gp, gq) = (draw(&mut rng, spec.p_range), draw(&mut rng, spec.q_range));
                let l = &mut limits[i - 1];
                match spec.mode {
                    DgMode::Dispatchable => {
                        l.p_max += gp;
                        l.q_min -= gq;
                        l.q_max += gq;
                    }
                    DgMode::FixedInjection => {
                        l.p_min += gp;
                        l.p_max += gp;
                        l.q_min += gq;
                        l.q_max += gq;
                    }
                }
            }
            base.with_limits(limits)
                .map_err(|source| ExperimentError::Invalid { instance, source })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance_id: usize,
    pub status_primal: Status,
    pub status_dual: Status,
    pub primal_obj: Option<f64>,
    pub dual_obj: Option<f64>,
    pub abs_gap: Option<f64>,
    pub rel_gap: Option<f64>,
    pub strong_duality: Option<bool>,
}

impl InstanceResult {
    pub fn solved(&self) -> bool {
        self.rel_gap.is_some()
    }
}

/// Table-style aggregates over solved instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub solved: usize,
    pub failed: usize,
    /// Failed instances keyed by `primal_status/dual_status`.
    pub failures: BTreeMap<String, usize>,
    /// Mean of `|rel_gap|` (Avg-G).
    pub avg_gap: Option<f64>,
    /// Largest `|rel_gap|` (G⁺).
    pub max_gap: Option<f64>,
    /// Instances with `|rel_gap| < threshold` (N_SD).
    pub n_strong: usize,
    pub n_weak: usize,
    /// `n_strong / solved` (R_SD); zero when nothing solved.
    pub r_strong: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudyResult {
    pub label: String,
    pub objective: String,
    pub threshold: f64,
    pub gap_normalization: String,
    pub instances: Vec<InstanceResult>,
    pub summary: Summary,
}

fn summarize(instances: &[InstanceResult]) -> Summary {
    let gaps: Vec<f64> = instances.iter().filter_map(|r| r.rel_gap).map(f64::abs).collect();
    let solved = gaps.len();
    let mut failures = BTreeMap::new();
    for r in instances.iter().filter(|r| !r.solved()) {
        *failures.entry(format!("{}/{}", r.status_primal, r.status_dual)).or_insert(0) += 1;
    }
    let n_strong = instances.iter().filter(|r| r.strong_duality == Some(true)).count();
    Summary {
        total: instances.len(),
        solved,
        failed: instances.len() - solved,
        failures,
        avg_gap: (solved > 0).then(|| gaps.iter().sum::<f64>() / solved as f64),
        max_gap: gaps.iter().copied().reduce(f64::max),
        n_strong,
        n_weak: solved - n_strong,
        r_strong: if solved > 0 { n_strong as f64 / solved as f64 } else { 0.0 },
    }
}

/// Solves the relaxation of one network and its explicit dual as separate programs.
pub fn measure_gap(net: &Network, obj: &ObjectiveSpec, threshold: f64, opts: &SolverOptions) -> InstanceResult {
    let cr = build_opf_cr(net, obj);
    let dual = build_dual(&cr.program);
    let run = |p| match solve(p, opts) {
        Ok(s) => (s.status, s.primal_objective),
        Err(e) => {
            log::error!("malformed program: {e}");
            (Status::NumericalFailure, f64::NAN)
        }
    };
    let (sp, vp) = run(&cr.program);
    let (sd, vd) = run(&dual.program);
    let mut r = InstanceResult {
        instance_id: 0,
        status_primal: sp,
        status_dual: sd,
        primal_obj: None,
        dual_obj: None,
        abs_gap: None,
        rel_gap: None,
        strong_duality: None,
    };
    if sp == Status::Optimal {
        r.primal_obj = Some(vp);
    }
    if sd == Status::Optimal {
        r.dual_obj = Some(dual.dual_value(vd));
    }
    if let (Some(p), Some(d)) = (r.primal_obj, r.dual_obj) {
        let g = duality_gap(p, d);
        r.abs_gap = Some(g.absolute);
        r.rel_gap = Some(g.relative);
        r.strong_duality = Some(g.relative.abs() < threshold);
    }
    r
}

pub fn run_gap_study(instances: &[Network], obj: &ObjectiveSpec, threshold: f64, parallelism: usize) -> GapStudyResult {
    run_gap_study_with(instances, obj, threshold, parallelism, &SolverOptions::default())
}

/// Batch driver. `parallelism = 0` uses every available core.
pub fn run_gap_study_with(
    instances: &[Network],
    obj: &ObjectiveSpec,
    threshold: f64,
    parallelism: usize,
    opts: &SolverOptions,
) -> GapStudyResult {
    let work = || -> Vec<InstanceResult> {
        instances
            .par_iter()
            .enumerate()
            .map(|(k, net)| InstanceResult {
                instance_id: k,
                ..measure_gap(net, obj, threshold, opts)
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); using the global pool");
            work()
        }
    };
    GapStudyResult {
        label: String::new(),
        objective: obj.describe().to_string(),
        threshold,
        gap_normalization: GAP_NORMALIZATION.to_string(),
        summary: summarize(&results),
        instances: results,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "table" => Ok(Self::Table),
            _ => Err(format!("unknown format '{s}' (expected csv, json or table)")),
        }
    }
}

/// `1.45E-08` style.
pub fn sci(v: f64) -> String {
    let s = format!("{v:.2E}");
    match s.split_once('E') {
        Some((m, e)) => {
            let (sign, digits) = match e.strip_prefix('-') {
                Some(d) => ("-", d),
                None => ("+", e),
            };
            format!("{m}E{sign}{digits:0>2}")
        }
        None => s,
    }
}

pub fn emit_report(result: &GapStudyResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "instance_id",
                "status_primal",
                "status_dual",
                "primal_obj",
                "dual_obj",
                "abs_gap",
                "rel_gap",
                "strong_duality",
            ])
            .expect("in-memory csv write");
            for r in &result.instances {
                let num = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
                w.write_record([
                    r.instance_id.to_string(),
                    r.status_primal.to_string(),
                    r.status_dual.to_string(),
                    num(r.primal_obj),
                    num(r.dual_obj),
                    num(r.abs_gap),
                    num(r.rel_gap),
                    r.strong_duality.map(|b| b.to_string()).unwrap_or_default(),
                ])
                .expect("in-memory csv write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        ReportFormat::Json => serde_json::to_string_pretty(result).expect("serializable"),
        ReportFormat::Table => {
            let s = &result.summary;
            let opt = |v: Option<f64>| v.map(sci).unwrap_or_else(|| "-".into());
            let label = if result.label.is_empty() { "study" } else { &result.label };
            let mut out = String::new();
            out.push_str(&format!("{:<28} {:>10} {:>10} {:>6} {:>7}\n", "Test", "Avg-G", "G+", "N_SD", "R_SD"));
            out.push_str(&format!(
                "{:<28} {:>10} {:>10} {:>6} {:>6.1}%\n",
                label,
                opt(s.avg_gap),
                opt(s.max_gap),
                s.n_strong,
                100.0 * s.r_strong
            ));
            out.push_str(&format!(
                "instances {} solved {} failed {}",
                s.total, s.solved, s.failed
            ));
            for (k, v) in &s.failures {
                out.push_str(&format!(" [{k}: {v}]"));
            }
            out.push('\n');
            out.push_str(&format!(
                "threshold {}  gap {}  objective {}  bound opening {}\n",
                sci(result.threshold),
                result.gap_normalization,
                result.objective,
                sci(EPSILON_G)
            ));
            out
        }
    }
}
