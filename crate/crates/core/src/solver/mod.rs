//! Primal-dual interior-point solver for [`ConicProgram`]s.
//!
//! Rotated blocks are mapped onto second-order cones by a fixed linear
//! change of the slack, so the method itself only handles the orthant and
//! the Lorentz cone. Termination is judged on the original (unpresolved,
//! unscaled) program.

mod cones;
mod ipm;
mod kkt;
mod ldl;
mod ordering;
mod presolve;

use serde::{Deserialize, Serialize};

use crate::program::{Cone, ConicProgram, ProgramError};
use crate::sparse::{dot, norm2, norm_inf, Triplets};
use cones::{BlockKind, ConeSet};
pub use kkt::KktMethod;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative primal and dual residual tolerance.
    pub tol_feas: f64,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Tolerance for infeasibility certificates.
    pub tol_infeas: f64,
    pub max_iters: usize,
    /// Run the row/column reductions.
    pub presolve: bool,
    /// Run Ruiz equilibration.
    pub scale: bool,
    pub kkt: KktMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            max_iters: 200,
            presolve: true,
            scale: true,
            kkt: KktMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIters,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::MaxIters => "max_iters",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative residuals on the original program.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(‖Ax − b‖/(1 + ‖b‖), cone violation of x)`
    pub primal: f64,
    /// `‖Aᵀy + s − c‖/(1 + ‖c‖)`
    pub dual: f64,
    /// `max(|cᵀx − bᵀy|, |xᵀs|)/(1 + |cᵀx + offset|)`
    pub gap: f64,
}

/// Solver output. For infeasible statuses `y` (primal infeasible,
/// normalized to `bᵀy = 1`) or `x` (dual infeasible, `cᵀx = −1`) holds the
/// certificate and the objectives are `±∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

/// Internal form of a (reduced) program.
struct Internal {
    a: crate::sparse::CscMatrix,
    b: Vec<f64>,
    m_eq: usize,
    layout: Vec<(BlockKind, usize)>,
}

fn internal_form(p: &ConicProgram) -> Internal {
    let mut t = p.a.to_triplets();
    let m_eq = p.num_rows();
    let mut row = m_eq;
    let mut layout = Vec::new();
    for (cone, r) in p.cones.iter().zip(p.block_ranges()) {
        match cone {
            Cone::Free(_) => continue,
            Cone::Nonnegative(d) | Cone::SecondOrder(d) => {
                for (k, j) in r.enumerate() {
                    t.push(row + k, j, -1.0);
                }
                let kind = if matches!(cone, Cone::Nonnegative(_)) { BlockKind::Nonneg } else { BlockKind::Soc };
                layout.push((kind, *d));
                row += d;
            }
            Cone::RotatedSecondOrder(d) => {
                // s = T x with T = [[1, 1, 0], [1, −1, 0], [0, 0, 2I]]
                let (u, w) = (r.start, r.start + 1);
                t.push(row, u, -1.0);
                t.push(row, w, -1.0);
                t.push(row + 1, u, -1.0);
                t.push(row + 1, w, 1.0);
                for k in 2..*d {
                    t.push(row + k, r.start + k, -2.0);
                }
                layout.push((BlockKind::Soc, *d));
                row += d;
            }
        }
    }
    let a = crate::sparse::CscMatrix::from_triplets(row, p.num_vars(), &t);
    let mut b = p.b.clone();
    b.resize(row, 0.0);
    Internal { a, b, m_eq, layout }
}

/// Dual slack `s = Tᵀ z` of the program from the internal cone multipliers.
fn slack_from_z(p: &ConicProgram, zc: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; p.num_vars()];
    let mut k = 0;
    for (cone, r) in p.cones.iter().zip(p.block_ranges()) {
        match cone {
            Cone::Free(_) => {}
            Cone::Nonnegative(d) | Cone::SecondOrder(d) => {
                s[r].copy_from_slice(&zc[k..k + d]);
                k += d;
            }
            Cone::RotatedSecondOrder(d) => {
                let z = &zc[k..k + d];
                s[r.start] = z[0] + z[1];
                s[r.start + 1] = z[0] - z[1];
                for i in 2..*d {
                    s[r.start + i] = 2.0 * z[i];
                }
                k += d;
            }
        }
    }
    s
}

fn residuals(p: &ConicProgram, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
    let mut r = p.a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    let cone_viol = (-p.min_cone_margin(x)).max(0.0) / (1.0 + norm_inf(x));
    let primal = (norm2(&r) / (1.0 + norm2(&p.b))).max(cone_viol);
    let mut d = p.a.mul_t_vec(y);
    for j in 0..d.len() {
        d[j] += s[j] - p.c[j];
    }
    let dual = norm2(&d) / (1.0 + norm2(&p.c));
    let pobj = dot(&p.c, x) + p.offset;
    let dobj = dot(&p.b, y) + p.offset;
    Residuals {
        primal,
        dual,
        gap: (pobj - dobj).abs().max(dot(x, s).abs()) / (1.0 + pobj.abs()),
    }
}

/// Solves `min cᵀx + offset  s.t.  Ax = b, x ∈ K`.
pub fn solve(p: &ConicProgram, opts: &SolverOptions) -> Result<Solution, ProgramError> {
    p.validate()?;
    let (m, n) = (p.num_rows(), p.num_vars());
    let settings = presolve::Settings {
        reduce: opts.presolve,
        scale: opts.scale,
    };
    let pre = match presolve::presolve(p, settings) {
        presolve::Outcome::Reduced(r) => r,
        presolve::Outcome::Infeasible { mut y } => {
            let by = dot(&p.b, &y);
            y.iter_mut().for_each(|v| *v /= by);
            log::debug!("presolve detected an inconsistent system");
            return Ok(Solution {
                status: Status::PrimalInfeasible,
                x: vec![0.0; n],
                y,
                s: vec![0.0; n],
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: 0,
                residuals: Residuals::default(),
            });
        }
    };
    let rp = &pre.program;
    let int = internal_form(rp);
    let mut cones = ConeSet::new(&int.layout);
    let prob = ipm::Problem {
        a: &int.a,
        b: &int.b,
        q: &rp.c,
        m_eq: int.m_eq,
    };
    let params = ipm::Params {
        tol_feas: opts.tol_feas,
        tol_gap: opts.tol_gap,
        tol_infeas: opts.tol_infeas,
        max_iters: opts.max_iters,
        method: opts.kkt,
    };
    let recover = |x: &[f64], z: &[f64], ray: bool| {
        let y: Vec<f64> = z[..int.m_eq].iter().map(|v| -v).collect();
        let s = slack_from_z(rp, &z[int.m_eq..]);
        pre.postsolve(p, x, &y, &s, ray)
    };
    let out = ipm::run(&prob, &mut cones, &params, |x, z, _| {
        let (xo, yo, so) = recover(x, z, false);
        let r = residuals(p, &xo, &yo, &so);
        ipm::Metrics {
            primal: r.primal,
            dual: r.dual,
            gap: r.gap,
        }
    });
    log::debug!("interior point exit {:?} after {} iterations", out.exit, out.iterations);

    let it = &out.it;
    let sol = match out.exit {
        ipm::Exit::PrimalInfeasible => {
            let (_, mut y, s) = recover(&vec![0.0; it.x.len()], &it.z, true);
            let by = dot(&p.b, &y);
            y.iter_mut().for_each(|v| *v /= by);
            let s = s.iter().map(|v| v / by).collect();
            Solution {
                status: Status::PrimalInfeasible,
                x: vec![0.0; n],
                y,
                s,
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: out.iterations,
                residuals: Residuals::default(),
            }
        }
        ipm::Exit::DualInfeasible => {
            let (mut x, _, _) = recover(&it.x, &vec![0.0; it.z.len()], true);
            let cx = dot(&p.c, &x);
            x.iter_mut().for_each(|v| *v /= -cx);
            Solution {
                status: Status::DualInfeasible,
                x,
                y: vec![0.0; m],
                s: vec![0.0; n],
                primal_objective: f64::NEG_INFINITY,
                dual_objective: f64::NEG_INFINITY,
                iterations: out.iterations,
                residuals: Residuals::default(),
            }
        }
        exit => {
            let inv = 1.0 / it.tau;
            let xs: Vec<f64> = it.x.iter().map(|v| v * inv).collect();
            let zs: Vec<f64> = it.z.iter().map(|v| v * inv).collect();
            let (x, y, s) = recover(&xs, &zs, false);
            let status = match exit {
                ipm::Exit::Converged => Status::Optimal,
                ipm::Exit::MaxIters => Status::MaxIters,
                _ => Status::NumericalFailure,
            };
            Solution {
                status,
                primal_objective: dot(&p.c, &x) + p.offset,
                dual_objective: dot(&p.b, &y) + p.offset,
                residuals: residuals(p, &x, &y, &s),
                x,
                y,
                s,
                iterations: out.iterations,
            }
        }
    };
    Ok(sol)
}

/// Builds a program from triplets; convenience for tests and small models.
pub fn program_from_triplets(
    c: Vec<f64>,
    rows: usize,
    t: &Triplets,
    b: Vec<f64>,
    cones: Vec<Cone>,
) -> Result<ConicProgram, ProgramError> {
    let a = crate::sparse::CscMatrix::from_triplets(rows, c.len(), t);
    ConicProgram::new(c, 0.0, a, b, cones)
}
