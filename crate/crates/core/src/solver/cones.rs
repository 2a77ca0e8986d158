//! Symmetric cone algebra and Nesterov–Todd scaling for the solver's
//! internal cones (nonnegative orthant and second-order cone).
//!
//! The internal slack vector covers only the conic rows; equality rows have
//! a zero cone and carry no scaling.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockKind {
    Nonneg,
    Soc,
}

#[derive(Debug, Clone)]
struct Block {
    kind: BlockKind,
    range: Range<usize>,
    /// Nonneg: `√(s/z)` per entry. Soc: the normalized scaling point `w̄`.
    w: Vec<f64>,
    /// Soc only: `η` with `W = η W̄`.
    eta: f64,
    /// Soc only: `λ₀² − ‖λ₁‖²`, equal to `√(det s · det z)`.
    lam_det: f64,
}

/// Product of internal cones over a slack vector of length `dim`.
#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    blocks: Vec<Block>,
    dim: usize,
    /// `λ = W z = W⁻ᵀ s`
    pub lambda: Vec<f64>,
}

fn soc_residual(x: &[f64]) -> f64 {
    let t: f64 = x[1..].iter().map(|v| v * v).sum();
    (x[0] - t.sqrt()) * (x[0] + t.sqrt())
}

impl ConeSet {
    pub fn new(spec: &[(BlockKind, usize)]) -> Self {
        let mut start = 0;
        let blocks: Vec<Block> = spec
            .iter()
            .map(|&(kind, d)| {
                let b = Block {
                    kind,
                    range: start..start + d,
                    w: vec![if kind == BlockKind::Nonneg { 1.0 } else { 0.0 }; d],
                    eta: 1.0,
                    lam_det: 1.0,
                };
                start += d;
                b
            })
            .collect();
        Self {
            blocks,
            dim: start,
            lambda: vec![0.0; start],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Barrier degree `ν`.
    pub fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Nonneg => b.range.len(),
                BlockKind::Soc => 1,
            })
            .sum()
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for b in &self.blocks {
            match b.kind {
                BlockKind::Nonneg => e[b.range.clone()].fill(1.0),
                BlockKind::Soc => e[b.range.start] = 1.0,
            }
        }
        e
    }

    /// Whether `x` lies strictly inside every block.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        self.blocks.iter().all(|b| {
            let v = &x[b.range.clone()];
            match b.kind {
                BlockKind::Nonneg => v.iter().all(|t| *t > 0.0),
                BlockKind::Soc => v[0] > 0.0 && soc_residual(v) > 0.0,
            }
        })
    }

    /// Smallest spectral value of `x` over all blocks.
    pub fn min_eig(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let v = &x[b.range.clone()];
                match b.kind {
                    BlockKind::Nonneg => v.iter().copied().fold(f64::INFINITY, f64::min),
                    BlockKind::Soc => v[0] - v[1..].iter().map(|t| t * t).sum::<f64>().sqrt(),
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Moves `x` into the interior by adding a multiple of the identity when needed.
    pub fn shift_to_interior(&self, x: &mut [f64]) {
        let m = self.min_eig(x);
        if m < 1e-8 || !m.is_finite() {
            let shift = 1.0 - m.min(0.0);
            let e = self.identity();
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi += shift * ei;
            }
        }
    }

    /// Computes the NT scaling at strictly interior `(s, z)` and `λ`.
    ///
    /// Returns `false` if either point has left the interior.
    pub fn update_scaling(&mut self, s: &[f64], z: &[f64]) -> bool {
        for b in &mut self.blocks {
            let r = b.range.clone();
            let (sb, zb) = (&s[r.clone()], &z[r.clone()]);
            match b.kind {
                BlockKind::Nonneg => {
                    for k in 0..sb.len() {
                        if !(sb[k] > 0.0 && zb[k] > 0.0) {
                            return false;
                        }
                        b.w[k] = (sb[k] / zb[k]).sqrt();
                        self.lambda[r.start + k] = (sb[k] * zb[k]).sqrt();
                    }
                }
                BlockKind::Soc => {
                    let (sres, zres) = (soc_residual(sb), soc_residual(zb));
                    if !(sres > 0.0 && zres > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                        return false;
                    }
                    let (sn, zn) = (sres.sqrt(), zres.sqrt());
                    let dot: f64 = sb.iter().zip(zb).map(|(a, c)| a * c).sum::<f64>() / (sn * zn);
                    let gamma = ((1.0 + dot) / 2.0).sqrt();
                    b.w[0] = (sb[0] / sn + zb[0] / zn) / (2.0 * gamma);
                    for k in 1..sb.len() {
                        b.w[k] = (sb[k] / sn - zb[k] / zn) / (2.0 * gamma);
                    }
                    // w̄ lies on the unit hyperboloid; recompute w̄₀ for accuracy
                    let tail: f64 = b.w[1..].iter().map(|v| v * v).sum();
                    b.w[0] = (1.0 + tail).sqrt();
                    b.eta = (sres / zres).sqrt().sqrt();
                    let mut lam = vec![0.0; sb.len()];
                    wbar_mul(&b.w, zb, &mut lam);
                    // restore the exact determinant lost to rounding
                    b.lam_det = sn * zn;
                    let tail: f64 = lam[1..].iter().map(|v| v * v).sum::<f64>() * b.eta * b.eta;
                    lam[0] = (tail + b.lam_det).sqrt() / b.eta;
                    for (k, l) in lam.into_iter().enumerate() {
                        self.lambda[r.start + k] = b.eta * l;
                    }
                }
            }
        }
        true
    }

    /// `out = W v`
    pub fn w_mul(&self, v: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r.clone() {
                        out[k] = b.w[k - r.start] * v[k];
                    }
                }
                BlockKind::Soc => {
                    wbar_mul(&b.w, &v[r.clone()], &mut out[r.clone()]);
                    out[r].iter_mut().for_each(|o| *o *= b.eta);
                }
            }
        }
    }

    /// `out = W⁻¹ v` (`W` is symmetric, so this is also `W⁻ᵀ v`).
    pub fn w_inv_mul(&self, v: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r.clone() {
                        out[k] = v[k] / b.w[k - r.start];
                    }
                }
                BlockKind::Soc => {
                    // W̄⁻¹ = J W̄ J
                    let mut jv: Vec<f64> = v[r.clone()].to_vec();
                    jv[1..].iter_mut().for_each(|t| *t = -*t);
                    let o = &mut out[r];
                    wbar_mul(&b.w, &jv, o);
                    o[1..].iter_mut().for_each(|t| *t = -*t);
                    o.iter_mut().for_each(|t| *t /= b.eta);
                }
            }
        }
    }

    /// Appends the upper triangle of each `WᵀW` block as `(row, col, value)`
    /// with block-local offsets added to `offset`.
    pub fn wtw_entries(&self, offset: usize, out: &mut Vec<(usize, usize, f64)>) {
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r.clone() {
                        let w = b.w[k - r.start];
                        out.push((offset + k, offset + k, w * w));
                    }
                }
                BlockKind::Soc => {
                    let d = r.len();
                    let mut col = vec![0.0; d];
                    let mut e = vec![0.0; d];
                    let mut tmp = vec![0.0; d];
                    for j in 0..d {
                        e.fill(0.0);
                        e[j] = 1.0;
                        wbar_mul(&b.w, &e, &mut tmp);
                        wbar_mul(&b.w, &tmp, &mut col);
                        for i in 0..=j {
                            out.push((offset + r.start + i, offset + r.start + j, b.eta * b.eta * col[i]));
                        }
                    }
                }
            }
        }
    }

    /// Number of stored upper-triangular `WᵀW` entries; fixed for a given layout.
    pub fn wtw_nnz(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Nonneg => b.range.len(),
                BlockKind::Soc => b.range.len() * (b.range.len() + 1) / 2,
            })
            .sum()
    }

    /// `y = WᵀW x`, used by iterative refinement.
    pub fn wtw_mul(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; self.dim];
        self.w_mul(x, &mut tmp);
        self.w_mul(&tmp, y);
    }

    /// Jordan product `u ∘ v`.
    pub fn circ(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r {
                        out[k] = u[k] * v[k];
                    }
                }
                BlockKind::Soc => {
                    let (u0, v0) = (u[r.start], v[r.start]);
                    out[r.start] = u[r.clone()].iter().zip(&v[r.clone()]).map(|(a, c)| a * c).sum();
                    for k in r.start + 1..r.end {
                        out[k] = u0 * v[k] + v0 * u[k];
                    }
                }
            }
        }
    }

    /// Solves `λ ∘ w = u` for `w`.
    pub fn lambda_div(&self, u: &[f64], out: &mut [f64]) {
        let lam = &self.lambda;
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r {
                        out[k] = u[k] / lam[k];
                    }
                }
                BlockKind::Soc => {
                    let l0 = lam[r.start];
                    let l1 = &lam[r.start + 1..r.end];
                    let u1 = &u[r.start + 1..r.end];
                    let det = b.lam_det;
                    let l1u1: f64 = l1.iter().zip(u1).map(|(a, c)| a * c).sum();
                    let w0 = (l0 * u[r.start] - l1u1) / det;
                    out[r.start] = w0;
                    for (k, (&lk, &uk)) in l1.iter().zip(u1).enumerate() {
                        out[r.start + 1 + k] = (uk - w0 * lk) / l0;
                    }
                }
            }
        }
    }

    /// Largest `α ≤ cap` keeping both `s + αΔs` and `z + αΔz` in the cone,
    /// tested in the scaled space where both reduce to `λ + α(·)`.
    pub fn max_step_scaled(&self, ds: &[f64], dz: &[f64], cap: f64) -> f64 {
        let mut u = vec![0.0; self.dim];
        self.w_inv_mul(ds, &mut u);
        let a = self.max_step(&self.lambda, &u, cap);
        self.w_mul(dz, &mut u);
        self.max_step(&self.lambda, &u, a)
    }

    /// Largest `α ≤ cap` with `x + α d` in the cone.
    pub fn max_step(&self, x: &[f64], d: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        for b in &self.blocks {
            let r = b.range.clone();
            match b.kind {
                BlockKind::Nonneg => {
                    for k in r {
                        if d[k] < 0.0 {
                            alpha = alpha.min(-x[k] / d[k]);
                        }
                    }
                }
                BlockKind::Soc => alpha = alpha.min(soc_step(&x[r.clone()], &d[r])),
            }
        }
        alpha.max(0.0)
    }
}

/// `out = W̄ v` with `W̄ = [w₀ w₁ᵀ; w₁ I + w₁w₁ᵀ/(1 + w₀)]`.
fn wbar_mul(w: &[f64], v: &[f64], out: &mut [f64]) {
    let w0 = w[0];
    let w1v1: f64 = w[1..].iter().zip(&v[1..]).map(|(a, c)| a * c).sum();
    out[0] = w0 * v[0] + w1v1;
    let f = v[0] + w1v1 / (1.0 + w0);
    for k in 1..w.len() {
        out[k] = v[k] + f * w[k];
    }
}

/// Largest `α` with `x + α d ∈ SOC` for interior `x`.
fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    let jdot = |a: &[f64], b: &[f64]| a[0] * b[0] - a[1..].iter().zip(&b[1..]).map(|(p, q)| p * q).sum::<f64>();
    let a = jdot(d, d);
    let b = jdot(x, d);
    let c = soc_residual(x).max(0.0);
    let disc = b * b - a * c;
    let mut alpha = f64::INFINITY;
    if a < 0.0 || (b < 0.0 && disc >= 0.0) {
        let den = -b + disc.max(0.0).sqrt();
        alpha = if den > 0.0 { c / den } else { 0.0 };
    }
    // the quadratic does not separate the cone from its negative
    if d[0] < 0.0 {
        alpha = alpha.min(-x[0] / d[0]);
    }
    alpha
}
