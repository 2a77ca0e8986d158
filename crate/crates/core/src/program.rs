//! Standard-form conic programs.
//!
//! A [`ConicProgram`] is `min cᵀx + offset` subject to `A x = b`, `x ∈ K`,
//! where `K` is a product of cone blocks laid out over consecutive columns.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::sparse::{norm_inf, CscMatrix, Triplets};

/// One block of the variable cone.
///
/// `RotatedSecondOrder` is `{(u, w, t) : u·w ≥ ‖t‖², u ≥ 0, w ≥ 0}`. Its dual
/// cone is `{(a, b, c) : 4·a·b ≥ ‖c‖², a ≥ 0, b ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    Free(usize),
    Nonnegative(usize),
    SecondOrder(usize),
    RotatedSecondOrder(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Free,
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
}

impl Cone {
    pub fn new(kind: ConeKind, dim: usize) -> Self {
        match kind {
            ConeKind::Free => Cone::Free(dim),
            ConeKind::Nonnegative => Cone::Nonnegative(dim),
            ConeKind::SecondOrder => Cone::SecondOrder(dim),
            ConeKind::RotatedSecondOrder => Cone::RotatedSecondOrder(dim),
        }
    }

    pub fn kind(&self) -> ConeKind {
        match self {
            Cone::Free(_) => ConeKind::Free,
            Cone::Nonnegative(_) => ConeKind::Nonnegative,
            Cone::SecondOrder(_) => ConeKind::SecondOrder,
            Cone::RotatedSecondOrder(_) => ConeKind::RotatedSecondOrder,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Cone::Free(d) | Cone::Nonnegative(d) | Cone::SecondOrder(d) | Cone::RotatedSecondOrder(d) => d,
        }
    }

    /// Signed distance-like margin of `x` in the cone: nonnegative iff `x ∈ K`.
    ///
    /// For the second-order cone this is the smallest spectral value
    /// `x₀ − ‖x₁‖`; the rotated cone uses the same quantity after the
    /// linear map onto the second-order cone.
    pub fn margin(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Cone::Free(_) => f64::INFINITY,
            Cone::Nonnegative(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
            Cone::SecondOrder(_) => x[0] - tail_norm(&x[1..]),
            Cone::RotatedSecondOrder(_) => rotated_margin(x[0], x[1], &x[2..]),
        }
    }

    /// Margin of `s` in the dual cone `K*`.
    pub fn dual_margin(&self, s: &[f64]) -> f64 {
        match self {
            Cone::Free(_) => -norm_inf(s),
            Cone::Nonnegative(_) | Cone::SecondOrder(_) => self.margin(s),
            Cone::RotatedSecondOrder(_) => {
                let half: Vec<f64> = s[2..].iter().map(|v| 0.5 * v).collect();
                rotated_margin(s[0], s[1], &half)
            }
        }
    }

    fn min_dim(&self) -> usize {
        match self {
            Cone::Free(_) | Cone::Nonnegative(_) => 0,
            Cone::SecondOrder(_) => 2,
            Cone::RotatedSecondOrder(_) => 3,
        }
    }
}

fn tail_norm(t: &[f64]) -> f64 {
    t.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rotated_margin(u: f64, w: f64, t: &[f64]) -> f64 {
    let d = u - w;
    let r = (d * d + 4.0 * t.iter().map(|v| v * v).sum::<f64>()).sqrt();
    0.5 * (u + w - r)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProgramError {
    #[error("cone dimensions sum to {cones} but the program has {vars} variables")]
    ConeDimMismatch { cones: usize, vars: usize },
    #[error("cone block {index} ({kind:?}) has dimension {dim}, below the minimum")]
    ConeTooSmall { index: usize, kind: ConeKind, dim: usize },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("constraint matrix entry ({row},{col}) lies outside {rows}x{cols}")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed program dump: {0}")]
    Dump(String),
}

/// `min cᵀx + offset  s.t.  A x = b,  x ∈ K₁ × … × K_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub offset: f64,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
}

/// Feasibility summary of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCheck {
    /// `‖A x − b‖∞`
    pub equality_residual: f64,
    /// Smallest cone margin over all non-free blocks (`+∞` if there are none).
    pub min_cone_margin: f64,
}

impl PointCheck {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.equality_residual <= tol && self.min_cone_margin >= -tol
    }
}

impl ConicProgram {
    pub fn new(
        c: Vec<f64>,
        offset: f64,
        a: CscMatrix,
        b: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self, ProgramError> {
        let var_names = (0..c.len()).map(|j| format!("x{j}")).collect();
        let row_names = (0..b.len()).map(|i| format!("r{i}")).collect();
        let p = Self {
            c,
            offset,
            a,
            b,
            cones,
            var_names,
            row_names,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.c.len();
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != n {
            return Err(ProgramError::ConeDimMismatch { cones: total, vars: n });
        }
        for (index, cone) in self.cones.iter().enumerate() {
            if cone.dim() < cone.min_dim() {
                return Err(ProgramError::ConeTooSmall {
                    index,
                    kind: cone.kind(),
                    dim: cone.dim(),
                });
            }
        }
        let check = |what, got, expected| {
            if got != expected {
                Err(ProgramError::LengthMismatch { what, got, expected })
            } else {
                Ok(())
            }
        };
        check("A columns", self.a.ncols(), n)?;
        check("b", self.b.len(), self.a.nrows())?;
        check("var_names", self.var_names.len(), n)?;
        check("row_names", self.row_names.len(), self.b.len())?;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !self.offset.is_finite() {
            return Err(ProgramError::NonFinite("c"));
        }
        if !finite(&self.b) {
            return Err(ProgramError::NonFinite("b"));
        }
        if !finite(self.a.nzval()) {
            return Err(ProgramError::NonFinite("A"));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Column ranges of the cone blocks, in order.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.cones
            .iter()
            .map(|c| {
                let r = start..start + c.dim();
                start += c.dim();
                r
            })
            .collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        crate::sparse::dot(&self.c, x) + self.offset
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    pub fn min_cone_margin(&self, x: &[f64]) -> f64 {
        self.cones
            .iter()
            .zip(self.block_ranges())
            .map(|(c, r)| c.margin(&x[r]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest margin of `s` in the dual cone `K*`.
    pub fn min_dual_cone_margin(&self, s: &[f64]) -> f64 {
        self.cones
            .iter()
            .zip(self.block_ranges())
            .map(|(c, r)| c.dual_margin(&s[r]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_point(&self, x: &[f64]) -> PointCheck {
        PointCheck {
            equality_residual: norm_inf(&self.residual(x)),
            min_cone_margin: self.min_cone_margin(x),
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    /// Rewrites every rotated block `(u, w, t)` as a second-order block
    /// `(u + w, u − w, 2t)` by a change of variables. The optimal value is
    /// unchanged; `x` of the original is recovered with [`Self::rotated_back`].
    pub fn rotated_to_second_order(&self) -> ConicProgram {
        let mut t = Triplets::default();
        let mut c = self.c.clone();
        let mut cones = self.cones.clone();
        let ranges = self.block_ranges();
        // column j of the new program as a combination of old columns
        let mut combo: Vec<Vec<(usize, f64)>> = (0..self.num_vars()).map(|j| vec![(j, 1.0)]).collect();
        for (k, cone) in self.cones.iter().enumerate() {
            if let Cone::RotatedSecondOrder(d) = *cone {
                let r = &ranges[k];
                let (u, w) = (r.start, r.start + 1);
                // u = (a + b)/2, w = (a − b)/2, t = t'/2
                combo[u] = vec![(u, 0.5), (w, 0.5)];
                combo[w] = vec![(u, 0.5), (w, -0.5)];
                for j in r.start + 2..r.end {
                    combo[j] = vec![(j, 0.5)];
                }
                cones[k] = Cone::SecondOrder(d);
            }
        }
        let cols: Vec<Vec<(usize, f64)>> = (0..self.num_vars()).map(|j| self.a.col(j).collect()).collect();
        for (j, parts) in combo.iter().enumerate() {
            c[j] = parts.iter().map(|&(o, f)| f * self.c[o]).sum();
            for &(o, f) in parts {
                for &(i, v) in &cols[o] {
                    t.push(i, j, f * v);
                }
            }
        }
        ConicProgram {
            c,
            offset: self.offset,
            a: CscMatrix::from_triplets(self.num_rows(), self.num_vars(), &t),
            b: self.b.clone(),
            cones,
            var_names: self.var_names.clone(),
            row_names: self.row_names.clone(),
        }
    }

    /// Maps a solution of [`Self::rotated_to_second_order`] back to this program's variables.
    pub fn rotated_back(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for (cone, r) in self.cones.iter().zip(self.block_ranges()) {
            if let Cone::RotatedSecondOrder(_) = cone {
                let (a, b) = (x[r.start], x[r.start + 1]);
                out[r.start] = 0.5 * (a + b);
                out[r.start + 1] = 0.5 * (a - b);
                for j in r.start + 2..r.end {
                    out[j] = 0.5 * x[j];
                }
            }
        }
        out
    }

    pub fn to_dump(&self) -> ProgramDump {
        ProgramDump {
            num_vars: self.num_vars(),
            num_rows: self.num_rows(),
            c: self.c.clone(),
            offset: self.offset,
            a: self.a.to_triplets(),
            b: self.b.clone(),
            cones: self.cones.clone(),
            var_names: self.var_names.clone(),
            row_names: self.row_names.clone(),
        }
    }

    pub fn from_dump(d: ProgramDump) -> Result<Self, ProgramError> {
        let t = &d.a;
        if t.rows.len() != t.vals.len() || t.cols.len() != t.vals.len() {
            return Err(ProgramError::Dump("triplet arrays differ in length".into()));
        }
        for (&row, &col) in t.rows.iter().zip(&t.cols) {
            if row >= d.num_rows || col >= d.num_vars {
                return Err(ProgramError::EntryOutOfRange {
                    row,
                    col,
                    rows: d.num_rows,
                    cols: d.num_vars,
                });
            }
        }
        let p = ConicProgram {
            a: CscMatrix::from_triplets(d.num_rows, d.num_vars, t),
            c: d.c,
            offset: d.offset,
            b: d.b,
            cones: d.cones,
            var_names: d.var_names,
            row_names: d.row_names,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("program dump is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, ProgramError> {
        let d: ProgramDump = serde_json::from_str(s).map_err(|e| ProgramError::Dump(e.to_string()))?;
        Self::from_dump(d)
    }
}

/// JSON-facing layout of a [`ConicProgram`]: objective, `A` as zero-based
/// triplets, right-hand side, cone layout and name tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDump {
    pub num_vars: usize,
    pub num_rows: usize,
    pub c: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub a: Triplets,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
}

/// Incremental assembly of a [`ConicProgram`].
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    cones: Vec<Cone>,
    var_names: Vec<String>,
    c: Vec<f64>,
    offset: f64,
    a: Triplets,
    b: Vec<f64>,
    row_names: Vec<String>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a cone block and returns the index of its first variable.
    pub fn add_block<S: Into<String>>(&mut self, kind: ConeKind, names: impl IntoIterator<Item = S>) -> usize {
        let start = self.var_names.len();
        self.var_names.extend(names.into_iter().map(Into::into));
        let dim = self.var_names.len() - start;
        self.c.resize(self.var_names.len(), 0.0);
        if dim > 0 {
            self.cones.push(Cone::new(kind, dim));
        }
        start
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.b.len();
        for &(j, v) in coefs {
            self.a.push(row, j, v);
        }
        self.b.push(rhs);
        self.row_names.push(name.into());
        row
    }

    pub fn add_cost(&mut self, var: usize, coef: f64) {
        self.c[var] += coef;
    }

    pub fn add_offset(&mut self, v: f64) {
        self.offset += v;
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn build(self) -> ConicProgram {
        let (m, n) = (self.b.len(), self.var_names.len());
        let p = ConicProgram {
            a: CscMatrix::from_triplets(m, n, &self.a),
            c: self.c,
            offset: self.offset,
            b: self.b,
            cones: self.cones,
            var_names: self.var_names,
            row_names: self.row_names,
        };
        debug_assert!(p.validate().is_ok());
        p
    }
}
