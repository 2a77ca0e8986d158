//! Explicit conic duals.
//!
//! For `min cᵀx + c₀ s.t. A x = b, x ∈ K` the dual is
//! `max bᵀy + c₀ s.t. c − Aᵀy ∈ K*`. It is written back in the same
//! minimization form over `(y, σ)`:
//!
//! ```text
//! min −bᵀy − c₀   s.t.   Aᵀy + D σ = c,   y free,   σ ∈ K'
//! ```
//!
//! where `K'` drops the free blocks of `K` (their rows become `Aᵀy = c`) and
//! `D` is the identity except on rotated blocks, where `D = diag(1, 1, 2, …)`
//! carries the rotated cone onto its dual.

use serde::Serialize;

use crate::program::{Cone, ConicProgram};
use crate::sparse::{CscMatrix, Triplets};

/// Where a dual variable comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualOrigin {
    /// Multiplier of a primal equality row.
    Row { row: usize },
    /// Slack entry `offset` of primal cone block `block`.
    Block { block: usize, offset: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct DualProgram {
    /// The dual as a minimization; its optimal value is the negated dual value.
    #[serde(skip)]
    pub program: ConicProgram,
    /// One entry per variable of `program`.
    pub mapping: Vec<DualOrigin>,
    /// Number of row multipliers `y` (the first variables).
    pub num_multipliers: usize,
}

impl DualProgram {
    /// The dual objective `bᵀy + c₀` from an optimal value of [`Self::program`].
    pub fn dual_value(&self, min_value: f64) -> f64 {
        -min_value
    }

    /// Row multipliers `y` from a vector of dual variables.
    pub fn multipliers<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.num_multipliers]
    }

    /// Dual variables `(y, σ)` for a given `y`, with `σ` read off the rows.
    /// Free-block rows are not checked here; see [`ConicProgram::check_point`].
    pub fn complete(&self, y: &[f64]) -> Vec<f64> {
        let p = &self.program;
        let mut x = vec![0.0; p.num_vars()];
        x[..y.len()].copy_from_slice(y);
        let at = p.a.transpose();
        for (k, origin) in self.mapping.iter().enumerate().skip(self.num_multipliers) {
            let DualOrigin::Block { .. } = origin else { unreachable!() };
            // σ_k appears in exactly one row with coefficient 1 or 2
            let col: Vec<(usize, f64)> = p.a.col(k).collect();
            let (row, d) = col[0];
            let mut acc = p.b[row];
            for (j, a) in at.col(row) {
                if j < self.num_multipliers {
                    acc -= a * y[j];
                }
            }
            x[k] = acc / d;
        }
        x
    }
}

pub fn build_dual(p: &ConicProgram) -> DualProgram {
    let (m, n) = (p.num_rows(), p.num_vars());
    let at = p.a.transpose();
    let mut t = Triplets::default();
    for (j, i, v) in at.iter() {
        // entry (j, i) of Aᵀ
        t.push(j, i, v);
    }
    let mut mapping: Vec<DualOrigin> = (0..m).map(|row| DualOrigin::Row { row }).collect();
    let mut var_names: Vec<String> = p.row_names.iter().map(|r| format!("y_{r}")).collect();
    let mut cones = vec![Cone::Free(m)];
    for (block, (cone, range)) in p.cones.iter().zip(p.block_ranges()).enumerate() {
        if let Cone::Free(_) = cone {
            continue;
        }
        for (offset, j) in range.clone().enumerate() {
            let d = match cone {
                Cone::RotatedSecondOrder(_) if offset >= 2 => 2.0,
                _ => 1.0,
            };
            t.push(j, mapping.len(), d);
            mapping.push(DualOrigin::Block { block, offset });
            var_names.push(format!("s_{}", p.var_names[j]));
        }
        cones.push(*cone);
    }
    if m == 0 {
        cones.remove(0);
    }
    let nv = mapping.len();
    let mut c = vec![0.0; nv];
    for (ci, bi) in c.iter_mut().zip(&p.b) {
        *ci = -bi;
    }
    let program = ConicProgram {
        c,
        offset: -p.offset,
        a: CscMatrix::from_triplets(n, nv, &t),
        b: p.c.clone(),
        cones,
        var_names,
        row_names: p.var_names.iter().map(|v| format!("dual_{v}")).collect(),
    };
    debug_assert!(program.validate().is_ok());
    DualProgram {
        program,
        mapping,
        num_multipliers: m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DualityGap {
    pub absolute: f64,
    pub relative: f64,
}

/// `primal − dual`, and the same over `max(1, |primal|)`.
pub fn duality_gap(primal_value: f64, dual_value: f64) -> DualityGap {
    let absolute = primal_value - dual_value;
    DualityGap {
        absolute,
        relative: absolute / primal_value.abs().max(1.0),
    }
}
