//! Cheap reductions and Ruiz equilibration with exact postsolve.
//!
//! Removed: empty rows, rows proportional to an earlier row, and singleton
//! rows on free or nonnegative columns (the column is fixed). Any
//! inconsistency found on the way is reported with a Farkas vector.

use std::collections::HashMap;

use crate::program::{Cone, ConeKind, ConicProgram};
use crate::sparse::{norm_inf, CscMatrix, Triplets};

#[derive(Debug, Clone)]
pub(crate) struct Fixing {
    col: usize,
    row: usize,
    value: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    /// Reduced and scaled program solved by the interior-point method.
    pub program: ConicProgram,
    keep_rows: Vec<usize>,
    keep_cols: Vec<usize>,
    fixings: Vec<Fixing>,
    d_row: Vec<f64>,
    e_col: Vec<f64>,
    sigma: f64,
}

pub(crate) enum Outcome {
    Reduced(Box<Presolved>),
    /// `y` with `Aᵀy = 0` on the relevant columns and `bᵀy > 0`.
    Infeasible { y: Vec<f64> },
}

/// Options controlling which reductions run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub reduce: bool,
    pub scale: bool,
}

pub(crate) fn presolve(p: &ConicProgram, settings: Settings) -> Outcome {
    let (m, n) = (p.num_rows(), p.num_vars());
    let mut col_kind = vec![ConeKind::Free; n];
    for (cone, r) in p.cones.iter().zip(p.block_ranges()) {
        col_kind[r].fill(cone.kind());
    }
    let at = p.a.transpose();
    let rows: Vec<Vec<(usize, f64)>> = (0..m).map(|i| at.col(i).collect()).collect();
    let mut row_on = vec![true; m];
    let mut col_on = vec![true; n];
    let mut b = p.b.clone();
    let mut offset = p.offset;
    let mut fixings = Vec::new();
    let tol = 1e-9 * norm_inf(&p.b).max(1.0);

    if settings.reduce {
        loop {
            let mut changed = false;
            for i in 0..m {
                if !row_on[i] {
                    continue;
                }
                let live: Vec<(usize, f64)> = rows[i].iter().copied().filter(|&(j, _)| col_on[j]).collect();
                match live.as_slice() {
                    [] => {
                        if b[i].abs() > tol {
                            let mut y = vec![0.0; m];
                            y[i] = b[i].signum();
                            return Outcome::Infeasible { y };
                        }
                        row_on[i] = false;
                        changed = true;
                    }
                    &[(j, a)] if matches!(col_kind[j], ConeKind::Free | ConeKind::Nonnegative) => {
                        let mut value = b[i] / a;
                        if col_kind[j] == ConeKind::Nonnegative {
                            if value < -tol {
                                // Farkas: y = −eᵢ/a has Aᵀy ≤ 0 on column j and bᵀy > 0
                                let mut y = vec![0.0; m];
                                y[i] = -1.0 / a;
                                return Outcome::Infeasible { y };
                            }
                            value = value.max(0.0);
                        }
                        row_on[i] = false;
                        col_on[j] = false;
                        for (k, v) in p.a.col(j) {
                            b[k] -= v * value;
                        }
                        offset += p.c[j] * value;
                        fixings.push(Fixing { col: j, row: i, value });
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }

        // proportional rows
        let mut seen: HashMap<Vec<usize>, Vec<(usize, Vec<f64>, f64)>> = HashMap::new();
        for i in 0..m {
            if !row_on[i] {
                continue;
            }
            let mut live: Vec<(usize, f64)> = rows[i].iter().copied().filter(|&(j, _)| col_on[j]).collect();
            live.sort_by_key(|e| e.0);
            let lead = live[0].1;
            let cols: Vec<usize> = live.iter().map(|e| e.0).collect();
            let norm: Vec<f64> = live.iter().map(|e| e.1 / lead).collect();
            let rhs = b[i] / lead;
            let bucket = seen.entry(cols).or_default();
            let twin = bucket
                .iter()
                .find(|(_, v, _)| v.iter().zip(&norm).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0)));
            match twin {
                Some(&(k, _, rk)) => {
                    if (rk - rhs).abs() > tol * (1.0 + rk.abs()) {
                        // row_i/lead − row_k/lead_k = 0 with a nonzero right-hand side
                        let lead_k = rows[k].iter().filter(|e| col_on[e.0]).min_by_key(|e| e.0).unwrap().1;
                        let mut y = vec![0.0; m];
                        let sgn = (rhs - rk).signum();
                        y[i] = sgn / lead;
                        y[k] = -sgn / lead_k;
                        return Outcome::Infeasible { y };
                    }
                    row_on[i] = false;
                }
                None => bucket.push((i, norm, rhs)),
            }
        }
    }

    let keep_rows: Vec<usize> = (0..m).filter(|&i| row_on[i]).collect();
    let keep_cols: Vec<usize> = (0..n).filter(|&j| col_on[j]).collect();
    let mut new_row = vec![usize::MAX; m];
    for (k, &i) in keep_rows.iter().enumerate() {
        new_row[i] = k;
    }
    let mut t = Triplets::default();
    for (k, &j) in keep_cols.iter().enumerate() {
        for (i, v) in p.a.col(j) {
            if row_on[i] {
                t.push(new_row[i], k, v);
            }
        }
    }
    let mut a = CscMatrix::from_triplets(keep_rows.len(), keep_cols.len(), &t);
    let mut c: Vec<f64> = keep_cols.iter().map(|&j| p.c[j]).collect();
    let mut rb: Vec<f64> = keep_rows.iter().map(|&i| b[i]).collect();

    // surviving blocks; only free and nonnegative blocks ever shrink
    let mut cones = Vec::new();
    let mut groups: Vec<std::ops::Range<usize>> = Vec::new();
    let mut pos = 0;
    for (cone, r) in p.cones.iter().zip(p.block_ranges()) {
        let k = r.filter(|&j| col_on[j]).count();
        if k == 0 {
            continue;
        }
        match cone {
            Cone::Free(_) | Cone::Nonnegative(_) => {
                cones.push(Cone::new(cone.kind(), k));
                groups.extend((pos..pos + k).map(|j| j..j + 1));
            }
            _ => {
                cones.push(cone.clone());
                groups.push(pos..pos + k);
            }
        }
        pos += k;
    }

    let (d_row, e_col, sigma) = if settings.scale {
        equilibrate(&mut a, &groups)
    } else {
        (vec![1.0; a.nrows()], vec![1.0; a.ncols()], 1.0)
    };
    if settings.scale {
        for (ci, e) in c.iter_mut().zip(&e_col) {
            *ci *= e;
        }
    }
    let sigma = if settings.scale {
        let cn = norm_inf(&c);
        if cn > 0.0 {
            (1.0 / cn).clamp(1e-4, 1e4)
        } else {
            sigma
        }
    } else {
        sigma
    };
    c.iter_mut().for_each(|ci| *ci *= sigma);
    for (bi, d) in rb.iter_mut().zip(&d_row) {
        *bi *= d;
    }
    let program = ConicProgram {
        c,
        offset: offset * sigma,
        a,
        b: rb,
        cones,
        var_names: keep_cols.iter().map(|&j| p.var_names[j].clone()).collect(),
        row_names: keep_rows.iter().map(|&i| p.row_names[i].clone()).collect(),
    };
    Outcome::Reduced(Box::new(Presolved {
        program,
        keep_rows,
        keep_cols,
        fixings,
        d_row,
        e_col,
        sigma,
    }))
}

/// Ruiz equilibration in the infinity norm; columns in one group share a scale.
fn equilibrate(a: &mut CscMatrix, groups: &[std::ops::Range<usize>]) -> (Vec<f64>, Vec<f64>, f64) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    for _ in 0..15 {
        let mut rn = vec![0.0f64; m];
        let mut cn = vec![0.0f64; n];
        for (i, j, v) in a.iter() {
            rn[i] = rn[i].max(v.abs());
            cn[j] = cn[j].max(v.abs());
        }
        let dr: Vec<f64> = rn.iter().map(|&r| if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 }).collect();
        let mut ec = vec![1.0; n];
        for g in groups {
            let mx = cn[g.clone()].iter().copied().fold(0.0, f64::max);
            if mx > 0.0 {
                ec[g.clone()].fill(1.0 / mx.sqrt());
            }
        }
        let mut dr_eff = dr.clone();
        for i in 0..m {
            let nd = (d[i] * dr[i]).clamp(1e-4, 1e4);
            dr_eff[i] = nd / d[i];
            d[i] = nd;
        }
        let mut ec_eff = ec.clone();
        for j in 0..n {
            let ne = (e[j] * ec[j]).clamp(1e-4, 1e4);
            ec_eff[j] = ne / e[j];
            e[j] = ne;
        }
        a.scale(&dr_eff, &ec_eff);
        let spread = rn.iter().chain(&cn).filter(|v| **v > 0.0).fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if spread.1 - spread.0 < 1e-3 {
            break;
        }
    }
    (d, e, 1.0)
}

impl Presolved {
    /// Maps a reduced, scaled primal-dual point back to the original program.
    /// With `ray` set the point is a direction: fixed columns get zero and
    /// `c` drops out of the multiplier recovery.
    pub fn postsolve(&self, orig: &ConicProgram, x: &[f64], y: &[f64], s: &[f64], ray: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (m, n) = (orig.num_rows(), orig.num_vars());
        let mut xo = vec![0.0; n];
        let mut so = vec![0.0; n];
        let mut yo = vec![0.0; m];
        for (k, &j) in self.keep_cols.iter().enumerate() {
            xo[j] = self.e_col[k] * x[k];
            so[j] = s[k] / (self.e_col[k] * self.sigma);
        }
        for (k, &i) in self.keep_rows.iter().enumerate() {
            yo[i] = self.d_row[k] * y[k] / self.sigma;
        }
        for f in self.fixings.iter().rev() {
            xo[f.col] = if ray { 0.0 } else { f.value };
            let mut a_rj = 0.0;
            let mut acc = if ray { 0.0 } else { orig.c[f.col] };
            for (i, v) in orig.a.col(f.col) {
                if i == f.row {
                    a_rj += v;
                } else {
                    acc -= v * yo[i];
                }
            }
            yo[f.row] = acc / a_rj;
        }
        (xo, yo, so)
    }
}
