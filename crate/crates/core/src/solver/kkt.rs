//! Quasi-definite KKT system
//!
//! ```text
//! [ εI   Aᵀ       ] [x]   [r_x]
//! [ A   −(H + εI) ] [z] = [r_z]
//! ```
//!
//! with `H = diag(0, WᵀW)` (zero on equality rows). The pattern is fixed,
//! ordered once, and refactored every iteration.

use super::cones::ConeSet;
use super::ldl::{DenseLdl, PivotReg, SparseLdl};
use super::ordering::minimum_degree;
use crate::sparse::{norm_inf, CscMatrix};

/// Linear-algebra backend choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KktMethod {
    /// Dense for small systems, sparse otherwise.
    #[default]
    Auto,
    Sparse,
    Dense,
}

const DENSE_LIMIT: usize = 120;
const STATIC_REG: f64 = 1e-8;
const MAX_REG: f64 = 1e-4;

#[derive(Debug, Clone)]
enum Backend {
    Sparse(SparseLdl),
    Dense(DenseLdl),
}

#[derive(Debug, Clone)]
pub(crate) struct Kkt {
    n: usize,
    m_eq: usize,
    dim: usize,
    a: CscMatrix,
    at: CscMatrix,
    /// Original-order values; `[A | x diag | eq diag | WᵀW]`.
    vals: Vec<f64>,
    nnz_fixed: usize,
    /// `iperm[orig] = permuted index`
    iperm: Vec<usize>,
    map: Vec<usize>,
    colptr: Vec<usize>,
    rowval: Vec<usize>,
    pvals: Vec<f64>,
    signs: Vec<f64>,
    backend: Backend,
    buf_h: Vec<(usize, usize, f64)>,
    reg: f64,
}

impl Kkt {
    pub fn new(a: &CscMatrix, m_eq: usize, cones: &mut ConeSet, method: KktMethod) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let dim = n + m;
        let mut coords: Vec<(usize, usize)> = Vec::new();
        let mut vals = Vec::new();
        for (i, j, v) in a.iter() {
            coords.push((j, n + i));
            vals.push(v);
        }
        for j in 0..n {
            coords.push((j, j));
            vals.push(STATIC_REG);
        }
        for i in 0..m_eq {
            coords.push((n + i, n + i));
            vals.push(-STATIC_REG);
        }
        let nnz_fixed = coords.len();
        // pattern of WᵀW at the identity scaling
        let e = cones.identity();
        cones.update_scaling(&e, &e);
        let mut h = Vec::with_capacity(cones.wtw_nnz());
        cones.wtw_entries(n + m_eq, &mut h);
        for &(r, c, _) in &h {
            coords.push((r, c));
            vals.push(0.0);
        }

        let perm = minimum_degree(dim, coords.iter().copied());
        let mut iperm = vec![0; dim];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let mut signs = vec![0.0; dim];
        for i in 0..dim {
            signs[iperm[i]] = if i < n { 1.0 } else { -1.0 };
        }

        // upper CSC in permuted order
        let pc: Vec<(usize, usize)> = coords
            .iter()
            .map(|&(r, c)| {
                let (pr, pc) = (iperm[r], iperm[c]);
                (pr.min(pc), pr.max(pc))
            })
            .collect();
        let mut order: Vec<usize> = (0..pc.len()).collect();
        order.sort_by_key(|&k| (pc[k].1, pc[k].0));
        let mut colptr = vec![0; dim + 1];
        let mut rowval = Vec::with_capacity(pc.len());
        let mut map = vec![0; pc.len()];
        for (pos, &k) in order.iter().enumerate() {
            colptr[pc[k].1 + 1] += 1;
            rowval.push(pc[k].0);
            map[k] = pos;
        }
        for j in 0..dim {
            colptr[j + 1] += colptr[j];
        }

        let dense = match method {
            KktMethod::Dense => true,
            KktMethod::Sparse => false,
            KktMethod::Auto => dim <= DENSE_LIMIT,
        };
        let backend = if dense {
            Backend::Dense(DenseLdl::new(dim))
        } else {
            Backend::Sparse(SparseLdl::new(dim, &colptr, &rowval))
        };
        let nnz = rowval.len();
        Self {
            n,
            m_eq,
            dim,
            a: a.clone(),
            at: a.transpose(),
            vals,
            nnz_fixed,
            iperm,
            map,
            colptr,
            rowval,
            pvals: vec![0.0; nnz],
            signs,
            backend,
            buf_h: h,
            reg: STATIC_REG,
        }
    }

    #[cfg(test)]
    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    /// Refactors with the current cone scaling. Returns the number of
    /// regularized pivots.
    pub fn update(&mut self, cones: &ConeSet) -> usize {
        self.reg = STATIC_REG;
        self.refactor(cones)
    }

    /// Refactors with ten times more static regularization. Returns `false`
    /// once the cap is reached.
    pub fn strengthen(&mut self, cones: &ConeSet) -> bool {
        if self.reg >= MAX_REG {
            return false;
        }
        self.reg *= 10.0;
        self.refactor(cones);
        true
    }

    fn refactor(&mut self, cones: &ConeSet) -> usize {
        let (n, m_eq, reg) = (self.n, self.m_eq, self.reg);
        for v in &mut self.vals[self.nnz_fixed - n - m_eq..self.nnz_fixed - m_eq] {
            *v = reg;
        }
        for v in &mut self.vals[self.nnz_fixed - m_eq..self.nnz_fixed] {
            *v = -reg;
        }
        self.buf_h.clear();
        cones.wtw_entries(self.n + self.m_eq, &mut self.buf_h);
        for (k, &(r, c, v)) in self.buf_h.iter().enumerate() {
            self.vals[self.nnz_fixed + k] = -v - if r == c { reg } else { 0.0 };
        }
        for (k, &v) in self.vals.iter().enumerate() {
            self.pvals[self.map[k]] = v;
        }
        let reg = PivotReg::default();
        let bumped = match &mut self.backend {
            Backend::Sparse(f) => f.factor(&self.colptr, &self.rowval, &self.pvals, &self.signs, reg),
            Backend::Dense(f) => f.factor(&self.colptr, &self.rowval, &self.pvals, &self.signs, reg),
        };
        bumped
    }

    fn raw_solve(&self, rhs: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.dim];
        for i in 0..self.dim {
            w[self.iperm[i]] = rhs[i];
        }
        match &self.backend {
            Backend::Sparse(f) => f.solve(&mut w),
            Backend::Dense(f) => f.solve(&mut w),
        }
        for i in 0..self.dim {
            out[i] = w[self.iperm[i]];
        }
    }

    /// `K v` without regularization.
    fn apply(&self, cones: &ConeSet, v: &[f64], out: &mut [f64]) {
        let (n, m_eq) = (self.n, self.m_eq);
        let (vx, vz) = v.split_at(n);
        let (ox, oz) = out.split_at_mut(n);
        ox.fill(0.0);
        self.at.gemv(1.0, vz, ox);
        oz.fill(0.0);
        self.a.gemv(1.0, vx, oz);
        let mut h = vec![0.0; cones.dim()];
        cones.wtw_mul(&vz[m_eq..], &mut h);
        for (o, hv) in oz[m_eq..].iter_mut().zip(h) {
            *o -= hv;
        }
    }

    /// Solves `K [x; z] = rhs` with iterative refinement. Also returns the
    /// final residual relative to `1 + ‖rhs‖∞`.
    pub fn solve(&self, cones: &ConeSet, rhs: &[f64]) -> (Vec<f64>, f64) {
        let mut sol = vec![0.0; self.dim];
        self.raw_solve(rhs, &mut sol);
        let scale = 1.0 + norm_inf(rhs);
        let mut kx = vec![0.0; self.dim];
        let mut res = vec![0.0; self.dim];
        let mut delta = vec![0.0; self.dim];
        let mut last = f64::INFINITY;
        let mut r = 0.0;
        for _ in 0..10 {
            self.apply(cones, &sol, &mut kx);
            for i in 0..self.dim {
                res[i] = rhs[i] - kx[i];
            }
            r = norm_inf(&res);
            if r <= 1e-14 * scale || r >= 0.5 * last {
                break;
            }
            last = r;
            self.raw_solve(&res, &mut delta);
            let mut trial = sol.clone();
            for i in 0..self.dim {
                trial[i] += delta[i];
            }
            self.apply(cones, &trial, &mut kx);
            let diff: Vec<f64> = (0..self.dim).map(|i| rhs[i] - kx[i]).collect();
            let r_new = norm_inf(&diff);
            if r_new < r || r.is_nan() {
                sol = trial;
                r = r_new;
            } else {
                break;
            }
        }
        (sol, r / scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::cones::BlockKind;
    use crate::sparse::Triplets;

    fn system(method: KktMethod) -> (Kkt, ConeSet, Vec<f64>) {
        // 3 variables, one equality row, then a nonneg row and a 2-dim SOC
        let mut t = Triplets::default();
        for (i, j, v) in [(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0), (1, 0, -1.0), (2, 1, -1.0), (3, 2, -1.0)] {
            t.push(i, j, v);
        }
        let a = CscMatrix::from_triplets(4, 3, &t);
        let mut cones = ConeSet::new(&[(BlockKind::Nonneg, 1), (BlockKind::Soc, 2)]);
        let mut kkt = Kkt::new(&a, 1, &mut cones, method);
        cones.update_scaling(&[2.0, 3.0, 1.0], &[0.5, 1.0, -0.5]);
        kkt.update(&cones);
        (kkt, cones, vec![1.0, -1.0, 0.5, 2.0, 0.0, 1.0, -1.0])
    }

    #[test]
    fn refined_solution_has_small_residual() {
        for method in [KktMethod::Sparse, KktMethod::Dense] {
            let (kkt, cones, rhs) = system(method);
            let (sol, _) = kkt.solve(&cones, &rhs);
            let mut kx = vec![0.0; rhs.len()];
            kkt.apply(&cones, &sol, &mut kx);
            let err = kx.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{method:?}: {err}");
        }
    }

    #[test]
    fn backends_agree() {
        let (ks, cs, rhs) = system(KktMethod::Sparse);
        let (kd, cd, _) = system(KktMethod::Dense);
        assert!(!ks.is_dense() && kd.is_dense());
        let (a, b) = (ks.solve(&cs, &rhs).0, kd.solve(&cd, &rhs).0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
