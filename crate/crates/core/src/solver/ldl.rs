//! LDLᵀ factorizations of quasi-definite matrices given as upper-triangular
//! CSC. Pivots whose sign disagrees with the expected inertia are replaced
//! by a small value of the right sign.

const NONE: usize = usize::MAX;

/// Pivot regularization thresholds.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PivotReg {
    pub eps: f64,
    pub delta: f64,
}

impl Default for PivotReg {
    fn default() -> Self {
        Self { eps: 1e-13, delta: 2e-7 }
    }
}

impl PivotReg {
    fn fix(&self, d: f64, sign: f64) -> (f64, bool) {
        if !(d * sign > self.eps) {
            (sign * self.delta, true)
        } else {
            (d, false)
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SparseLdl {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
}

impl SparseLdl {
    /// Symbolic analysis of the upper-triangular pattern `(colptr, rowval)`.
    pub fn new(n: usize, colptr: &[usize], rowval: &[usize]) -> Self {
        let mut work = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        let mut etree = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &r in &rowval[colptr[j]..colptr[j + 1]] {
                debug_assert!(r <= j, "pattern must be upper triangular");
                let mut i = r;
                while i != j && work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        Self {
            n,
            etree,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
        }
    }

    /// Numeric factorization; returns the number of regularized pivots.
    pub fn factor(&mut self, colptr: &[usize], rowval: &[usize], vals: &[f64], signs: &[f64], reg: PivotReg) -> usize {
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut used = vec![false; n];
        let mut yidx = Vec::with_capacity(n);
        let mut elim = Vec::with_capacity(n);
        let mut next = self.lp[..n].to_vec();
        let mut bumped = 0;
        for k in 0..n {
            yidx.clear();
            self.d[k] = 0.0;
            for p in colptr[k]..colptr[k + 1] {
                let b = rowval[p];
                if b == k {
                    self.d[k] = vals[p];
                    continue;
                }
                y[b] = vals[p];
                if used[b] {
                    continue;
                }
                used[b] = true;
                elim.clear();
                elim.push(b);
                let mut t = self.etree[b];
                while t != NONE && t < k && !used[t] {
                    used[t] = true;
                    elim.push(t);
                    t = self.etree[t];
                }
                yidx.extend(elim.drain(..).rev());
            }
            for &c in yidx.iter().rev() {
                let yc = y[c];
                let end = next[c];
                for j in self.lp[c]..end {
                    y[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[end] = k;
                let l = yc * self.dinv[c];
                self.lx[end] = l;
                self.d[k] -= yc * l;
                next[c] += 1;
                y[c] = 0.0;
                used[c] = false;
            }
            let (d, fixed) = reg.fix(self.d[k], signs[k]);
            bumped += fixed as usize;
            self.d[k] = d;
            self.dinv[k] = 1.0 / d;
        }
        bumped
    }

    /// Solves in place.
    pub fn solve(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.dinv[i];
        }
        for i in (0..self.n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
    }
}

/// Dense LDLᵀ for small systems.
#[derive(Debug, Clone)]
pub(crate) struct DenseLdl {
    n: usize,
    /// Row-major unit lower factor (diagonal unused).
    l: Vec<f64>,
    d: Vec<f64>,
}

impl DenseLdl {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            l: vec![0.0; n * n],
            d: vec![0.0; n],
        }
    }

    pub fn factor(&mut self, colptr: &[usize], rowval: &[usize], vals: &[f64], signs: &[f64], reg: PivotReg) -> usize {
        let n = self.n;
        let a = &mut self.l;
        a.fill(0.0);
        for j in 0..n {
            for p in colptr[j]..colptr[j + 1] {
                a[j * n + rowval[p]] += vals[p];
            }
        }
        let mut bumped = 0;
        for j in 0..n {
            let mut dj = a[j * n + j];
            for k in 0..j {
                dj -= a[j * n + k] * a[j * n + k] * self.d[k];
            }
            let (dj, fixed) = reg.fix(dj, signs[j]);
            bumped += fixed as usize;
            self.d[j] = dj;
            for i in j + 1..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= a[i * n + k] * a[j * n + k] * self.d[k];
                }
                a[i * n + j] = v / dj;
            }
        }
        bumped
    }

    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[i * n + k] * x[k];
            }
            x[i] = v;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.l[k * n + i] * x[k];
            }
            x[i] = v;
        }
    }
}
