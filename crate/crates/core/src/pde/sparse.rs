//! Compressed-row matrices and an ILU(0)-preconditioned BiCGSTAB solver.
//!
//! Everything here runs sequentially in a fixed order so that repeated
//! solves are bitwise reproducible.

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout. Column indices are sorted within each
/// row and every row stores its diagonal entry (possibly zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists. Duplicate columns are summed
    /// and a zero diagonal is inserted where missing.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.push((i, 0.0));
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                assert!(c < n, "column {c} out of range for {n}x{n} matrix");
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            let d = start + cols[start..].binary_search(&i).unwrap();
            diag.push(d);
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.vals[self.diag[i]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            out[i] = acc;
        }
    }

    /// `alpha·I + beta·self`, with rows in `identity_rows` replaced by unit
    /// rows.
    pub fn shifted(&self, alpha: f64, beta: f64, identity_rows: &[bool]) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            if identity_rows[i] {
                for v in &mut m.vals[r] {
                    *v = 0.0;
                }
                m.vals[m.diag[i]] = 1.0;
            } else {
                for v in &mut m.vals[r] {
                    *v *= beta;
                }
                m.vals[m.diag[i]] += alpha;
            }
        }
        m
    }

    pub fn add_to_diagonal(&mut self, i: usize, v: f64) {
        let d = self.diag[i];
        self.vals[d] += v;
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
struct Ilu0 {
    lu: CsrMatrix,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        // position lookup for the current row
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.cols[p]] = p;
            }
            for p in start..end {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[lu.diag[k]];
                let factor = lu.vals[p] / pivot;
                lu.vals[p] = factor;
                for q in lu.diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    let pj = pos[j];
                    if pj != usize::MAX {
                        lu.vals[pj] -= factor * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.cols[p]] = usize::MAX;
            }
            let d = lu.vals[lu.diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::LinearSolve {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
        }
        Ok(Self { lu })
    }

    fn apply(&self, rhs: &[f64], out: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = rhs[i];
            for p in lu.row_ptr[i]..lu.diag[i] {
                acc -= lu.vals[p] * out[lu.cols[p]];
            }
            out[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = out[i];
            for p in lu.diag[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[p] * out[lu.cols[p]];
            }
            out[i] = acc / lu.vals[lu.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `a·x = b` to an absolute max-norm residual of `tol`, starting
/// from the contents of `x`.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.n();
    let pre = Ilu0::new(a)?;
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm_inf(&r);
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho == 0.0 {
            break;
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        pre.apply(&p, &mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm_inf(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(finish(a, b, x, it));
        }
        pre.apply(&s, &mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm_inf(&r);
        if res <= tol {
            return Ok(finish(a, b, x, it));
        }
        if omega == 0.0 {
            break;
        }
        rho_old = rho;
    }
    // recurrence residuals drift; judge on the true residual
    let stats = finish(a, b, x, max_iter);
    if stats.residual <= tol {
        Ok(stats)
    } else {
        Err(Error::LinearSolve {
            iterations: max_iter,
            residual: stats.residual.max(res),
        })
    }
}

fn finish(a: &CsrMatrix, b: &[f64], x: &[f64], iterations: usize) -> SolveStats {
    let mut r = vec![0.0; a.n()];
    a.mul_vec(x, &mut r);
    let residual = r.iter().zip(b).fold(0.0f64, |m, (ax, bi)| m.max((bi - ax).abs()));
    SolveStats {
        iterations,
        residual,
    }
}
