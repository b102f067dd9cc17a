//! Compressed sparse rows and a Jacobi-preconditioned BiCGSTAB.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        Self { n, indptr, indices: Vec::with_capacity(nnz), data: Vec::with_capacity(nnz) }
    }

    /// Appends a row; duplicate column indices are summed.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let start = self.indices.len();
        for &(j, v) in entries {
            if let Some(pos) = self.indices[start..].iter().position(|&c| c == j) {
                self.data[start + pos] += v;
            } else {
                self.indices.push(j);
                self.data.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows_filled(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.indptr[i]..self.indptr[i + 1]).find(|&k| self.indices[k] == i).map_or(0.0, |k| self.data[k]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` to `‖b − Ax‖ ≤ tol ‖b‖`, starting from `x`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.dim();
    assert_eq!(a.rows_filled(), n, "matrix rows not fully assembled");
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);

    let mut total = 0;
    // restart when the shadow residual degenerates
    for _restart in 0..20 {
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        loop {
            let res = norm(&r) / bnorm;
            if res <= tol {
                return Ok(SolveStats { iterations: total, relative_residual: res });
            }
            if total >= max_iter {
                return Err(Error::Numeric(format!(
                    "BiCGSTAB stalled at relative residual {res:.3e} after {total} iterations"
                )));
            }
            total += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = inv_diag[i] * p[i];
            }
            a.matvec(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm <= tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                r.copy_from_slice(&s);
                continue;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * s[i];
            }
            a.matvec(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            if omega.abs() < 1e-300 {
                break;
            }
        }
        // recompute the true residual before restarting
        a.matvec(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    }
    let res = norm(&r) / bnorm;
    if res <= tol {
        Ok(SolveStats { iterations: total, relative_residual: res })
    } else {
        Err(Error::Numeric(format!("BiCGSTAB broke down at relative residual {res:.3e}")))
    }
}
