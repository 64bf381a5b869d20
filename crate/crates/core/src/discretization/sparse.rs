//! Compressed sparse rows and preconditioned conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Square matrix in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
    /// Position of the diagonal entry in each row.
    pub diag_pos: Vec<usize>,
}

impl Csr {
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut col = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        let mut diag_pos = vec![usize::MAX; n];
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if c as usize == i {
                    diag_pos[i] = col.len();
                }
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val, diag_pos }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn diag(&self) -> Vec<f64> {
        self.diag_pos.iter().map(|&p| if p == usize::MAX { 0.0 } else { self.val[p] }).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col[a..b].binary_search(&(j as u32)) {
            Ok(p) => self.val[a + p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[p] * x[self.col[p] as usize];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[p] as usize;
                m = m.max((self.val[p] - self.get(j, i)).abs());
            }
        }
        m
    }

    /// `A + diag(d)` with the same pattern.
    pub fn with_diagonal_added(&self, d: &[f64], scale_self: f64) -> Csr {
        let mut out = self.clone();
        for v in out.val.iter_mut() {
            *v *= scale_self;
        }
        for i in 0..self.n {
            out.val[out.diag_pos[i]] += d[i];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    /// Incomplete Cholesky with no fill, in diagonal form `(D + L) D⁻¹ (D + Lᵀ)`.
    Ic0,
}

/// Factored preconditioner.
#[derive(Debug, Clone)]
pub enum Factor {
    Jacobi(Vec<f64>),
    Ic0(Vec<f64>),
}

impl Factor {
    pub fn new(a: &Csr, kind: Preconditioner) -> Factor {
        match kind {
            Preconditioner::Jacobi => Factor::Jacobi(a.diag().iter().map(|d| 1.0 / d).collect()),
            Preconditioner::Ic0 => {
                let mut d = a.diag();
                for i in 0..a.n {
                    let mut s = d[i];
                    for p in a.row_ptr[i]..a.diag_pos[i] {
                        let j = a.col[p] as usize;
                        s -= a.val[p] * a.val[p] / d[j];
                    }
                    if !(s > 0.0) {
                        return Factor::new(a, Preconditioner::Jacobi);
                    }
                    d[i] = s;
                }
                Factor::Ic0(d)
            }
        }
    }

    /// `z = P⁻¹ r`.
    pub fn apply(&self, a: &Csr, r: &[f64], z: &mut [f64]) {
        match self {
            Factor::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = r[i] * inv[i];
                }
            }
            Factor::Ic0(d) => {
                // (D + L) y = r
                for i in 0..a.n {
                    let mut s = r[i];
                    for p in a.row_ptr[i]..a.diag_pos[i] {
                        s -= a.val[p] * z[a.col[p] as usize];
                    }
                    z[i] = s / d[i];
                }
                // (D + Lᵀ) z = D y
                for i in (0..a.n).rev() {
                    let mut s = 0.0;
                    for p in a.diag_pos[i] + 1..a.row_ptr[i + 1] {
                        s += a.val[p] * z[a.col[p] as usize];
                    }
                    z[i] -= s / d[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients for SPD `a`. `x` holds the initial guess.
/// Stops when `‖b - a x‖ ≤ tol ‖b‖`.
pub fn pcg(a: &Csr, factor: &Factor, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = a.n;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, residual: 0.0 });
    }
    let mut r = a.mul(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    factor.apply(a, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut res = norm2(&r) / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        a.mul_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            bail!(Spectrum, "operator is not positive definite (pᵀAp = {pq})");
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = norm2(&r) / bnorm;
        if !res.is_finite() {
            bail!(Solver, "conjugate gradients diverged");
        }
        factor.apply(a, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        return Ok(CgStats { iterations: max_iter, residual: res });
    }
    bail!(Solver, "conjugate gradients stopped at relative residual {res} after {max_iter} iterations")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 2.0)];
                if i > 0 {
                    r.push((i as u32 - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i as u32 + 1, -1.0));
                }
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        let a = laplace_1d(50);
        let f = Factor::new(&a, Preconditioner::Ic0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 50];
        let st = pcg(&a, &f, &b, &mut x, 1e-12, 10).unwrap();
        assert!(st.iterations <= 2);
        let r = a.mul(&x);
        for i in 0..50 {
            assert!((r[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let a = laplace_1d(10).with_diagonal_added(&[0.0; 10], -1.0);
        let f = Factor::new(&a, Preconditioner::Jacobi);
        let mut x = vec![0.0; 10];
        let e = pcg(&a, &f, &[1.0; 10], &mut x, 1e-10, 100);
        assert!(matches!(e, Err(crate::Error::Spectrum(_))));
    }
}
