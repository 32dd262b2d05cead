//! Sparse CSR matrices, conjugate gradients and the dense fallback used by
//! the Floater and PDE solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix built from triplets.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut csr =
            Csr { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: vec![], values: vec![] };
        let mut row = 0usize;
        for &(r, c, v) in &sorted {
            if csr.col_idx.len() > csr.row_ptr[row]
                && r == row
                && *csr.col_idx.last().unwrap() == c
            {
                *csr.values.last_mut().unwrap() += v;
                continue;
            }
            while row < r {
                row += 1;
                csr.row_ptr[row] = csr.col_idx.len();
            }
            csr.col_idx.push(c);
            csr.values.push(v);
        }
        while row < nrows {
            row += 1;
            csr.row_ptr[row] = csr.col_idx.len();
        }
        csr
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn transpose_matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * x[r];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }
}

/// Threshold below which sparse systems are solved densely.
pub const DENSE_FALLBACK_LIMIT: usize = 2000;

/// Solves `A x = b`. Dense LU below [`DENSE_FALLBACK_LIMIT`] unknowns,
/// conjugate gradients on the symmetrised normal equations above it.
pub fn solve(a: &Csr, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows != a.ncols || a.nrows != b.len() {
        return Err(Error::SingularSystem("dimension mismatch".into()));
    }
    if a.nrows == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.nrows < DENSE_FALLBACK_LIMIT {
        let dense = a.to_dense();
        let lu = dense.lu();
        match lu.solve(b) {
            Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
            _ => Err(Error::SingularSystem("dense LU failed".into())),
        }
    } else {
        cg_normal_equations(a, b, 1e-12, 10 * a.nrows)
    }
}

/// Conjugate gradients on `A^T A x = A^T b` to the given relative residual.
pub fn cg_normal_equations(
    a: &Csr,
    b: &DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let atb = a.transpose_matvec(b);
    let norm0 = atb.norm();
    if norm0 == 0.0 {
        return Ok(DVector::zeros(a.ncols));
    }
    let mut x = DVector::zeros(a.ncols);
    let mut r = atb.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    for _ in 0..max_iters {
        let ap = a.transpose_matvec(&a.matvec(&p));
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            return Err(Error::SingularSystem("CG breakdown".into()));
        }
        let alpha = rs / denom;
        x += alpha * &p;
        r -= alpha * &ap;
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= rel_tol * norm0 {
            return Ok(x);
        }
        p = &r + (rs_new / rs) * p;
        rs = rs_new;
    }
    Err(Error::SingularSystem("CG did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matvec() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0), (0, 1, 1.0)]);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = a.matvec(&x);
        assert!((y[0] - 6.0).abs() < 1e-14); // 2*1 + (1+1)*2
        assert!((y[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn dense_solve_small() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve(&a, &b).unwrap();
        let y = a.matvec(&x);
        assert!((y - b).norm() < 1e-12);
    }

    #[test]
    fn cg_matches_dense() {
        let a = Csr::from_triplets(
            3,
            3,
            &[(0, 0, 5.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 4.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 3.0)],
        );
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let dense = solve(&a, &b).unwrap();
        let cg = cg_normal_equations(&a, &b, 1e-12, 1000).unwrap();
        assert!((dense - cg).norm() < 1e-9);
    }
}
