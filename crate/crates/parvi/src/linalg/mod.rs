//! Sparse kernels for the implicit solves: row-compressed storage, a
//! no-pivot banded LU for the low-dimensional grids, and Jacobi-
//! preconditioned BiCGSTAB for everything else.
//!
//! Pivoting-free factorization is safe here: every system is of the form
//! `I + λN + D` with `N` an M-matrix-patterned operator and `D ≥ 0`
//! diagonal, hence strictly diagonally dominant with positive diagonal.

mod banded;
mod bicgstab;
mod csr;

pub use banded::BandedLu;
pub use bicgstab::bicgstab;
pub use csr::Csr;

/// Shifted-system helper: applies `y = x + lam·(N x) + extra .* x`.
pub fn shifted_matvec(n_mat: &Csr, lam: f64, extra_diag: Option<&[f64]>, x: &[f64], y: &mut [f64]) {
    n_mat.matvec(x, y);
    match extra_diag {
        Some(d) => {
            for i in 0..x.len() {
                y[i] = x[i] + lam * y[i] + d[i] * x[i];
            }
        }
        None => {
            for i in 0..x.len() {
                y[i] = x[i] + lam * y[i];
            }
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
