//! Assembly of the sparse discrete operator `N_h = −L_h + cI` on a tensor
//! grid, plus resolvent-level operations.
//!
//! Interior rows discretize `−½Tr[a D²] − ⟨b, D⟩ + c` with central second
//! differences on nonuniform stencils and upwinded first derivatives. The
//! off-diagonal entries are kept nonpositive so that `(I + λN_h)⁻¹` is a
//! nonnegative matrix — the discrete form of positivity preservation that
//! the obstacle iteration relies on.

mod adjoint;
mod assemble;
mod ops;

pub use adjoint::apply_adjoint_to_density;
pub use assemble::{assemble, assemble_with_scheme, DriftScheme};
pub use ops::{hyp1_alt_diagnostic, resolvent, weighted_dot, weighted_norm, yosida};
pub(crate) use ops::solve_shifted;

use thiserror::Error;

use crate::grid::Grid;
use crate::linalg::Csr;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("degenerate stencil spacing on axis {axis} near node {node}")]
    StencilFailure { axis: usize, node: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("linear solve failed: relative residual {residual:.3e} above tolerance {tol:.1e}")]
    SolveFailure { residual: f64, tol: f64 },
    #[error("bad lambda {lam}: resolvent requires 0 <= lambda < 1/omega (omega = {omega})")]
    BadLambda { lam: f64, omega: f64 },
    #[error("density not positive at {coords:?}")]
    NonPositiveDensity { coords: Vec<f64> },
    #[error("grid box exceeds the density truncation on axis {axis}")]
    TruncationMismatch { axis: usize },
}

/// Relative residual demanded of every linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// Unknown-count threshold below which low-dimensional grids use the direct
/// banded factorization.
pub const DIRECT_LIMIT: usize = 200_000;

/// The assembled operator: immutable, shareable across threads; solves on
/// distinct right-hand sides may run concurrently.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix_n: Csr,
    mu_weights: Vec<f64>,
    omega: f64,
    grid: Grid,
    dirichlet: Vec<bool>,
    nonmonotone_rows: usize,
    bandwidth: usize,
}

impl DiscreteOperator {
    /// Wraps a raw matrix as an operator (testing and oracle harnesses).
    pub fn from_raw(matrix_n: Csr, mu_weights: Vec<f64>, omega: f64, grid: Grid) -> Self {
        let bandwidth = matrix_n.bandwidth();
        let n = matrix_n.n();
        DiscreteOperator {
            matrix_n,
            mu_weights,
            omega,
            grid,
            dirichlet: vec![false; n],
            nonmonotone_rows: 0,
            bandwidth,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix_n.n()
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix_n
    }

    pub fn mu_weights(&self) -> &[f64] {
        &self.mu_weights
    }

    /// Accretivity shift carried from the density certificate.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Nodes pinned to the obstacle by a Dirichlet face.
    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, idx: usize) -> bool {
        self.dirichlet[idx]
    }

    /// Rows whose off-diagonal sign pattern departs from the M-matrix form
    /// (mixed derivatives, wrong-way one-sided faces). Zero for the catalog
    /// under upwind or hybrid drift schemes.
    pub fn nonmonotone_rows(&self) -> usize {
        self.nonmonotone_rows
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Whether shifted systems on this operator go through the banded
    /// direct factorization.
    pub fn prefers_direct(&self) -> bool {
        self.grid.dim() <= 2 && self.n() <= DIRECT_LIMIT
    }

    /// Largest admissible resolvent parameter, `1/ω` for `ω > 0`.
    pub fn lambda_limit(&self) -> f64 {
        if self.omega > 0.0 {
            1.0 / self.omega
        } else {
            f64::INFINITY
        }
    }
}
