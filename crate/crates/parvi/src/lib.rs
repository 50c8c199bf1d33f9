//! Pricing engine for American-style contingent claims built on backward
//! parabolic variational inequalities in weighted `L²(μ)` spaces.
//!
//! The reference measure `μ(dx) = a·ρ(x)dx` is chosen excessive for the
//! pricing diffusion, i.e. `L₀*ρ ≤ ωρ` for a finite shift `ω`. Working in
//! `L²(μ)` instead of Sobolev spaces w.r.t. Lebesgue measure tolerates
//! degenerate volatilities (GBM at the origin, Heston at `v = 0`, the
//! drift-only axes of the Asian system), so one discretization path covers
//! the whole model catalog.
//!
//! Pipeline:
//!
//! 1. [`models`] — model catalog (drift/diffusion/discount), explicit
//!    excessive densities, payoffs, and the numeric `ω` certificate.
//! 2. [`grid`] — tensor grids over truncated domains plus the `μ`-weighted
//!    quadrature that realizes the discrete `L²(μ)` inner product.
//! 3. [`discretization`] — the sparse monotone operator `N_h = −L_h + cI`,
//!    its resolvent `(I + λN_h)⁻¹` and Yosida approximation.
//! 4. [`vi_solver`] — implicit time marching of the obstacle problem via
//!    classic or bounded penalization with a semismooth Newton inner loop.
//! 5. [`oracles`] — independent references: CRR trees, Black–Scholes closed
//!    forms, least-squares Monte Carlo, and exact small-scale LCP solves.

pub mod discretization;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod oracles;
pub mod vi_solver;

pub use discretization::{
    apply_adjoint_to_density, assemble, resolvent, weighted_dot, weighted_norm, yosida,
    DiscreteOperator, DriftScheme, OpError,
};
pub use grid::{make_grid, quadrature_weights, AxisSpec, BoundaryKind, Grading, Grid, GridError};
pub use models::{
    certify_excessive, make_excessive_density, make_model, make_obstacle, CertifyError,
    ExcessiveDensity, ModelError, ModelName, ModelParams, ModelSpec, ObstacleKind, ObstacleParams,
    ObstacleSpec,
};
pub use oracles::{
    binomial_american, bs_european, lcp_exact, lsmc_american, LsmcConfig, OptionKind, OracleError,
    OracleResult,
};
pub use vi_solver::{
    backward_solve, complementarity_residual, free_boundary, implicit_step,
    penalized_solve_bounded, penalized_solve_classic, FreeBoundary, PenaltyKind, SolutionField,
    SolveError, SolverConfig, SourceField,
};
