//! Backward time marching for the obstacle problem
//! `du/dt + N u + 𝒩_g(u) ∋ f`, `u(T) = g(T)`.
//!
//! Each implicit step solves the discrete inclusion
//! `u + hN_h u + h·η = prev + h·f`, `u ≥ g`, `η ∈ 𝒩_g(u)` through one of
//! two penalizations:
//!
//! * classic: `θ + hNθ − (h/ε)(θ−g)⁻ = rhs`, a piecewise-linear semismooth
//!   system solved by active-set Newton;
//! * bounded: `θ + hNθ + g₁(θ−g)/(ε+|θ−g|) = rhs + g₁`, a smooth monotone
//!   system with the penalty force capped by `g₁`.
//!
//! The multiplier is recovered from the converged penalty term divided by
//! `h`, so it is nonpositive and supported (up to `ε`) on the contact set.

mod boundary;
mod config;
mod march;
mod residual;
mod step;

pub use boundary::{free_boundary, FreeBoundary};
pub use config::{PenaltyKind, SolverConfig};
pub use march::{backward_solve, backward_solve_from, SolutionField, SourceField};
pub use residual::complementarity_residual;
pub use step::{implicit_step, penalized_solve_bounded, penalized_solve_classic};

use thiserror::Error;

use crate::discretization::OpError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton diverged: residual {residual:.3e} after {iters} iterations (time index {time_index:?})")]
    NewtonDiverged {
        residual: f64,
        iters: usize,
        time_index: Option<usize>,
    },
    #[error("bad step: h*omega >= 1 (h = {h}, omega = {omega})")]
    BadStep { h: f64, omega: f64 },
    #[error("at time index {time_index}: {source}")]
    AtTime {
        time_index: usize,
        #[source]
        source: Box<SolveError>,
    },
    #[error(transparent)]
    Op(#[from] OpError),
}

impl SolveError {
    fn at_time(self, k: usize) -> SolveError {
        match self {
            SolveError::NewtonDiverged {
                residual, iters, ..
            } => SolveError::NewtonDiverged {
                residual,
                iters,
                time_index: Some(k),
            },
            other => SolveError::AtTime {
                time_index: k,
                source: Box::new(other),
            },
        }
    }
}
