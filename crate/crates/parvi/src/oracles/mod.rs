//! Independent pricing and LCP references used to validate the VI solver.
//!
//! None of these share code with the PDE path: the tree does backward
//! induction on a recombining lattice, the closed forms are textbook
//! Black–Scholes, the Monte Carlo estimator regresses continuation values
//! on simulated paths, and the small-scale LCP oracle enumerates active
//! sets exactly.

mod binomial;
mod european;
mod lcp;
mod lsmc;

pub use binomial::binomial_american;
pub use european::bs_european;
pub use lcp::lcp_exact;
pub use lsmc::{lsmc_american, LsmcConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("regression basis is collinear (rank {rank} < {cols}); reduce the degree")]
    SingularRegression { rank: usize, cols: usize },
    #[error("no active set satisfies the LCP sign conditions (best violation {best_violation:.3e})")]
    NoSolution { best_violation: f64 },
    #[error("active-set enumeration limited to 20 nodes, got {0}")]
    TooLarge(usize),
    #[error("exercise dates must be nonempty, sorted inside [0, T], ending at T")]
    BadDates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Put,
    Call,
}

/// Value estimate from an oracle; `stderr` is present exactly for the
/// stochastic ones.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    pub stderr: Option<f64>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
}

impl OracleResult {
    pub(crate) fn deterministic(value: f64, steps: usize) -> Self {
        OracleResult {
            value,
            stderr: None,
            steps: Some(steps),
            paths: None,
            seed: None,
        }
    }
}
