//! Backward time marching and the solution container.

use std::sync::Arc;

use super::residual::complementarity_residual_parts;
use super::step::{implicit_step_cached, StepCache};
use super::{SolveError, SolverConfig};
use crate::discretization::DiscreteOperator;
use crate::grid::Grid;
use crate::models::ObstacleSpec;

/// Right-hand side `f(t, x)` of the inclusion.
#[derive(Clone, Default)]
pub enum SourceField {
    #[default]
    Zero,
    Fn(Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>),
}

impl SourceField {
    pub fn from_fn(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        SourceField::Fn(Arc::new(f))
    }

    fn eval_nodes(&self, t: f64, grid: &Grid) -> Vec<f64> {
        match self {
            SourceField::Zero => vec![0.0; grid.len()],
            SourceField::Fn(f) => grid.eval_nodes(|x| f(t, x)),
        }
    }
}

/// Time-indexed solution of the backward variational inequality, with the
/// recovered multiplier field and per-step complementarity residuals.
#[derive(Debug, Clone)]
pub struct SolutionField {
    /// `t₀ = 0, …, t_M = T`.
    pub times: Vec<f64>,
    /// `values[k]` is `u(t_k, ·)` in flat node order.
    pub values: Vec<Vec<f64>>,
    /// Multiplier `η(t_k, ·)`, when recorded; `η ≤ 0` everywhere.
    pub eta: Option<Vec<Vec<f64>>>,
    /// Weighted min-form LCP residual per step (`residuals[M] = 0` at the
    /// terminal slice by construction).
    pub residuals: Vec<f64>,
    pub tol_contact: f64,
    pub(crate) grid: Grid,
}

impl SolutionField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `u(0, ·)`.
    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    /// Multilinear readout of `u(t_k, x)`.
    pub fn value_at(&self, t_index: usize, point: &[f64]) -> f64 {
        self.grid.interpolate(&self.values[t_index], point)
    }

    /// Worst obstacle violation `max(g − u)⁺` over all recorded times
    /// against the supplied per-time obstacle values.
    pub fn max_violation(&self, obstacle: &ObstacleSpec) -> f64 {
        let mut worst = 0.0f64;
        for (k, t) in self.times.iter().enumerate() {
            let g = self.grid.eval_nodes(|x| obstacle.payoff(*t, x));
            for (u, gi) in self.values[k].iter().zip(&g) {
                worst = worst.max(gi - u);
            }
        }
        worst
    }
}

/// Marches the backward inclusion from `u(T) = g(T)` down to `t = 0`.
pub fn backward_solve(
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    obstacle: &ObstacleSpec,
    f: &SourceField,
    t_final: f64,
) -> Result<SolutionField, SolveError> {
    let terminal = op
        .grid()
        .eval_nodes(|x| obstacle.payoff(t_final, x));
    backward_solve_from(op, cfg, obstacle, f, t_final, terminal)
}

/// As [`backward_solve`] but with explicit terminal data (the data-Lipschitz
/// experiments perturb the terminal slice while keeping the obstacle).
pub fn backward_solve_from(
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    obstacle: &ObstacleSpec,
    f: &SourceField,
    t_final: f64,
    terminal: Vec<f64>,
) -> Result<SolutionField, SolveError> {
    let omega = op.omega().max(0.0);
    let m = cfg.steps;
    let h = t_final / m as f64;
    if h * omega >= 1.0 {
        return Err(SolveError::BadStep {
            h,
            omega: op.omega(),
        });
    }
    let n = op.n();
    assert_eq!(terminal.len(), n);
    let grid = op.grid().clone();

    let times: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
    let mut values = vec![Vec::new(); m + 1];
    let mut etas = if cfg.record_multiplier {
        Some(vec![Vec::new(); m + 1])
    } else {
        None
    };
    let mut residuals = vec![0.0; m + 1];

    values[m] = terminal;
    if let Some(e) = etas.as_mut() {
        e[m] = vec![0.0; n];
    }

    let g_terminal = grid.eval_nodes(|x| obstacle.payoff(t_final, x));
    let mut cache = StepCache::new(h);

    for k in (0..m).rev() {
        let t_k = times[k];
        let g_k = if obstacle.time_dependent() {
            grid.eval_nodes(|x| obstacle.payoff(t_k, x))
        } else {
            g_terminal.clone()
        };
        let f_k = f.eval_nodes(t_k, &grid);
        let prev = &values[k + 1];

        let (mut u, mut eta) = implicit_step_cached(op, cfg, prev, &g_k, &f_k, h, &mut cache)
            .map_err(|e| e.at_time(k))?;

        // Dirichlet faces track the obstacle.
        for i in 0..n {
            if op.is_dirichlet(i) {
                u[i] = g_k[i];
                eta[i] = 0.0;
            }
        }

        let rhs: Vec<f64> = prev.iter().zip(&f_k).map(|(p, fi)| p + h * fi).collect();
        residuals[k] = complementarity_residual_parts(op, &u, &eta, &g_k, &rhs, h)
            .map_err(|e| SolveError::from(e).at_time(k))?;

        values[k] = u;
        if let Some(e) = etas.as_mut() {
            e[k] = eta;
        }
    }

    Ok(SolutionField {
        times,
        values,
        eta: etas,
        residuals,
        tol_contact: cfg.tol_contact,
        grid,
    })
}
