//! Contact/continuation classification and exercise-boundary extraction.

use super::SolutionField;
use crate::models::ObstacleSpec;

/// Node classification at one time slice. The contact set is
/// `{u − g ≤ tol_contact}` (ties count as contact); the 1D boundary is the
/// largest contact abscissa with positive payoff, so at expiry it sits at
/// the strike for a put.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    pub contact: Vec<bool>,
    /// Largest contact abscissa with `g > 0` (1D grids).
    pub exercise_boundary: Option<f64>,
    /// Per-axis-1 slice boundary `(boundary_coord0, coord1)` (2D grids).
    pub contour: Option<Vec<(f64, f64)>>,
}

pub fn free_boundary(
    sol: &SolutionField,
    obstacle: &ObstacleSpec,
    t_index: usize,
) -> FreeBoundary {
    let grid = sol.grid();
    let t = sol.times[t_index];
    let u = &sol.values[t_index];
    let g = grid.eval_nodes(|x| obstacle.payoff(t, x));
    let tol = sol.tol_contact;
    let contact: Vec<bool> = u
        .iter()
        .zip(&g)
        .map(|(ui, gi)| ui - gi <= tol)
        .collect();

    let exercise_boundary = if grid.dim() == 1 {
        contact
            .iter()
            .enumerate()
            .filter(|&(i, c)| *c && g[i] > 0.0)
            .map(|(i, _)| grid.axis(0)[i])
            .fold(None, |acc: Option<f64>, x| {
                Some(acc.map_or(x, |a| a.max(x)))
            })
    } else {
        None
    };

    let contour = if grid.dim() == 2 {
        let n1 = grid.axis(1).len();
        let mut pts = Vec::new();
        for j in 0..n1 {
            let mut best: Option<f64> = None;
            for i in 0..grid.axis(0).len() {
                let idx = grid.flatten(&[i, j]);
                if contact[idx] && g[idx] > 0.0 {
                    let x = grid.axis(0)[i];
                    best = Some(best.map_or(x, |b: f64| b.max(x)));
                }
            }
            if let Some(x) = best {
                pts.push((x, grid.axis(1)[j]));
            }
        }
        Some(pts)
    } else {
        None
    };

    FreeBoundary {
        contact,
        exercise_boundary,
        contour,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::assemble;
    use crate::grid::make_grid;
    use crate::models::{
        make_excessive_density, make_model, make_obstacle, ModelName, ModelParams, ObstacleKind,
        ObstacleParams,
    };
    use crate::vi_solver::{backward_solve, SolverConfig, SourceField};

    fn put_solution(rate: f64, steps: usize) -> (SolutionField, crate::models::ObstacleSpec) {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(rate, 0.2, 100.0)).unwrap();
        let d = make_excessive_density(&m).unwrap();
        let g = make_grid(&m.default_axes(&[201])).unwrap();
        let op = assemble(&m, &g, &d).unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::strike(100.0)).unwrap();
        let cfg = SolverConfig::classic(steps, 1e-6).with_strike_scale(100.0);
        let sol = backward_solve(&op, &cfg, &obs, &SourceField::Zero, 1.0).unwrap();
        (sol, obs)
    }

    #[test]
    fn boundary_at_expiry_is_the_strike() {
        let (sol, obs) = put_solution(0.05, 40);
        let fb = free_boundary(&sol, &obs, sol.times.len() - 1);
        // At expiry u = g everywhere, so the largest positive-payoff contact
        // abscissa is the last node below the strike.
        let b = fb.exercise_boundary.unwrap();
        assert!(b <= 100.0 && b > 97.0, "boundary {b}");
    }

    #[test]
    fn boundary_nondecreasing_in_time_for_put() {
        let (sol, obs) = put_solution(0.05, 40);
        let mut last = 0.0;
        for k in 0..sol.times.len() {
            let fb = free_boundary(&sol, &obs, k);
            let b = fb.exercise_boundary.expect("put has a contact region");
            assert!(
                b >= last - 1e-9,
                "boundary decreased: {b} after {last} at k={k}"
            );
            last = b;
        }
    }

    #[test]
    fn zero_rate_put_has_inactive_multiplier() {
        // r = 0 kills the early-exercise premium: the constraint never
        // activates before expiry (deep in-the-money time value underflows
        // any `u − g` tolerance, so activity is read off the multiplier).
        let (sol, _) = put_solution(0.0, 40);
        let eta = sol.eta.as_ref().unwrap();
        for k in 0..sol.times.len() - 1 {
            let max_force = eta[k].iter().map(|e| e.abs()).fold(0.0, f64::max);
            assert!(max_force < 1e-8, "multiplier active at k={k}: {max_force}");
        }
    }
}
