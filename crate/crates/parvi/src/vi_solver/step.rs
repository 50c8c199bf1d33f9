//! One implicit step of the penalized obstacle problem.

use super::{PenaltyKind, SolveError, SolverConfig};
use crate::discretization::{solve_shifted, weighted_norm, DiscreteOperator, OpError};
use crate::linalg::BandedLu;

/// Per-march scratch: the factorization of `I + hN` is reused whenever the
/// Newton system carries no active penalty diagonal.
pub(crate) struct StepCache {
    h: f64,
    base_lu: Option<BandedLu>,
}

impl StepCache {
    pub(crate) fn new(h: f64) -> Self {
        StepCache { h, base_lu: None }
    }

    fn base_lu(&mut self, op: &DiscreteOperator) -> Result<Option<&BandedLu>, OpError> {
        if !op.prefers_direct() {
            return Ok(None);
        }
        if self.base_lu.is_none() {
            let lu = BandedLu::factor_shifted(op.matrix(), op.bandwidth(), self.h, None).ok_or(
                OpError::SolveFailure {
                    residual: f64::INFINITY,
                    tol: crate::discretization::SOLVE_TOL,
                },
            )?;
            self.base_lu = Some(lu);
        }
        Ok(self.base_lu.as_ref())
    }
}

struct Penalty<'a> {
    kind: PenaltyKind,
    eps: f64,
    h: f64,
    g1: f64,
    g1_per_node: Option<&'a [f64]>,
    /// Penalty and source are switched off on Dirichlet rows: those rows
    /// are pure carries of the pinned boundary data.
    dirichlet: &'a [bool],
}

impl Penalty<'_> {
    fn g1_at(&self, i: usize) -> f64 {
        self.g1_per_node.map_or(self.g1, |v| v[i])
    }

    /// Penalty term added to `θ + hNθ` and its rhs offset.
    fn value(&self, i: usize, s: f64) -> f64 {
        if self.dirichlet[i] {
            return 0.0;
        }
        match self.kind {
            PenaltyKind::Classic => -(self.h / self.eps) * (-s).max(0.0),
            PenaltyKind::Bounded => self.g1_at(i) * s / (self.eps + s.abs()),
        }
    }

    fn rhs_offset(&self, i: usize) -> f64 {
        if self.dirichlet[i] {
            return 0.0;
        }
        match self.kind {
            PenaltyKind::Classic => 0.0,
            PenaltyKind::Bounded => self.g1_at(i),
        }
    }

    /// Derivative of the penalty term in `θ` (the Newton diagonal), `≥ 0`.
    fn derivative(&self, i: usize, s: f64) -> f64 {
        if self.dirichlet[i] {
            return 0.0;
        }
        match self.kind {
            PenaltyKind::Classic => {
                if s < 0.0 {
                    self.h / self.eps
                } else {
                    0.0
                }
            }
            PenaltyKind::Bounded => {
                let d = self.eps + s.abs();
                self.g1_at(i) * self.eps / (d * d)
            }
        }
    }

    /// Multiplier recovered from the converged penalty term.
    fn multiplier(&self, i: usize, s: f64) -> f64 {
        (self.value(i, s) - self.rhs_offset(i)) / self.h
    }
}

/// Solves the classic penalization `θ + hNθ − (h/ε)(θ−g)⁻ = rhs`.
pub fn penalized_solve_classic(
    op: &DiscreteOperator,
    h: f64,
    eps: f64,
    rhs: &[f64],
    g: &[f64],
) -> Result<Vec<f64>, SolveError> {
    let pen = Penalty {
        kind: PenaltyKind::Classic,
        eps,
        h,
        g1: 0.0,
        g1_per_node: None,
        dirichlet: op.dirichlet_mask(),
    };
    let cfg = SolverConfig::classic(1, eps);
    let mut cache = StepCache::new(h);
    newton(op, &pen, &cfg, rhs, g, None, &mut cache)
}

/// Solves the bounded penalization
/// `θ + hNθ + g₁(θ−g)/(ε+|θ−g|) = rhs + g₁`.
pub fn penalized_solve_bounded(
    op: &DiscreteOperator,
    h: f64,
    eps: f64,
    g1: f64,
    rhs: &[f64],
    g: &[f64],
) -> Result<Vec<f64>, SolveError> {
    let pen = Penalty {
        kind: PenaltyKind::Bounded,
        eps,
        h,
        g1,
        g1_per_node: None,
        dirichlet: op.dirichlet_mask(),
    };
    let cfg = SolverConfig::bounded(1, eps, g1);
    let mut cache = StepCache::new(h);
    newton(op, &pen, &cfg, rhs, g, None, &mut cache)
}

/// One implicit step: returns `(u, η)` with
/// `u + hN_h u + h·η = prev + h·f`, `η` from the converged penalty term.
pub fn implicit_step(
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    prev: &[f64],
    g_k: &[f64],
    f_k: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let mut cache = StepCache::new(h);
    implicit_step_cached(op, cfg, prev, g_k, f_k, h, &mut cache)
}

pub(crate) fn implicit_step_cached(
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    prev: &[f64],
    g_k: &[f64],
    f_k: &[f64],
    h: f64,
    cache: &mut StepCache,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let omega = op.omega().max(0.0);
    if h * omega >= 1.0 {
        return Err(SolveError::BadStep {
            h,
            omega: op.omega(),
        });
    }
    let n = op.n();
    if prev.len() != n || g_k.len() != n || f_k.len() != n {
        return Err(OpError::LengthMismatch {
            expected: n,
            got: prev.len().min(g_k.len()).min(f_k.len()),
        }
        .into());
    }
    // Dirichlet rows carry their boundary data: no source term there.
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            if op.is_dirichlet(i) {
                prev[i]
            } else {
                prev[i] + h * f_k[i]
            }
        })
        .collect();

    let mut theta: Option<Vec<f64>> = None;
    let mut final_eps = cfg.epsilon;
    for eps in cfg.epsilon_seq() {
        let pen = Penalty {
            kind: cfg.penalty,
            eps,
            h,
            g1: cfg.g1,
            g1_per_node: cfg.g1_per_node.as_deref(),
            dirichlet: op.dirichlet_mask(),
        };
        theta = Some(newton(op, &pen, cfg, &rhs, g_k, theta.as_deref(), cache)?);
        final_eps = eps;
    }
    let theta = theta.expect("epsilon sequence is non-empty");

    let pen = Penalty {
        kind: cfg.penalty,
        eps: final_eps,
        h,
        g1: cfg.g1,
        g1_per_node: cfg.g1_per_node.as_deref(),
        dirichlet: op.dirichlet_mask(),
    };
    let eta: Vec<f64> = theta
        .iter()
        .zip(g_k)
        .enumerate()
        .map(|(i, (t, g))| if op.is_dirichlet(i) { 0.0 } else { pen.multiplier(i, t - g) })
        .collect();
    Ok((theta, eta))
}

/// Semismooth Newton on `F(θ) = θ + hNθ + P(θ−g) − rhs − P_offset`.
///
/// The classic penalty is piecewise linear: full steps realize the
/// active-set iteration, which terminates finitely on M-matrix rows (the
/// residual may rise transiently while the set settles, so no line search
/// is applied). The bounded penalty is smooth, and there plain damping
/// (halving up to 30 times) guards the stiff region `|θ−g| ≲ ε`.
fn newton(
    op: &DiscreteOperator,
    pen: &Penalty,
    cfg: &SolverConfig,
    rhs: &[f64],
    g: &[f64],
    warm: Option<&[f64]>,
    cache: &mut StepCache,
) -> Result<Vec<f64>, SolveError> {
    let n = op.n();
    let h = pen.h;
    let mut theta: Vec<f64> = match warm {
        Some(w) => w.to_vec(),
        None => rhs.iter().zip(g).map(|(r, gi)| r.max(*gi)).collect(),
    };

    let mut n_theta = vec![0.0; n];
    let residual = |theta: &[f64], n_theta: &mut Vec<f64>| -> Vec<f64> {
        op.matrix().matvec(theta, n_theta);
        (0..n)
            .map(|i| {
                theta[i] + h * n_theta[i] + pen.value(i, theta[i] - g[i])
                    - rhs[i]
                    - pen.rhs_offset(i)
            })
            .collect()
    };

    let scale = 1.0 + weighted_norm(op, rhs)?;
    let mut f = residual(&theta, &mut n_theta);
    let mut f_norm = weighted_norm(op, &f)?;
    let full_steps = matches!(pen.kind, PenaltyKind::Classic);

    for iter in 0..cfg.newton_max_iter {
        if f_norm <= cfg.newton_tol * scale {
            return Ok(theta);
        }
        let extra: Vec<f64> = (0..n)
            .map(|i| pen.derivative(i, theta[i] - g[i]))
            .collect();
        let all_inactive = extra.iter().all(|&d| d == 0.0);
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = if all_inactive {
            let lu = cache.base_lu(op)?;
            solve_shifted(op, h, None, &neg_f, None, lu)?
        } else {
            solve_shifted(op, h, Some(&extra), &neg_f, None, None)?
        };

        if full_steps {
            for (x, d) in theta.iter_mut().zip(&delta) {
                *x += d;
            }
            f = residual(&theta, &mut n_theta);
            f_norm = weighted_norm(op, &f)?;
            continue;
        }

        // Bounded scheme: damped step on the residual norm.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&delta)
                .map(|(x, d)| x + t * d)
                .collect();
            let f_trial = residual(&trial, &mut n_theta);
            let f_trial_norm = weighted_norm(op, &f_trial)?;
            if f_trial_norm <= f_norm * (1.0 - 1e-4 * t) + 1e-300 {
                theta = trial;
                f = f_trial;
                f_norm = f_trial_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(SolveError::NewtonDiverged {
                residual: f_norm,
                iters: iter + 1,
                time_index: None,
            });
        }
    }
    if f_norm <= cfg.newton_tol * scale {
        Ok(theta)
    } else {
        Err(SolveError::NewtonDiverged {
            residual: f_norm,
            iters: cfg.newton_max_iter,
            time_index: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, resolvent};
    use crate::grid::{make_grid, AxisSpec};
    use crate::models::{make_excessive_density, make_model, ExcessiveDensity, ModelName, ModelParams};
    use approx::assert_abs_diff_eq;

    fn gbm_op(n: usize) -> DiscreteOperator {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let d = make_excessive_density(&m).unwrap();
        let g = make_grid(&m.default_axes(&[n])).unwrap();
        assemble(&m, &g, &d).unwrap()
    }

    #[test]
    fn inactive_obstacle_reduces_to_resolvent() {
        let op = gbm_op(101);
        let cfg = SolverConfig::classic(1, 1e-8);
        let h = 0.01;
        let prev: Vec<f64> = (0..op.n()).map(|i| 1.0 + (i as f64 * 0.05).sin()).collect();
        let g_far = vec![-1e12; op.n()];
        let f = vec![0.0; op.n()];
        let (u, eta) = implicit_step(&op, &cfg, &prev, &g_far, &f, h).unwrap();
        let plain = resolvent(&op, h, &prev).unwrap();
        for i in 0..op.n() {
            assert_abs_diff_eq!(u[i], plain[i], epsilon = 1e-9);
            assert_abs_diff_eq!(eta[i], 0.0);
        }
    }

    #[test]
    fn stationary_constant_state() {
        // prev = g = κ₀ and f = c·κ₀: u = κ₀, η = 0.
        let op = gbm_op(101);
        let cfg = SolverConfig::classic(1, 1e-8);
        let h = 0.02;
        let kappa0 = 3.0;
        let prev = vec![kappa0; op.n()];
        let g = vec![kappa0; op.n()];
        let f = vec![0.05 * kappa0; op.n()];
        let (u, eta) = implicit_step(&op, &cfg, &prev, &g, &f, h).unwrap();
        for i in 0..op.n() {
            assert_abs_diff_eq!(u[i], kappa0, epsilon = 1e-7);
            assert!(eta[i].abs() < 1e-7, "eta[{i}] = {}", eta[i]);
        }
    }

    #[test]
    fn scalar_piecewise_linear_solution() {
        // One active node with N = 0: θ − (h/ε)(θ−g)⁻ = rhs has the
        // closed form θ = (rhs + (h/ε)g)/(1 + h/ε) when rhs < g.
        let grid = make_grid(&[AxisSpec::uniform(0.0, 1.0, 3)]).unwrap();
        let matrix = crate::linalg::Csr::from_triplets(3, &[]);
        let op = DiscreteOperator::from_raw(matrix, vec![1.0; 3], 0.0, grid);
        let (h, eps) = (0.5, 1e-3);
        let rhs = vec![0.2, 0.2, 0.2];
        let g = vec![1.0, 1.0, 1.0];
        let theta = penalized_solve_classic(&op, h, eps, &rhs, &g).unwrap();
        let expected = (0.2 + (h / eps) * 1.0) / (1.0 + h / eps);
        for t in theta {
            assert_abs_diff_eq!(t, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn classic_violation_shrinks_with_eps() {
        let op = gbm_op(101);
        let h = 0.01;
        let g: Vec<f64> = op
            .grid()
            .eval_nodes(|x| (100.0 - x[0]).max(0.0));
        let rhs: Vec<f64> = g.iter().map(|gi| gi * 0.75).collect();
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let theta = penalized_solve_classic(&op, h, eps, &rhs, &g).unwrap();
            let viol: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(t, gi)| (gi - t).max(0.0))
                .collect();
            let viol_norm = crate::discretization::weighted_norm(&op, &viol).unwrap();
            assert!(
                viol_norm < last,
                "violation should shrink: {viol_norm} after {last} at eps {eps}"
            );
            last = viol_norm;
        }
    }

    #[test]
    fn bounded_with_zero_weight_is_plain_resolvent() {
        let op = gbm_op(101);
        let h = 0.01;
        let rhs: Vec<f64> = (0..op.n()).map(|i| (i as f64 * 0.03).cos()).collect();
        let g: Vec<f64> = rhs.iter().map(|r| r + 0.5).collect();
        let theta = penalized_solve_bounded(&op, h, 1e-4, 0.0, &rhs, &g).unwrap();
        let plain = resolvent(&op, h, &rhs).unwrap();
        for i in 0..op.n() {
            assert_abs_diff_eq!(theta[i], plain[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn bounded_penalty_vanishes_on_the_obstacle() {
        // Residual identity at θ = g: penalty term is exactly zero, so
        // F(g) = g + hNg − rhs − g₁.
        let op = gbm_op(51);
        let h = 0.01;
        let (eps, g1) = (1e-4, 1.0);
        let g: Vec<f64> = op.grid().eval_nodes(|x| (100.0 - x[0]).max(0.0));
        let rhs = vec![0.0; op.n()];
        let mut ng = vec![0.0; op.n()];
        op.matrix().matvec(&g, &mut ng);
        // Evaluate the bounded-penalty residual by hand at θ = g.
        for i in 0..op.n() {
            let s: f64 = 0.0;
            let pen_term = g1 * s / (eps + s.abs());
            let f_i = g[i] + h * ng[i] + pen_term - rhs[i] - g1;
            assert_abs_diff_eq!(f_i, g[i] + h * ng[i] - rhs[i] - g1);
        }
    }

    #[test]
    fn schemes_agree_on_put_benchmark() {
        // Both penalizations drive the same LCP. Their gap laws differ:
        // classic sits below the obstacle by ε_c·|η|, bounded above it by
        // ε_b·g₁/(h|η|) with a sup contribution scaling like ε_b^(2/3) near
        // the free boundary. Matching ε_b = ε_c·h/g₁·|η|-scale keeps the
        // comparison at the classic scale; the fields then agree to 10·ε_c
        // in sup norm.
        let op = gbm_op(101);
        let h = 0.01;
        let eps_c = 1e-4;
        let eps_b = 1e-9;
        let g: Vec<f64> = op.grid().eval_nodes(|x| (100.0 - x[0]).max(0.0));
        let mut u_classic = g.clone();
        let mut u_bounded = g.clone();
        let zero = vec![0.0; op.n()];
        let cfg_c = SolverConfig::classic(1, eps_c);
        let mut cfg_b = SolverConfig::bounded(1, eps_b, 1.0);
        cfg_b.newton_max_iter = 400;
        // θ − g cancels ~14 digits at this value scale, so the bounded
        // residual floors near 1e-8; the tolerance sits above that floor.
        cfg_b.newton_tol = 1e-7;
        for _ in 0..20 {
            u_classic = implicit_step(&op, &cfg_c, &u_classic, &g, &zero, h).unwrap().0;
            u_bounded = implicit_step(&op, &cfg_b, &u_bounded, &g, &zero, h).unwrap().0;
        }
        let sup = u_classic
            .iter()
            .zip(&u_bounded)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 10.0 * eps_c, "schemes differ by {sup}");
    }
}
