//! Resolvent-level operations on the assembled operator.

use super::{DiscreteOperator, OpError, SOLVE_TOL};
use crate::linalg::{bicgstab, norm2, shifted_matvec, BandedLu};

/// Solves `(I + lam·N + diag(extra)) u = rhs` to the crate-wide relative
/// tolerance, choosing direct banded or preconditioned BiCGSTAB by problem
/// shape. `extra` must be nonnegative when present.
pub(crate) fn solve_shifted(
    op: &DiscreteOperator,
    lam: f64,
    extra_diag: Option<&[f64]>,
    rhs: &[f64],
    warm_start: Option<&[f64]>,
    cached_lu: Option<&BandedLu>,
) -> Result<Vec<f64>, OpError> {
    let n = op.n();
    if rhs.len() != n {
        return Err(OpError::LengthMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    if op.prefers_direct() {
        let owned;
        let lu = match (cached_lu, extra_diag) {
            (Some(lu), None) => lu,
            _ => {
                owned = BandedLu::factor_shifted(op.matrix(), op.bandwidth(), lam, extra_diag)
                    .ok_or(OpError::SolveFailure {
                        residual: f64::INFINITY,
                        tol: SOLVE_TOL,
                    })?;
                &owned
            }
        };
        let mut u = rhs.to_vec();
        lu.solve(&mut u);
        // Iterative refinement if roundoff left a visible residual.
        let mut resid = vec![0.0; n];
        for _ in 0..3 {
            shifted_matvec(op.matrix(), lam, extra_diag, &u, &mut resid);
            for i in 0..n {
                resid[i] = rhs[i] - resid[i];
            }
            let rel = norm2(&resid) / rhs_norm;
            if rel <= SOLVE_TOL {
                return Ok(u);
            }
            lu.solve(&mut resid);
            for i in 0..n {
                u[i] += resid[i];
            }
        }
        shifted_matvec(op.matrix(), lam, extra_diag, &u, &mut resid);
        for i in 0..n {
            resid[i] = rhs[i] - resid[i];
        }
        let rel = norm2(&resid) / rhs_norm;
        if rel <= SOLVE_TOL {
            Ok(u)
        } else {
            Err(OpError::SolveFailure {
                residual: rel,
                tol: SOLVE_TOL,
            })
        }
    } else {
        let mut precond = op.matrix().diag();
        for (i, d) in precond.iter_mut().enumerate() {
            *d = 1.0 + lam * *d + extra_diag.map_or(0.0, |e| e[i]);
        }
        bicgstab(
            |x, y| shifted_matvec(op.matrix(), lam, extra_diag, x, y),
            &precond,
            rhs,
            warm_start,
            SOLVE_TOL,
            20_000,
        )
        .map(|(u, _)| u)
        .map_err(|residual| OpError::SolveFailure {
            residual,
            tol: SOLVE_TOL,
        })
    }
}

/// `(I + lam·N)⁻¹ rhs`; `lam = 0` returns `rhs` unchanged. Requires
/// `0 ≤ lam < 1/ω` when the certified shift `ω` is positive.
pub fn resolvent(op: &DiscreteOperator, lam: f64, rhs: &[f64]) -> Result<Vec<f64>, OpError> {
    if lam == 0.0 {
        if rhs.len() != op.n() {
            return Err(OpError::LengthMismatch {
                expected: op.n(),
                got: rhs.len(),
            });
        }
        return Ok(rhs.to_vec());
    }
    if lam < 0.0 || !lam.is_finite() || lam >= op.lambda_limit() {
        return Err(OpError::BadLambda {
            lam,
            omega: op.omega(),
        });
    }
    solve_shifted(op, lam, None, rhs, None, None)
}

/// Yosida approximation `N_λ u = (u − (I + λN)⁻¹u)/λ`.
pub fn yosida(op: &DiscreteOperator, lam: f64, u: &[f64]) -> Result<Vec<f64>, OpError> {
    if lam <= 0.0 || !lam.is_finite() {
        return Err(OpError::BadLambda {
            lam,
            omega: op.omega(),
        });
    }
    let res = resolvent(op, lam, u)?;
    Ok(u.iter()
        .zip(&res)
        .map(|(ui, ri)| (ui - ri) / lam)
        .collect())
}

/// Discrete `L²(μ)` inner product `Σ wᵢ uᵢ vᵢ`.
pub fn weighted_dot(op: &DiscreteOperator, u: &[f64], v: &[f64]) -> Result<f64, OpError> {
    if u.len() != op.n() || v.len() != op.n() {
        return Err(OpError::LengthMismatch {
            expected: op.n(),
            got: if u.len() != op.n() { u.len() } else { v.len() },
        });
    }
    Ok(op
        .mu_weights()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// Weighted norm `‖u‖_μ`.
pub fn weighted_norm(op: &DiscreteOperator, u: &[f64]) -> Result<f64, OpError> {
    weighted_dot(op, u, u).map(f64::sqrt)
}

/// Diagnostic for the alternative boundedness hypothesis
/// `t⁻¹‖(g − P_t g)⁺‖_μ ≤ C`: one implicit semigroup step
/// `P_t g ≈ (I + tN)⁻¹ g` gives the estimate `‖(N_t g)⁺‖_μ`. No pass/fail
/// judgement is attached to the value.
pub fn hyp1_alt_diagnostic(op: &DiscreteOperator, g: &[f64], t: f64) -> Result<f64, OpError> {
    let y = yosida(op, t, g)?;
    let pos: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    weighted_norm(op, &pos)
}
