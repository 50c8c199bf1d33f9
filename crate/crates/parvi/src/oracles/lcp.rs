//! Exact small-scale LCP reference by active-set enumeration.

use nalgebra::{DMatrix, DVector};

use super::OracleError;

/// Solves `u ≥ g`, `Au − q ≥ 0`, `(u − g)ᵀ(Au − q) = 0` exactly by
/// enumerating contact sets: `u = g` on the set, `(Au)ᵢ = qᵢ` off it, with
/// both sign conditions checked. Unique for M-matrices; the search returns
/// the first configuration that satisfies them. Exponential in the size,
/// capped at 20 nodes.
pub fn lcp_exact(a: &DMatrix<f64>, q: &[f64], g: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = q.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    assert_eq!(g.len(), n);
    if n > 20 {
        return Err(OracleError::TooLarge(n));
    }
    let scale = 1.0
        + q.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut best_violation = f64::INFINITY;

    for mask in 0u64..(1 << n) {
        let contact: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let free: Vec<usize> = (0..n).filter(|&i| !contact[i]).collect();

        let mut u = DVector::from_column_slice(g);
        if !free.is_empty() {
            // A_FF u_F = q_F − A_FC g_C.
            let m = free.len();
            let mut a_ff = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (r, &i) in free.iter().enumerate() {
                rhs[r] = q[i];
                for j in 0..n {
                    if contact[j] {
                        rhs[r] -= a[(i, j)] * g[j];
                    }
                }
                for (c, &j) in free.iter().enumerate() {
                    a_ff[(r, c)] = a[(i, j)];
                }
            }
            let Some(sol) = a_ff.lu().solve(&rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                u[i] = sol[r];
            }
        }

        // Feasibility and multiplier sign.
        let slack = a * &u - DVector::from_column_slice(q);
        let mut violation = 0.0f64;
        for i in 0..n {
            if contact[i] {
                violation = violation.max(-slack[i]);
            } else {
                violation = violation.max(g[i] - u[i]);
            }
        }
        if violation <= tol {
            return Ok(u.iter().copied().collect());
        }
        best_violation = best_violation.min(violation);
    }
    Err(OracleError::NoSolution { best_violation })
}
