//! LCP residual in min form.

use crate::discretization::{weighted_norm, DiscreteOperator, OpError};

/// Weighted norm of the min-form LCP defect
/// `min(u − g, (u + hN_h u − rhs)/h)`, augmented by any wrong-signed
/// multiplier mass `‖η⁺‖_μ`. Zero iff the discrete variational inequality
/// holds exactly with a correctly signed multiplier.
pub fn complementarity_residual(
    op: &DiscreteOperator,
    u: &[f64],
    eta: &[f64],
    g: &[f64],
    rhs: &[f64],
    h: f64,
) -> Result<f64, OpError> {
    complementarity_residual_parts(op, u, eta, g, rhs, h)
}

pub(crate) fn complementarity_residual_parts(
    op: &DiscreteOperator,
    u: &[f64],
    eta: &[f64],
    g: &[f64],
    rhs: &[f64],
    h: f64,
) -> Result<f64, OpError> {
    let n = op.n();
    for v in [u.len(), eta.len(), g.len(), rhs.len()] {
        if v != n {
            return Err(OpError::LengthMismatch { expected: n, got: v });
        }
    }
    let mut nu = vec![0.0; n];
    op.matrix().matvec(u, &mut nu);
    let defect: Vec<f64> = (0..n)
        .map(|i| {
            let pde = (u[i] + h * nu[i] - rhs[i]) / h;
            (u[i] - g[i]).min(pde)
        })
        .collect();
    let wrong_sign: Vec<f64> = eta.iter().map(|e| e.max(0.0)).collect();
    let d = weighted_norm(op, &defect)?;
    let w = weighted_norm(op, &wrong_sign)?;
    Ok((d * d + w * w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, AxisSpec};
    use crate::linalg::Csr;

    fn toy_op(n: usize) -> DiscreteOperator {
        let grid = make_grid(&[AxisSpec::uniform(0.0, 1.0, n)]).unwrap();
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -0.7));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -0.9));
            }
        }
        DiscreteOperator::from_raw(
            Csr::from_triplets(n, &trip),
            vec![1.0 / n as f64; n],
            0.0,
            grid,
        )
    }

    #[test]
    fn contact_with_correct_sign_contributes_zero() {
        // u = g at a node whose PDE slack is nonnegative: min(0, +) = 0.
        let op = toy_op(5);
        let h = 0.5;
        let g = vec![1.0; 5];
        let u = vec![1.0; 5];
        let mut nu = vec![0.0; 5];
        op.matrix().matvec(&u, &mut nu);
        // rhs chosen so the PDE slack is +1 at every node.
        let rhs: Vec<f64> = (0..5).map(|i| u[i] + h * nu[i] - h).collect();
        let eta = vec![-1.0; 5];
        let r = complementarity_residual(&op, &u, &eta, &g, &rhs, h).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn wrong_sign_multiplier_is_flagged() {
        let op = toy_op(4);
        let g = vec![0.0; 4];
        let u = vec![1.0; 4];
        let mut nu = vec![0.0; 4];
        op.matrix().matvec(&u, &mut nu);
        let rhs: Vec<f64> = (0..4).map(|i| u[i] + 0.1 * nu[i]).collect();
        let eta = vec![0.5; 4];
        let r = complementarity_residual(&op, &u, &eta, &g, &rhs, 0.1).unwrap();
        assert!(r > 0.4, "residual {r}");
    }
}
