use super::norm2;

/// Jacobi-preconditioned BiCGSTAB.
///
/// `apply` computes `y = A x`; `precond_diag` holds the diagonal of `A`.
/// Returns `(x, relative_residual)`; `Err(residual)` when the target is not
/// reached within `max_iter` or the recurrence breaks down irrecoverably.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    precond_diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64), f64> {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let inv_d: Vec<f64> = precond_diag
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best_res = norm2(&r) / b_norm;

    for _ in 0..max_iter {
        let rho_new: f64 = r_hat.iter().zip(&r).map(|(a, b)| a * b).sum();
        if rho_new.abs() < 1e-300 {
            // Restart with the current residual as the shadow vector.
            r_hat.copy_from_slice(&r);
            rho = norm2(&r).powi(2);
            if rho < 1e-300 {
                break;
            }
            p.copy_from_slice(&r);
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        for i in 0..n {
            y[i] = p[i] * inv_d[i];
        }
        apply(&y, &mut v);
        let rhv: f64 = r_hat.iter().zip(&v).map(|(a, b)| a * b).sum();
        if rhv.abs() < 1e-300 {
            r_hat.copy_from_slice(&r);
            continue;
        }
        alpha = rho / rhv;
        // s stored in r.
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm2(&r) / b_norm <= tol_rel {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let res = true_residual(&apply, b, &x, b_norm, &mut t);
            if res <= tol_rel {
                return Ok((x, res));
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        apply(&z, &mut t);
        let tt: f64 = t.iter().map(|a| a * a).sum();
        if tt < 1e-300 {
            break;
        }
        omega = t.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] -= omega * t[i];
        }
        let res = norm2(&r) / b_norm;
        best_res = best_res.min(res);
        if res <= tol_rel {
            let res = true_residual(&apply, b, &x, b_norm, &mut t);
            if res <= tol_rel {
                return Ok((x, res));
            }
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    let res = true_residual(&apply, b, &x, b_norm, &mut t);
    if res <= tol_rel {
        Ok((x, res))
    } else {
        Err(res)
    }
}

fn true_residual(
    apply: &impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &[f64],
    b_norm: f64,
    scratch: &mut [f64],
) -> f64 {
    apply(x, scratch);
    let mut acc = 0.0;
    for i in 0..b.len() {
        let d = b[i] - scratch[i];
        acc += d * d;
    }
    acc.sqrt() / b_norm
}
