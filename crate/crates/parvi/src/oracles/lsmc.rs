//! Least-squares Monte Carlo estimate of the optimal-stopping value.
//!
//! Paths are generated by Euler–Maruyama with full truncation (states are
//! clamped inside coefficient evaluations), in fixed-size batches with one
//! counter-based RNG stream per batch and a sequential reduction, so the
//! estimate is bit-identical for a given seed regardless of thread count.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{OracleError, OracleResult};
use crate::models::{ModelSpec, ObstacleSpec};

const BATCH: usize = 4096;
/// Regression needs at least this many in-the-money paths beyond the basis
/// size to be worth fitting.
const MIN_EXTRA_ITM: usize = 2;

#[derive(Debug, Clone)]
pub struct LsmcConfig {
    /// Total-degree bound of the polynomial regression basis.
    pub basis_degree: usize,
    /// Euler substeps across the full horizon (split proportionally between
    /// consecutive exercise dates).
    pub euler_substeps: usize,
    pub seed: u64,
}

impl Default for LsmcConfig {
    fn default() -> Self {
        LsmcConfig {
            basis_degree: 3,
            euler_substeps: 200,
            seed: 0,
        }
    }
}

/// American-style value at `(0, x0)` by regression Monte Carlo over the
/// given exercise dates (ascending, last one equal to the horizon; include
/// `0.0` to allow immediate exercise). Continuation at `t = 0` is the plain
/// sample mean, the state being deterministic there; the reported standard
/// error is always that of the discounted cashflow mean.
pub fn lsmc_american(
    model: &ModelSpec,
    obstacle: &ObstacleSpec,
    x0: &[f64],
    t_final: f64,
    paths: usize,
    exercise_dates: &[f64],
    cfg: &LsmcConfig,
) -> Result<OracleResult, OracleError> {
    let dim = model.dim();
    assert_eq!(x0.len(), dim);
    assert!(paths >= 2);
    let dates = exercise_dates;
    let n_dates = dates.len();
    if n_dates == 0
        || dates.windows(2).any(|w| w[0] >= w[1])
        || dates[0] < 0.0
        || (dates[n_dates - 1] - t_final).abs() > 1e-12 * (1.0 + t_final)
    {
        return Err(OracleError::BadDates);
    }

    // Substep counts per date interval, proportional to interval length.
    let mut intervals = Vec::with_capacity(n_dates);
    let mut prev = 0.0;
    for &td in dates {
        let len = td - prev;
        let sub = if len <= 0.0 {
            0
        } else {
            ((cfg.euler_substeps as f64 * len / t_final).round() as usize).max(1)
        };
        intervals.push((prev, td, sub));
        prev = td;
    }
    let total_steps: usize = intervals.iter().map(|iv| iv.2).sum();

    // Simulate, storing state and accumulated discount at each date.
    let mut states = vec![0.0f64; paths * n_dates * dim];
    let mut psis = vec![0.0f64; paths * n_dates];
    let noise_dim = model.noise_dim();

    states
        .par_chunks_mut(BATCH * n_dates * dim)
        .zip(psis.par_chunks_mut(BATCH * n_dates))
        .enumerate()
        .for_each(|(batch, (sbuf, pbuf))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(batch as u64 + 1);
            let normal = StandardNormal;
            let in_batch = sbuf.len() / (n_dates * dim);
            let mut z = vec![0.0; dim];
            let mut zc = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            let mut sig = vec![0.0; dim * noise_dim];
            let mut xi = vec![0.0; noise_dim];
            for p in 0..in_batch {
                z.copy_from_slice(x0);
                let mut psi = 0.0;
                for (di, &(t0, t1, sub)) in intervals.iter().enumerate() {
                    if sub > 0 {
                        let dt = (t1 - t0) / sub as f64;
                        let sqrt_dt = dt.sqrt();
                        for _ in 0..sub {
                            zc.copy_from_slice(&z);
                            model.clamp_state(&mut zc);
                            model.drift(&zc, &mut b);
                            model.diffusion(&zc, &mut sig);
                            psi += model.discount(&zc) * dt;
                            for xi_k in xi.iter_mut() {
                                *xi_k = normal.sample(&mut rng);
                            }
                            for d in 0..dim {
                                let mut diff = 0.0;
                                for k in 0..noise_dim {
                                    diff += sig[d * noise_dim + k] * xi[k];
                                }
                                z[d] += b[d] * dt + diff * sqrt_dt;
                            }
                        }
                    }
                    let off = p * n_dates * dim + di * dim;
                    sbuf[off..off + dim].copy_from_slice(&z);
                    pbuf[p * n_dates + di] = psi;
                }
            }
        });

    // Backward induction on realized cashflows.
    let state_at = |p: usize, di: usize| -> &[f64] {
        let off = p * n_dates * dim + di * dim;
        &states[off..off + dim]
    };
    let mut cashflow: Vec<f64> = (0..paths)
        .map(|p| obstacle.payoff(t_final, state_at(p, n_dates - 1)))
        .collect();

    for di in (0..n_dates - 1).rev() {
        let t = dates[di];
        for p in 0..paths {
            let dpsi = psis[p * n_dates + di + 1] - psis[p * n_dates + di];
            cashflow[p] *= (-dpsi).exp();
        }
        if di == 0 && t == 0.0 {
            // Deterministic state: continuation is the plain mean, handled
            // after the loop.
            break;
        }
        let itm: Vec<usize> = (0..paths)
            .filter(|&p| obstacle.payoff(t, state_at(p, di)) > 0.0)
            .collect();
        let continuation = match fit_continuation(
            &itm,
            |p| state_at(p, di),
            &cashflow,
            dim,
            cfg.basis_degree,
        )? {
            Some(c) => c,
            None => continue,
        };
        for (rank, &p) in itm.iter().enumerate() {
            let exercise = obstacle.payoff(t, state_at(p, di));
            if exercise > continuation[rank] {
                cashflow[p] = exercise;
            }
        }
    }

    // Discount the first date back to time zero.
    for p in 0..paths {
        let psi0 = psis[p * n_dates];
        if psi0 != 0.0 {
            cashflow[p] *= (-psi0).exp();
        }
    }
    let mean = cashflow.iter().sum::<f64>() / paths as f64;
    let var = cashflow
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (paths as f64 - 1.0);
    let stderr = (var / paths as f64).sqrt();
    let value = if dates[0] == 0.0 {
        obstacle.payoff(0.0, x0).max(mean)
    } else {
        mean
    };

    Ok(OracleResult {
        value,
        stderr: Some(stderr),
        steps: Some(total_steps),
        paths: Some(paths),
        seed: Some(cfg.seed),
    })
}

/// Fits discounted cashflows on a polynomial basis of the (standardized)
/// state coordinates over the in-the-money paths. Returns `None` when too
/// few paths are in the money to support the basis.
fn fit_continuation<'a>(
    itm: &[usize],
    state_at: impl Fn(usize) -> &'a [f64],
    cashflow: &[f64],
    dim: usize,
    degree: usize,
) -> Result<Option<Vec<f64>>, OracleError> {
    // Coordinate statistics over the regression set; constant coordinates
    // (the deterministic clock of the average-state system, say) are
    // dropped before monomials are formed.
    let n = itm.len();
    let mut mean = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for &p in itm {
        for (d, v) in state_at(p).iter().enumerate() {
            mean[d] += v;
            sq[d] += v * v;
        }
    }
    let active: Vec<usize> = if n > 0 {
        (0..dim)
            .filter(|&d| {
                let m = mean[d] / n as f64;
                let var = (sq[d] / n as f64 - m * m).max(0.0);
                var.sqrt() > 1e-12 * (1.0 + m.abs())
            })
            .collect()
    } else {
        Vec::new()
    };
    let exponents = monomial_exponents(active.len(), degree);
    let cols = exponents.len();
    if n < cols + MIN_EXTRA_ITM {
        return Ok(None);
    }
    let std: Vec<f64> = active
        .iter()
        .map(|&d| {
            let m = mean[d] / n as f64;
            ((sq[d] / n as f64 - m * m).max(0.0)).sqrt()
        })
        .collect();
    let mu: Vec<f64> = active.iter().map(|&d| mean[d] / n as f64).collect();

    let features = |z: &[f64], buf: &mut Vec<f64>| {
        buf.clear();
        let coords: Vec<f64> = active
            .iter()
            .enumerate()
            .map(|(c, &d)| (z[d] - mu[c]) / std[c])
            .collect();
        for exps in &exponents {
            let mut phi = 1.0;
            for (c, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    phi *= coords[c];
                }
            }
            buf.push(phi);
        }
    };

    let mut gram = DMatrix::<f64>::zeros(cols, cols);
    let mut moment = DVector::<f64>::zeros(cols);
    let mut phi = Vec::with_capacity(cols);
    for &p in itm {
        features(state_at(p), &mut phi);
        for i in 0..cols {
            moment[i] += phi[i] * cashflow[p];
            for j in i..cols {
                gram[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }

    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10)
        .count();
    if rank < cols {
        return Err(OracleError::SingularRegression { rank, cols });
    }
    let beta = svd
        .solve(&moment, smax * 1e-12)
        .expect("svd solve after rank check");

    let mut out = Vec::with_capacity(n);
    for &p in itm {
        features(state_at(p), &mut phi);
        out.push(phi.iter().zip(beta.iter()).map(|(a, b)| a * b).sum());
    }
    Ok(Some(out))
}

/// Multi-indices with total degree at most `degree` (intercept included).
fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; dim]];
    if dim == 0 {
        return out;
    }
    let mut frontier = vec![vec![0u32; dim]];
    for _ in 0..degree {
        let mut next = Vec::new();
        for e in &frontier {
            // Raise the last nonzero position or later, avoiding duplicates.
            let start = e
                .iter()
                .rposition(|&x| x > 0)
                .unwrap_or(0);
            for d in start..dim {
                let mut e2 = e.clone();
                e2[d] += 1;
                next.push(e2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, make_obstacle, ModelName, ModelParams, ObstacleKind, ObstacleParams};
    use crate::oracles::{binomial_american, OptionKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn monomial_count_matches_binomial_coefficient() {
        // C(dim + degree, degree) monomials of total degree ≤ degree.
        assert_eq!(monomial_exponents(1, 3).len(), 4);
        assert_eq!(monomial_exponents(2, 3).len(), 10);
        assert_eq!(monomial_exponents(3, 3).len(), 20);
    }

    #[test]
    fn terminal_only_equals_plain_mc_mean() {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::strike(100.0)).unwrap();
        let cfg = LsmcConfig {
            seed: 7,
            euler_substeps: 50,
            ..Default::default()
        };
        let r = lsmc_american(&m, &obs, &[100.0], 1.0, 20_000, &[1.0], &cfg).unwrap();
        // Replicate the plain estimator with the same stream.
        let r2 = lsmc_american(&m, &obs, &[100.0], 1.0, 20_000, &[1.0], &cfg).unwrap();
        assert_abs_diff_eq!(r.value, r2.value);
        // Sanity: close to the European closed form.
        let eu = crate::oracles::bs_european(100.0, 100.0, 0.05, 0.2, 1.0, OptionKind::Put);
        assert!(
            (r.value - eu.value).abs() < 4.0 * r.stderr.unwrap() + 0.05,
            "mc {} vs bs {}",
            r.value,
            eu.value
        );
    }

    #[test]
    fn seed_reproducibility_bit_exact() {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::strike(100.0)).unwrap();
        let dates: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        let cfg = LsmcConfig {
            seed: 42,
            euler_substeps: 40,
            ..Default::default()
        };
        let a = lsmc_american(&m, &obs, &[100.0], 1.0, 8192, &dates, &cfg).unwrap();
        let b = lsmc_american(&m, &obs, &[100.0], 1.0, 8192, &dates, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.unwrap().to_bits(), b.stderr.unwrap().to_bits());
    }

    #[test]
    fn gbm_put_within_three_stderr_of_tree() {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::strike(100.0)).unwrap();
        let dates: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
        let cfg = LsmcConfig {
            seed: 11,
            euler_substeps: 200,
            ..Default::default()
        };
        let mc = lsmc_american(&m, &obs, &[100.0], 1.0, 100_000, &dates, &cfg).unwrap();
        let tree = binomial_american(100.0, 100.0, 0.05, 0.2, 1.0, 4000, OptionKind::Put);
        let sigma = mc.stderr.unwrap();
        // LSMC carries a small suboptimal-exercise low bias on top of the
        // Monte Carlo noise; three sigmas plus a bias allowance.
        assert!(
            (mc.value - tree.value).abs() < 3.0 * sigma + 0.03,
            "mc {} ± {} vs tree {}",
            mc.value,
            sigma,
            tree.value
        );
    }

    #[test]
    fn heston_put_dominates_european_mc() {
        let m = make_model(ModelName::HestonLog, &ModelParams::heston(2.0, 0.04, 0.3, 1.0))
            .unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::log_strike(1.0)).unwrap();
        let x0 = [0.0, 0.04];
        let dates: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let cfg = LsmcConfig {
            seed: 3,
            euler_substeps: 100,
            ..Default::default()
        };
        let am = lsmc_american(&m, &obs, &x0, 1.0, 40_000, &dates, &cfg).unwrap();
        let eu = lsmc_american(&m, &obs, &x0, 1.0, 40_000, &[1.0], &cfg).unwrap();
        assert!(
            am.value >= eu.value - 3.0 * eu.stderr.unwrap(),
            "american {} vs european {}",
            am.value,
            eu.value
        );
    }

    #[test]
    fn bad_dates_rejected() {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let obs = make_obstacle(ObstacleKind::Put, &ObstacleParams::strike(100.0)).unwrap();
        let cfg = LsmcConfig::default();
        assert!(matches!(
            lsmc_american(&m, &obs, &[100.0], 1.0, 100, &[0.5, 0.4, 1.0], &cfg),
            Err(OracleError::BadDates)
        ));
        assert!(matches!(
            lsmc_american(&m, &obs, &[100.0], 1.0, 100, &[0.5], &cfg),
            Err(OracleError::BadDates)
        ));
    }
}
