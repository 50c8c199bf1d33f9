//! Pointwise evaluation of the formal adjoint ratio `(L₀*ρ)/ρ`.
//!
//! `L₀*ρ = ½ Σᵢⱼ D²ᵢⱼ(aᵢⱼ ρ) − Σᵢ Dᵢ(bᵢ ρ)` is evaluated by fourth-order
//! central differences of the closed-form products `aᵢⱼρ` and `bᵢρ`, with
//! steps tied to the certificate grid spacing. This path is deliberately
//! independent of the operator assembly, so the excessivity certificate
//! does not inherit the solver's discretization error.

use super::OpError;
use crate::grid::Grid;
use crate::models::{ExcessiveDensity, ModelSpec};

/// Evaluates `(L₀*ρ)(xᵢ)/ρ(xᵢ)` at every grid node.
pub fn apply_adjoint_to_density(
    model: &ModelSpec,
    grid: &Grid,
    density: &ExcessiveDensity,
) -> Result<Vec<f64>, OpError> {
    let dim = grid.dim();
    assert_eq!(dim, model.dim(), "grid/model dimension mismatch");
    let structure = model.diffusion_structure();

    // Per-axis step for the product stencils: the median grid spacing.
    let steps: Vec<f64> = (0..dim)
        .map(|d| {
            let ax = grid.axis(d);
            let mut sp: Vec<f64> = ax.windows(2).map(|w| w[1] - w[0]).collect();
            sp.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sp[sp.len() / 2]
        })
        .collect();

    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    let mut coords = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    let mut out = Vec::with_capacity(grid.len());

    // Product evaluators as closures over a probe point.
    let a_at = |x: &[f64], buf: &mut [f64], p: usize, q: usize| -> f64 {
        model.diffusion_matrix(x, buf);
        buf[p * dim + q]
    };

    for idx in 0..grid.len() {
        grid.node_into(idx, &mut coords);
        let rho0 = density.rho(&coords);
        if !(rho0 > 0.0) || !rho0.is_finite() {
            return Err(OpError::NonPositiveDensity {
                coords: coords.clone(),
            });
        }

        let mut total = 0.0;

        // Diffusion part: ½ D²ᵢᵢ(aᵢᵢρ) and D²ᵢⱼ(aᵢⱼρ) for i < j.
        for &(p, q) in &structure {
            if p == q {
                let h = steps[p];
                let f = |off: f64, probe: &mut [f64], abuf: &mut [f64]| {
                    probe.copy_from_slice(&coords);
                    probe[p] += off;
                    a_at(probe, abuf, p, p) * density.rho(probe)
                };
                let fm2 = f(-2.0 * h, &mut probe, &mut a);
                let fm1 = f(-h, &mut probe, &mut a);
                let f0 = f(0.0, &mut probe, &mut a);
                let fp1 = f(h, &mut probe, &mut a);
                let fp2 = f(2.0 * h, &mut probe, &mut a);
                let second =
                    (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
                total += 0.5 * second;
            } else {
                // Mixed: compose two fourth-order first-derivative stencils;
                // the symmetric pair contributes a_pq·D²_pq in full.
                let hp = steps[p];
                let hq = steps[q];
                let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
                let mut second = 0.0;
                for &(op_, wp) in &w {
                    for &(oq, wq) in &w {
                        probe.copy_from_slice(&coords);
                        probe[p] += op_ * hp;
                        probe[q] += oq * hq;
                        let val = a_at(&probe, &mut a, p, q) * density.rho(&probe);
                        second += wp * wq * val;
                    }
                }
                second /= 144.0 * hp * hq;
                total += second;
            }
        }

        // Drift part: −Σ Dᵢ(bᵢρ).
        for d in 0..dim {
            let h = steps[d];
            let f = |off: f64, probe: &mut [f64], bbuf: &mut [f64]| {
                probe.copy_from_slice(&coords);
                probe[d] += off;
                model.drift(probe, bbuf);
                bbuf[d] * density.rho(probe)
            };
            let fm2 = f(-2.0 * h, &mut probe, &mut b);
            let fm1 = f(-h, &mut probe, &mut b);
            let fp1 = f(h, &mut probe, &mut b);
            let fp2 = f(2.0 * h, &mut probe, &mut b);
            let first = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
            total -= first;
        }

        out.push(total / rho0);
    }
    Ok(out)
}
