//! Explicit excessive densities for the catalog.
//!
//! Each family is a rational weight `ρ > 0` with `L₀*ρ ≤ ωρ` for a finite
//! `ω`; the numeric certificate for `ω` is produced by
//! [`certify_excessive`](super::certify_excessive).

use std::sync::Arc;

use statrs::function::gamma::gamma;

use super::{ModelError, ModelName, ModelSpec};

#[derive(Clone)]
enum DensityFamily {
    /// `ρ(x) = 1/(1 + |x/k|^{2(n+1)})` on `ℝⁿ` (GBM and baskets). The
    /// length scale `k` (the strike) keeps the measure resolved by
    /// strike-scaled grids; the generator is dilation-invariant, so the
    /// excessivity shift does not depend on `k`.
    Polynomial { n: usize, scale: f64 },
    /// `ρ(x, v) = 1/(1 + x² + v²)` on `ℝ × ℝ₊` (log-price coordinates are
    /// already order one).
    Heston,
    /// `ρ(x, y, s) = (1+|x|/k)^{-(2n+1)} (1+|x−y|/k)^{-(2n+1)} (1+s)^{-2}`.
    Asian { n: usize, scale: f64 },
    /// `ρ ≡ 1` (testing aid).
    Flat,
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// An unnormalized density together with its normalizer, truncation box,
/// and (once certified) the shift `ω = sup L₀*ρ/ρ` over that box.
#[derive(Clone)]
pub struct ExcessiveDensity {
    family: DensityFamily,
    normalizer: f64,
    truncation: Vec<[f64; 2]>,
    omega_certified: Option<f64>,
    certificate_argmax: Option<Vec<f64>>,
}

impl std::fmt::Debug for ExcessiveDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExcessiveDensity")
            .field("normalizer", &self.normalizer)
            .field("truncation", &self.truncation)
            .field("omega_certified", &self.omega_certified)
            .finish()
    }
}

impl ExcessiveDensity {
    /// Unnormalized density value.
    pub fn rho(&self, x: &[f64]) -> f64 {
        match &self.family {
            DensityFamily::Polynomial { n, scale } => {
                let r2: f64 = x.iter().map(|xi| (xi / scale) * (xi / scale)).sum();
                1.0 / (1.0 + r2.powi(*n as i32 + 1))
            }
            DensityFamily::Heston => 1.0 / (1.0 + x[0] * x[0] + x[1] * x[1]),
            DensityFamily::Asian { n, scale } => {
                let p = 2 * *n as i32 + 1;
                let fx = (1.0 + x[0].abs() / scale).powi(p);
                let fxy = (1.0 + (x[0] - x[1]).abs() / scale).powi(p);
                let fs = (1.0 + x[2]) * (1.0 + x[2]);
                1.0 / (fx * fxy * fs)
            }
            DensityFamily::Flat => 1.0,
            DensityFamily::Custom(f) => f(x),
        }
    }

    /// Normalizing constant `a` (so `μ = a·ρ·dx`).
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn truncation(&self) -> &[[f64; 2]] {
        &self.truncation
    }

    pub fn omega_certified(&self) -> Option<f64> {
        self.omega_certified
    }

    /// Location of the certified ratio maximum, when certified.
    pub fn certificate_argmax(&self) -> Option<&[f64]> {
        self.certificate_argmax.as_deref()
    }

    pub(crate) fn with_certificate(
        &self,
        omega: f64,
        argmax: Vec<f64>,
        truncation: Vec<[f64; 2]>,
    ) -> Self {
        let mut out = self.clone();
        out.omega_certified = Some(omega);
        out.certificate_argmax = Some(argmax);
        out.truncation = truncation;
        out
    }

    /// GBM/basket family on `ℝⁿ`; the normalizer is the closed-form radial
    /// integral `kⁿ·σ_{n−1}·π / ((2n+2)·sin(πn/(2n+2)))`, so the mass of
    /// any truncation box stays below one.
    pub fn gbm_family(n: usize, scale: f64, truncation: Vec<[f64; 2]>) -> Self {
        let nf = n as f64;
        let surface = 2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma(nf / 2.0);
        let total = scale.powi(n as i32) * surface * std::f64::consts::PI
            / ((2.0 * nf + 2.0) * (std::f64::consts::PI * nf / (2.0 * nf + 2.0)).sin());
        ExcessiveDensity {
            family: DensityFamily::Polynomial { n, scale },
            normalizer: 1.0 / total,
            truncation,
            omega_certified: None,
            certificate_argmax: None,
        }
    }

    /// Heston family. `1/(1+x²+v²)` is not integrable over `ℝ×ℝ₊` (the tail
    /// diverges logarithmically), so the normalizer is taken over the
    /// truncation box; the scalar does not affect excessivity.
    pub fn heston_family(truncation: Vec<[f64; 2]>) -> Self {
        let mut d = ExcessiveDensity {
            family: DensityFamily::Heston,
            normalizer: 1.0,
            truncation: truncation.clone(),
            omega_certified: None,
            certificate_argmax: None,
        };
        let mass = simpson_nd(|x| d.rho(x), &truncation, 513);
        d.normalizer = 1.0 / mass;
        d
    }

    /// Asian family on `ℝ²×ℝ₊`; all three factors integrate in closed form
    /// (`∫(1+|x|/k)^{-(2n+1)} = k/n` twice, `∫₀^∞ (1+s)^{-2} = 1`), giving
    /// `a = (n/k)²`.
    pub fn asian_family(n: usize, scale: f64, truncation: Vec<[f64; 2]>) -> Self {
        ExcessiveDensity {
            family: DensityFamily::Asian { n, scale },
            normalizer: (n * n) as f64 / (scale * scale),
            truncation,
            omega_certified: None,
            certificate_argmax: None,
        }
    }

    /// Uniform weight, normalized over the box.
    pub fn flat(truncation: Vec<[f64; 2]>) -> Self {
        let vol: f64 = truncation.iter().map(|[lo, hi]| hi - lo).product();
        ExcessiveDensity {
            family: DensityFamily::Flat,
            normalizer: 1.0 / vol,
            truncation,
            omega_certified: None,
            certificate_argmax: None,
        }
    }

    /// User-supplied density, normalized over the box by quadrature.
    pub fn custom(
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        truncation: Vec<[f64; 2]>,
    ) -> Self {
        let mut d = ExcessiveDensity {
            family: DensityFamily::Custom(f),
            normalizer: 1.0,
            truncation: truncation.clone(),
            omega_certified: None,
            certificate_argmax: None,
        };
        let pts = match truncation.len() {
            1 => 4097,
            2 => 513,
            _ => 129,
        };
        let mass = simpson_nd(|x| d.rho(x), &truncation, pts);
        d.normalizer = 1.0 / mass;
        d
    }
}

/// Picks the catalog density for a model, with the model's default box as
/// truncation. `omega_certified` stays unset until the certificate runs.
pub fn make_excessive_density(model: &ModelSpec) -> Result<ExcessiveDensity, ModelError> {
    let truncation = model.default_box();
    let k = model.strike();
    match model.name() {
        ModelName::Gbm1d => Ok(ExcessiveDensity::gbm_family(1, k, truncation)),
        ModelName::BasketNd => Ok(ExcessiveDensity::gbm_family(model.dim(), k, truncation)),
        ModelName::HestonLog => Ok(ExcessiveDensity::heston_family(truncation)),
        // Scalar-asset reading of the average-state density (n = 1).
        ModelName::AsianRegularized => Ok(ExcessiveDensity::asian_family(1, k, truncation)),
        ModelName::Custom => Err(ModelError::UnsupportedModel(
            "no catalog density for custom models; build one with ExcessiveDensity::custom".into(),
        )),
    }
}

/// Composite Simpson quadrature on a tensor box, `pts` nodes per axis
/// (rounded up to odd).
fn simpson_nd(f: impl Fn(&[f64]) -> f64, boxes: &[[f64; 2]], pts: usize) -> f64 {
    let dim = boxes.len();
    let n = if pts % 2 == 0 { pts + 1 } else { pts };
    let axes: Vec<Vec<f64>> = boxes
        .iter()
        .map(|[lo, hi]| {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + h * i as f64).collect()
        })
        .collect();
    let weight_1d = |i: usize| -> f64 {
        if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let scale: f64 = boxes
        .iter()
        .map(|[lo, hi]| (hi - lo) / (n - 1) as f64 / 3.0)
        .product();
    let mut total = 0.0;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let count = n.pow(dim as u32);
    for flat in 0..count {
        let mut rem = flat;
        let mut w = 1.0;
        for d in (0..dim).rev() {
            idx[d] = rem % n;
            rem /= n;
            w *= weight_1d(idx[d]);
            x[d] = axes[d][idx[d]];
        }
        total += w * f(&x);
    }
    total * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, ModelParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gbm_density_values() {
        let d = ExcessiveDensity::gbm_family(1, 1.0, vec![[0.0, 400.0]]);
        assert_abs_diff_eq!(d.rho(&[0.0]), 1.0);
        assert_abs_diff_eq!(d.rho(&[1.0]), 0.5);
        // Full-line integral is π/√2.
        assert_abs_diff_eq!(
            1.0 / d.normalizer(),
            std::f64::consts::PI / 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn basket_density_value() {
        let d = ExcessiveDensity::gbm_family(2, 1.0, vec![[0.0, 4.0], [0.0, 4.0]]);
        assert_abs_diff_eq!(d.rho(&[1.0, 0.0]), 0.5);
    }

    #[test]
    fn heston_density_values() {
        let m = make_model(ModelName::HestonLog, &ModelParams::heston(2.0, 0.04, 0.3, 1.0))
            .unwrap();
        let d = make_excessive_density(&m).unwrap();
        assert_abs_diff_eq!(d.rho(&[0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(d.rho(&[1.0, 1.0]), 1.0 / 3.0);
    }

    #[test]
    fn asian_normalizer_closed_form() {
        let d = ExcessiveDensity::asian_family(1, 1.0, vec![[0.0, 4.0], [0.0, 4.0], [0.0, 1.0]]);
        assert_abs_diff_eq!(d.normalizer(), 1.0);
        assert_abs_diff_eq!(d.rho(&[0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn truncated_mass_below_one_and_monotone() {
        // The integrand concentrates near the origin, so the node count
        // scales with the box to keep the quadrature honest.
        let d = ExcessiveDensity::gbm_family(1, 1.0, vec![[-1e4, 1e4]]);
        let mut prev = 0.0;
        for (half, pts) in [(10.0, 4001), (100.0, 40_001), (1000.0, 400_001)] {
            let mass = d.normalizer() * simpson_nd(|x| d.rho(x), &[[-half, half]], pts);
            assert!(mass <= 1.0 + 1e-9, "mass {mass} at half-width {half}");
            assert!(mass >= prev, "mass not monotone: {mass} after {prev}");
            prev = mass;
        }
        assert!((prev - 1.0).abs() < 1e-6, "mass should approach 1, got {prev}");
    }

    #[test]
    fn density_positive_on_box() {
        let m = make_model(
            ModelName::AsianRegularized,
            &ModelParams::asian(0.05, 0.2, 0.05, 1.0, 1.0),
        )
        .unwrap();
        let d = make_excessive_density(&m).unwrap();
        for x in [
            [0.0, 0.0, 0.0],
            [4.0, 4.0, 1.0],
            [2.0, 0.5, 0.3],
            [0.1, 3.9, 0.9],
        ] {
            assert!(d.rho(&x) > 0.0);
        }
    }
}
