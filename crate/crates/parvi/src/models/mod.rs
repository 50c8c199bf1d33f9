//! Catalog of continuous-state pricing models with their Kolmogorov
//! operators, payoffs, and explicit excessive densities.
//!
//! Each model supplies the SDE coefficients `b` (drift), `σ` (diffusion
//! factor), the diffusion matrix `a = σσ*`, and a state-dependent discount
//! rate `c`. The generator is `L₀ = ½Tr[a D²] + ⟨b, D⟩` and the solver
//! works with `N = −L + cI`.

mod certify;
mod density;
mod obstacle;

pub use certify::{certify_excessive, certify_excessive_capped, CertifyError, DEFAULT_RATIO_CAP};
pub use density::{make_excessive_density, ExcessiveDensity};
pub use obstacle::{make_obstacle, CustomObstacle, ObstacleKind, ObstacleParams, ObstacleSpec};

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{AxisSpec, BoundaryKind};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("missing parameter `{0}` for model {1:?}")]
    MissingParam(&'static str, ModelName),
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("missing parameter `{0}` for obstacle")]
    MissingObstacleParam(&'static str),
}

/// Models in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    /// One asset, `dX = rX dt + σ(X) dW` with `σ(x) = x·σ̃`.
    Gbm1d,
    /// `n` independent assets, each `dXᵢ = rXᵢ dt + Xᵢσ̃ᵢ dWᵢ`.
    BasketNd,
    /// Stochastic volatility in log-price coordinates, zero rate.
    HestonLog,
    /// Regularized running-average state `(X, Y, S)`, zero rate in the
    /// stopping functional.
    AsianRegularized,
    /// User-supplied coefficient callbacks (built via [`ModelSpec::custom`],
    /// not through [`make_model`]).
    Custom,
}

/// Coefficient callbacks for a model outside the catalog. `diffusion_matrix`
/// must write `σσ*` row-major; `structure` lists the `(i ≤ j)` pairs of
/// `σσ*` that can be nonzero anywhere.
#[derive(Clone)]
pub struct CustomModel {
    pub dim: usize,
    pub noise_dim: usize,
    pub drift: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub diffusion: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub diffusion_matrix: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub discount: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub structure: Vec<(usize, usize)>,
    pub domain: Vec<[f64; 2]>,
}

/// Named scalar parameters accepted by [`make_model`]. Fields irrelevant to
/// the requested model are ignored.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    /// Risk-free rate `r`.
    pub rate: Option<f64>,
    /// Per-asset volatility factors `σ̃ᵢ` (one entry for Gbm1d / Asian).
    pub vol: Option<Vec<f64>>,
    /// Heston mean-reversion speed `κ`.
    pub kappa: Option<f64>,
    /// Heston long-run variance `θ`.
    pub theta: Option<f64>,
    /// Heston vol-of-vol (named `eta_vol` to keep `η` for the multiplier).
    pub eta_vol: Option<f64>,
    /// Lower variance truncation for the Heston state domain.
    pub v_min: Option<f64>,
    /// Asian regularization `δ > 0`.
    pub delta: Option<f64>,
    /// Basket weights `λⱼ` with `Σλⱼ = 1`.
    pub weights: Option<Vec<f64>>,
    /// Strike scale `k`; also fixes default domain boxes and grading foci.
    pub strike: Option<f64>,
    /// Extent of the Asian clock axis `s` (usually the maturity).
    pub horizon: Option<f64>,
}

impl ModelParams {
    pub fn gbm1d(rate: f64, vol: f64, strike: f64) -> Self {
        ModelParams {
            rate: Some(rate),
            vol: Some(vec![vol]),
            strike: Some(strike),
            ..Default::default()
        }
    }

    pub fn basket(rate: f64, vols: Vec<f64>, weights: Vec<f64>, strike: f64) -> Self {
        ModelParams {
            rate: Some(rate),
            vol: Some(vols),
            weights: Some(weights),
            strike: Some(strike),
            ..Default::default()
        }
    }

    pub fn heston(kappa: f64, theta: f64, eta_vol: f64, strike: f64) -> Self {
        ModelParams {
            kappa: Some(kappa),
            theta: Some(theta),
            eta_vol: Some(eta_vol),
            strike: Some(strike),
            ..Default::default()
        }
    }

    pub fn asian(rate: f64, vol: f64, delta: f64, strike: f64, horizon: f64) -> Self {
        ModelParams {
            rate: Some(rate),
            vol: Some(vec![vol]),
            delta: Some(delta),
            strike: Some(strike),
            horizon: Some(horizon),
            ..Default::default()
        }
    }
}

#[derive(Clone)]
enum ModelKind {
    Gbm1d {
        rate: f64,
        vol: f64,
    },
    BasketNd {
        rate: f64,
        vols: Vec<f64>,
        weights: Vec<f64>,
    },
    HestonLog {
        kappa: f64,
        theta: f64,
        eta_vol: f64,
        v_min: f64,
    },
    AsianRegularized {
        rate: f64,
        vol: f64,
        delta: f64,
        horizon: f64,
    },
    Custom(CustomModel),
}

/// A catalog model: immutable after construction, safe to share across
/// threads, coefficients are pure functions of the state.
#[derive(Clone)]
pub struct ModelSpec {
    name: ModelName,
    dim: usize,
    noise_dim: usize,
    strike: f64,
    kind: ModelKind,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("strike", &self.strike)
            .finish()
    }
}

fn req<T: Copy>(v: Option<T>, name: &'static str, model: ModelName) -> Result<T, ModelError> {
    v.ok_or(ModelError::MissingParam(name, model))
}

/// Builds a model from the catalog, validating its structural constraints.
pub fn make_model(name: ModelName, params: &ModelParams) -> Result<ModelSpec, ModelError> {
    let strike = params
        .strike
        .ok_or(ModelError::MissingParam("strike", name))?;
    if strike <= 0.0 {
        return Err(ModelError::ConstraintViolated(format!(
            "strike must be positive, got {strike}"
        )));
    }
    match name {
        ModelName::Gbm1d => {
            let rate = req(params.rate, "rate", name)?;
            let vol = params
                .vol
                .as_ref()
                .and_then(|v| v.first().copied())
                .ok_or(ModelError::MissingParam("vol", name))?;
            check_nonneg("rate", rate)?;
            check_nonneg("vol", vol)?;
            Ok(ModelSpec {
                name,
                dim: 1,
                noise_dim: 1,
                strike,
                kind: ModelKind::Gbm1d { rate, vol },
            })
        }
        ModelName::BasketNd => {
            let rate = req(params.rate, "rate", name)?;
            let vols = params
                .vol
                .clone()
                .ok_or(ModelError::MissingParam("vol", name))?;
            let weights = params
                .weights
                .clone()
                .ok_or(ModelError::MissingParam("weights", name))?;
            check_nonneg("rate", rate)?;
            if vols.is_empty() || vols.len() != weights.len() {
                return Err(ModelError::ConstraintViolated(format!(
                    "need matching vol/weight vectors, got {} vols and {} weights",
                    vols.len(),
                    weights.len()
                )));
            }
            for &v in &vols {
                check_nonneg("vol", v)?;
            }
            if weights.iter().any(|&w| w < 0.0) {
                return Err(ModelError::ConstraintViolated(
                    "basket weights must be nonnegative".into(),
                ));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(ModelError::ConstraintViolated(format!(
                    "basket weights must sum to 1, got {total}"
                )));
            }
            let dim = vols.len();
            Ok(ModelSpec {
                name,
                dim,
                noise_dim: dim,
                strike,
                kind: ModelKind::BasketNd {
                    rate,
                    vols,
                    weights,
                },
            })
        }
        ModelName::HestonLog => {
            let kappa = req(params.kappa, "kappa", name)?;
            let theta = req(params.theta, "theta", name)?;
            let eta_vol = req(params.eta_vol, "eta_vol", name)?;
            let v_min = params.v_min.unwrap_or(1e-4);
            check_nonneg("kappa", kappa)?;
            check_nonneg("theta", theta)?;
            check_nonneg("eta_vol", eta_vol)?;
            if 2.0 * kappa * theta <= eta_vol * eta_vol {
                return Err(ModelError::ConstraintViolated(format!(
                    "Feller condition 2*kappa*theta > eta_vol^2 violated: {} <= {}",
                    2.0 * kappa * theta,
                    eta_vol * eta_vol
                )));
            }
            if v_min <= 0.0 {
                return Err(ModelError::ConstraintViolated(format!(
                    "v_min must be positive, got {v_min}"
                )));
            }
            Ok(ModelSpec {
                name,
                dim: 2,
                noise_dim: 2,
                strike,
                kind: ModelKind::HestonLog {
                    kappa,
                    theta,
                    eta_vol,
                    v_min,
                },
            })
        }
        ModelName::Custom => Err(ModelError::UnsupportedModel(
            "custom models are built with ModelSpec::custom, not make_model".into(),
        )),
        ModelName::AsianRegularized => {
            let rate = req(params.rate, "rate", name)?;
            let vol = params
                .vol
                .as_ref()
                .and_then(|v| v.first().copied())
                .ok_or(ModelError::MissingParam("vol", name))?;
            let delta = req(params.delta, "delta", name)?;
            let horizon = req(params.horizon, "horizon", name)?;
            check_nonneg("rate", rate)?;
            check_nonneg("vol", vol)?;
            if delta <= 0.0 {
                return Err(ModelError::ConstraintViolated(format!(
                    "regularization delta must be positive, got {delta}"
                )));
            }
            if horizon <= 0.0 {
                return Err(ModelError::ConstraintViolated(format!(
                    "horizon must be positive, got {horizon}"
                )));
            }
            Ok(ModelSpec {
                name,
                dim: 3,
                noise_dim: 1,
                strike,
                kind: ModelKind::AsianRegularized {
                    rate,
                    vol,
                    delta,
                    horizon,
                },
            })
        }
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<(), ModelError> {
    if v < 0.0 || !v.is_finite() {
        Err(ModelError::ConstraintViolated(format!(
            "{name} must be finite and nonnegative, got {v}"
        )))
    } else {
        Ok(())
    }
}

impl ModelSpec {
    /// Wraps user-supplied coefficient callbacks as a model. `strike_scale`
    /// only fixes domain defaults and contact tolerances.
    pub fn custom(custom: CustomModel, strike_scale: f64) -> Self {
        ModelSpec {
            name: ModelName::Custom,
            dim: custom.dim,
            noise_dim: custom.noise_dim,
            strike: strike_scale,
            kind: ModelKind::Custom(custom),
        }
    }

    pub fn name(&self) -> ModelName {
        self.name
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the driving Wiener process.
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn rate(&self) -> f64 {
        match &self.kind {
            ModelKind::Gbm1d { rate, .. } => *rate,
            ModelKind::BasketNd { rate, .. } => *rate,
            ModelKind::HestonLog { .. } => 0.0,
            ModelKind::AsianRegularized { rate, .. } => *rate,
            ModelKind::Custom(_) => 0.0,
        }
    }

    /// Drift vector `b(x)`, written into `out` (length `dim`).
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Gbm1d { rate, .. } => out[0] = rate * x[0],
            ModelKind::BasketNd { rate, .. } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = rate * xi;
                }
            }
            ModelKind::HestonLog { kappa, theta, .. } => {
                out[0] = -0.5 * x[1];
                out[1] = kappa * (theta - x[1]);
            }
            ModelKind::AsianRegularized { rate, delta, .. } => {
                out[0] = rate * x[0];
                out[1] = (x[0] - x[1]) / (x[2] + delta);
                out[2] = 1.0;
            }
            ModelKind::Custom(c) => (c.drift)(x, out),
        }
    }

    /// Diffusion factor `σ(x)`, written row-major into `out`
    /// (`dim × noise_dim`). States with negative variance/price are clamped
    /// to zero inside square roots (full truncation), so the factor stays
    /// real off the physical domain.
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match &self.kind {
            ModelKind::Gbm1d { vol, .. } => out[0] = vol * x[0],
            ModelKind::BasketNd { vols, .. } => {
                let n = self.dim;
                for i in 0..n {
                    out[i * n + i] = vols[i] * x[i];
                }
            }
            ModelKind::HestonLog { eta_vol, .. } => {
                let v = x[1].max(0.0);
                out[0] = v.sqrt();
                out[3] = eta_vol * v.sqrt();
            }
            ModelKind::AsianRegularized { vol, .. } => out[0] = vol * x[0],
            ModelKind::Custom(c) => (c.diffusion)(x, out),
        }
    }

    /// Diffusion matrix `a(x) = σσ*(x)`, written row-major into `out`
    /// (`dim × dim`). Evaluated as a formula (no clamping), so it extends
    /// smoothly outside the physical domain; used by the operator stencils
    /// and the adjoint certificate.
    pub fn diffusion_matrix(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match &self.kind {
            ModelKind::Gbm1d { vol, .. } => out[0] = vol * vol * x[0] * x[0],
            ModelKind::BasketNd { vols, .. } => {
                let n = self.dim;
                for i in 0..n {
                    out[i * n + i] = vols[i] * vols[i] * x[i] * x[i];
                }
            }
            ModelKind::HestonLog { eta_vol, .. } => {
                out[0] = x[1];
                out[3] = eta_vol * eta_vol * x[1];
            }
            ModelKind::AsianRegularized { vol, .. } => out[0] = vol * vol * x[0] * x[0],
            ModelKind::Custom(c) => (c.diffusion_matrix)(x, out),
        }
    }

    /// Static sparsity of `a = σσ*`: the `(i, j)` pairs (with `i ≤ j`) that
    /// can be nonzero somewhere. Off-diagonal pairs are absent for the whole
    /// catalog (uncorrelated noise).
    pub fn diffusion_structure(&self) -> Vec<(usize, usize)> {
        match &self.kind {
            ModelKind::Gbm1d { .. } => vec![(0, 0)],
            ModelKind::BasketNd { .. } => (0..self.dim).map(|i| (i, i)).collect(),
            ModelKind::HestonLog { .. } => vec![(0, 0), (1, 1)],
            ModelKind::AsianRegularized { .. } => vec![(0, 0)],
            ModelKind::Custom(c) => c.structure.clone(),
        }
    }

    /// Discount rate `c(x) ≥ 0`.
    pub fn discount(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Gbm1d { rate, .. } => *rate,
            ModelKind::BasketNd { rate, .. } => *rate,
            // The stopping functionals of these two models carry no
            // discounting; the rate only enters through the price drift.
            ModelKind::HestonLog { .. } => 0.0,
            ModelKind::AsianRegularized { .. } => 0.0,
            ModelKind::Custom(c) => (c.discount)(x),
        }
    }

    /// Basket weights, if the model has them.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.kind {
            ModelKind::BasketNd { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn heston_params(&self) -> Option<(f64, f64, f64, f64)> {
        match &self.kind {
            ModelKind::HestonLog {
                kappa,
                theta,
                eta_vol,
                v_min,
            } => Some((*kappa, *theta, *eta_vol, *v_min)),
            _ => None,
        }
    }

    pub fn asian_delta(&self) -> Option<f64> {
        match &self.kind {
            ModelKind::AsianRegularized { delta, .. } => Some(*delta),
            _ => None,
        }
    }

    /// Clamps a state onto the set where Euler–Maruyama coefficients are
    /// evaluated (full truncation: prices and variances floored at zero).
    pub fn clamp_state(&self, z: &mut [f64]) {
        match &self.kind {
            ModelKind::Gbm1d { .. } | ModelKind::BasketNd { .. } => {
                for zi in z.iter_mut() {
                    *zi = zi.max(0.0);
                }
            }
            ModelKind::HestonLog { .. } => z[1] = z[1].max(0.0),
            ModelKind::AsianRegularized { .. } => z[0] = z[0].max(0.0),
            ModelKind::Custom(_) => {}
        }
    }

    /// Default truncated domain box, scaled by the strike.
    pub fn default_box(&self) -> Vec<[f64; 2]> {
        let k = self.strike;
        match &self.kind {
            ModelKind::Gbm1d { .. } => vec![[0.0, 4.0 * k]],
            ModelKind::BasketNd { .. } => vec![[0.0, 4.0 * k]; self.dim],
            ModelKind::HestonLog { v_min, .. } => {
                let xc = k.ln();
                vec![[xc - 6.0, xc + 6.0], [*v_min, 2.0]]
            }
            ModelKind::AsianRegularized { horizon, .. } => {
                vec![[0.0, 4.0 * k], [0.0, 4.0 * k], [0.0, *horizon]]
            }
            ModelKind::Custom(c) => c.domain.clone(),
        }
    }

    /// Default boundary treatment per axis face.
    ///
    /// Dirichlet pins far fields where the value approaches the payoff.
    /// One-sided rows handle degenerate or drift-only faces: the Heston
    /// variance axis (inward drift at both faces), the Asian average and
    /// clock axes, and the absorbing price origin of the Asian system. The
    /// top of the Asian clock axis is an inflow face for the backward
    /// evolution, so it is pinned to the payoff as well.
    pub fn default_boundaries(&self) -> Vec<[BoundaryKind; 2]> {
        use BoundaryKind::*;
        match &self.kind {
            ModelKind::Gbm1d { .. } => vec![[DirichletPayoff, DirichletPayoff]],
            ModelKind::BasketNd { .. } => vec![[DirichletPayoff, DirichletPayoff]; self.dim],
            ModelKind::HestonLog { .. } => vec![
                [DirichletPayoff, DirichletPayoff],
                [OutflowOneSided, OutflowOneSided],
            ],
            ModelKind::AsianRegularized { .. } => vec![
                [OutflowOneSided, DirichletPayoff],
                [OutflowOneSided, OutflowOneSided],
                [OutflowOneSided, DirichletPayoff],
            ],
            ModelKind::Custom(_) => vec![[DirichletPayoff, DirichletPayoff]; self.dim],
        }
    }

    /// Default pricing-grid axes for the requested per-axis sizes, graded
    /// toward the strike (and long-run variance for Heston).
    pub fn default_axes(&self, sizes: &[usize]) -> Vec<AxisSpec> {
        assert_eq!(sizes.len(), self.dim);
        let boxes = self.default_box();
        let bounds = self.default_boundaries();
        let k = self.strike;
        let mut axes = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let [lo, hi] = boxes[d];
            let grading = match (&self.kind, d) {
                (ModelKind::Gbm1d { .. }, 0) | (ModelKind::BasketNd { .. }, _) => {
                    Grading::GeometricTowardFocus {
                        focus: k,
                        strength: 20.0,
                    }
                }
                (ModelKind::HestonLog { .. }, 0) => Grading::GeometricTowardFocus {
                    focus: k.ln(),
                    strength: 20.0,
                },
                (ModelKind::HestonLog { theta, .. }, 1) => Grading::GeometricTowardFocus {
                    focus: *theta,
                    strength: 20.0,
                },
                (ModelKind::AsianRegularized { .. }, 0) => Grading::GeometricTowardFocus {
                    focus: k,
                    strength: 10.0,
                },
                _ => Grading::Uniform,
            };
            axes.push(AxisSpec {
                lo,
                hi,
                size: sizes[d],
                grading,
                boundary: bounds[d],
            });
        }
        axes
    }

    /// Default certificate grid resolution per axis.
    pub fn default_certificate_sizes(&self) -> Vec<usize> {
        match self.dim {
            1 => vec![2001],
            2 => match self.name {
                ModelName::HestonLog => vec![241, 121],
                _ => vec![201, 201],
            },
            _ => vec![61, 61, 31],
        }
    }
}

use crate::grid::Grading;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gbm_formulas() {
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let mut b = [0.0];
        m.drift(&[1.0], &mut b);
        assert_abs_diff_eq!(b[0], 0.05);
        let mut s = [0.0];
        m.diffusion(&[1.0], &mut s);
        assert_abs_diff_eq!(s[0], 0.2);
        assert_abs_diff_eq!(m.discount(&[1.0]), 0.05);
    }

    #[test]
    fn heston_drift_at_long_run_variance() {
        let m = make_model(ModelName::HestonLog, &ModelParams::heston(2.0, 0.04, 0.3, 1.0))
            .unwrap();
        let mut b = [0.0, 0.0];
        m.drift(&[0.0, 0.04], &mut b);
        assert_abs_diff_eq!(b[0], -0.02);
        assert_abs_diff_eq!(b[1], 0.0);
    }

    #[test]
    fn heston_feller_violation_rejected() {
        let err = make_model(ModelName::HestonLog, &ModelParams::heston(1.0, 0.01, 0.3, 1.0))
            .unwrap_err();
        match err {
            ModelError::ConstraintViolated(msg) => assert!(msg.contains("Feller")),
            other => panic!("expected ConstraintViolated, got {other:?}"),
        }
    }

    #[test]
    fn basket_weights_validated() {
        let err = make_model(
            ModelName::BasketNd,
            &ModelParams::basket(0.05, vec![0.2, 0.2], vec![0.7, 0.7], 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ConstraintViolated(_)));
    }

    #[test]
    fn asian_needs_positive_delta() {
        let err = make_model(
            ModelName::AsianRegularized,
            &ModelParams::asian(0.05, 0.2, 0.0, 1.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ConstraintViolated(_)));
    }

    #[test]
    fn missing_param_is_reported() {
        let err = make_model(ModelName::Gbm1d, &ModelParams::default()).unwrap_err();
        assert!(matches!(err, ModelError::MissingParam("strike", _)));
    }

    #[test]
    fn diffusion_linear_growth_and_bounded_derivatives() {
        // |σ(x)| ≤ C(1+|x|) with bounded difference quotients, sampled.
        let m = make_model(ModelName::Gbm1d, &ModelParams::gbm1d(0.05, 0.2, 100.0)).unwrap();
        let mut s = [0.0];
        let h = 1e-4;
        for i in 0..200 {
            let x = i as f64 * 2.0;
            m.diffusion(&[x], &mut s);
            let sx = s[0];
            assert!(sx.abs() <= 0.2 * (1.0 + x) + 1e-12);
            m.diffusion(&[x + h], &mut s);
            let quotient = (s[0] - sx) / h;
            assert!(quotient.abs() < 0.2 + 1e-6);
        }
    }
}
