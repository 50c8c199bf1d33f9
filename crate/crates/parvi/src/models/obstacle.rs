//! Payoff/obstacle functions with their structural flags.

use std::sync::Arc;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleKind {
    Put,
    Call,
    BasketPut,
    Margrabe,
    AsianPutOnY,
    Custom,
}

/// User-supplied obstacle payload for [`ObstacleKind::Custom`].
#[derive(Clone)]
pub struct CustomObstacle {
    pub payoff: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
    pub time_dependent: bool,
    pub lipschitz_const: f64,
    pub convexity_flag: bool,
}

#[derive(Clone, Default)]
pub struct ObstacleParams {
    pub strike: Option<f64>,
    /// Basket weights `λⱼ`.
    pub weights: Option<Vec<f64>>,
    /// Margrabe `(i, j, λ)` for payoff `(xᵢ − λxⱼ)⁺`.
    pub margrabe: Option<(usize, usize, f64)>,
    /// Compose the payoff with `exp` on coordinate 0 (log-price models):
    /// `g̃(x, ·) = g(eˣ)`.
    pub log_price: bool,
    pub custom: Option<CustomObstacle>,
}

impl ObstacleParams {
    pub fn strike(k: f64) -> Self {
        ObstacleParams {
            strike: Some(k),
            ..Default::default()
        }
    }

    pub fn log_strike(k: f64) -> Self {
        ObstacleParams {
            strike: Some(k),
            log_price: true,
            ..Default::default()
        }
    }

    pub fn basket(k: f64, weights: Vec<f64>) -> Self {
        ObstacleParams {
            strike: Some(k),
            weights: Some(weights),
            ..Default::default()
        }
    }
}

#[derive(Clone)]
enum PayoffData {
    Put { strike: f64, log_price: bool },
    Call { strike: f64, log_price: bool },
    BasketPut { strike: f64, weights: Vec<f64> },
    Margrabe { i: usize, j: usize, lam: f64 },
    AsianPutOnY { strike: f64 },
    Custom(CustomObstacle),
}

/// An obstacle `g`, possibly time-dependent, with its Lipschitz bound and
/// the convexity flag asserting `Tr[σσ* D²g] ≥ 0` distributionally.
#[derive(Clone)]
pub struct ObstacleSpec {
    kind: ObstacleKind,
    data: PayoffData,
    time_dependent: bool,
    lipschitz_const: f64,
    convexity_flag: bool,
}

impl std::fmt::Debug for ObstacleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObstacleSpec")
            .field("kind", &self.kind)
            .field("time_dependent", &self.time_dependent)
            .field("lipschitz_const", &self.lipschitz_const)
            .field("convexity_flag", &self.convexity_flag)
            .finish()
    }
}

impl ObstacleSpec {
    pub fn kind(&self) -> ObstacleKind {
        self.kind
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    pub fn convexity_flag(&self) -> bool {
        self.convexity_flag
    }

    pub fn payoff(&self, t: f64, x: &[f64]) -> f64 {
        match &self.data {
            PayoffData::Put { strike, log_price } => {
                let s = if *log_price { x[0].exp() } else { x[0] };
                (strike - s).max(0.0)
            }
            PayoffData::Call { strike, log_price } => {
                let s = if *log_price { x[0].exp() } else { x[0] };
                (s - strike).max(0.0)
            }
            PayoffData::BasketPut { strike, weights } => {
                let basket: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi).sum();
                (strike - basket).max(0.0)
            }
            PayoffData::Margrabe { i, j, lam } => (x[*i] - lam * x[*j]).max(0.0),
            PayoffData::AsianPutOnY { strike } => (strike - x[1]).max(0.0),
            PayoffData::Custom(c) => (c.payoff)(t, x),
        }
    }
}

/// Builds an obstacle; strike/weights are validated per kind.
pub fn make_obstacle(kind: ObstacleKind, params: &ObstacleParams) -> Result<ObstacleSpec, ModelError> {
    let strike = || params.strike.ok_or(ModelError::MissingObstacleParam("strike"));
    match kind {
        ObstacleKind::Put => {
            let k = strike()?;
            Ok(ObstacleSpec {
                kind,
                data: PayoffData::Put {
                    strike: k,
                    log_price: params.log_price,
                },
                time_dependent: false,
                // In log coordinates |d/dx (k − eˣ)⁺| ≤ k.
                lipschitz_const: if params.log_price { k } else { 1.0 },
                convexity_flag: true,
            })
        }
        ObstacleKind::Call => {
            let k = strike()?;
            Ok(ObstacleSpec {
                kind,
                data: PayoffData::Call {
                    strike: k,
                    log_price: params.log_price,
                },
                time_dependent: false,
                lipschitz_const: if params.log_price { f64::INFINITY } else { 1.0 },
                convexity_flag: true,
            })
        }
        ObstacleKind::BasketPut => {
            let k = strike()?;
            let weights = params
                .weights
                .clone()
                .ok_or(ModelError::MissingObstacleParam("weights"))?;
            let lip = weights.iter().cloned().fold(0.0, f64::max);
            Ok(ObstacleSpec {
                kind,
                data: PayoffData::BasketPut { strike: k, weights },
                time_dependent: false,
                lipschitz_const: lip,
                convexity_flag: true,
            })
        }
        ObstacleKind::Margrabe => {
            let (i, j, lam) = params
                .margrabe
                .ok_or(ModelError::MissingObstacleParam("margrabe"))?;
            Ok(ObstacleSpec {
                kind,
                data: PayoffData::Margrabe { i, j, lam },
                time_dependent: false,
                lipschitz_const: lam.max(1.0),
                convexity_flag: true,
            })
        }
        ObstacleKind::AsianPutOnY => {
            let k = strike()?;
            Ok(ObstacleSpec {
                kind,
                data: PayoffData::AsianPutOnY { strike: k },
                time_dependent: false,
                lipschitz_const: 1.0,
                convexity_flag: true,
            })
        }
        ObstacleKind::Custom => {
            let c = params
                .custom
                .clone()
                .ok_or(ModelError::MissingObstacleParam("custom"))?;
            Ok(ObstacleSpec {
                kind,
                time_dependent: c.time_dependent,
                lipschitz_const: c.lipschitz_const,
                convexity_flag: c.convexity_flag,
                data: PayoffData::Custom(c),
            })
        }
    }
}
