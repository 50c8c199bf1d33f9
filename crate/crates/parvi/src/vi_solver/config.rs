/// Penalization scheme for the inner obstacle solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyKind {
    #[default]
    Classic,
    Bounded,
}

/// Time-marching and inner-solve controls.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of implicit steps `M`; `h = T/M`.
    pub steps: usize,
    pub penalty: PenaltyKind,
    pub epsilon: f64,
    /// Optional decreasing `ε` continuation within each step (warm-started);
    /// the last entry is the working `ε`.
    pub epsilon_schedule: Option<Vec<f64>>,
    /// Bounded-penalty weight; the penalty force is capped by `g₁`.
    pub g1: f64,
    /// Per-node override of `g₁`.
    pub g1_per_node: Option<Vec<f64>>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub record_multiplier: bool,
    /// Contact classification threshold on `u − g`.
    pub tol_contact: f64,
}

impl SolverConfig {
    pub fn classic(steps: usize, epsilon: f64) -> Self {
        let cfg = SolverConfig {
            steps,
            penalty: PenaltyKind::Classic,
            epsilon,
            epsilon_schedule: None,
            g1: 1.0,
            g1_per_node: None,
            newton_tol: 1e-10,
            newton_max_iter: 60,
            record_multiplier: true,
            tol_contact: 1e-6,
        };
        cfg.validate();
        cfg
    }

    pub fn bounded(steps: usize, epsilon: f64, g1: f64) -> Self {
        let mut cfg = Self::classic(steps, epsilon);
        cfg.penalty = PenaltyKind::Bounded;
        cfg.g1 = g1;
        cfg.validate();
        cfg
    }

    /// Scales the contact tolerance to the payoff size (1e-6 per unit of
    /// strike).
    pub fn with_strike_scale(mut self, strike: f64) -> Self {
        self.tol_contact = 1e-6 * strike;
        self
    }

    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Self {
        assert!(!schedule.is_empty() && schedule.iter().all(|&e| e > 0.0));
        self.epsilon = *schedule.last().unwrap();
        self.epsilon_schedule = Some(schedule);
        self
    }

    fn validate(&self) {
        assert!(self.steps >= 1, "steps must be >= 1");
        assert!(self.epsilon > 0.0, "epsilon must be positive");
        assert!(self.newton_tol > 0.0, "newton_tol must be positive");
        assert!(self.g1 >= 0.0, "g1 must be nonnegative");
    }

    /// Effective epsilon sequence for one implicit step.
    pub(crate) fn epsilon_seq(&self) -> Vec<f64> {
        self.epsilon_schedule
            .clone()
            .unwrap_or_else(|| vec![self.epsilon])
    }
}
