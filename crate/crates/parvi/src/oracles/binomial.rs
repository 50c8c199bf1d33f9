//! Cox–Ross–Rubinstein tree with early exercise.

use super::{OptionKind, OracleResult};

/// American option price on a CRR lattice: backward induction with
/// `max(continuation, payoff)` at every node.
pub fn binomial_american(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    maturity: f64,
    steps: usize,
    kind: OptionKind,
) -> OracleResult {
    assert!(steps >= 1);
    assert!(vol >= 0.0 && maturity > 0.0);
    let payoff = |s: f64| match kind {
        OptionKind::Put => (strike - s).max(0.0),
        OptionKind::Call => (s - strike).max(0.0),
    };

    if vol < 1e-14 {
        // Deterministic price path S·e^{rt}: optimal exercise is immediate
        // for the put and terminal for the call (r ≥ 0).
        let value = match kind {
            OptionKind::Put => (strike - spot).max(0.0),
            OptionKind::Call => (spot - strike * (-rate * maturity).exp()).max(0.0),
        };
        return OracleResult::deterministic(value, steps);
    }

    let dt = maturity / steps as f64;
    let up = (vol * dt.sqrt()).exp();
    let down = 1.0 / up;
    let growth = (rate * dt).exp();
    let p = ((growth - down) / (up - down)).clamp(0.0, 1.0);
    let disc = (-rate * dt).exp();

    // Terminal layer: j up-moves out of `steps`.
    let mut values: Vec<f64> = (0..=steps)
        .map(|j| payoff(spot * up.powi(j as i32) * down.powi((steps - j) as i32)))
        .collect();

    for i in (0..steps).rev() {
        for j in 0..=i {
            let s = spot * up.powi(j as i32) * down.powi((i - j) as i32);
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = cont.max(payoff(s));
        }
        values.truncate(i + 1);
    }
    OracleResult::deterministic(values[0], steps)
}
