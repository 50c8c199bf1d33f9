//! Black–Scholes closed forms.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{OptionKind, OracleResult};

/// European option value under geometric Brownian motion with constant
/// volatility; degenerate `vol → 0` and `T → 0` limits are evaluated
/// analytically.
pub fn bs_european(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    maturity: f64,
    kind: OptionKind,
) -> OracleResult {
    let disc_strike = strike * (-rate * maturity).exp();
    if vol <= 0.0 || maturity <= 0.0 || spot <= 0.0 {
        let value = match kind {
            OptionKind::Put => (disc_strike - spot).max(0.0),
            OptionKind::Call => (spot - disc_strike).max(0.0),
        };
        return OracleResult::deterministic(value, 0);
    }
    let sqrt_t = maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / (vol * sqrt_t);
    let d2 = d1 - vol * sqrt_t;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let value = match kind {
        OptionKind::Call => spot * normal.cdf(d1) - disc_strike * normal.cdf(d2),
        OptionKind::Put => disc_strike * normal.cdf(-d2) - spot * normal.cdf(-d1),
    };
    OracleResult::deterministic(value, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn vanishing_vol_put_limit() {
        let r = bs_european(80.0, 100.0, 0.05, 0.0, 1.0, OptionKind::Put);
        assert_abs_diff_eq!(r.value, 100.0 * (-0.05f64).exp() - 80.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn put_call_parity(
            spot in 10.0f64..300.0,
            strike in 10.0f64..300.0,
            rate in 0.0f64..0.15,
            vol in 0.01f64..0.8,
            t in 0.05f64..3.0,
        ) {
            let c = bs_european(spot, strike, rate, vol, t, OptionKind::Call).value;
            let p = bs_european(spot, strike, rate, vol, t, OptionKind::Put).value;
            let parity = spot - strike * (-rate * t).exp();
            prop_assert!((c - p - parity).abs() < 1e-12 * (1.0 + spot + strike));
        }

        #[test]
        fn monotone_in_vol(
            spot in 50.0f64..150.0,
            vol in 0.05f64..0.5,
        ) {
            let lo = bs_european(spot, 100.0, 0.03, vol, 1.0, OptionKind::Put).value;
            let hi = bs_european(spot, 100.0, 0.03, vol + 0.05, 1.0, OptionKind::Put).value;
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
