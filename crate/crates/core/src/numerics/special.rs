use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(statrs::function::gamma::digamma(x))
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "argument must be positive and finite, got {x}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!((digamma(1.0).unwrap() + 0.577_215_664_9).abs() < 1e-10);
        assert!((log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-14);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_GAMMA)).abs() < 1e-14);
    }

    #[test]
    fn recurrences_hold_far_from_one() {
        for &x in &[0.01, 0.3, 3.7, 49.0, 250.5] {
            let lg = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap();
            assert!((lg - x.ln()).abs() < 1e-12 * x.ln().abs().max(1.0), "x={x}");
            let dg = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((dg - 1.0 / x).abs() < 1e-12 / x.min(1.0), "x={x}");
        }
    }

    #[test]
    fn digamma_is_derivative_of_log_gamma() {
        for &x in &[0.2, 1.5, 7.0, 50.0] {
            let h = 1e-5 * x;
            let fd = (log_gamma(x + h).unwrap() - log_gamma(x - h).unwrap()) / (2.0 * h);
            assert!((fd - digamma(x).unwrap()).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn nonpositive_arguments_rejected() {
        assert!(matches!(log_gamma(0.0), Err(Error::Parameter(_))));
        assert!(matches!(digamma(-1.0), Err(Error::Parameter(_))));
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn beta_function() {
        assert!((ln_beta(2.0, 3.0).unwrap() - (1.0f64 / 12.0).ln()).abs() < 1e-14);
    }
}
