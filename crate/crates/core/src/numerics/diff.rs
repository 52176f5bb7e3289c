use crate::error::{Error, Result};

/// Symmetric difference quotient `(f(y+h) − f(y−h)) / 2h`.
pub fn central_diff(f: impl Fn(f64) -> f64, y: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param(format!("step must be positive, got {h}")));
    }
    let up = f(y + h);
    if !up.is_finite() {
        return Err(Error::Evaluation { at: y + h });
    }
    let down = f(y - h);
    if !down.is_finite() {
        return Err(Error::Evaluation { at: y - h });
    }
    Ok((up - down) / (2.0 * h))
}

/// Richardson-extrapolated central difference over steps `h` and `h/2`.
pub fn richardson_diff(f: impl Fn(f64) -> f64, y: f64, h: f64) -> Result<f64> {
    let coarse = central_diff(&f, y, h)?;
    let fine = central_diff(&f, y, 0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratics() {
        let d = central_diff(|x| x * x, 3.0, 1e-4).unwrap();
        assert!((d - 6.0).abs() < 1e-7);
    }

    #[test]
    fn constant_has_zero_slope() {
        assert_eq!(central_diff(|_| 4.2, -1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn exponential_at_zero() {
        let d = central_diff(f64::exp, 0.0, 1e-5).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn richardson_beats_plain() {
        let plain = central_diff(f64::sin, 1.0, 1e-2).unwrap();
        let rich = richardson_diff(f64::sin, 1.0, 1e-2).unwrap();
        assert!((rich - 1f64.cos()).abs() < (plain - 1f64.cos()).abs() * 1e-3);
    }

    #[test]
    fn non_finite_values_are_errors() {
        let r = central_diff(|x: f64| x.ln(), 0.0, 1e-3);
        assert!(matches!(r, Err(Error::Evaluation { .. })));
        assert!(central_diff(|x| x, 0.0, 0.0).is_err());
    }
}
