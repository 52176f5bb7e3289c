use super::{EstimateWithError, Integrator, Interval};
use crate::error::{Error, Result};

/// Densities below this value contribute nothing to `−p ln p`.
pub const PDF_FLOOR: f64 = 1e-300;

/// `−∫ p ln p` over `support`, after checking that `p` has unit mass.
pub fn entropy_from_pdf(
    pdf: impl Fn(f64) -> f64,
    support: Interval,
    tol: f64,
) -> Result<EstimateWithError> {
    entropy_from_pdf_pieces(pdf, &[support.lo, support.hi], tol)
}

/// As [`entropy_from_pdf`], splitting the support at `cuts` (kinks, jumps, singular points).
pub fn entropy_from_pdf_pieces(
    pdf: impl Fn(f64) -> f64,
    cuts: &[f64],
    tol: f64,
) -> Result<EstimateWithError> {
    let integrator = Integrator::with_tolerance(tol);
    let mass = integrator.integrate_pieces(&pdf, cuts)?;
    if (mass.value - 1.0).abs() > 10.0 * tol.max(mass.abs_error) {
        return Err(Error::Input(format!(
            "density integrates to {} (error {}), expected 1",
            mass.value, mass.abs_error
        )));
    }
    integrator.integrate_pieces(
        |x| {
            let p = pdf(x);
            if p < PDF_FLOOR {
                0.0
            } else {
                -p * p.ln()
            }
        },
        cuts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::HALF_LN_2PI_E;
    use std::f64::consts::PI;

    #[test]
    fn standard_normal() {
        let h = entropy_from_pdf(
            |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Interval::REAL_LINE,
            1e-10,
        )
        .unwrap();
        assert!((h.value - HALF_LN_2PI_E).abs() < 1e-8);
    }

    #[test]
    fn symmetric_uniform() {
        let a = 3f64.sqrt();
        let h = entropy_from_pdf(|_| 0.5 / a, Interval::new(-a, a), 1e-10).unwrap();
        assert!((h.value - (2.0 * a).ln()).abs() < 1e-10);
    }

    #[test]
    fn unit_exponential() {
        let h = entropy_from_pdf(
            |x: f64| (-x).exp(),
            Interval::new(0.0, f64::INFINITY),
            1e-10,
        )
        .unwrap();
        assert!((h.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn laplace_with_kink() {
        let b = 0.5f64.sqrt();
        let h = entropy_from_pdf_pieces(
            |x: f64| (-x.abs() / b).exp() / (2.0 * b),
            &[f64::NEG_INFINITY, 0.0, f64::INFINITY],
            1e-10,
        )
        .unwrap();
        assert!((h.value - (1.0 + (2.0 * b).ln())).abs() < 1e-8);
    }

    #[test]
    fn unnormalized_density_rejected() {
        let r = entropy_from_pdf(|_| 1.0, Interval::new(0.0, 2.0), 1e-8);
        assert!(matches!(r, Err(Error::Input(_))));
    }
}
