//! Quadrature, differentiation, special functions and entropy estimators.

mod diff;
mod entropy;
mod integrate;
mod knn;
mod quadrature;
mod special;

use serde::{Deserialize, Serialize};

pub use diff::{central_diff, richardson_diff};
pub use entropy::{entropy_from_pdf, entropy_from_pdf_pieces, PDF_FLOOR};
pub use integrate::{integrate, Integrator};
pub use knn::{knn_entropy, KnnEntropy, PointCloud};
pub use quadrature::{gauss_hermite, gauss_legendre, PanelRule, QuadratureKind, QuadratureRule};
pub use special::{digamma, ln_beta, log_gamma, EULER_GAMMA};

/// `½ ln(2πe)`, the entropy of a standard normal variable.
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
    Analytic,
}

/// A numerical value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub abs_error: f64,
    pub method: Method,
}

impl EstimateWithError {
    pub fn new(value: f64, abs_error: f64, method: Method) -> Self {
        debug_assert!(abs_error >= 0.0);
        Self {
            value,
            abs_error: abs_error.abs(),
            method,
        }
    }

    pub fn analytic(value: f64) -> Self {
        Self::new(value, 0.0, Method::Analytic)
    }

    pub fn quadrature(value: f64, abs_error: f64) -> Self {
        Self::new(value, abs_error, Method::Quadrature)
    }

    pub fn monte_carlo(value: f64, abs_error: f64) -> Self {
        Self::new(value, abs_error, Method::MonteCarlo)
    }

    /// Applies `f` to the value; the error is propagated through `|f'|`.
    pub fn map(self, f: impl Fn(f64) -> f64, derivative: f64) -> Self {
        Self::new(
            f(self.value),
            self.abs_error * derivative.abs(),
            self.method,
        )
    }
}

/// Evaluates `f` and propagates the input errors: each input moves by ± its
/// error in turn, the larger finite change counts, and changes add in
/// root-sum-square.
pub fn propagate<const N: usize>(
    inputs: [EstimateWithError; N],
    f: impl Fn([f64; N]) -> f64,
) -> EstimateWithError {
    let values = inputs.map(|e| e.value);
    let base = f(values);
    let mut rss = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let shift = [input.abs_error, -input.abs_error]
            .into_iter()
            .map(|step| {
                let mut moved = values;
                moved[i] += step;
                (f(moved) - base).abs()
            })
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max);
        rss += shift * shift;
    }
    let method = if inputs.iter().any(|e| e.method == Method::MonteCarlo) {
        Method::MonteCarlo
    } else if inputs.iter().all(|e| e.method == Method::Analytic) {
        Method::Analytic
    } else {
        Method::Quadrature
    };
    EstimateWithError::new(base, rss.sqrt(), method)
}

/// Entropy power of an entropy estimate, with `dN/dh = 2N`.
pub fn entropy_power_estimate(h: EstimateWithError) -> EstimateWithError {
    let n = entropy_power(h.value);
    h.map(|_| n, 2.0 * n)
}

/// Multiple of the root-sum-square error used by [`combined_tolerance`].
pub const COMBINED_FACTOR: f64 = 3.0;
/// Smallest tolerance [`combined_tolerance`] returns.
pub const COMBINED_FLOOR: f64 = 1e-6;

/// Comparison tolerance: three times the root-sum-square of the operand
/// errors, never below `1e-6`.
pub fn combined_tolerance(errors: &[f64]) -> f64 {
    let rss = errors.iter().map(|e| e * e).sum::<f64>().sqrt();
    (COMBINED_FACTOR * rss).max(COMBINED_FLOOR)
}

/// Entropy power `e^{2h}/(2πe)`.
pub fn entropy_power(h: f64) -> f64 {
    (2.0 * (h - HALF_LN_2PI_E)).exp()
}

/// Inverse of [`entropy_power`].
pub fn entropy_from_power(n: f64) -> f64 {
    HALF_LN_2PI_E + 0.5 * n.ln()
}

/// Shortest decimal text that parses back to exactly `v`, with `.` as the
/// separator and an exponent only for very small or large magnitudes.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

/// `max(0, ln x)`.
pub fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// A closed interval whose ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_is_linear_for_small_errors() {
        let a = EstimateWithError::quadrature(2.0, 1e-6);
        let b = EstimateWithError::analytic(3.0);
        let p = propagate([a, b], |[x, y]| x * y);
        assert_eq!(p.value, 6.0);
        assert!((p.abs_error - 3e-6).abs() < 1e-12);
        assert_eq!(p.method, Method::Quadrature);
        // Moves that leave the domain are ignored.
        let sqrt = propagate([EstimateWithError::monte_carlo(1.0, 2.0)], |[x]| x.sqrt());
        assert!((sqrt.abs_error - (3f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(sqrt.method, Method::MonteCarlo);
    }

    #[test]
    fn entropy_power_round_trip() {
        assert!((entropy_power(HALF_LN_2PI_E) - 1.0).abs() < 1e-15);
        let h = 0.37;
        assert!((entropy_from_power(entropy_power(h)) - h).abs() < 1e-14);
        let lhs = HALF_LN_2PI_E;
        let rhs = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn tolerance_floor_and_rss() {
        assert_eq!(combined_tolerance(&[]), 1e-6);
        assert!((combined_tolerance(&[3e-3, 4e-3]) - 1.5e-2).abs() < 1e-15);
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, 1.0, -2.5e-300, 1.0 / 3.0, 6.02e23, f64::MIN_POSITIVE] {
            let text = format_number(v);
            assert_eq!(text.parse::<f64>().unwrap(), v, "{text}");
            assert!(!text.contains(','));
        }
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1e-20), "1e-20");
    }

    #[test]
    fn log_plus_clamps() {
        assert_eq!(log_plus(0.5), 0.0);
        assert_eq!(log_plus(1.0), 0.0);
        assert!((log_plus(std::f64::consts::E) - 1.0).abs() < 1e-15);
    }
}
