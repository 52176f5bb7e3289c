use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::EstimateWithError;
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Change of variables that turns an infinite piece into a finite one.
#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = a + t/(1-t)`, `t ∈ [0, 1)`.
    Upper(f64),
    /// `x = b - t/(1-t)`, `t ∈ [0, 1)`; the Jacobian is reported as `|dx/dt|`.
    Lower(f64),
    /// `x = t/(1-t²)`, `t ∈ (-1, 1)`.
    Whole,
}

impl Map {
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Identity => (t, 1.0),
            Map::Upper(a) => {
                let u = 1.0 - t;
                (a + t / u, 1.0 / (u * u))
            }
            Map::Lower(b) => {
                let u = 1.0 - t;
                (b - t / u, 1.0 / (u * u))
            }
            Map::Whole => {
                let u = 1.0 - t * t;
                (t / u, (1.0 + t * t) / (u * u))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7, 15) quadrature.
///
/// The reported error is the raw Kronrod–Gauss difference, which
/// overstates the true error for smooth integrands.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_segments: 4000,
        }
    }
}

impl Integrator {
    pub fn with_tolerance(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<EstimateWithError> {
        self.integrate_pieces(f, &[a, b])
    }

    /// Integrates over `[cuts[0], cuts[last]]`, splitting at every interior cut.
    pub fn integrate_pieces(
        &self,
        f: impl Fn(f64) -> f64,
        cuts: &[f64],
    ) -> Result<EstimateWithError> {
        if cuts.len() < 2 || cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param(format!(
                "integration limits must be strictly increasing, got {cuts:?}"
            )));
        }
        if !(self.abs_tol > 0.0 || self.rel_tol > 0.0) {
            return Err(Error::param("integration tolerance must be positive"));
        }
        let mut heap = BinaryHeap::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (lo, hi, map) = match (a.is_finite(), b.is_finite()) {
                (true, true) => (a, b, Map::Identity),
                (true, false) => (0.0, 1.0, Map::Upper(a)),
                (false, true) => (0.0, 1.0, Map::Lower(b)),
                (false, false) => (-1.0, 1.0, Map::Whole),
            };
            heap.push(kronrod(&f, lo, hi, map)?);
        }

        loop {
            let (value, error) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
            let target = self.abs_tol.max(self.rel_tol * value.abs());
            if error <= target {
                return Ok(EstimateWithError::quadrature(value, error));
            }
            if heap.len() >= self.max_segments {
                return Err(Error::Convergence {
                    what: "adaptive quadrature".into(),
                    estimate: value,
                    abs_error: error,
                });
            }
            let worst = heap.pop().expect("heap is nonempty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(worst.lo < mid && mid < worst.hi) {
                return Err(Error::Convergence {
                    what: "adaptive quadrature (segment width underflow)".into(),
                    estimate: value,
                    abs_error: error,
                });
            }
            heap.push(kronrod(&f, worst.lo, mid, worst.map)?);
            heap.push(kronrod(&f, mid, worst.hi, worst.map)?);
        }
    }
}

fn kronrod(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, map: Map) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |t: f64| -> Result<f64> {
        let (x, jac) = map.apply(t);
        if !x.is_finite() || !jac.is_finite() {
            return Ok(0.0);
        }
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Evaluation { at: x });
        }
        let v = y * jac;
        // A vanishing integrand at an enormous Jacobian can produce NaN.
        Ok(if v.is_finite() { v } else { 0.0 })
    };
    let mut kron = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let pair = if x == 0.0 {
            eval(center)?
        } else {
            eval(center - half * x)? + eval(center + half * x)?
        };
        kron += wk * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs() + 50.0 * f64::EPSILON * (kron * half).abs();
    Ok(Segment {
        lo,
        hi,
        map,
        value,
        error,
    })
}

/// Adaptive integral of `f` over `[a, b]` (ends may be infinite) to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<EstimateWithError> {
    Integrator::with_tolerance(tol).integrate(f, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn normal_density_has_unit_mass() {
        let r = integrate(normal_pdf, f64::NEG_INFINITY, f64::INFINITY, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(r.abs_error <= 1e-10);
        assert!((r.value - 1.0).abs() <= r.abs_error.max(1e-15));
    }

    #[test]
    fn gamma_two_numerator() {
        let r = integrate(|x| x * (-x).exp(), 0.0, f64::INFINITY, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!((r.value - 1.0).abs() <= r.abs_error.max(1e-15));
    }

    #[test]
    fn uniform_neg_entropy() {
        let r = integrate(|_| 0.5 * 0.5f64.ln(), 0.0, 2.0, 1e-10).unwrap();
        assert!((r.value + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lower_half_line() {
        let r = integrate(|x: f64| x.exp(), f64::NEG_INFINITY, 0.0, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn kinks_via_pieces() {
        let r = Integrator::with_tolerance(1e-12)
            .integrate_pieces(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0])
            .unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn non_convergence_is_reported() {
        let r = Integrator {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_segments: 10,
        }
        .integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-8).is_err());
    }
}
