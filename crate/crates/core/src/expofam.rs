//! Natural exponential-family channels `Y | X = x ~ e^{θ(x)y − A(x)} p_b(y)` with
//! the input as canonical parameter, and the Gamma/Beta-prime example.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distributions::{parse_params, Family, InputDistribution};
use crate::error::{Error, Result};
use crate::numerics::{
    digamma, log_gamma, richardson_diff, EstimateWithError, Integrator, Interval, HALF_LN_2PI_E,
};

/// Conditional law of the observation given the canonical parameter.
pub trait NaturalFamily: fmt::Debug + fmt::Display + Send + Sync {
    /// `θ(x) = sign·x`; the Gamma family in rate form has sign −1.
    fn canonical_sign(&self) -> f64;
    /// Cumulant generating function `A(x)`.
    fn cgf(&self, x: f64) -> f64;
    /// `ln p_b(y)`.
    fn log_base(&self, y: f64) -> f64;
    fn support_y(&self) -> Interval;
    /// Admissible values of the parameter.
    fn parameter_support(&self) -> Interval;
    /// Differential entropy of `Y | X = x`.
    fn conditional_entropy(&self, x: f64) -> f64;
    fn response_mean(&self, x: f64) -> f64;
    fn response_var(&self, x: f64) -> f64;
    /// Length scale in `x` over which the likelihood at `y` decays, if it is not order one.
    fn x_scale(&self, _y: f64) -> Option<f64> {
        None
    }
}

/// `Y | X = x ~ Gamma(shape α, rate x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFamily {
    shape: f64,
}

impl GammaFamily {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::param(format!(
                "Gamma shape must be positive, got {shape}"
            )));
        }
        Ok(Self { shape })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// `α + ln Γ(α) + (1−α)ψ(α)`, the entropy of `Gamma(α, 1)`.
    pub fn unit_entropy(&self) -> f64 {
        gamma_entropy(self.shape)
    }
}

fn gamma_entropy(shape: f64) -> f64 {
    shape
        + log_gamma(shape).expect("positive shape")
        + (1.0 - shape) * digamma(shape).expect("positive shape")
}

impl NaturalFamily for GammaFamily {
    fn canonical_sign(&self) -> f64 {
        -1.0
    }
    fn cgf(&self, x: f64) -> f64 {
        -self.shape * x.ln()
    }
    fn log_base(&self, y: f64) -> f64 {
        if y > 0.0 {
            (self.shape - 1.0) * y.ln() - log_gamma(self.shape).expect("positive shape")
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support_y(&self) -> Interval {
        Interval::new(0.0, f64::INFINITY)
    }
    fn parameter_support(&self) -> Interval {
        Interval::new(0.0, f64::INFINITY)
    }
    fn conditional_entropy(&self, x: f64) -> f64 {
        self.unit_entropy() - x.ln()
    }
    fn response_mean(&self, x: f64) -> f64 {
        self.shape / x
    }
    fn response_var(&self, x: f64) -> f64 {
        self.shape / (x * x)
    }
    fn x_scale(&self, y: f64) -> Option<f64> {
        (y > 0.0).then(|| 1.0 / y)
    }
}

impl fmt::Display for GammaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma:alpha={}", self.shape)
    }
}

impl FromStr for GammaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        if name.trim() != "gamma" {
            return Err(Error::Parse(format!(
                "unknown exponential family `{name}`; expected `gamma:alpha=...`"
            )));
        }
        let params = parse_params(body, &["alpha"])?;
        let alpha = params
            .iter()
            .find_map(|(k, v)| (*k == "alpha").then_some(*v))
            .ok_or_else(|| Error::Parse("gamma family needs `alpha`".into()))?;
        GammaFamily::new(alpha)
    }
}

/// `Y | X = x ~ N(σ²x, σ²)`: the additive Gaussian channel `Y = σ²X + W` in canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFamily {
    noise_var: f64,
}

impl GaussianFamily {
    pub fn new(noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::param(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self { noise_var })
    }
}

impl NaturalFamily for GaussianFamily {
    fn canonical_sign(&self) -> f64 {
        1.0
    }
    fn cgf(&self, x: f64) -> f64 {
        0.5 * self.noise_var * x * x
    }
    fn log_base(&self, y: f64) -> f64 {
        -0.5 * y * y / self.noise_var - 0.5 * (2.0 * std::f64::consts::PI * self.noise_var).ln()
    }
    fn support_y(&self) -> Interval {
        Interval::REAL_LINE
    }
    fn parameter_support(&self) -> Interval {
        Interval::REAL_LINE
    }
    fn conditional_entropy(&self, _x: f64) -> f64 {
        HALF_LN_2PI_E + 0.5 * self.noise_var.ln()
    }
    fn response_mean(&self, x: f64) -> f64 {
        self.noise_var * x
    }
    fn response_var(&self, _x: f64) -> f64 {
        self.noise_var
    }
}

impl fmt::Display for GaussianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gaussian:var={}", self.noise_var)
    }
}

/// Law of the canonical parameter.
#[derive(Debug, Clone)]
pub enum Prior {
    Continuous(InputDistribution),
    PointMass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub var: f64,
}

/// Posterior moments from derivatives of `ln ν`, with the direct quadrature values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TweedieMoments {
    pub from_nu: PosteriorMoments,
    pub direct: PosteriorMoments,
}

/// The lower bound on `h(E[X|Y])` for a natural exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub truth: EstimateWithError,
    pub bound: EstimateWithError,
    /// `2(h(Y|X) − ½ ln 2πe)`.
    pub corrective: EstimateWithError,
    pub h_x: EstimateWithError,
    pub h_y: EstimateWithError,
    pub h_y_given_x: EstimateWithError,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ExpoFamChannel<F: NaturalFamily> {
    prior: Prior,
    family: F,
}

/// Relative step for derivatives of `ln ν`.
const NU_STEP: f64 = 1e-4;
/// Relative step for the second derivative, where rounding dominates sooner.
const NU_STEP_SECOND: f64 = 1e-3;
const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-9;
/// `ln p_Y` below which the marginal no longer contributes to expectations over `Y`.
const Y_TAIL_LOG_PDF: f64 = -50.0;
const Y_SCAN_STEPS: u32 = 10_000;

impl<F: NaturalFamily> ExpoFamChannel<F> {
    pub fn new(prior: Prior, family: F) -> Result<Self> {
        let allowed = family.parameter_support();
        let ok = match &prior {
            Prior::Continuous(d) => {
                let s = d.support();
                s.lo >= allowed.lo && s.hi <= allowed.hi
            }
            Prior::PointMass(x) => allowed.lo < *x && *x < allowed.hi,
        };
        if !ok {
            return Err(Error::Input(format!(
                "prior support must lie in [{}, {}] for {family}",
                allowed.lo, allowed.hi
            )));
        }
        Ok(Self { prior, family })
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    fn continuous(&self) -> Result<&InputDistribution> {
        match &self.prior {
            Prior::Continuous(d) => Ok(d),
            Prior::PointMass(x) => Err(Error::Input(format!(
                "point mass at {x} has no differential entropy"
            ))),
        }
    }

    fn log_likelihood_kernel(&self, x: f64, y: f64) -> f64 {
        self.family.canonical_sign() * x * y - self.family.cgf(x)
    }

    fn check_y(&self, y: f64) -> Result<()> {
        let s = self.family.support_y();
        if !(s.lo < y && y < s.hi) {
            return Err(Error::Domain(format!(
                "observation {y} is outside the interior of ({}, {})",
                s.lo, s.hi
            )));
        }
        Ok(())
    }

    /// Cut points for integrals over the prior at observation `y`, and a
    /// reference log-weight that keeps the integrands in range.
    fn inner_setup(&self, dist: &InputDistribution, y: f64) -> (Vec<f64>, f64) {
        let mut cuts = dist.integration_cuts();
        let support = dist.support();
        if let Some(scale) = self.family.x_scale(y) {
            let base = if support.lo.is_finite() {
                support.lo
            } else {
                0.0
            };
            for k in [0.1, 1.0, 10.0, 100.0] {
                let c = base + k * scale;
                if c > support.lo && c < support.hi {
                    cuts.push(c);
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
        }
        let bulk = dist.bulk(1e-12);
        let probe_lo = bulk.lo.max(support.lo);
        let probe_hi = bulk.hi.min(support.hi);
        let probes = (0..=256).map(|i| probe_lo + (probe_hi - probe_lo) * f64::from(i) / 256.0);
        let reference = cuts
            .iter()
            .copied()
            .chain(probes)
            .filter(|x| x.is_finite() && support.contains(*x))
            .map(|x| self.log_likelihood_kernel(x, y) + dist.ln_pdf(x))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        (cuts, reference)
    }

    /// `(ln ν(y), E[X|y], Var(X|y))` by direct quadrature over the prior.
    fn posterior_raw(&self, y: f64) -> Result<(f64, PosteriorMoments)> {
        self.check_y(y)?;
        let dist = match &self.prior {
            Prior::PointMass(x) => {
                return Ok((
                    self.log_likelihood_kernel(*x, y),
                    PosteriorMoments { mean: *x, var: 0.0 },
                ))
            }
            Prior::Continuous(d) => d,
        };
        let (cuts, reference) = self.inner_setup(dist, y);
        if !reference.is_finite() {
            return Err(Error::Regularity(format!("ν({y}) underflows for {dist}")));
        }
        let weight = |x: f64, ln_q: f64| {
            let l = self.log_likelihood_kernel(x, y) + ln_q - reference;
            if l.is_nan() {
                0.0
            } else {
                l.exp()
            }
        };
        let quad = Integrator::with_tolerance(0.0).rel_tol(INNER_TOL);
        let z = integrate_prior(&quad, dist, &cuts, weight)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Regularity(format!(
                "ν({y}) is not finite and positive"
            )));
        }
        // Absolute floors keep near-zero moments from demanding unattainable relative accuracy.
        let spread = dist.mean().abs() + dist.variance().sqrt();
        let quad = Integrator::with_tolerance(INNER_TOL * z * spread).rel_tol(INNER_TOL);
        let mean = integrate_prior(&quad, dist, &cuts, |x, l| x * weight(x, l))? / z;
        let quad = Integrator::with_tolerance(INNER_TOL * z * spread * spread).rel_tol(INNER_TOL);
        let var =
            integrate_prior(&quad, dist, &cuts, |x, l| (x - mean).powi(2) * weight(x, l))? / z;
        Ok((reference + z.ln(), PosteriorMoments { mean, var }))
    }

    /// `ln ν(y) = ln ∫ e^{θ(x)y − A(x)} q(x) dx`.
    pub fn log_nu(&self, y: f64) -> Result<f64> {
        Ok(self.posterior_raw(y)?.0)
    }

    /// `ν(y) = p_Y(y)/p_b(y)`.
    pub fn nu_ratio(&self, y: f64) -> Result<f64> {
        Ok(self.log_nu(y)?.exp())
    }

    pub fn marginal_pdf(&self, y: f64) -> Result<f64> {
        Ok((self.log_nu(y)? + self.family.log_base(y)).exp())
    }

    pub fn posterior_direct(&self, y: f64) -> Result<PosteriorMoments> {
        Ok(self.posterior_raw(y)?.1)
    }

    /// Posterior mean and variance from the first two derivatives of `ln ν`,
    /// checked against direct quadrature to `1e-4` relative.
    pub fn posterior_moments_tweedie(&self, y: f64) -> Result<TweedieMoments> {
        let direct = self.posterior_direct(y)?;
        let scale = y.abs().max(1.0);
        let step = NU_STEP * scale;
        let sign = self.family.canonical_sign();
        let ln_nu = |t: f64| self.log_nu(t).unwrap_or(f64::NAN);
        let mean = sign * richardson_diff(ln_nu, y, step)?;
        let h = NU_STEP_SECOND * scale;
        let second = |h: f64| (ln_nu(y + h) - 2.0 * ln_nu(y) + ln_nu(y - h)) / (h * h);
        let var = (4.0 * second(0.5 * h) - second(h)) / 3.0;
        if !var.is_finite() {
            return Err(Error::Evaluation { at: y });
        }
        let from_nu = PosteriorMoments { mean, var };
        if (mean - direct.mean).abs() > 1e-4 * (1.0 + direct.mean.abs())
            || (var - direct.var).abs() > 1e-4 * (1.0 + direct.var.abs())
        {
            return Err(Error::IdentityViolation(format!(
                "derivatives of ln ν give {from_nu:?} but quadrature gives {direct:?} at y = {y}"
            )));
        }
        Ok(TweedieMoments { from_nu, direct })
    }

    /// Cut points for integrals over `y`, from the first two moments of `Y`.
    fn y_cuts(&self, dist: &InputDistribution) -> Result<Vec<f64>> {
        let f = &self.family;
        let mean = dist.expect(|x| f.response_mean(x), 1e-10)?.value;
        let second = dist
            .expect(|x| f.response_mean(x).powi(2) + f.response_var(x), 1e-10)?
            .value;
        let sd = (second - mean * mean).max(0.0).sqrt();
        let support = f.support_y();
        let mut cuts = vec![];
        for k in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0] {
            let c = mean + k * sd;
            if c > support.lo && c < support.hi {
                cuts.push(c);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        // Infinite ends are replaced by the point where the marginal is negligible.
        let negligible = |y: f64| {
            self.log_nu(y)
                .map(|l| l + f.log_base(y) < Y_TAIL_LOG_PDF)
                .unwrap_or(true)
        };
        let (first, last) = (cuts[0], cuts[cuts.len() - 1]);
        let lo = if support.lo.is_finite() {
            support.lo
        } else {
            (1..=Y_SCAN_STEPS)
                .map(|k| first - f64::from(k) * sd)
                .find(|&y| negligible(y))
                .ok_or_else(|| Error::Convergence {
                    what: "lower tail of Y".into(),
                    estimate: first,
                    abs_error: sd,
                })?
        };
        let hi = if support.hi.is_finite() {
            support.hi
        } else {
            (1..=Y_SCAN_STEPS)
                .map(|k| last + f64::from(k) * sd)
                .find(|&y| negligible(y))
                .ok_or_else(|| Error::Convergence {
                    what: "upper tail of Y".into(),
                    estimate: last,
                    abs_error: sd,
                })?
        };
        cuts.insert(0, lo);
        cuts.push(hi);
        Ok(cuts)
    }

    fn expect_over_y(
        &self,
        f: impl Fn(f64, f64, &PosteriorMoments) -> f64,
    ) -> Result<EstimateWithError> {
        let dist = self.continuous()?;
        let cuts = self.y_cuts(dist)?;
        let failure = std::cell::Cell::new(None);
        let integrand = |y: f64| match self.posterior_raw(y) {
            Ok((ln_nu, post)) => {
                let ln_p = ln_nu + self.family.log_base(y);
                let p = ln_p.exp();
                if p == 0.0 {
                    0.0
                } else {
                    p * f(y, ln_p, &post)
                }
            }
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        };
        let r = Integrator::with_tolerance(OUTER_TOL).integrate_pieces(integrand, &cuts)?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(r),
        }
    }

    /// `h(Y)` by quadrature of the marginal.
    pub fn output_entropy(&self) -> Result<EstimateWithError> {
        self.expect_over_y(|_, ln_p, _| -ln_p)
    }

    /// `E[ln Var(X|Y)]`.
    pub fn e_log_cond_var(&self) -> Result<EstimateWithError> {
        self.expect_over_y(|_, _, post| post.var.max(1e-300).ln())
    }

    /// `h(Y|X)` from the per-parameter closed form.
    pub fn conditional_output_entropy(&self) -> Result<EstimateWithError> {
        let dist = self.continuous()?;
        dist.expect(|x| self.family.conditional_entropy(x), 1e-11)
    }

    /// `h(E[X|Y]) = h(Y) + E[ln Var(X|Y)]`.
    pub fn entropy_cond_mean(&self) -> Result<EstimateWithError> {
        let h_y = self.output_entropy()?;
        let e = self.e_log_cond_var()?;
        Ok(EstimateWithError::quadrature(
            h_y.value + e.value,
            h_y.abs_error + e.abs_error,
        ))
    }

    pub fn lower_bound_report(&self) -> Result<LowerBoundReport> {
        let h_x = self.continuous()?.entropy()?;
        let h_y = self.output_entropy()?;
        let h_y_given_x = self.conditional_output_entropy()?;
        let e_log = self.e_log_cond_var()?;
        let truth =
            EstimateWithError::quadrature(h_y.value + e_log.value, h_y.abs_error + e_log.abs_error);
        Ok(assemble(truth, h_x, h_y, h_y_given_x))
    }

    /// `∫ e^{θ(x)y − A(x)} p_b(y) dy` at five points spread over the prior's bulk.
    pub fn normalization_check(&self) -> Result<Vec<(f64, f64)>> {
        let points: Vec<f64> = match &self.prior {
            Prior::PointMass(x) => vec![*x],
            Prior::Continuous(d) => {
                let b = d.bulk(1e-3);
                let s = d.support();
                let (lo, hi) = (b.lo.max(s.lo), b.hi.min(s.hi));
                (0..5)
                    .map(|i| lo + (hi - lo) * (0.05 + 0.225 * f64::from(i)))
                    .collect()
            }
        };
        let support = self.family.support_y();
        points
            .into_iter()
            .map(|x| {
                let mean = self.family.response_mean(x);
                let sd = self.family.response_var(x).sqrt();
                let mut cuts = vec![support.lo, support.hi];
                for k in [-3.0, 0.0, 3.0, 10.0] {
                    let c = mean + k * sd;
                    if c > support.lo && c < support.hi {
                        cuts.push(c);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                let mass = Integrator::with_tolerance(1e-11).integrate_pieces(
                    |y| (self.log_likelihood_kernel(x, y) + self.family.log_base(y)).exp(),
                    &cuts,
                )?;
                Ok((x, mass.value))
            })
            .collect()
    }
}

fn assemble(
    truth: EstimateWithError,
    h_x: EstimateWithError,
    h_y: EstimateWithError,
    h_y_given_x: EstimateWithError,
) -> LowerBoundReport {
    let corrective = EstimateWithError::new(
        2.0 * (h_y_given_x.value - HALF_LN_2PI_E),
        2.0 * h_y_given_x.abs_error,
        h_y_given_x.method,
    );
    let bound = EstimateWithError::new(
        2.0 * h_x.value - h_y.value + corrective.value,
        2.0 * h_x.abs_error + h_y.abs_error + corrective.abs_error,
        h_y.method,
    );
    LowerBoundReport {
        truth,
        bound,
        corrective,
        h_x,
        h_y,
        h_y_given_x,
        gap: truth.value - bound.value,
    }
}

/// Integrates `g(x, ln q(x))` over the cut pieces of the prior `q`. A piece
/// starting at a finite support end `lo` uses `x = lo + w·t⁸`, which turns
/// prior singularities `(x − lo)^{d−1}` into the bounded `t^{8d−1}`.
fn integrate_prior(
    quad: &Integrator,
    dist: &InputDistribution,
    cuts: &[f64],
    g: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let lo = dist.support().lo;
    let plain = |x: f64| g(x, dist.ln_pdf(x));
    if !(lo.is_finite() && cuts.len() >= 2 && cuts[0] == lo) {
        return Ok(quad.integrate_pieces(plain, cuts)?.value);
    }
    let width = cuts[1] - lo;
    let head = quad
        .integrate(
            |t| {
                let t7 = t.powi(7);
                let u = width * t7 * t;
                g(lo + u, dist.ln_pdf_above_lower(u)) * 8.0 * width * t7
            },
            0.0,
            1.0,
        )?
        .value;
    let tail = if cuts.len() > 2 {
        quad.integrate_pieces(plain, &cuts[1..])?.value
    } else {
        0.0
    };
    Ok(head + tail)
}

/// `Δ(p_X, α) = α + ln Γ(α) + (1−α)ψ(α) − ½ ln 2πe − E[ln X]`.
pub fn gamma_corrective(prior: &Prior, alpha: f64) -> Result<f64> {
    let family = GammaFamily::new(alpha)?;
    let e_log = match prior {
        Prior::PointMass(x) if *x > 0.0 => x.ln(),
        Prior::PointMass(x) => {
            return Err(Error::Input(format!("point mass {x} must be positive")))
        }
        Prior::Continuous(d) => {
            if d.support().lo < 0.0 {
                return Err(Error::Input(format!("{d} is not supported on (0, ∞)")));
            }
            let r = d.expect(f64::ln, 1e-11)?;
            if !r.value.is_finite() {
                return Err(Error::Regularity(format!("E[ln X] diverges for {d}")));
            }
            r.value
        }
    };
    Ok(family.unit_entropy() - HALF_LN_2PI_E - e_log)
}

/// Shape at which the corrective term changes sign, by bisection on `[lo, hi]`.
pub fn corrective_sign_change(prior: &Prior, lo: f64, hi: f64) -> Result<f64> {
    let f = |a: f64| gamma_corrective(prior, a);
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!(
            "corrective term has the same sign at shapes {lo} and {hi}"
        )));
    }
    let rising = fa < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= 1e-12 * m {
            break;
        }
        if (f(m)? < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Truth minus bound for a Beta-prime input under the Gamma channel; depends only on `d = α − γ`.
pub fn beta_prime_gap(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::param(format!("d must be positive, got {d}")));
    }
    Ok(
        2.0 * HALF_LN_2PI_E + d.ln() - 2.0 * log_gamma(d)? + 2.0 * (d - 1.0) * digamma(d)?
            - 2.0 * d,
    )
}

/// Every term of the bound in closed form for a Beta-prime(α, γ) input with Gamma shape α.
pub fn beta_prime_analytic(alpha: f64, gamma: f64) -> Result<LowerBoundReport> {
    let input = InputDistribution::beta_prime(alpha, gamma)?;
    let d = alpha - gamma;
    let h_x = input.entropy()?;
    let h_y = gamma_entropy(gamma);
    let e_log_x = digamma(alpha)? - digamma(gamma)?;
    let h_y_given_x = gamma_entropy(alpha) - e_log_x;
    let truth = h_y + d.ln() - 2.0 * digamma(gamma)?;
    Ok(assemble(
        EstimateWithError::analytic(truth),
        h_x,
        EstimateWithError::analytic(h_y),
        EstimateWithError::analytic(h_y_given_x),
    ))
}

/// The Gamma channel whose shape matches the Beta-prime input's first parameter.
pub fn beta_prime_channel(alpha: f64, gamma: f64) -> Result<ExpoFamChannel<GammaFamily>> {
    let input = InputDistribution::beta_prime(alpha, gamma)?;
    debug_assert!(matches!(input.family(), Family::BetaPrime { .. }));
    ExpoFamChannel::new(Prior::Continuous(input), GammaFamily::new(alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::awgn::ScalarChannel;

    #[test]
    fn beta_prime_marginal_is_gamma() {
        let ch = beta_prime_channel(6.0, 3.0).unwrap();
        for y in [0.3, 1.0, 2.0, 5.0, 12.0] {
            let gamma_pdf = (-y + 2.0 * f64::ln(y) - log_gamma(3.0).unwrap()).exp();
            let p = ch.marginal_pdf(y).unwrap();
            assert!(
                (p / gamma_pdf - 1.0).abs() < 1e-9,
                "y={y}: {p} vs {gamma_pdf}"
            );
        }
    }

    #[test]
    fn beta_prime_posterior_closed_forms() {
        let ch = beta_prime_channel(6.0, 3.0).unwrap();
        let t = ch.posterior_moments_tweedie(2.0).unwrap();
        assert!((t.direct.mean - 2.5).abs() < 1e-6 * 2.5);
        assert!((t.direct.var - 0.75).abs() < 1e-6 * 0.75);
        assert!((t.from_nu.mean - 2.5).abs() < 1e-4 * 3.5);
        assert!((t.from_nu.var - 0.75).abs() < 1e-4 * 1.75);
    }

    #[test]
    fn point_mass_prior() {
        let ch =
            ExpoFamChannel::new(Prior::PointMass(1.5), GammaFamily::new(3.0).unwrap()).unwrap();
        let y = 0.7;
        assert!((ch.nu_ratio(y).unwrap() - (-1.5 * y + 3.0 * 1.5f64.ln()).exp()).abs() < 1e-15);
        let t = ch.posterior_moments_tweedie(y).unwrap();
        assert!((t.from_nu.mean - 1.5).abs() < 1e-8);
        assert!(t.from_nu.var.abs() < 1e-4);
        assert_eq!(t.direct.var, 0.0);
        assert!(gamma_corrective(&Prior::PointMass(1.0), 2.0).is_ok());
        assert!(ch.lower_bound_report().is_err());
    }

    #[test]
    fn likelihoods_are_normalized() {
        let ch = beta_prime_channel(4.0, 2.5).unwrap();
        for (x, mass) in ch.normalization_check().unwrap() {
            assert!((mass - 1.0).abs() < 1e-7, "x={x}: {mass}");
        }
    }

    #[test]
    fn gap_formula_special_values() {
        let one = beta_prime_gap(1.0).unwrap();
        assert!((one - (2.0 * HALF_LN_2PI_E - 2.0)).abs() < 1e-12);
        assert!((one - 0.83788).abs() < 1e-5);
        assert!((beta_prime_gap(0.01).unwrap() * 0.01 / 2.0 - 1.0).abs() < 0.1);
        assert!((beta_prime_gap(50.0).unwrap() * 150.0 / 2.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn closed_form_terms_reproduce_gap_formula() {
        for (a, g) in [(6.0, 3.0), (3.5, 3.0), (10.0, 3.0), (4.0, 2.5)] {
            let r = beta_prime_analytic(a, g).unwrap();
            let gap = beta_prime_gap(a - g).unwrap();
            assert!((r.gap - gap).abs() < 1e-9, "({a},{g}): {} vs {gap}", r.gap);
        }
    }

    #[test]
    fn numeric_terms_match_closed_forms() {
        let ch = beta_prime_channel(6.0, 3.0).unwrap();
        let num = ch.lower_bound_report().unwrap();
        let ana = beta_prime_analytic(6.0, 3.0).unwrap();
        assert!((num.h_y.value - ana.h_y.value).abs() < 1e-6);
        assert!((num.h_y_given_x.value - ana.h_y_given_x.value).abs() < 1e-7);
        assert!((num.truth.value - ana.truth.value).abs() < 1e-5);
        assert!(num.truth.value >= num.bound.value);
    }

    #[test]
    fn numeric_gap_matches_formula() {
        for (a, g) in [(3.5, 3.0), (4.0, 3.0), (6.0, 3.0), (10.0, 3.0)] {
            let r = beta_prime_channel(a, g)
                .unwrap()
                .lower_bound_report()
                .unwrap();
            let gap = beta_prime_gap(a - g).unwrap();
            assert!(
                (r.gap - gap).abs() < 1e-3,
                "d={}: {} vs {gap}",
                a - g,
                r.gap
            );
        }
    }

    #[test]
    fn bound_holds_for_listed_shapes() {
        for (a, g) in [(4.0, 2.5), (6.0, 3.0), (10.0, 4.0)] {
            let r = beta_prime_channel(a, g)
                .unwrap()
                .lower_bound_report()
                .unwrap();
            assert!(r.truth.value >= r.bound.value, "({a},{g}): {r:?}");
        }
    }

    #[test]
    fn corrective_changes_sign() {
        let prior = Prior::Continuous(InputDistribution::beta_prime(6.0, 3.0).unwrap());
        assert!(gamma_corrective(&prior, 6.0).unwrap().is_finite());
        let root = corrective_sign_change(&prior, 1e-3, 50.0).unwrap();
        assert!(gamma_corrective(&prior, root).unwrap().abs() < 1e-8);
        assert!(gamma_corrective(&prior, 0.5 * root).unwrap() < 0.0);
        assert!(gamma_corrective(&prior, 2.0 * root).unwrap() > 0.0);
    }

    #[test]
    fn gaussian_family_reduces_to_additive_channel() {
        let noise = 2.0;
        // X̃ = σ²X is uniform with unit variance.
        let x = InputDistribution::uniform(1.0 / (noise * noise)).unwrap();
        let expo = ExpoFamChannel::new(
            Prior::Continuous(x.clone()),
            GaussianFamily::new(noise).unwrap(),
        )
        .unwrap();
        let awgn = ScalarChannel::new(InputDistribution::uniform(1.0).unwrap(), noise).unwrap();
        for y in [-2.0, 0.3, 1.7] {
            let e = expo.posterior_direct(y).unwrap();
            let a = awgn.posterior_point(y).unwrap();
            assert!((noise * e.mean - a.cond_mean).abs() < 1e-9);
            assert!((noise * noise * e.var - a.cond_var).abs() < 1e-9);
        }
        let r = expo.lower_bound_report().unwrap();
        assert!((r.corrective.value - noise.ln()).abs() < 1e-12);
        let hx_tilde = awgn.input().entropy().unwrap().value;
        let hy = awgn.output_entropy().unwrap().value;
        assert!((r.bound.value + noise.ln() - (2.0 * hx_tilde - hy)).abs() < 1e-6);
    }

    #[test]
    fn family_spec_parses() {
        let f: GammaFamily = "gamma:alpha=6".parse().unwrap();
        assert_eq!(f.shape(), 6.0);
        assert_eq!(f.to_string(), "gamma:alpha=6");
        assert!("poisson:lambda=1".parse::<GammaFamily>().is_err());
        assert!("gamma:alpha=-1".parse::<GammaFamily>().is_err());
    }
}
