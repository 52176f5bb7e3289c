//! Input laws behind one interface: density, moments, support, entropy, sampler.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{
    digamma, entropy_from_pdf_pieces, entropy_power, ln_beta, richardson_diff, EstimateWithError,
    Integrator, Interval, HALF_LN_2PI_E,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Shape of an input law before translation by its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian {
        sd: f64,
    },
    /// Uniform on `[-half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
    /// Exponential with the given rate, shifted to zero mean.
    Exponential {
        rate: f64,
    },
    Laplace {
        scale: f64,
    },
    /// Symmetric triangle on `[-half_width, half_width]`.
    Triangular {
        half_width: f64,
    },
    /// Equal mixture of `N(-1, sd²)` and `N(1, sd²)`.
    MixturePm1 {
        sd: f64,
    },
    /// `1 + T` with `T` beta-prime distributed with shapes `alpha - gamma` and `gamma`.
    BetaPrime {
        alpha: f64,
        gamma: f64,
    },
}

/// An input law `X`.
#[derive(Debug, Clone)]
pub struct InputDistribution {
    family: Family,
    location: f64,
    mean: f64,
    variance: f64,
    numeric_entropy: OnceLock<EstimateWithError>,
}

fn positive_variance(var: f64) -> Result<()> {
    if var > 0.0 && var.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "variance must be positive and finite, got {var}"
        )))
    }
}

impl InputDistribution {
    fn from_family(family: Family, location: f64, mean: f64, variance: f64) -> Self {
        Self {
            family,
            location,
            mean,
            variance,
            numeric_entropy: OnceLock::new(),
        }
    }

    pub fn gaussian(mu: f64, var: f64) -> Result<Self> {
        positive_variance(var)?;
        if !mu.is_finite() {
            return Err(Error::param(format!("mean must be finite, got {mu}")));
        }
        Ok(Self::from_family(
            Family::Gaussian { sd: var.sqrt() },
            mu,
            mu,
            var,
        ))
    }

    pub fn uniform(var: f64) -> Result<Self> {
        positive_variance(var)?;
        let half_width = (3.0 * var).sqrt();
        Ok(Self::from_family(
            Family::Uniform { half_width },
            0.0,
            0.0,
            var,
        ))
    }

    pub fn exponential(var: f64) -> Result<Self> {
        positive_variance(var)?;
        let rate = 1.0 / var.sqrt();
        Ok(Self::from_family(
            Family::Exponential { rate },
            0.0,
            0.0,
            var,
        ))
    }

    pub fn laplace(var: f64) -> Result<Self> {
        positive_variance(var)?;
        let scale = (0.5 * var).sqrt();
        Ok(Self::from_family(Family::Laplace { scale }, 0.0, 0.0, var))
    }

    pub fn triangular(var: f64) -> Result<Self> {
        positive_variance(var)?;
        let half_width = (6.0 * var).sqrt();
        Ok(Self::from_family(
            Family::Triangular { half_width },
            0.0,
            0.0,
            var,
        ))
    }

    /// Two-component mixture centred at ±1 with total variance `var > 1`.
    pub fn mixture_pm1(var: f64) -> Result<Self> {
        if !(var > 1.0 && var.is_finite()) {
            return Err(Error::param(format!(
                "mixture variance must exceed 1 (component variance var - 1 > 0), got {var}"
            )));
        }
        let sd = (var - 1.0).sqrt();
        Ok(Self::from_family(Family::MixturePm1 { sd }, 0.0, 0.0, var))
    }

    /// Beta-prime law on `[1, ∞)` with density
    /// `Γ(α)/(Γ(α−γ)Γ(γ)) (x−1)^{α−γ−1} x^{−α}`; requires `α > γ > 2`.
    pub fn beta_prime(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > gamma && gamma > 2.0 && alpha.is_finite()) {
            return Err(Error::param(format!(
                "beta-prime needs alpha > gamma > 2, got alpha = {alpha}, gamma = {gamma}"
            )));
        }
        // X − 1 is a standard Beta-prime(α − γ, γ) variable.
        let d = alpha - gamma;
        let mean = 1.0 + d / (gamma - 1.0);
        let variance = d * (d + gamma - 1.0) / ((gamma - 2.0) * (gamma - 1.0).powi(2));
        let mut dist = Self::from_family(Family::BetaPrime { alpha, gamma }, 0.0, 0.0, 1.0);
        dist.mean = mean;
        dist.variance = variance;
        Ok(dist)
    }

    /// The same law translated by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self::from_family(
            self.family,
            self.location + delta,
            self.mean + delta,
            self.variance,
        )
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Gaussian { .. } => "gaussian",
            Family::Uniform { .. } => "uniform",
            Family::Exponential { .. } => "exponential",
            Family::Laplace { .. } => "laplace",
            Family::Triangular { .. } => "triangular",
            Family::MixturePm1 { .. } => "gm2",
            Family::BetaPrime { .. } => "betaprime",
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian { .. })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let ln = self.ln_pdf(x);
        if ln == f64::NEG_INFINITY {
            0.0
        } else {
            ln.exp()
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let t = x - self.location;
        match self.family {
            Family::Gaussian { sd } => -0.5 * (t / sd).powi(2) - sd.ln() - LN_SQRT_2PI,
            Family::Uniform { half_width } => {
                if t.abs() <= half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Exponential { rate } => {
                let u = t + 1.0 / rate;
                if u >= 0.0 {
                    rate.ln() - rate * u
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Laplace { scale } => -t.abs() / scale - (2.0 * scale).ln(),
            Family::Triangular { half_width } => {
                let r = half_width - t.abs();
                if r > 0.0 {
                    r.ln() - 2.0 * half_width.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::MixturePm1 { sd } => {
                let a = -0.5 * ((t - 1.0) / sd).powi(2);
                let b = -0.5 * ((t + 1.0) / sd).powi(2);
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln() - 2f64.ln() - sd.ln() - LN_SQRT_2PI
            }
            Family::BetaPrime { alpha, gamma } => {
                let d = alpha - gamma;
                if t > 1.0 {
                    (d - 1.0) * (t - 1.0).ln() - alpha * t.ln() - beta_prime_ln_norm(alpha, gamma)
                } else if t == 1.0 && d == 1.0 {
                    -beta_prime_ln_norm(alpha, gamma)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `ln pdf(lo + u)` for the finite lower support end `lo`, computed from the
    /// offset `u` so that densities singular at `lo` keep full precision.
    pub fn ln_pdf_above_lower(&self, u: f64) -> f64 {
        match self.family {
            Family::BetaPrime { alpha, gamma } if u > 0.0 => {
                (alpha - gamma - 1.0) * u.ln()
                    - alpha * u.ln_1p()
                    - beta_prime_ln_norm(alpha, gamma)
            }
            _ => self.ln_pdf(self.support().lo + u),
        }
    }

    /// Closure of the set where the density is positive.
    pub fn support(&self) -> Interval {
        let base = match self.family {
            Family::Gaussian { .. } | Family::Laplace { .. } | Family::MixturePm1 { .. } => {
                Interval::REAL_LINE
            }
            Family::Uniform { half_width } | Family::Triangular { half_width } => {
                Interval::new(-half_width, half_width)
            }
            Family::Exponential { rate } => Interval::new(-1.0 / rate, f64::INFINITY),
            Family::BetaPrime { .. } => Interval::new(1.0, f64::INFINITY),
        };
        Interval::new(base.lo + self.location, base.hi + self.location)
    }

    /// Points where the density has a kink, jump or singularity (finite support ends included).
    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.support();
        let mut pts: Vec<f64> = [s.lo, s.hi].into_iter().filter(|x| x.is_finite()).collect();
        if matches!(
            self.family,
            Family::Laplace { .. } | Family::Triangular { .. }
        ) {
            pts.push(self.location);
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Smallest length scale on which the density changes appreciably.
    pub fn feature_scale(&self) -> f64 {
        match self.family {
            Family::Gaussian { sd } => sd,
            Family::Uniform { half_width } => 2.0 * half_width,
            Family::Exponential { rate } => 1.0 / rate,
            Family::Laplace { scale } => scale,
            Family::Triangular { half_width } => half_width,
            Family::MixturePm1 { sd } => sd.min(1.0),
            Family::BetaPrime { alpha, gamma } => (alpha - gamma).min(1.0) / alpha,
        }
    }

    /// An interval outside of which at most about `tail` of the mass lies.
    pub fn bulk(&self, tail: f64) -> Interval {
        let log_inv = (1.0 / tail).ln().max(1.0);
        let z = (2.0 * log_inv).sqrt();
        let base = match self.family {
            Family::Gaussian { sd } => Interval::new(-z * sd, z * sd),
            Family::Uniform { half_width } | Family::Triangular { half_width } => {
                Interval::new(-half_width, half_width)
            }
            Family::Exponential { rate } => Interval::new(-1.0 / rate, (log_inv - 1.0) / rate),
            Family::Laplace { scale } => Interval::new(-log_inv * scale, log_inv * scale),
            Family::MixturePm1 { sd } => Interval::new(-1.0 - z * sd, 1.0 + z * sd),
            Family::BetaPrime { alpha, gamma } => {
                let d = alpha - gamma;
                let ln_b = ln_beta(d, gamma).unwrap_or(0.0);
                // P(T > t) ≈ t^{-γ} / (γ B(d, γ)) for large t.
                let ln_t = (log_inv - gamma.ln() - ln_b) / gamma;
                Interval::new(1.0, 1.0 + ln_t.min(700.0).exp().max(10.0))
            }
        };
        Interval::new(base.lo + self.location, base.hi + self.location)
    }

    /// Region outside of which the density is below about `1e-300` of its peak.
    pub fn negligible_bounds(&self) -> Interval {
        self.bulk(1e-300)
    }

    /// Closed-form differential entropy in nats, when one exists.
    pub fn entropy_analytic(&self) -> Option<f64> {
        match self.family {
            Family::Gaussian { sd } => Some(HALF_LN_2PI_E + sd.ln()),
            Family::Uniform { half_width } => Some((2.0 * half_width).ln()),
            Family::Exponential { rate } => Some(1.0 - rate.ln()),
            Family::Laplace { scale } => Some(1.0 + (2.0 * scale).ln()),
            Family::Triangular { half_width } => Some(0.5 + half_width.ln()),
            Family::MixturePm1 { .. } => None,
            Family::BetaPrime { alpha, gamma } => {
                let d = alpha - gamma;
                let (pd, pg, pa) = (digamma(d).ok()?, digamma(gamma).ok()?, digamma(alpha).ok()?);
                Some(ln_beta(d, gamma).ok()? - (d - 1.0) * (pd - pg) + alpha * (pa - pg))
            }
        }
    }

    /// Differential entropy by quadrature of `−p ln p`.
    pub fn entropy_numeric(&self, tol: f64) -> Result<EstimateWithError> {
        entropy_from_pdf_pieces(|x| self.pdf(x), &self.integration_cuts(), tol)
    }

    /// `h(X)`: analytic when available, otherwise quadrature (computed once).
    pub fn entropy(&self) -> Result<EstimateWithError> {
        if let Some(h) = self.entropy_analytic() {
            return Ok(EstimateWithError::analytic(h));
        }
        if let Some(h) = self.numeric_entropy.get() {
            return Ok(*h);
        }
        let h = self.entropy_numeric(1e-11)?;
        Ok(*self.numeric_entropy.get_or_init(|| h))
    }

    pub fn entropy_power(&self) -> Result<f64> {
        Ok(entropy_power(self.entropy()?.value))
    }

    /// Support ends, breakpoints, modes and the edges of the non-negligible
    /// region, for adaptive quadrature over the law.
    pub fn integration_cuts(&self) -> Vec<f64> {
        let s = self.support();
        let bulk = self.negligible_bounds();
        let mut inner = self.breakpoints();
        inner.push(self.location);
        if let Family::MixturePm1 { .. } = self.family {
            inner.extend([self.location - 1.0, self.location + 1.0]);
        }
        if let Family::BetaPrime { alpha, gamma } = self.family {
            // Mode of the density, where it is most sharply curved.
            let d = alpha - gamma;
            if d > 1.0 {
                inner.push(self.location + 1.0 + (d - 1.0) / (gamma + 1.0));
            }
        }
        if !matches!(self.family, Family::BetaPrime { .. }) {
            inner.extend([bulk.lo, bulk.hi]);
        }
        let mut cuts: Vec<f64> = inner
            .into_iter()
            .filter(|&b| b > s.lo && b < s.hi)
            .collect();
        cuts.push(s.lo);
        cuts.push(s.hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }

    /// `E[f(X)]` by adaptive quadrature.
    pub fn expect(&self, f: impl Fn(f64) -> f64, tol: f64) -> Result<EstimateWithError> {
        Integrator::with_tolerance(tol)
            .rel_tol(tol)
            .integrate_pieces(
                |x| {
                    let p = self.pdf(x);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * f(x)
                    }
                },
                &self.integration_cuts(),
            )
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let base = match self.family {
            Family::Gaussian { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Family::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            Family::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                (e - 1.0) / rate
            }
            Family::Laplace { scale } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
            Family::Triangular { half_width } => {
                half_width * (rng.random::<f64>() - rng.random::<f64>())
            }
            Family::MixturePm1 { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                let centre = if rng.random::<bool>() { 1.0 } else { -1.0 };
                centre + sd * z
            }
            Family::BetaPrime { alpha, gamma } => {
                let g1 = Gamma::new(alpha - gamma, 1.0)
                    .expect("valid shape")
                    .sample(rng);
                let g2 = Gamma::new(gamma, 1.0).expect("valid shape").sample(rng);
                1.0 + g1 / g2
            }
        };
        base + self.location
    }

    /// `n` draws from a generator seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    /// Whether `J(X)` is finite: the density is smooth enough at every support end.
    pub fn has_finite_fisher_information(&self) -> bool {
        match self.family {
            Family::Gaussian { .. } | Family::Laplace { .. } | Family::MixturePm1 { .. } => true,
            Family::Uniform { .. } | Family::Exponential { .. } | Family::Triangular { .. } => {
                false
            }
            Family::BetaPrime { alpha, gamma } => alpha - gamma > 2.0,
        }
    }

    fn has_boundary_jump(&self) -> bool {
        match self.family {
            Family::Uniform { .. } | Family::Exponential { .. } => true,
            Family::BetaPrime { alpha, gamma } => alpha - gamma <= 1.0,
            _ => false,
        }
    }
}

fn beta_prime_ln_norm(alpha: f64, gamma: f64) -> f64 {
    ln_beta(alpha - gamma, gamma).expect("shapes validated at construction")
}

/// Result of [`fisher_information`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInformation {
    pub estimate: EstimateWithError,
    /// The integral was taken over a support shrunk by `1e-6` of its width at finite ends.
    pub truncated: bool,
}

/// `J(X) = ∫ p (d/dx ln p)²`, with the score from finite differences of `ln p`.
pub fn fisher_information(dist: &InputDistribution) -> Result<FisherInformation> {
    let support = dist.support();
    let scale = dist.feature_scale();
    if dist.has_boundary_jump() {
        return Err(Error::Convergence {
            what: format!(
                "Fisher information of {dist}: the density jumps at a support end, so the score \
                 blows up there"
            ),
            estimate: f64::INFINITY,
            abs_error: f64::INFINITY,
        });
    }
    let breaks = dist.breakpoints();
    let score = |x: f64| -> f64 {
        let gap = breaks
            .iter()
            .map(|b| (x - b).abs())
            .fold(f64::INFINITY, f64::min);
        let h = (1e-3 * scale).min(0.5 * gap);
        richardson_diff(|t| dist.ln_pdf(t), x, h).unwrap_or(0.0)
    };
    let integrate_shrunk = |eps_rel: f64| -> Result<EstimateWithError> {
        let width = if support.is_bounded() {
            support.width()
        } else {
            scale
        };
        let eps = eps_rel * width;
        let mut cuts = dist.integration_cuts();
        if cuts[0].is_finite() {
            cuts[0] += eps;
        }
        let last = cuts.len() - 1;
        if cuts[last].is_finite() {
            cuts[last] -= eps;
        }
        Integrator::with_tolerance(1e-9)
            .rel_tol(1e-9)
            .integrate_pieces(
                |x| {
                    let p = dist.pdf(x);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * score(x).powi(2)
                    }
                },
                &cuts,
            )
    };
    let truncated = support.lo.is_finite() || support.hi.is_finite();
    let fine = integrate_shrunk(1e-6)?;
    if truncated {
        let coarse = integrate_shrunk(1e-5)?;
        let drift = (fine.value - coarse.value).abs();
        if drift > 1e-3 * fine.value.abs().max(1e-12) {
            return Err(Error::Convergence {
                what: format!("Fisher information of {dist}: the truncated integral keeps growing"),
                estimate: fine.value,
                abs_error: drift,
            });
        }
        return Ok(FisherInformation {
            estimate: EstimateWithError::quadrature(fine.value, fine.abs_error + drift),
            truncated,
        });
    }
    Ok(FisherInformation {
        estimate: fine,
        truncated,
    })
}

/// The zero-mean members of the catalogue at a common variance.
///
/// The mixture is included only when `var > 1`.
pub fn catalog(var: f64) -> Result<Vec<InputDistribution>> {
    let mut out = vec![
        InputDistribution::gaussian(0.0, var)?,
        InputDistribution::uniform(var)?,
        InputDistribution::exponential(var)?,
        InputDistribution::laplace(var)?,
        InputDistribution::triangular(var)?,
    ];
    if var > 1.0 {
        out.push(InputDistribution::mixture_pm1(var)?);
    }
    Ok(out)
}

impl fmt::Display for InputDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Gaussian { .. } => {
                write!(f, "gaussian:mu={},var={}", self.location, self.variance)
            }
            Family::BetaPrime { alpha, gamma } => {
                write!(f, "betaprime:alpha={alpha},gamma={gamma}")?;
                if self.location != 0.0 {
                    write!(f, ",shift={}", self.location)?;
                }
                Ok(())
            }
            _ => {
                write!(f, "{}:var={}", self.name(), self.variance)?;
                if self.location != 0.0 {
                    write!(f, ",shift={}", self.location)?;
                }
                Ok(())
            }
        }
    }
}

/// `key=value` pairs of a spec string, checked against the allowed keys.
pub(crate) fn parse_params<'a>(body: &'a str, allowed: &[&str]) -> Result<Vec<(&'a str, f64)>> {
    let mut out: Vec<(&str, f64)> = Vec::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    for item in body.split(',') {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(Error::Parse(format!(
                "unknown key `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Parse(format!("duplicate key `{key}`")));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("`{value}` is not a number (key `{key}`)")))?;
        out.push((key, value));
    }
    Ok(out)
}

fn required(params: &[(&str, f64)], key: &str) -> Result<f64> {
    params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
}

fn optional(params: &[(&str, f64)], key: &str, default: f64) -> f64 {
    params
        .iter()
        .find(|(k, _)| *k == key)
        .map_or(default, |(_, v)| *v)
}

impl FromStr for InputDistribution {
    type Err = Error;

    /// Parses `name:key=value,...`, e.g. `gaussian:mu=0,var=1` or `betaprime:alpha=6,gamma=3`.
    fn from_str(spec: &str) -> Result<Self> {
        let (name, body) = spec.split_once(':').unwrap_or((spec, ""));
        let name = name.trim();
        let dist = match name {
            "gaussian" => {
                let p = parse_params(body, &["mu", "var"])?;
                InputDistribution::gaussian(optional(&p, "mu", 0.0), required(&p, "var")?)?
            }
            "betaprime" => {
                let p = parse_params(body, &["alpha", "gamma", "shift"])?;
                InputDistribution::beta_prime(required(&p, "alpha")?, required(&p, "gamma")?)?
                    .shifted(optional(&p, "shift", 0.0))
            }
            "uniform" | "exponential" | "laplace" | "triangular" | "gm2" => {
                let p = parse_params(body, &["var", "shift"])?;
                let var = required(&p, "var")?;
                let base = match name {
                    "uniform" => InputDistribution::uniform(var)?,
                    "exponential" => InputDistribution::exponential(var)?,
                    "laplace" => InputDistribution::laplace(var)?,
                    "triangular" => InputDistribution::triangular(var)?,
                    _ => InputDistribution::mixture_pm1(var)?,
                };
                base.shifted(optional(&p, "shift", 0.0))
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown distribution `{other}` (known: gaussian, uniform, exponential, \
                     laplace, triangular, gm2, betaprime)"
                )))
            }
        };
        Ok(dist)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
