//! Posterior statistics and `h(E[X|Y])` for `Y = X + W`, `W ~ N(0, σ_W²)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bounds::{bounds_report, BoundsReport};
use crate::distributions::InputDistribution;
use crate::error::{Error, Result};
use crate::numerics::{
    gauss_hermite, knn_entropy, EstimateWithError, Interval, PanelRule, PointCloud,
};

/// Values of `Var(X|Y=y)` below this are clipped before taking logs.
pub const COND_VAR_FLOOR: f64 = 1e-150;

/// Half-width of the posterior window, in noise standard deviations.
const WINDOW_SDS: f64 = 20.0;
/// Observations this many noise deviations beyond the input bulk are far-tail.
pub const TAIL_SDS: f64 = 10.0;
/// Extent of the expectation grid beyond the input bulk.
pub const GRID_SDS: f64 = 8.0;
/// Mass of the input bulk left outside the expectation grid.
const BULK_TAIL: f64 = 1e-17;
/// Error allowance for truncation of the expectation grid and for the inner rule.
const GRID_FLOOR: f64 = 1e-12;

/// Additive white Gaussian noise channel `Y = X + W`.
#[derive(Debug, Clone)]
pub struct ScalarChannel {
    input: InputDistribution,
    noise_var: f64,
    noise_sd: f64,
    stats: OnceLock<ChannelStatistics>,
}

/// Posterior summary at one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorPoint {
    pub y: f64,
    /// `p_Y(y)`.
    pub density: f64,
    /// `d/dy ln p_Y(y)`.
    pub score: f64,
    pub cond_mean: f64,
    pub cond_var: f64,
}

/// `p_Y(y)` with a flag for observations outside the resolvable range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalDensity {
    pub value: f64,
    pub far_tail: bool,
}

/// Expectations over the output law, each with a resolution-based error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelStatistics {
    /// `∫ p_Y`, which should be 1.
    pub mass: EstimateWithError,
    /// `h(Y)`.
    pub output_entropy: EstimateWithError,
    /// `E[Var(X|Y)]`.
    pub mmse: EstimateWithError,
    /// `E[ln Var(X|Y)]`.
    pub e_log_cond_var: EstimateWithError,
    /// `E[E[X|Y]]`, which should equal the input mean.
    pub mean_cond_mean: EstimateWithError,
    /// `Var(E[X|Y])` computed directly rather than from the law of total variance.
    pub var_cond_mean_direct: EstimateWithError,
    /// `Var(Var(X|Y))`.
    pub var_cond_var: EstimateWithError,
    /// Number of grid nodes where `Var(X|Y)` fell below [`COND_VAR_FLOOR`].
    pub clipped: usize,
}

/// Reusable buffers for posterior quadrature.
#[derive(Debug, Default)]
struct Scratch {
    panels: PanelRule,
    logs: Vec<f64>,
}

impl ScalarChannel {
    pub fn new(input: InputDistribution, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::param(format!(
                "noise variance must be positive and finite, got {noise_var}"
            )));
        }
        if !(input.variance() > 0.0 && input.variance().is_finite()) {
            return Err(Error::param("input variance must be positive and finite"));
        }
        Ok(Self {
            input,
            noise_var,
            noise_sd: noise_var.sqrt(),
            stats: OnceLock::new(),
        })
    }

    pub fn input(&self) -> &InputDistribution {
        &self.input
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// `σ_Y² = σ_X² + σ_W²`.
    pub fn output_variance(&self) -> f64 {
        self.input.variance() + self.noise_var
    }

    pub fn output_mean(&self) -> f64 {
        self.input.mean()
    }

    /// Observations for which the posterior is resolved; outside it the tail error applies.
    pub fn usable_range(&self) -> Interval {
        let bulk = self.input.bulk(BULK_TAIL);
        Interval::new(
            bulk.lo - TAIL_SDS * self.noise_sd,
            bulk.hi + TAIL_SDS * self.noise_sd,
        )
    }

    /// Range of the expectation grid over `y`.
    pub fn expectation_range(&self) -> Interval {
        let bulk = self.input.bulk(BULK_TAIL);
        Interval::new(
            bulk.lo - GRID_SDS * self.noise_sd,
            bulk.hi + GRID_SDS * self.noise_sd,
        )
    }

    /// Quadrature nodes in the input variable for the posterior at `y`.
    fn fill_nodes(&self, y: f64, scratch: &mut Scratch) {
        let support = self.input.support();
        let negligible = self.input.negligible_bounds();
        let lo_cap = support.lo.max(negligible.lo);
        let hi_cap = support.hi.min(negligible.hi);
        let centre = y.clamp(lo_cap, hi_cap);
        let lo = (centre - WINDOW_SDS * self.noise_sd).max(lo_cap);
        let hi = (centre + WINDOW_SDS * self.noise_sd).min(hi_cap);
        let width = self.noise_sd.min(self.input.feature_scale());

        let breaks = self.input.breakpoints();
        scratch.panels.rebuild(lo, hi, &breaks, width);
    }

    /// Log-domain posterior quadrature: returns `(ln p_Y(y), mean, var, score)`.
    fn posterior_raw(&self, y: f64, scratch: &mut Scratch) -> Option<(f64, f64, f64, f64)> {
        self.fill_nodes(y, scratch);
        let inv_two_var = 0.5 / self.noise_var;
        scratch.logs.clear();
        let mut peak = f64::NEG_INFINITY;
        for &s in &scratch.panels.nodes {
            let l = self.input.ln_pdf(s) - (y - s) * (y - s) * inv_two_var;
            peak = peak.max(l);
            scratch.logs.push(l);
        }
        if !peak.is_finite() {
            return None;
        }
        let (mut z, mut first, mut slope) = (0.0, 0.0, 0.0);
        let panels = &scratch.panels;
        for ((&s, &w), l) in panels
            .nodes
            .iter()
            .zip(&panels.weights)
            .zip(scratch.logs.iter_mut())
        {
            let mass = w * (*l - peak).exp();
            *l = mass;
            z += mass;
            first += mass * s;
            slope += mass * (s - y);
        }
        let mean = first / z;
        let var = panels
            .nodes
            .iter()
            .zip(&scratch.logs)
            .map(|(&s, &m)| m * (s - mean) * (s - mean))
            .sum::<f64>()
            / z;
        let ln_density = peak + z.ln() - 0.5 * (2.0 * PI * self.noise_var).ln();
        Some((ln_density, mean, var, slope / z / self.noise_var))
    }

    /// `p_Y(y) = ∫ p_X(s) φ_W(y − s) ds`.
    pub fn marginal_pdf(&self, y: f64) -> MarginalDensity {
        let far_tail = !self.usable_range().contains(y);
        let value = self
            .posterior_raw(y, &mut Scratch::default())
            .map_or(0.0, |(ln, ..)| ln.exp());
        MarginalDensity {
            value: value.max(crate::numerics::PDF_FLOOR),
            far_tail: far_tail || value < crate::numerics::PDF_FLOOR,
        }
    }

    /// `ln p_Y(y)`, without underflow in the tails.
    pub fn ln_marginal_pdf(&self, y: f64) -> Result<f64> {
        self.posterior_raw(y, &mut Scratch::default())
            .map(|(ln, ..)| ln)
            .ok_or_else(|| self.tail_error(y))
    }

    /// `p_Y(y)` as a Gauss–Hermite average over the noise, `E[p_X(y − W)]`.
    ///
    /// Accurate only for smooth input densities; kept as an independent cross-check.
    pub fn marginal_pdf_hermite(&self, y: f64, order: usize) -> Result<f64> {
        let rule = gauss_hermite(order)?;
        Ok(rule.expect_standard_normal(|z| self.input.pdf(y - self.noise_sd * z)))
    }

    fn tail_error(&self, y: f64) -> Error {
        let r = self.usable_range();
        Error::Tail {
            y,
            lo: r.lo,
            hi: r.hi,
        }
    }

    pub fn posterior_point(&self, y: f64) -> Result<PosteriorPoint> {
        if !self.usable_range().contains(y) {
            return Err(self.tail_error(y));
        }
        let (ln_density, cond_mean, cond_var, score) = self
            .posterior_raw(y, &mut Scratch::default())
            .ok_or_else(|| self.tail_error(y))?;
        let density = ln_density.exp();
        if !(density >= crate::numerics::PDF_FLOOR) {
            return Err(self.tail_error(y));
        }
        let point = PosteriorPoint {
            y,
            density,
            score,
            cond_mean,
            cond_var,
        };
        let tweedie = y + self.noise_var * score;
        if (cond_mean - tweedie).abs() > 1e-8 * (1.0 + cond_mean.abs()) {
            return Err(Error::IdentityViolation(format!(
                "posterior mean {cond_mean} disagrees with y + σ²·score = {tweedie} at y = {y}"
            )));
        }
        Ok(point)
    }

    /// `E[X|Y=y]`.
    pub fn cond_mean(&self, y: f64) -> Result<f64> {
        Ok(self.posterior_point(y)?.cond_mean)
    }

    /// Expectations over `p_Y`, computed once and cached.
    pub fn statistics(&self) -> Result<&ChannelStatistics> {
        if let Some(s) = self.stats.get() {
            return Ok(s);
        }
        let s = self.compute_statistics()?;
        Ok(self.stats.get_or_init(|| s))
    }

    fn grid_sums(&self, width: f64) -> Result<(GridSums, usize)> {
        let range = self.expectation_range();
        let grid = PanelRule::new(range.lo, range.hi, &[], width);
        let mut scratch = Scratch::default();
        let mut rows = Vec::with_capacity(grid.len());
        let mut clipped = 0;
        for (&y, &w) in grid.nodes.iter().zip(&grid.weights) {
            let Some((ln_p, m, v, _)) = self.posterior_raw(y, &mut scratch) else {
                continue;
            };
            let p = ln_p.exp();
            if p == 0.0 {
                continue;
            }
            let v = if v < COND_VAR_FLOOR {
                clipped += 1;
                COND_VAR_FLOOR
            } else {
                v
            };
            rows.push((w * p, ln_p, m, v));
        }
        let mass: f64 = rows.iter().map(|r| r.0).sum();
        let entropy: f64 = rows.iter().map(|r| -r.0 * r.1).sum();
        let mmse: f64 = rows.iter().map(|r| r.0 * r.3).sum();
        let e_log: f64 = rows.iter().map(|r| r.0 * r.3.ln()).sum();
        let mean_m: f64 = rows.iter().map(|r| r.0 * r.2).sum();
        let mu = self.input.mean();
        let var_m: f64 = rows.iter().map(|r| r.0 * (r.2 - mu).powi(2)).sum();
        let var_v: f64 = rows.iter().map(|r| r.0 * (r.3 - mmse).powi(2)).sum();
        Ok((
            GridSums {
                mass,
                entropy,
                mmse,
                e_log,
                mean_m,
                var_m,
                var_v,
            },
            clipped,
        ))
    }

    fn compute_statistics(&self) -> Result<ChannelStatistics> {
        let width = 0.5 * self.noise_sd;
        let (coarse, _) = self.grid_sums(2.0 * width)?;
        let (fine, clipped) = self.grid_sums(width)?;
        let est = |f: fn(&GridSums) -> f64| {
            let (a, b) = (f(&fine), f(&coarse));
            EstimateWithError::quadrature(a, (a - b).abs() + GRID_FLOOR * (1.0 + a.abs()))
        };
        let stats = ChannelStatistics {
            mass: est(|g| g.mass),
            output_entropy: est(|g| g.entropy),
            mmse: est(|g| g.mmse),
            e_log_cond_var: est(|g| g.e_log),
            mean_cond_mean: est(|g| g.mean_m),
            var_cond_mean_direct: est(|g| g.var_m),
            var_cond_var: est(|g| g.var_v),
            clipped,
        };
        if (stats.mass.value - 1.0).abs() > 1e-7 {
            return Err(Error::Convergence {
                what: format!("output density normalization for {}", self.input),
                estimate: stats.mass.value,
                abs_error: stats.mass.abs_error,
            });
        }
        Ok(stats)
    }

    /// `mmse(X|Y) = E[Var(X|Y)]`.
    pub fn mmse(&self) -> Result<EstimateWithError> {
        Ok(self.statistics()?.mmse)
    }

    /// `Var(E[X|Y]) = σ_X² − mmse` by the law of total variance.
    pub fn var_cond_mean(&self) -> Result<EstimateWithError> {
        let m = self.mmse()?;
        Ok(EstimateWithError::quadrature(
            self.input.variance() - m.value,
            m.abs_error,
        ))
    }

    /// `h(Y)`.
    pub fn output_entropy(&self) -> Result<EstimateWithError> {
        Ok(self.statistics()?.output_entropy)
    }

    /// `h(E[X|Y]) = h(Y) + E[ln Var(X|Y)] − ln σ_W²`.
    pub fn entropy_cond_mean(&self) -> Result<EstimateWithError> {
        let s = self.statistics()?;
        Ok(EstimateWithError::quadrature(
            s.output_entropy.value + s.e_log_cond_var.value - self.noise_var.ln(),
            s.output_entropy.abs_error + s.e_log_cond_var.abs_error,
        ))
    }

    /// `h(X|Y) = h(X) − h(Y) + h(W)`.
    pub fn conditional_entropy(&self) -> Result<EstimateWithError> {
        let hx = self.input.entropy()?;
        let hy = self.output_entropy()?;
        let hw = crate::numerics::HALF_LN_2PI_E + 0.5 * self.noise_var.ln();
        Ok(EstimateWithError::quadrature(
            hx.value - hy.value + hw,
            hx.abs_error + hy.abs_error,
        ))
    }

    /// Samples `Y = X + W` with the given seed.
    pub fn sample_outputs(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = self.input.draw(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                x + self.noise_sd * z
            })
            .collect()
    }

    /// Nearest-neighbour entropy of `E[X|Y_i]` over sampled observations: an
    /// estimate of `h(E[X|Y])` that never uses the log-variance identity.
    pub fn entropy_cond_mean_sampled(
        &self,
        n_samples: usize,
        seed: u64,
    ) -> Result<EstimateWithError> {
        if n_samples < 100_000 {
            return Err(Error::param(format!(
                "the sampled estimate needs at least 1e5 samples, got {n_samples}"
            )));
        }
        let range = self.usable_range();
        let mut scratch = Scratch::default();
        let mut means = Vec::with_capacity(n_samples);
        for y in self.sample_outputs(n_samples, seed) {
            let y = range.clamp(y);
            let (_, m, _, _) = self
                .posterior_raw(y, &mut scratch)
                .ok_or_else(|| self.tail_error(y))?;
            means.push(m);
        }
        knn_entropy(
            &PointCloud::from_scalars(means)?,
            4,
            seed ^ 0x9e37_79b9_7f4a_7c15,
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct GridSums {
    mass: f64,
    entropy: f64,
    mmse: f64,
    e_log: f64,
    mean_m: f64,
    var_m: f64,
    var_v: f64,
}

/// Every entropy, moment and bound for one channel.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub input: String,
    pub noise_var: f64,
    pub h_x: EstimateWithError,
    pub h_y: EstimateWithError,
    pub h_cond_mean: EstimateWithError,
    pub mmse: EstimateWithError,
    pub var_cond_mean: EstimateWithError,
    pub e_log_cond_var: EstimateWithError,
    pub lower_main: EstimateWithError,
    pub ub_jensen: EstimateWithError,
    pub ub_linear: EstimateWithError,
    pub ub_maxent: EstimateWithError,
    pub clipped_cond_var: usize,
}

impl EntropyReport {
    pub fn compute(ch: &ScalarChannel) -> Result<Self> {
        let stats = ch.statistics()?;
        let BoundsReport {
            lower_main,
            ub_jensen,
            ub_linear,
            ub_maxent,
            truth,
            ..
        } = bounds_report(ch)?;
        Ok(Self {
            input: ch.input().to_string(),
            noise_var: ch.noise_var(),
            h_x: ch.input().entropy()?,
            h_y: stats.output_entropy,
            h_cond_mean: truth,
            mmse: stats.mmse,
            var_cond_mean: ch.var_cond_mean()?,
            e_log_cond_var: stats.e_log_cond_var,
            lower_main,
            ub_jensen,
            ub_linear,
            ub_maxent,
            clipped_cond_var: stats.clipped,
        })
    }
}
