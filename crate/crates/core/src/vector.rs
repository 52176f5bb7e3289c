//! Vector channel `Y = AX + W` with `W ~ N(0, K_W)`, for dimensions one to three.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::awgn::ScalarChannel;
use crate::distributions::InputDistribution;
use crate::error::{Error, Result};
use crate::numerics::{
    combined_tolerance, knn_entropy, EstimateWithError, Interval, PanelRule, PointCloud,
    HALF_LN_2PI_E,
};

pub const MAX_DIM: usize = 3;
const CONDITION_LIMIT: f64 = 1e10;
const INPUT_CONDITION_LIMIT: f64 = 1e8;
/// Mahalanobis radius of the region where posteriors are evaluated.
const ELLIPSOID_SDS: f64 = 8.0;
const WINDOW_SDS: f64 = 12.0;
const MAX_PANELS: f64 = 40.0;
const PARTICLES: usize = 100_000;
const MIN_ESS: f64 = 1_000.0;
const PROPOSAL_INFLATION: f64 = 4.0;
const PARTICLE_SEED: u64 = 0x005e_ed0f_9a27;

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::param(format!(
            "{what} must be {n}×{n}, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Row-major nested arrays, the interchange format for matrices.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(
            "matrix rows must be nonempty and of equal length".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// `X = T Z` with independent catalogue scalars `Z_i`.
#[derive(Debug, Clone)]
pub struct VectorInput {
    components: Vec<InputDistribution>,
    transform: DMatrix<f64>,
    ln_abs_det: f64,
    gaussian_cov: Option<DMatrix<f64>>,
}

impl VectorInput {
    pub fn product(components: Vec<InputDistribution>) -> Result<Self> {
        let n = components.len();
        Self::linear_image(components, DMatrix::identity(n, n))
    }

    pub fn linear_image(
        components: Vec<InputDistribution>,
        transform: DMatrix<f64>,
    ) -> Result<Self> {
        let n = components.len();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::param(format!(
                "dimension must be 1 to {MAX_DIM}, got {n}"
            )));
        }
        square(&transform, n, "input transform")?;
        if condition_number(&transform) > CONDITION_LIMIT {
            return Err(Error::param(
                "input transform is singular or ill-conditioned",
            ));
        }
        let ln_abs_det = transform.determinant().abs().ln();
        let input = Self {
            components,
            transform,
            ln_abs_det,
            gaussian_cov: None,
        };
        if condition_number(&input.covariance()) > INPUT_CONDITION_LIMIT {
            return Err(Error::Input("input covariance is not full rank".into()));
        }
        Ok(input)
    }

    /// Zero-mean Gaussian with covariance `cov`.
    pub fn gaussian(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        square(&cov, n, "input covariance")?;
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::param("input covariance is not positive definite"))?;
        let unit = (0..n)
            .map(|_| InputDistribution::gaussian(0.0, 1.0))
            .collect::<Result<Vec<_>>>()?;
        let mut input = Self::linear_image(unit, chol.l())?;
        input.gaussian_cov = Some(cov);
        Ok(input)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[InputDistribution] {
        &self.components
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn is_gaussian(&self) -> bool {
        self.components.iter().all(InputDistribution::is_gaussian)
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.transform
            * DVector::from_iterator(self.dim(), self.components.iter().map(|c| c.mean()))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.components.iter().map(|c| c.variance()),
        ));
        &self.transform * d * self.transform.transpose()
    }

    /// `Σ h(Z_i) + ln |det T|`.
    pub fn entropy(&self) -> Result<EstimateWithError> {
        let mut value = self.ln_abs_det;
        let mut err = 0.0;
        for c in &self.components {
            let h = c.entropy()?;
            value += h.value;
            err += h.abs_error;
        }
        Ok(EstimateWithError::quadrature(value, err))
    }

    /// `n` draws, stored row-major.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let dim = self.dim();
        let columns: Vec<Vec<f64>> = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.sample(n, sub_seed(seed, i as u64)))
            .collect();
        let mut out = vec![0.0; n * dim];
        for k in 0..n {
            for r in 0..dim {
                out[k * dim + r] = (0..dim)
                    .map(|c| self.transform[(r, c)] * columns[c][k])
                    .sum();
            }
        }
        out
    }
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed ^ (stream.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl fmt::Display for VectorInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(cov) = &self.gaussian_cov {
            return write!(f, "gauss({})", matrix_json(cov));
        }
        let parts: Vec<String> = self.components.iter().map(ToString::to_string).collect();
        let prod = format!("prod({})", parts.join(";"));
        if self.transform == DMatrix::identity(self.dim(), self.dim()) {
            write!(f, "{prod}")
        } else {
            write!(f, "lin({prod},{})", matrix_json(&self.transform))
        }
    }
}

fn matrix_json(m: &DMatrix<f64>) -> String {
    serde_json::to_string(&rows(m)).expect("finite matrix")
}

fn parse_matrix(s: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(s.trim())
        .map_err(|e| Error::Parse(format!("`{s}` is not a JSON matrix: {e}")))?;
    from_rows(&rows)
}

/// Splits at `sep` characters that are not nested in brackets or parentheses.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.trim()
        .strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')
}

impl FromStr for VectorInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(body) = call(s, "prod") {
            let comps = split_top(body, ';')
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<InputDistribution>>>()?;
            return Self::product(comps);
        }
        if let Some(body) = call(s, "gauss") {
            return Self::gaussian(parse_matrix(body)?);
        }
        if let Some(body) = call(s, "lin") {
            let parts = split_top(body, ',');
            if parts.len() != 2 {
                return Err(Error::Parse(format!(
                    "expected lin(prod(...),[[...]]), got `{s}`"
                )));
            }
            let base: VectorInput = parts[0].parse()?;
            return Self::linear_image(base.components, parse_matrix(parts[1])?);
        }
        Err(Error::Parse(format!(
            "unknown vector input `{s}`; expected prod(...), gauss([[...]]) or lin(prod(...),[[...]])"
        )))
    }
}

/// Posterior summary of `X` at one observation.
#[derive(Debug, Clone)]
pub struct VectorPosterior {
    pub y: DVector<f64>,
    pub density: f64,
    pub cond_mean: DVector<f64>,
    pub cond_cov: DMatrix<f64>,
    /// Effective sample size when importance sampling was used.
    pub ess: Option<f64>,
}

impl VectorPosterior {
    /// `ln det Var(X|Y=y)`, failing unless the matrix is positive definite.
    pub fn ln_det_cov(&self) -> Result<f64> {
        let chol = Cholesky::new(self.cond_cov.clone()).ok_or_else(|| {
            Error::IdentityViolation(format!(
                "conditional covariance at y = {:?} is not positive definite",
                self.y.as_slice()
            ))
        })?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }
}

#[derive(Debug)]
pub struct VectorChannel {
    input: VectorInput,
    mixing: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    noise_chol: DMatrix<f64>,
    /// `L⁻¹ A T` with `K_W = L Lᵀ`.
    whitened: DMatrix<f64>,
    whitened_inv: DMatrix<f64>,
    noise_chol_inv: DMatrix<f64>,
    ln_det_noise: f64,
    ln_abs_det_mixing: f64,
    output_mean: DVector<f64>,
    output_cov: DMatrix<f64>,
    output_precision: DMatrix<f64>,
    likelihood_marginal_sd: Vec<f64>,
    likelihood_conditional_sd: Vec<f64>,
    particles: OnceLock<Vec<f64>>,
}

impl VectorChannel {
    pub fn new(input: VectorInput, mixing: DMatrix<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let n = input.dim();
        square(&mixing, n, "A")?;
        square(&noise_cov, n, "K_W")?;
        if condition_number(&mixing) > CONDITION_LIMIT {
            return Err(Error::param("A is singular or ill-conditioned"));
        }
        if (&noise_cov - noise_cov.transpose()).abs().max() > 1e-12 * noise_cov.abs().max() {
            return Err(Error::param("K_W must be symmetric"));
        }
        if condition_number(&noise_cov) > CONDITION_LIMIT {
            return Err(Error::param("K_W is ill-conditioned"));
        }
        let chol = Cholesky::new(noise_cov.clone())
            .ok_or_else(|| Error::param("K_W is not positive definite"))?;
        let noise_chol = chol.l();
        let noise_chol_inv = noise_chol
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::param("K_W is not invertible"))?;
        let combined = &mixing * input.transform();
        let whitened = &noise_chol_inv * &combined;
        let whitened_inv = whitened
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::param("A is not invertible"))?;
        let ln_det_noise = 2.0 * noise_chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let ln_abs_det_mixing = mixing.determinant().abs().ln();
        let output_mean = &mixing * input.mean();
        let output_cov = &mixing * input.covariance() * mixing.transpose() + &noise_cov;
        let output_precision = output_cov
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::param("output covariance is singular"))?;
        let info = whitened.transpose() * &whitened;
        let info_inv = info
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::param("A is not invertible"))?;
        let likelihood_marginal_sd = (0..n).map(|i| info_inv[(i, i)].sqrt()).collect();
        let likelihood_conditional_sd = (0..n).map(|i| 1.0 / info[(i, i)].sqrt()).collect();
        Ok(Self {
            input,
            mixing,
            noise_cov,
            noise_chol,
            whitened,
            whitened_inv,
            noise_chol_inv,
            ln_det_noise,
            ln_abs_det_mixing,
            output_mean,
            output_cov,
            output_precision,
            likelihood_marginal_sd,
            likelihood_conditional_sd,
            particles: OnceLock::new(),
        })
    }

    /// `A = I`, `K_W = noise_var·I`.
    pub fn isotropic(input: VectorInput, noise_var: f64) -> Result<Self> {
        let n = input.dim();
        Self::new(
            input,
            DMatrix::identity(n, n),
            DMatrix::identity(n, n) * noise_var,
        )
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn input(&self) -> &VectorInput {
        &self.input
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn output_cov(&self) -> &DMatrix<f64> {
        &self.output_cov
    }

    pub fn ln_abs_det_mixing(&self) -> f64 {
        self.ln_abs_det_mixing
    }

    fn mahalanobis_sq(&self, y: &DVector<f64>) -> f64 {
        let d = y - &self.output_mean;
        (d.transpose() * &self.output_precision * &d)[(0, 0)]
    }

    /// Pulls `y` radially onto the evaluation ellipsoid; reports whether it moved.
    fn clamp_to_ellipsoid(&self, y: DVector<f64>) -> (DVector<f64>, bool) {
        let r = self.mahalanobis_sq(&y).sqrt();
        let limit = ELLIPSOID_SDS * (1.0 - 1e-9);
        if r <= limit {
            (y, false)
        } else {
            let d = &y - &self.output_mean;
            (&self.output_mean + d * (limit / r), true)
        }
    }

    fn ln_noise_norm(&self) -> f64 {
        -0.5 * self.dim() as f64 * (2.0 * PI).ln() - 0.5 * self.ln_det_noise
    }

    fn check_y(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.dim() {
            return Err(Error::param(format!(
                "observation has {} coordinates, channel has {}",
                y.len(),
                self.dim()
            )));
        }
        let y = DVector::from_column_slice(y);
        let r = self.mahalanobis_sq(&y).sqrt();
        if r > ELLIPSOID_SDS {
            return Err(Error::domain(format!(
                "observation {:?} is {r:.2} standard deviations from the output mean (limit {ELLIPSOID_SDS})",
                y.as_slice()
            )));
        }
        Ok(y)
    }

    /// Posterior mean and covariance of `X` given `Y = y`: tensor-product
    /// quadrature for `n ≤ 2`, importance sampling for `n = 3`.
    pub fn posterior(&self, y: &[f64]) -> Result<VectorPosterior> {
        let y = self.check_y(y)?;
        if self.dim() <= 2 {
            self.posterior_tensor(y)
        } else {
            self.posterior_importance_at(y)
        }
    }

    /// Importance-sampling posterior in any dimension.
    pub fn posterior_importance(&self, y: &[f64]) -> Result<VectorPosterior> {
        let y = self.check_y(y)?;
        self.posterior_importance_at(y)
    }

    fn finish(
        &self,
        y: DVector<f64>,
        ln_density: f64,
        mean_z: DVector<f64>,
        cov_z: DMatrix<f64>,
        ess: Option<f64>,
    ) -> Result<VectorPosterior> {
        let t = self.input.transform();
        let cond_mean = t * mean_z;
        let cond_cov = t * cov_z * t.transpose();
        let cond_cov = 0.5 * (&cond_cov + cond_cov.transpose());
        if !ln_density.is_finite() || cond_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { at: y[0] });
        }
        Ok(VectorPosterior {
            y,
            density: ln_density.exp(),
            cond_mean,
            cond_cov,
            ess,
        })
    }

    fn posterior_tensor(&self, y: DVector<f64>) -> Result<VectorPosterior> {
        let n = self.dim();
        let u = &self.noise_chol_inv * &y;
        let z_hat = &self.whitened_inv * &u;
        let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);
        let mut centre = DVector::zeros(n);
        for (i, comp) in self.input.components().iter().enumerate() {
            let support = comp.support();
            let bounds = support
                .intersect(&comp.negligible_bounds())
                .unwrap_or(support);
            let c = bounds.clamp(z_hat[i]);
            let half = WINDOW_SDS * self.likelihood_marginal_sd[i];
            let window = Interval::new((c - half).max(bounds.lo), (c + half).min(bounds.hi));
            let width = self.likelihood_conditional_sd[i]
                .min(comp.feature_scale())
                .max(window.width() / MAX_PANELS);
            let rule = PanelRule::new(window.lo, window.hi, &comp.breakpoints(), width);
            let mut nodes = Vec::with_capacity(rule.len());
            let mut logs = Vec::with_capacity(rule.len());
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let l = w.ln() + comp.ln_pdf(*x);
                if l.is_finite() {
                    nodes.push(*x);
                    logs.push(l);
                }
            }
            if nodes.is_empty() {
                return Err(Error::Resolution(format!(
                    "no quadrature nodes for coordinate {i}"
                )));
            }
            centre[i] = c;
            axes.push((nodes, logs));
        }
        // Log-weights over the tensor grid, then a max-shifted pass for the moments.
        let cols: Vec<DVector<f64>> = (0..n)
            .map(|j| self.whitened.column(j).into_owned())
            .collect();
        let sizes: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
        let total: usize = sizes.iter().product();
        let mut logw = Vec::with_capacity(total);
        let mut z = vec![0.0; n];
        let mut resid = DVector::zeros(n);
        for flat in 0..total {
            let mut rem = flat;
            let mut l = 0.0;
            resid.copy_from(&u);
            for (j, size) in sizes.iter().enumerate() {
                let k = rem % size;
                rem /= size;
                z[j] = axes[j].0[k];
                l += axes[j].1[k];
                resid.axpy(-z[j], &cols[j], 1.0);
            }
            logw.push(l - 0.5 * resid.norm_squared());
        }
        let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(n);
        let mut s2 = DMatrix::zeros(n, n);
        let mut dz = DVector::zeros(n);
        for (flat, l) in logw.iter().enumerate() {
            let w = (l - peak).exp();
            if w == 0.0 {
                continue;
            }
            let mut rem = flat;
            for (j, size) in sizes.iter().enumerate() {
                dz[j] = axes[j].0[rem % size] - centre[j];
                rem /= size;
            }
            s0 += w;
            s1.axpy(w, &dz, 1.0);
            s2.ger(w, &dz, &dz, 1.0);
        }
        let shift = s1 / s0;
        let cov = s2 / s0 - &shift * shift.transpose();
        let ln_density = peak + s0.ln() + self.ln_noise_norm();
        self.finish(y, ln_density, centre + shift, cov, None)
    }

    fn particles(&self) -> &[f64] {
        self.particles.get_or_init(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(PARTICLE_SEED);
            (0..PARTICLES * self.dim())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
    }

    fn posterior_importance_at(&self, y: DVector<f64>) -> Result<VectorPosterior> {
        let n = self.dim();
        let comps = self.input.components();
        let u = &self.noise_chol_inv * &y;
        // Gaussian approximation of the posterior in the independent coordinates.
        let prior_prec = DVector::from_iterator(n, comps.iter().map(|c| 1.0 / c.variance()));
        let prior_mean = DVector::from_iterator(n, comps.iter().map(|c| c.mean()));
        let precision =
            DMatrix::from_diagonal(&prior_prec) + self.whitened.transpose() * &self.whitened;
        let approx_cov = precision
            .try_inverse()
            .ok_or_else(|| Error::Resolution("posterior approximation is singular".into()))?;
        let approx_mean =
            &approx_cov * (prior_prec.component_mul(&prior_mean) + self.whitened.transpose() * &u);
        let proposal = Cholesky::new(approx_cov * PROPOSAL_INFLATION)
            .ok_or_else(|| {
                Error::Resolution("proposal covariance is not positive definite".into())
            })?
            .l();
        let ln_det_proposal: f64 = proposal.diagonal().iter().map(|d| d.ln()).sum();
        let draws = self.particles();
        let mut logw = Vec::with_capacity(PARTICLES);
        let mut zs: Vec<f64> = Vec::with_capacity(PARTICLES * n);
        let mut g = DVector::zeros(n);
        for k in 0..PARTICLES {
            g.copy_from_slice(&draws[k * n..(k + 1) * n]);
            let z = &approx_mean + &proposal * &g;
            let prior: f64 = comps.iter().enumerate().map(|(i, c)| c.ln_pdf(z[i])).sum();
            let resid = &u - &self.whitened * &z;
            let ln_q = -0.5 * g.norm_squared() - ln_det_proposal - 0.5 * n as f64 * (2.0 * PI).ln();
            logw.push(prior - 0.5 * resid.norm_squared() - ln_q);
            zs.extend(z.iter());
        }
        let peak = logw
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::Resolution("every particle has zero weight".into()));
        }
        let mut s0 = 0.0;
        let mut sq = 0.0;
        let mut s1 = DVector::zeros(n);
        let mut s2 = DMatrix::zeros(n, n);
        let mut dz = DVector::zeros(n);
        for (k, l) in logw.iter().enumerate() {
            let w = (l - peak).exp();
            if !(w > 0.0) {
                continue;
            }
            for j in 0..n {
                dz[j] = zs[k * n + j] - approx_mean[j];
            }
            s0 += w;
            sq += w * w;
            s1.axpy(w, &dz, 1.0);
            s2.ger(w, &dz, &dz, 1.0);
        }
        let ess = s0 * s0 / sq;
        if ess < MIN_ESS {
            return Err(Error::Resolution(format!(
                "effective sample size {ess:.0} is below {MIN_ESS}"
            )));
        }
        let shift = s1 / s0;
        let cov = s2 / s0 - &shift * shift.transpose();
        let ln_density = peak + (s0 / PARTICLES as f64).ln() + self.ln_noise_norm();
        self.finish(y, ln_density, approx_mean + shift, cov, Some(ess))
    }

    /// `n` draws of `Y`, row-major.
    pub fn sample_outputs(&self, n: usize, seed: u64) -> Vec<f64> {
        let dim = self.dim();
        let xs = self.input.sample(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 0xbeef));
        let mut out = vec![0.0; n * dim];
        let mut g = DVector::zeros(dim);
        for k in 0..n {
            for v in g.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let x = DVector::from_column_slice(&xs[k * dim..(k + 1) * dim]);
            let y = &self.mixing * x + &self.noise_chol * &g;
            out[k * dim..(k + 1) * dim].copy_from_slice(y.as_slice());
        }
        out
    }

    /// `Var(X|y) Aᵀ K_W⁻¹`, the Jacobian `∂E[X_i|y]/∂y_j` predicted by Hatsell–Nolte.
    pub fn hatsell_nolte_jacobian(&self, post: &VectorPosterior) -> DMatrix<f64> {
        let kw_inv = self
            .noise_cov
            .clone()
            .try_inverse()
            .expect("checked at construction");
        &post.cond_cov * self.mixing.transpose() * kw_inv
    }

    /// `∂E[X_i|y]/∂y_j` by central differences with step `step`.
    pub fn cond_mean_jacobian_fd(&self, y: &[f64], step: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut hi = y.to_vec();
            let mut lo = y.to_vec();
            hi[j] += step;
            lo[j] -= step;
            let d =
                (self.posterior(&hi)?.cond_mean - self.posterior(&lo)?.cond_mean) / (2.0 * step);
            jac.set_column(j, &d);
        }
        Ok(jac)
    }
}

impl fmt::Display for VectorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vec:n={},input={},A={},Kw={}",
            self.dim(),
            self.input,
            matrix_json(&self.mixing),
            matrix_json(&self.noise_cov)
        )
    }
}

impl FromStr for VectorChannel {
    type Err = Error;

    /// `vec:n=2,input=prod(uniform:var=1;laplace:var=1),A=[[1,0],[0,1]],Kw=[[1,0],[0,1]]`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().strip_prefix("vec:").ok_or_else(|| {
            Error::Parse(format!(
                "vector channel spec must start with `vec:`, got `{s}`"
            ))
        })?;
        let (mut n, mut input, mut a, mut kw) = (None, None, None, None);
        for item in split_top(body, ',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            match key.trim() {
                "n" => {
                    n = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Parse(format!("`{value}` is not a dimension")))?,
                    )
                }
                "input" => input = Some(value.parse::<VectorInput>()?),
                "A" => a = Some(parse_matrix(value)?),
                "Kw" => kw = Some(parse_matrix(value)?),
                other => {
                    return Err(Error::Parse(format!(
                        "unknown key `{other}` (allowed: n, input, A, Kw)"
                    )))
                }
            }
        }
        let input = input.ok_or_else(|| Error::Parse("vector spec needs `input`".into()))?;
        let dim = input.dim();
        if let Some(n) = n {
            if n != dim {
                return Err(Error::Parse(format!(
                    "n = {n} but the input has dimension {dim}"
                )));
            }
        }
        let a = a.unwrap_or_else(|| DMatrix::identity(dim, dim));
        let kw = kw.unwrap_or_else(|| DMatrix::identity(dim, dim));
        VectorChannel::new(input, a, kw)
    }
}

/// Sample sizes and seed for Monte Carlo estimates over `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorEstimateConfig {
    /// Samples for the kNN estimate of `h(Y)`.
    pub entropy_samples: usize,
    /// Samples for averages of posterior functionals.
    pub expectation_samples: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for VectorEstimateConfig {
    fn default() -> Self {
        Self {
            entropy_samples: 1_000_000,
            expectation_samples: 20_000,
            k: 4,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorEntropy {
    pub h_y: EstimateWithError,
    /// `E[ln det(A K_W⁻¹ Var(X|Y))]`.
    pub e_log_det: EstimateWithError,
    pub truth: EstimateWithError,
    pub mmse: Vec<Vec<f64>>,
    /// Standard errors of the entries of `mmse`.
    pub mmse_se: Vec<Vec<f64>>,
    pub ln_det_mmse: EstimateWithError,
    pub cond_mean_cov: Vec<Vec<f64>>,
    /// Standard errors of the entries of `cond_mean_cov`.
    pub cond_mean_cov_se: Vec<Vec<f64>>,
    /// Standard errors of the entries of `MMSE + Cov(E[X|Y])`.
    pub total_cov_se: Vec<Vec<f64>>,
    pub clipped: usize,
}

const BATCHES: usize = 10;

/// `h(E[X|Y]) = h(Y) + E[ln det(A K_W⁻¹ Var(X|Y))]`.
pub fn entropy_cond_mean_vec(
    ch: &VectorChannel,
    cfg: &VectorEstimateConfig,
) -> Result<VectorEntropy> {
    if ch.dim() == 1 {
        return scalar_reduction(ch);
    }
    let n = ch.dim();
    let cloud = PointCloud::new(n, ch.sample_outputs(cfg.entropy_samples, cfg.seed))?;
    let h_y = knn_entropy(&cloud, cfg.k, sub_seed(cfg.seed, 0x4b4e))?;

    let m = cfg.expectation_samples;
    if m < 10 * BATCHES {
        return Err(Error::param(format!(
            "need at least {} expectation samples",
            10 * BATCHES
        )));
    }
    let ys = ch.sample_outputs(m, sub_seed(cfg.seed, 0xe1));
    let mut clipped = 0;
    let mut logdets = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for k in 0..m {
        let (y, moved) = ch.clamp_to_ellipsoid(DVector::from_column_slice(&ys[k * n..(k + 1) * n]));
        clipped += usize::from(moved);
        let post = ch.posterior(y.as_slice())?;
        logdets.push(post.ln_det_cov()?);
        means.push(post.cond_mean);
        covs.push(post.cond_cov);
    }
    let mf = m as f64;
    let (avg, se) = mean_and_se(&logdets);
    let offset = ch.ln_abs_det_mixing - ch.ln_det_noise;
    let e_log_det = EstimateWithError::monte_carlo(avg + offset, se);

    let mmse = covs.iter().fold(DMatrix::zeros(n, n), |acc, c| acc + c) / mf;
    let mean_of_means = means.iter().fold(DVector::zeros(n), |acc, v| acc + v) / mf;
    let cond_mean_cov = means.iter().fold(DMatrix::zeros(n, n), |acc, v| {
        let d = v - &mean_of_means;
        acc + &d * d.transpose()
    }) / (mf - 1.0);
    let entry_se = |term: &dyn Fn(usize, usize, usize) -> f64| {
        DMatrix::from_fn(n, n, |i, j| {
            let vals: Vec<f64> = (0..m).map(|k| term(k, i, j)).collect();
            mean_and_se(&vals).1
        })
    };
    let spread = |k: usize, i: usize, j: usize| {
        (means[k][i] - mean_of_means[i]) * (means[k][j] - mean_of_means[j])
    };
    let mmse_se = entry_se(&|k, i, j| covs[k][(i, j)]);
    let cond_mean_cov_se = entry_se(&spread);
    let total_cov_se = entry_se(&|k, i, j| covs[k][(i, j)] + spread(k, i, j));
    let batch = m / BATCHES;
    let batch_logdets: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let avg = covs[b * batch..(b + 1) * batch]
                .iter()
                .fold(DMatrix::zeros(n, n), |acc, c| acc + c)
                / batch as f64;
            avg.determinant().ln()
        })
        .collect();
    let ln_det_mmse =
        EstimateWithError::monte_carlo(mmse.determinant().ln(), mean_and_se(&batch_logdets).1);
    let truth = EstimateWithError::monte_carlo(
        h_y.value + e_log_det.value,
        h_y.abs_error + e_log_det.abs_error,
    );
    Ok(VectorEntropy {
        h_y,
        e_log_det,
        truth,
        mmse: rows(&mmse),
        mmse_se: rows(&mmse_se),
        ln_det_mmse,
        cond_mean_cov: rows(&cond_mean_cov),
        cond_mean_cov_se: rows(&cond_mean_cov_se),
        total_cov_se: rows(&total_cov_se),
        clipped,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// One dimension: `Y/(a t) = Z + W/(a t)` is a scalar channel with input `Z`.
fn scalar_reduction(ch: &VectorChannel) -> Result<VectorEntropy> {
    let t = ch.input.transform()[(0, 0)];
    let a = ch.mixing[(0, 0)];
    let gain = a * t;
    let scalar = ScalarChannel::new(
        ch.input.components()[0].clone(),
        ch.noise_cov[(0, 0)] / (gain * gain),
    )?;
    let s = scalar.statistics()?;
    let h_y = EstimateWithError::quadrature(
        s.output_entropy.value + gain.abs().ln(),
        s.output_entropy.abs_error,
    );
    let truth = scalar.entropy_cond_mean()?;
    let truth = EstimateWithError::quadrature(truth.value + t.abs().ln(), truth.abs_error);
    let e_log_det =
        EstimateWithError::quadrature(truth.value - h_y.value, truth.abs_error + h_y.abs_error);
    let mmse = s.mmse.value * t * t;
    Ok(VectorEntropy {
        h_y,
        e_log_det,
        truth,
        mmse: vec![vec![mmse]],
        mmse_se: vec![vec![s.mmse.abs_error * t * t]],
        ln_det_mmse: EstimateWithError::quadrature(mmse.ln(), s.mmse.abs_error / s.mmse.value),
        cond_mean_cov: vec![vec![scalar.var_cond_mean()?.value * t * t]],
        cond_mean_cov_se: vec![vec![scalar.var_cond_mean()?.abs_error * t * t]],
        total_cov_se: vec![vec![0.0]],
        clipped: s.clipped,
    })
}

/// kNN entropy of sampled posterior means.
pub fn entropy_cond_mean_vec_sampled(
    ch: &VectorChannel,
    n: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    let dim = ch.dim();
    let ys = ch.sample_outputs(n, seed);
    let mut coords = Vec::with_capacity(n * dim);
    for k in 0..n {
        let (y, _) = ch.clamp_to_ellipsoid(DVector::from_column_slice(&ys[k * dim..(k + 1) * dim]));
        coords.extend(ch.posterior(y.as_slice())?.cond_mean.iter());
    }
    knn_entropy(&PointCloud::new(dim, coords)?, 4, sub_seed(seed, 0x4b4e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorBounds {
    pub channel: String,
    pub truth: EstimateWithError,
    pub h_x: EstimateWithError,
    pub h_y: EstimateWithError,
    /// `2h(X) − h(Y) + ln |det A|`.
    pub lower_main: EstimateWithError,
    /// `h(Y) + ln det MMSE + ln det(A K_W⁻¹)`.
    pub ub_jensen: EstimateWithError,
    /// `½ ln((2πe)ⁿ det(A K_X Aᵀ + K_W)) + ln det MMSE + ln det(A K_W⁻¹)`.
    pub ub_maxent: EstimateWithError,
    pub entropy: VectorEntropy,
}

impl VectorBounds {
    /// `lower_main ≤ truth ≤ ub_jensen ≤ ub_maxent` up to the combined error of each pair.
    pub fn check_ordering(&self) -> Result<()> {
        let chain = [
            ("lower_main", self.lower_main),
            ("truth", self.truth),
            ("ub_jensen", self.ub_jensen),
            ("ub_maxent", self.ub_maxent),
        ];
        for w in chain.windows(2) {
            let ((na, a), (nb, b)) = (w[0], w[1]);
            let tol = combined_tolerance(&[a.abs_error, b.abs_error]);
            if a.value > b.value + tol {
                return Err(Error::IdentityViolation(format!(
                    "{na} = {} exceeds {nb} = {} by more than {tol}",
                    a.value, b.value
                )));
            }
        }
        Ok(())
    }
}

pub fn vector_bounds(ch: &VectorChannel, cfg: &VectorEstimateConfig) -> Result<VectorBounds> {
    let entropy = entropy_cond_mean_vec(ch, cfg)?;
    let h_x = ch.input.entropy()?;
    let h_y = entropy.h_y;
    let n = ch.dim() as f64;
    let offset = ch.ln_abs_det_mixing - ch.ln_det_noise;
    let lower_main = EstimateWithError::new(
        2.0 * h_x.value - h_y.value + ch.ln_abs_det_mixing,
        2.0 * h_x.abs_error + h_y.abs_error,
        h_y.method,
    );
    let mmse = entropy.ln_det_mmse;
    let ub_jensen = EstimateWithError::new(
        h_y.value + mmse.value + offset,
        h_y.abs_error + mmse.abs_error,
        h_y.method,
    );
    let ln_det_out = ch.output_cov.determinant().ln();
    let ub_maxent = EstimateWithError::new(
        n * HALF_LN_2PI_E + 0.5 * ln_det_out + mmse.value + offset,
        mmse.abs_error,
        mmse.method,
    );
    Ok(VectorBounds {
        channel: ch.to_string(),
        truth: entropy.truth,
        h_x,
        h_y,
        lower_main,
        ub_jensen,
        ub_maxent,
        entropy,
    })
}

/// `½ ln det(2πe (A K_X)² (A K_X Aᵀ + K_W)⁻¹)` for a Gaussian input.
pub fn gaussian_entropy_cond_mean(
    input_cov: &DMatrix<f64>,
    mixing: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
) -> Result<f64> {
    let n = input_cov.nrows();
    let ak = mixing * input_cov;
    let out = mixing * input_cov * mixing.transpose() + noise_cov;
    let out_inv = out
        .try_inverse()
        .ok_or_else(|| Error::param("output covariance is singular"))?;
    let m = (2.0 * std::f64::consts::PI * std::f64::consts::E) * (&ak * &ak) * out_inv;
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::param("closed form has a non-positive determinant"));
    }
    debug_assert_eq!(m.shape(), (n, n));
    Ok(0.5 * det.ln())
}

/// Shipped vector inputs: Gaussian, products of uniforms and of Laplace laws,
/// and a correlated two-component Gaussian mixture.
pub fn vector_catalog(n: usize) -> Result<Vec<VectorInput>> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::param(format!(
            "catalogue dimension must be 2 or 3, got {n}"
        )));
    }
    let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.4 });
    let uniforms = (0..n)
        .map(|_| InputDistribution::uniform(1.0))
        .collect::<Result<Vec<_>>>()?;
    let laplaces = (0..n)
        .map(|_| InputDistribution::laplace(1.0))
        .collect::<Result<Vec<_>>>()?;
    let mut mixture = vec![InputDistribution::mixture_pm1(2.0)?];
    mixture.extend(
        (1..n)
            .map(|_| InputDistribution::gaussian(0.0, 1.0))
            .collect::<Result<Vec<_>>>()?,
    );
    let shear = DMatrix::from_fn(n, n, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (_, 0) => 0.6,
        _ => 0.0,
    });
    Ok(vec![
        VectorInput::gaussian(corr)?,
        VectorInput::product(uniforms)?,
        VectorInput::product(laplaces)?,
        VectorInput::linear_image(mixture, shear)?,
    ])
}

/// Matrix from row slices.
pub fn matrix(rows_in: &[&[f64]]) -> Result<DMatrix<f64>> {
    from_rows(&rows_in.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}
