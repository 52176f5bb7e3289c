//! Bounds on `h(E[X|Y])`, the second-order approximation, Fisher-information
//! bounds, small-variance asymptotics and the comparison with Costa's inequality.

use serde::Serialize;

use crate::awgn::ScalarChannel;
use crate::distributions::InputDistribution;
use crate::error::{Error, Result};
use crate::numerics::{
    combined_tolerance, entropy_power, propagate, EstimateWithError, HALF_LN_2PI_E,
};

/// Truth minus each bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundGaps {
    pub lower_main: f64,
    pub ub_jensen: f64,
    pub ub_linear: f64,
    pub ub_maxent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    /// `h(E[X|Y])`.
    pub truth: EstimateWithError,
    pub h_x: EstimateWithError,
    pub h_y: EstimateWithError,
    pub mmse: EstimateWithError,
    /// `2h(X) − h(Y)`.
    pub lower_main: EstimateWithError,
    /// `h(Y) + ln(mmse/σ_W²)`.
    pub ub_jensen: EstimateWithError,
    /// `h(Y) + ln(σ_X²/(σ_X²+σ_W²))`.
    pub ub_linear: EstimateWithError,
    /// `½ ln(2πe σ_X⁴/(σ_X²+σ_W²))`.
    pub ub_maxent: EstimateWithError,
    pub gaps: BoundGaps,
}

fn tol(a: &EstimateWithError, b: &EstimateWithError) -> f64 {
    combined_tolerance(&[a.abs_error, b.abs_error])
}

impl BoundsReport {
    /// Checks `lower_main ≤ truth ≤ ub_jensen ≤ ub_linear ≤ ub_maxent` up to numeric tolerance.
    pub fn check_ordering(&self) -> Result<()> {
        let chain = [
            ("lower_main", &self.lower_main, "truth", &self.truth),
            ("truth", &self.truth, "ub_jensen", &self.ub_jensen),
            ("ub_jensen", &self.ub_jensen, "ub_linear", &self.ub_linear),
            ("ub_linear", &self.ub_linear, "ub_maxent", &self.ub_maxent),
        ];
        for (lo_name, lo, hi_name, hi) in chain {
            if lo.value > hi.value + tol(lo, hi) {
                return Err(Error::IdentityViolation(format!(
                    "{lo_name} = {} exceeds {hi_name} = {}",
                    lo.value, hi.value
                )));
            }
        }
        Ok(())
    }

    /// `N²(X) ≤ N(E[X|Y])·N(Y)`, compared on the log scale.
    pub fn entropy_power_slack(&self) -> f64 {
        self.truth.value + self.h_y.value - 2.0 * self.h_x.value
    }
}

pub fn bounds_report(ch: &ScalarChannel) -> Result<BoundsReport> {
    let stats = ch.statistics()?;
    let truth = ch.entropy_cond_mean()?;
    let h_x = ch.input().entropy()?;
    let h_y = stats.output_entropy;
    let mmse = stats.mmse;
    let var_x = ch.input().variance();
    let noise = ch.noise_var();

    let lower_main = EstimateWithError::quadrature(
        2.0 * h_x.value - h_y.value,
        2.0 * h_x.abs_error + h_y.abs_error,
    );
    let ub_jensen = EstimateWithError::quadrature(
        h_y.value + (mmse.value / noise).ln(),
        h_y.abs_error + mmse.abs_error / mmse.value,
    );
    let ub_linear =
        EstimateWithError::quadrature(h_y.value + (var_x / (var_x + noise)).ln(), h_y.abs_error);
    let ub_maxent =
        EstimateWithError::analytic(HALF_LN_2PI_E + 0.5 * (var_x * var_x / (var_x + noise)).ln());
    let gaps = BoundGaps {
        lower_main: truth.value - lower_main.value,
        ub_jensen: truth.value - ub_jensen.value,
        ub_linear: truth.value - ub_linear.value,
        ub_maxent: truth.value - ub_maxent.value,
    };
    Ok(BoundsReport {
        truth,
        h_x,
        h_y,
        mmse,
        lower_main,
        ub_jensen,
        ub_linear,
        ub_maxent,
        gaps,
    })
}

/// Lower bounds on the Fisher information of `E[X|Y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherBounds {
    /// `1/N(E[X|Y])` from the computed entropy.
    pub from_entropy: f64,
    /// `(σ_X²+σ_W²)/σ_X⁴`.
    pub closed_form: f64,
}

pub fn fisher_bounds(ch: &ScalarChannel) -> Result<FisherBounds> {
    let truth = ch.entropy_cond_mean()?;
    let v = ch.input().variance();
    Ok(FisherBounds {
        from_entropy: 1.0 / entropy_power(truth.value),
        closed_form: (v + ch.noise_var()) / (v * v),
    })
}

/// Second-order expansion of `h(E[X|Y])` around the Jensen bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorApprox {
    pub value: f64,
    pub ub_jensen: f64,
    /// `Var(Var(X|Y))`.
    pub c2: f64,
    pub abs_error: f64,
}

pub fn taylor_approx(ch: &ScalarChannel) -> Result<TaylorApprox> {
    let stats = ch.statistics()?;
    let mmse = stats.mmse.value;
    let ub_jensen = stats.output_entropy.value + (mmse / ch.noise_var()).ln();
    let c2 = stats.var_cond_var.value.max(0.0);
    let correction = c2 / (2.0 * mmse * mmse);
    Ok(TaylorApprox {
        value: ub_jensen - correction,
        ub_jensen,
        c2,
        abs_error: stats.output_entropy.abs_error
            + stats.mmse.abs_error / mmse
            + stats.var_cond_var.abs_error / (2.0 * mmse * mmse),
    })
}

/// `h(E[X|Y]) / ln σ_X²` along a decreasing grid of input variances.
pub fn asymptotic_ratio_low_var(
    family: impl Fn(f64) -> Result<InputDistribution>,
    var_grid: &[f64],
    noise_var: f64,
) -> Result<Vec<f64>> {
    if var_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("variance grid must be strictly decreasing"));
    }
    var_grid
        .iter()
        .map(|&v| {
            if !(v > 0.0 && v < noise_var) || v == 1.0 {
                return Err(Error::param(format!(
                    "grid variance {v} must lie in (0, {noise_var}) and differ from 1"
                )));
            }
            let ch = ScalarChannel::new(family(v)?, noise_var)?;
            Ok(ch.entropy_cond_mean()?.value / v.ln())
        })
        .collect()
}

/// `½ ln(2πe σ_X²)`: `h(E[X|Y])` never exceeds it, whatever the noise.
pub fn high_var_ceiling(var_x: f64) -> f64 {
    HALF_LN_2PI_E + 0.5 * var_x.ln()
}

/// Two lower bounds on `N(X + αW)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpiComparison {
    pub alpha: f64,
    pub n_y_alpha: f64,
    /// `α²σ_W²·N(X)·exp(−E[ln Var(X|Y_α)])`.
    pub lb_main: f64,
    /// `(1−α²)N(X) + α²N(Y₁)`.
    pub lb_costa: f64,
    pub gap_main: f64,
    pub gap_costa: f64,
    pub n_y_alpha_abs_error: f64,
    pub gap_main_abs_error: f64,
    pub gap_costa_abs_error: f64,
    /// Relative accuracy of the entropy powers involved.
    pub rel_tol: f64,
}

pub fn costa_comparison(
    input: &InputDistribution,
    noise_var: f64,
    alpha: f64,
) -> Result<EpiComparison> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let scaled = ScalarChannel::new(input.clone(), alpha * alpha * noise_var)?;
    let unit = ScalarChannel::new(input.clone(), noise_var)?;
    let hx = input.entropy()?;
    let nx = entropy_power(hx.value);
    let s_alpha = scaled.statistics()?;
    let s_unit = unit.statistics()?;
    let n_y_alpha = entropy_power(s_alpha.output_entropy.value);
    let n_y_unit = entropy_power(s_unit.output_entropy.value);
    let lb_main = alpha * alpha * noise_var * nx * (-s_alpha.e_log_cond_var.value).exp();
    let lb_costa = (1.0 - alpha * alpha) * nx + alpha * alpha * n_y_unit;
    let rel_tol = combined_tolerance(&[
        2.0 * hx.abs_error,
        2.0 * s_alpha.output_entropy.abs_error,
        2.0 * s_unit.output_entropy.abs_error,
        s_alpha.e_log_cond_var.abs_error,
    ]);
    let a2 = alpha * alpha;
    let gap_main = propagate(
        [hx, s_alpha.output_entropy, s_alpha.e_log_cond_var],
        |[h_x, h_y, e_log]| {
            entropy_power(h_y) - a2 * noise_var * entropy_power(h_x) * (-e_log).exp()
        },
    );
    let gap_costa = propagate(
        [hx, s_alpha.output_entropy, s_unit.output_entropy],
        |[h_x, h_y, h_unit]| {
            entropy_power(h_y) - (1.0 - a2) * entropy_power(h_x) - a2 * entropy_power(h_unit)
        },
    );
    Ok(EpiComparison {
        alpha,
        n_y_alpha,
        lb_main,
        lb_costa,
        gap_main: n_y_alpha - lb_main,
        gap_costa: n_y_alpha - lb_costa,
        n_y_alpha_abs_error: 2.0 * n_y_alpha * s_alpha.output_entropy.abs_error,
        gap_main_abs_error: gap_main.abs_error,
        gap_costa_abs_error: gap_costa.abs_error,
        rel_tol,
    })
}
