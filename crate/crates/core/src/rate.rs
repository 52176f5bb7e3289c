//! Remote rate-distortion lower bounds and CEO rate-loss bounds.
//!
//! All rates are in nats.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::awgn::ScalarChannel;
use crate::distributions::{fisher_information, InputDistribution};
use crate::error::{Error, Result};
use crate::numerics::{
    combined_tolerance, entropy_power, entropy_power_estimate, format_number, log_plus, propagate,
    EstimateWithError,
};

/// Number of encoders in the CEO problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agents {
    Finite(u32),
    Infinite,
}

impl Agents {
    fn count(self) -> Option<f64> {
        match self {
            Agents::Finite(m) => Some(f64::from(m)),
            Agents::Infinite => None,
        }
    }
}

impl fmt::Display for Agents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agents::Finite(m) => write!(f, "{m}"),
            Agents::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Agents {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Agents::Infinite),
            t => match t.parse::<u32>() {
                Ok(m) if m >= 1 => Ok(Agents::Finite(m)),
                _ => Err(Error::Parse(format!(
                    "number of agents must be a positive integer or `inf`, got `{s}`"
                ))),
            },
        }
    }
}

/// A source observed by `M` encoders through independent `N(0, σ_W²)` noises.
#[derive(Debug, Clone)]
pub struct CeoSetting {
    input: InputDistribution,
    noise_var: f64,
    agents: Agents,
    averaged: Option<ScalarChannel>,
}

impl CeoSetting {
    pub fn new(input: InputDistribution, noise_var: f64, agents: Agents) -> Result<Self> {
        let averaged = match agents {
            Agents::Finite(0) => return Err(Error::param("at least one agent is required")),
            Agents::Finite(m) => Some(ScalarChannel::new(input.clone(), noise_var / f64::from(m))?),
            Agents::Infinite => {
                if !(noise_var > 0.0 && noise_var.is_finite()) {
                    return Err(Error::param(format!(
                        "noise variance must be positive and finite, got {noise_var}"
                    )));
                }
                None
            }
        };
        Ok(Self {
            input,
            noise_var,
            agents,
            averaged,
        })
    }

    pub fn input(&self) -> &InputDistribution {
        &self.input
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn agents(&self) -> Agents {
        self.agents
    }

    /// Channel seen by a decoder averaging all observations, `Y(M) = X + (1/M)ΣWᵢ`.
    pub fn averaged_channel(&self) -> Option<&ScalarChannel> {
        self.averaged.as_ref()
    }

    /// `σ_W²/M`, zero for infinitely many agents.
    pub fn averaged_noise(&self) -> f64 {
        self.agents.count().map_or(0.0, |m| self.noise_var / m)
    }

    /// `σ_X²σ_W²/(Mσ_X² + σ_W²)`: below it the CEO upper bound is undefined.
    pub fn ceo_threshold(&self) -> f64 {
        let v = self.input.variance();
        let s = self.averaged_noise();
        v * s / (v + s)
    }

    /// `t = (σ_W²/M)(1/D − 1/σ_X²)`.
    fn excess(&self, d: f64) -> f64 {
        self.averaged_noise() * (1.0 / d - 1.0 / self.input.variance())
    }
}

/// Open interval of distortions on which a bound is stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    fn contains(&self, d: f64) -> bool {
        self.lo < d && d < self.hi
    }
}

/// A bound at one distortion, or the window outside of which it was requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Value(EstimateWithError),
    Absent(Window),
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        self.estimate().map(|e| e.value)
    }

    pub fn estimate(&self) -> Option<EstimateWithError> {
        match *self {
            Rate::Value(v) => Some(v),
            Rate::Absent(_) => None,
        }
    }

    fn within(d: f64, window: Window, f: impl FnOnce() -> EstimateWithError) -> Rate {
        if window.contains(d) {
            Rate::Value(f())
        } else {
            Rate::Absent(window)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemoteBounds {
    pub lb1: EstimateWithError,
    pub lb2: EstimateWithError,
    /// Both bounds with `ln` in place of `log⁺`; these coincide for Gaussian inputs.
    pub lb1_unclamped: f64,
    pub lb2_unclamped: f64,
    /// Combined numeric tolerance of the entropy powers entering both bounds.
    pub tolerance: f64,
}

/// The two lower bounds on the remote rate-distortion function for `D > mmse`.
pub fn remote_lower_bounds(ch: &ScalarChannel, d: f64) -> Result<RemoteBounds> {
    let mmse = ch.mmse()?.value;
    if !(d > mmse) {
        return Err(Error::Domain(format!(
            "distortion {d} must exceed mmse(X|Y) = {mmse}"
        )));
    }
    let h_e = ch.entropy_cond_mean()?;
    let h_y = ch.output_entropy()?;
    let h_x = ch.input().entropy()?;
    let (n_e, n_y, n_x) = (
        entropy_power(h_e.value),
        entropy_power(h_y.value),
        entropy_power(h_x.value),
    );
    let denom = n_y - n_x * ch.noise_var() / d;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "distortion {d} must exceed N(X)σ_W²/N(Y) = {}",
            n_x * ch.noise_var() / n_y
        )));
    }
    let s = ch.noise_var();
    let powers = [h_e, h_y, h_x].map(entropy_power_estimate);
    Ok(RemoteBounds {
        lb1: propagate(powers, |[n_e, n_y, n_x]| {
            0.5 * log_plus(n_e / d) + 0.5 * log_plus(n_y / (n_y - n_x * s / d))
        }),
        lb2: propagate(powers, |[_, n_y, n_x]| {
            0.5 * log_plus(n_x / d) + 0.5 * log_plus(n_x / (n_y - n_x * s / d))
        }),
        lb1_unclamped: 0.5 * (n_e / d).ln() + 0.5 * (n_y / denom).ln(),
        lb2_unclamped: 0.5 * (n_x / d).ln() + 0.5 * (n_x / denom).ln(),
        tolerance: combined_tolerance(&[h_e.abs_error, h_y.abs_error, h_x.abs_error]),
    })
}

/// Entropy powers and mmse of the averaged channel; for infinitely many agents
/// the limits `N(E[X|Y]) = N(Y) = N(X)` and `mmse = 0`.
#[derive(Debug, Clone, Copy)]
struct AveragedQuantities {
    n_x: EstimateWithError,
    n_y: EstimateWithError,
    n_e: EstimateWithError,
    mmse: EstimateWithError,
}

impl AveragedQuantities {
    fn all(&self) -> [EstimateWithError; 4] {
        [self.n_x, self.n_y, self.n_e, self.mmse]
    }
}

fn averaged_quantities(setting: &CeoSetting) -> Result<AveragedQuantities> {
    let n_x = entropy_power_estimate(setting.input.entropy()?);
    Ok(match setting.averaged_channel() {
        Some(ch) => AveragedQuantities {
            n_x,
            n_y: entropy_power_estimate(ch.output_entropy()?),
            n_e: entropy_power_estimate(ch.entropy_cond_mean()?),
            mmse: ch.mmse()?,
        },
        None => AveragedQuantities {
            n_x,
            n_y: n_x,
            n_e: n_x,
            mmse: EstimateWithError::analytic(0.0),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoopBounds {
    /// `½ log⁺ N(E[X|Y(M)])/(D − mmse)`.
    pub tight: Rate,
    /// The same bound with the mmse replaced by `σ_W²N(X)/(M·N(Y(M)))`.
    pub weak: Rate,
}

/// Lower bounds on the rate of fully cooperating encoders.
pub fn coop_bounds(setting: &CeoSetting, d: f64) -> Result<CoopBounds> {
    let q = averaged_quantities(setting)?;
    let s = setting.averaged_noise();
    let tight = Rate::within(
        d,
        Window {
            lo: q.mmse.value,
            hi: f64::INFINITY,
        },
        || {
            propagate([q.n_e, q.mmse], |[n_e, mmse]| {
                0.5 * log_plus(n_e / (d - mmse))
            })
        },
    );
    let weak = Rate::within(
        d,
        Window {
            lo: s * q.n_x.value / q.n_y.value,
            hi: f64::INFINITY,
        },
        || {
            propagate([q.n_x, q.n_y, q.n_e], |[n_x, n_y, n_e]| {
                let floor = s * n_x / n_y;
                if d < n_e {
                    0.5 * (n_e / (d - floor)).ln()
                } else {
                    -0.5 * (-floor / d).ln_1p()
                }
            })
        },
    );
    Ok(CoopBounds { tight, weak })
}

/// Upper bound on the CEO sum rate, zero for `D ≥ σ_X²`.
pub fn ceo_sum_rate_ub(setting: &CeoSetting, d: f64) -> Result<f64> {
    let threshold = setting.ceo_threshold();
    if !(d > threshold) {
        return Err(Error::Domain(format!(
            "distortion {d} must exceed σ_X²σ_W²/(Mσ_X²+σ_W²) = {threshold}"
        )));
    }
    let v = setting.input.variance();
    if d >= v {
        return Ok(0.0);
    }
    let t = setting.excess(d);
    let tail = match setting.agents.count() {
        Some(m) => -0.5 * m * (-t).ln_1p(),
        None => 0.5 * setting.noise_var * (1.0 / d - 1.0 / v),
    };
    Ok(0.5 * (v / d).ln() + tail)
}

/// Bounds on the rate loss `L(D)` at one distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLossBounds {
    pub lb: Rate,
    pub ub_thm9: Rate,
    pub ub_thm10: Rate,
    pub ub_prev: Rate,
    /// Exact loss for a Gaussian source of the same variance.
    pub gauss_exact: Rate,
}

/// `((M−1)/2) ln 1/(1−t)` and its limit `(σ_W²/2)(1/D − 1/σ_X²)`.
fn gaussian_loss(setting: &CeoSetting, d: f64) -> f64 {
    let t = setting.excess(d);
    match setting.agents.count() {
        Some(m) => -0.5 * (m - 1.0) * (-t).ln_1p(),
        None => 0.5 * setting.noise_var * (1.0 / d - 1.0 / setting.input.variance()),
    }
}

/// Finite-`M` rate-loss bounds; bounds requested outside their windows are absent.
///
/// The second bound additionally needs `D` above the CEO threshold, where the
/// sum-rate upper bound it is built from is defined.
pub fn rate_loss_bounds(setting: &CeoSetting, d: f64) -> Result<RateLossBounds> {
    let Some(m) = setting.agents.count() else {
        let a = rate_loss_asymptotic(&setting.input, setting.noise_var, d);
        return Ok(match a {
            Ok(a) => RateLossBounds {
                lb: a.lb_inf,
                ub_thm9: a.ub_inf,
                ub_thm10: a.ub_inf,
                ub_prev: a.ub_prev_inf,
                gauss_exact: gaussian_window(setting, d),
            },
            Err(Error::Unsupported(_)) => {
                let a = asymptotic_upper(&setting.input, setting.noise_var, d)?;
                RateLossBounds {
                    lb: Rate::Absent(Window { lo: 0.0, hi: 0.0 }),
                    ub_thm9: a.0,
                    ub_thm10: a.0,
                    ub_prev: a.1,
                    gauss_exact: gaussian_window(setting, d),
                }
            }
            Err(e) => return Err(e),
        });
    };
    let q = averaged_quantities(setting)?;
    let v = setting.input.variance();
    let s = setting.averaged_noise();
    let threshold = setting.ceo_threshold();
    let t = setting.excess(d);
    // (M/2) ln 1/(1−t)
    let ceo_tail = -0.5 * m * (-t).ln_1p();

    let lb = Rate::within(
        d,
        Window {
            lo: threshold,
            hi: q.n_x.value * s / (q.n_y.value - q.n_x.value),
        },
        || {
            propagate([q.n_x, q.n_y], |[n_x, n_y]| {
                -0.5 * m * (n_y / n_x - s / d).ln() - 0.5 * (v / n_x).ln() + 0.5 * (-t).ln_1p()
            })
        },
    );
    let ub_thm9 = Rate::within(
        d,
        Window {
            lo: threshold,
            hi: v,
        },
        || {
            propagate([q.n_x, q.n_y, q.n_e], |[n_x, n_y, n_e]| {
                let scale = if d < n_e { v / n_e } else { v / d };
                0.5 * (scale * (1.0 - s * n_x / (d * n_y))).ln() + ceo_tail
            })
        },
    );
    let ub_thm10 = Rate::within(
        d,
        Window {
            lo: threshold.max(q.mmse.value),
            hi: v,
        },
        || {
            propagate(q.all(), |[_, _, n_e, mmse]| {
                if d < mmse + n_e {
                    0.5 * (v / n_e).ln() + 0.5 * (-mmse / d).ln_1p() + ceo_tail
                } else {
                    0.5 * (v / d).ln() + ceo_tail
                }
            })
        },
    );
    let ub_prev = Rate::within(
        d,
        Window {
            lo: threshold,
            hi: v,
        },
        || {
            let gap = 1.0 / d - 1.0 / v;
            let spread = d + 2.0 * (d * setting.noise_var).sqrt() + s;
            EstimateWithError::analytic(
                -0.5 * (m - 1.0) * (-t).ln_1p() + 0.5 * (gap * spread / (1.0 - t)).ln_1p(),
            )
        },
    );
    Ok(RateLossBounds {
        lb,
        ub_thm9,
        ub_thm10,
        ub_prev,
        gauss_exact: gaussian_window(setting, d),
    })
}

fn gaussian_window(setting: &CeoSetting, d: f64) -> Rate {
    Rate::within(
        d,
        Window {
            lo: setting.ceo_threshold(),
            hi: setting.input.variance(),
        },
        || EstimateWithError::analytic(gaussian_loss(setting, d)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLoss {
    pub lb_inf: Rate,
    pub ub_inf: Rate,
    pub ub_prev_inf: Rate,
}

fn asymptotic_upper(input: &InputDistribution, noise_var: f64, d: f64) -> Result<(Rate, Rate)> {
    let v = input.variance();
    let n = entropy_power_estimate(input.entropy()?);
    let window = Window { lo: 0.0, hi: v };
    let drift = 0.5 * noise_var * (1.0 / d - 1.0 / v);
    let ub = Rate::within(d, window, || {
        propagate([n], |[n]| {
            let head = if d < n { (v / n).ln() } else { (v / d).ln() };
            0.5 * head + drift
        })
    });
    let prev = Rate::within(d, window, || {
        EstimateWithError::analytic(
            drift + 0.5 * ((1.0 / d - 1.0 / v) * (d + 2.0 * (d * noise_var).sqrt())).ln_1p(),
        )
    });
    Ok((ub, prev))
}

/// Rate-loss bounds in the limit of infinitely many agents.
pub fn rate_loss_asymptotic(
    input: &InputDistribution,
    noise_var: f64,
    d: f64,
) -> Result<AsymptoticLoss> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "distortion must be positive, got {d}"
        )));
    }
    let k = kappa(input)?;
    let n = entropy_power_estimate(input.entropy()?);
    let (ub_inf, ub_prev_inf) = asymptotic_upper(input, noise_var, d)?;
    let v = input.variance();
    let lb_inf = Rate::within(
        d,
        Window {
            lo: 0.0,
            hi: n.value / k.value.value,
        },
        || {
            propagate([k.value, n], |[kappa, n]| {
                0.5 * noise_var * (1.0 / d - kappa / n) - 0.5 * (v / n).ln()
            })
        },
    );
    Ok(AsymptoticLoss {
        lb_inf,
        ub_inf,
        ub_prev_inf,
    })
}

/// `κ_X = N(X)·J(X)` with a finite-difference check of its defining limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub value: EstimateWithError,
    /// Richardson extrapolation of `(N(X+√s G) − N(X))/s` from the two steps.
    pub finite_difference: f64,
    pub steps: [f64; 2],
}

/// Steps of the finite-difference check, in units of the input variance.
pub const KAPPA_STEPS: [f64; 2] = [1e-3, 1e-4];

pub fn kappa(input: &InputDistribution) -> Result<Kappa> {
    if !input.has_finite_fisher_information() {
        return Err(Error::Unsupported(format!(
            "{input} has infinite Fisher information, so κ is not N·J"
        )));
    }
    let j = match fisher_information(input) {
        Ok(f) => f.estimate,
        Err(e) => {
            return Err(Error::Unsupported(format!(
                "Fisher information of {input} is not available: {e}"
            )))
        }
    };
    let h = input.entropy()?;
    let n = entropy_power(h.value);
    let value = EstimateWithError::quadrature(
        n * j.value,
        n * j.abs_error + 2.0 * n * j.value * h.abs_error,
    );

    let scale = input.variance();
    let steps = KAPPA_STEPS.map(|s| s * scale);
    let slope = |s: f64| -> Result<f64> {
        let ch = ScalarChannel::new(input.clone(), s)?;
        let n_s = entropy_power(ch.output_entropy()?.value);
        Ok((n_s - n) / s)
    };
    let (d1, d2) = (slope(steps[0])?, slope(steps[1])?);
    let ratio = steps[0] / steps[1];
    let finite_difference = (ratio * d2 - d1) / (ratio - 1.0);
    Ok(Kappa {
        value,
        finite_difference,
        steps,
    })
}

/// `n` log-spaced points strictly inside `(lo, hi)`, inset by `1e-6·(hi − lo)`.
pub fn log_spaced_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::param(format!(
            "need 0 < lo < hi and at least two points, got ({lo}, {hi}) with {n}"
        )));
    }
    let inset = 1e-6 * (hi - lo);
    let (a, b) = ((lo + inset).ln(), (hi - inset).ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Every remote and CEO bound along a distortion grid.
#[derive(Debug, Clone, Serialize)]
pub struct RateCurve {
    pub input: String,
    pub noise_var: f64,
    pub agents: String,
    pub records: Vec<RateRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRecord {
    pub d: f64,
    pub remote_lb1: Rate,
    pub remote_lb2: Rate,
    pub coop_tight: Rate,
    pub coop_weak: Rate,
    pub ceo_ub: Rate,
    pub loss: RateLossBounds,
}

/// Bound columns of the rate CSV, each followed by a `<name>_abs_error` column.
pub const RATE_COLUMNS: [&str; 10] = [
    "remote_lb1",
    "remote_lb2",
    "coop_tight",
    "coop_weak",
    "ceo_ub",
    "loss_lb",
    "loss_ub_thm9",
    "loss_ub_thm10",
    "loss_ub_prev",
    "loss_gauss_exact",
];

/// `D` followed by every entry of [`RATE_COLUMNS`] and its error column.
pub fn rate_csv_header() -> Vec<String> {
    std::iter::once("D".to_string())
        .chain(
            RATE_COLUMNS
                .iter()
                .flat_map(|c| [c.to_string(), format!("{c}_abs_error")]),
        )
        .collect()
}

/// One parsed row of a rate CSV; absent bounds are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub d: f64,
    pub bounds: [Option<EstimateWithError>; 10],
}

impl RateRecord {
    pub fn bounds(&self) -> [Rate; 10] {
        [
            self.remote_lb1,
            self.remote_lb2,
            self.coop_tight,
            self.coop_weak,
            self.ceo_ub,
            self.loss.lb,
            self.loss.ub_thm9,
            self.loss.ub_thm10,
            self.loss.ub_prev,
            self.loss.gauss_exact,
        ]
    }
}

impl RateCurve {
    /// Remote bounds are evaluated on the averaged channel `Y(M)`, i.e. for
    /// the cooperating encoders; with infinitely many agents they reduce to
    /// `½ log⁺ N(X)/D`.
    pub fn compute(setting: &CeoSetting, grid: &[f64]) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::param(
                "distortion grid must be positive and increasing",
            ));
        }
        let n_x = entropy_power_estimate(setting.input.entropy()?);
        let records = grid
            .iter()
            .map(|&d| {
                let (remote_lb1, remote_lb2) = match setting.averaged_channel() {
                    Some(ch) => match remote_lower_bounds(ch, d) {
                        Ok(r) => (Rate::Value(r.lb1), Rate::Value(r.lb2)),
                        Err(Error::Domain(_)) => {
                            let w = Window {
                                lo: ch.mmse()?.value,
                                hi: f64::INFINITY,
                            };
                            (Rate::Absent(w), Rate::Absent(w))
                        }
                        Err(e) => return Err(e),
                    },
                    None => {
                        let r = Rate::Value(propagate([n_x], |[n]| 0.5 * log_plus(n / d)));
                        (r, r)
                    }
                };
                let coop = coop_bounds(setting, d)?;
                let ceo_ub = match ceo_sum_rate_ub(setting, d) {
                    Ok(v) => Rate::Value(EstimateWithError::analytic(v)),
                    Err(Error::Domain(_)) => Rate::Absent(Window {
                        lo: setting.ceo_threshold(),
                        hi: f64::INFINITY,
                    }),
                    Err(e) => return Err(e),
                };
                Ok(RateRecord {
                    d,
                    remote_lb1,
                    remote_lb2,
                    coop_tight: coop.tight,
                    coop_weak: coop.weak,
                    ceo_ub,
                    loss: rate_loss_bounds(setting, d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            input: setting.input.to_string(),
            noise_var: setting.noise_var,
            agents: setting.agents.to_string(),
            records,
        })
    }

    /// CSV with [`rate_csv_header`]; absent bounds leave both of their fields
    /// empty and numbers use the shortest representation that round-trips.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Input(format!("cannot write CSV: {e}"));
        w.write_record(rate_csv_header()).map_err(io)?;
        for r in &self.records {
            let mut row = vec![format_number(r.d)];
            for bound in r.bounds() {
                match bound.estimate() {
                    Some(e) => row.extend([format_number(e.value), format_number(e.abs_error)]),
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Input(format!("cannot write CSV: {e}")))
    }
}

/// Reads a rate CSV back, checking the header.
pub fn read_rate_csv(input: impl Read) -> Result<Vec<RateRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(|e| Error::Parse(format!("cannot read CSV header: {e}")))?;
    let expected = rate_csv_header();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "unexpected CSV header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let number = |field: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("non-numeric CSV field `{field}`")))
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(format!("malformed CSV row: {e}")))?;
            let d = number(&rec[0])?
                .ok_or_else(|| Error::Parse("CSV row without a distortion".into()))?;
            let mut bounds = [None; 10];
            for (i, slot) in bounds.iter_mut().enumerate() {
                let (value, err) = (number(&rec[1 + 2 * i])?, number(&rec[2 + 2 * i])?);
                *slot = match (value, err) {
                    (Some(v), Some(e)) => Some(EstimateWithError::quadrature(v, e)),
                    (None, None) => None,
                    _ => {
                        return Err(Error::Parse(format!(
                            "`{}` and its error column must be both present or both empty",
                            RATE_COLUMNS[i]
                        )))
                    }
                };
            }
            Ok(RateRow { d, bounds })
        })
        .collect()
}
