use std::io::Write;

use condmean::bounds::bounds_report;
use condmean::expofam::{beta_prime_channel, beta_prime_gap};
use condmean::rate::{Agents, CeoSetting, RateCurve, RATE_COLUMNS};
use condmean::vector::{vector_bounds, VectorBounds, VectorChannel, VectorEstimateConfig};
use condmean::{EntropyReport, EstimateWithError, InputDistribution, ScalarChannel};

use crate::error::CliError;
use crate::output::{write_json, Cell, Envelope, Format, Table, Units};

/// Collects warnings; strict mode turns them into an exit status of 4.
pub struct Diagnostics {
    strict: bool,
    warnings: Vec<String>,
}

impl Diagnostics {
    pub fn new(strict: bool) -> Self {
        Self {
            strict,
            warnings: Vec::new(),
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    pub fn finish(self) -> Result<(), CliError> {
        if self.strict && !self.warnings.is_empty() {
            return Err(CliError::Strict(self.warnings));
        }
        Ok(())
    }
}

/// Checks a user grid: nonempty, finite and strictly increasing.
pub fn check_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Config(format!(
            "{name} grid must be finite and strictly increasing, got {grid:?}"
        )));
    }
    Ok(())
}

/// Input distribution of the named family at variance `var`.
pub fn family_at(family: &str, var: f64) -> Result<InputDistribution, CliError> {
    if family.contains(':') {
        return Err(CliError::Config(format!(
            "expected a family name such as `uniform`, got the full spec `{family}`"
        )));
    }
    Ok(format!("{family}:var={var}").parse()?)
}

pub fn report(
    input: &InputDistribution,
    noise_var: f64,
    units: Units,
    format: Format,
    diag: &mut Diagnostics,
    out: impl Write,
) -> Result<(), CliError> {
    let ch = ScalarChannel::new(input.clone(), noise_var)?;
    if let Err(e) = bounds_report(&ch)?.check_ordering() {
        diag.warn(format!("{input}: {e}"));
    }
    let mut r = EntropyReport::compute(&ch)?;
    if r.clipped_cond_var > 0 {
        diag.warn(format!(
            "{} posterior variances were clipped before taking logs",
            r.clipped_cond_var
        ));
    }
    for e in [
        &mut r.h_x,
        &mut r.h_y,
        &mut r.h_cond_mean,
        &mut r.e_log_cond_var,
        &mut r.lower_main,
        &mut r.ub_jensen,
        &mut r.ub_linear,
        &mut r.ub_maxent,
    ] {
        *e = units.log(*e);
    }
    match format {
        Format::Json => write_json(
            &Envelope {
                schema_version: crate::output::SCHEMA_VERSION,
                kind: "entropy-report",
                units,
                payload: &r,
            },
            out,
        ),
        Format::Csv => {
            let mut t = Table::new();
            t.push(vec![
                Cell::Key("noise_var", r.noise_var),
                Cell::Value("h_x", Some(r.h_x)),
                Cell::Value("h_y", Some(r.h_y)),
                Cell::Value("h_cond_mean", Some(r.h_cond_mean)),
                Cell::Value("mmse", Some(r.mmse)),
                Cell::Value("var_cond_mean", Some(r.var_cond_mean)),
                Cell::Value("e_log_cond_var", Some(r.e_log_cond_var)),
                Cell::Value("lower_main", Some(r.lower_main)),
                Cell::Value("ub_jensen", Some(r.ub_jensen)),
                Cell::Value("ub_linear", Some(r.ub_linear)),
                Cell::Value("ub_maxent", Some(r.ub_maxent)),
            ]);
            t.write(out)
        }
    }
}

/// Bounds along a grid of input variances; `with_maxent` adds the loosest bound and the mmse.
pub fn sweep_table(
    family: &str,
    vars: &[f64],
    noise_var: f64,
    units: Units,
    with_extras: bool,
    diag: &mut Diagnostics,
) -> Result<Table, CliError> {
    check_grid("variance", vars)?;
    let mut t = Table::new();
    for &var in vars {
        let input = family_at(family, var)?;
        let ch = ScalarChannel::new(input.clone(), noise_var)?;
        let r = bounds_report(&ch)?;
        if let Err(e) = r.check_ordering() {
            diag.warn(format!("{input}: {e}"));
        }
        let mut cells = vec![
            Cell::Key("sigma_x2", var),
            Cell::Value("truth", Some(units.log(r.truth))),
            Cell::Value("lower_main", Some(units.log(r.lower_main))),
            Cell::Value("ub_jensen", Some(units.log(r.ub_jensen))),
            Cell::Value("ub_linear", Some(units.log(r.ub_linear))),
        ];
        if with_extras {
            cells.push(Cell::Value("ub_maxent", Some(units.log(r.ub_maxent))));
            cells.push(Cell::Value("mmse", Some(r.mmse)));
        }
        t.push(cells);
    }
    Ok(t)
}

pub fn rate_table(curve: &RateCurve, units: Units) -> Table {
    let mut t = Table::new();
    for rec in &curve.records {
        let mut cells = vec![Cell::Key("D", rec.d)];
        cells.extend(
            RATE_COLUMNS
                .iter()
                .zip(rec.bounds())
                .map(|(name, b)| Cell::Value(name, b.estimate().map(|e| units.log(e)))),
        );
        t.push(cells);
    }
    t
}

pub fn rate_curve(
    input: &InputDistribution,
    noise_var: f64,
    agents: Agents,
    grid: &[f64],
) -> Result<RateCurve, CliError> {
    check_grid("distortion", grid)?;
    let setting = CeoSetting::new(input.clone(), noise_var, agents)?;
    Ok(RateCurve::compute(&setting, grid)?)
}

/// Gap of the exponential-family bound for the Beta-prime prior, with its
/// asymptotes `2/d` and `2/(3d)`, and optionally a numeric check at shape `gamma`.
pub fn expofam_table(
    ds: &[f64],
    numeric_gamma: Option<f64>,
    units: Units,
    diag: &mut Diagnostics,
) -> Result<Table, CliError> {
    check_grid("d", ds)?;
    let mut t = Table::new();
    for &d in ds {
        let exact = |v: f64| Some(units.log(EstimateWithError::analytic(v)));
        let mut cells = vec![
            Cell::Key("d", d),
            Cell::Value("gap", exact(beta_prime_gap(d)?)),
            Cell::Value("asymptote_small_d", exact(2.0 / d)),
            Cell::Value("asymptote_large_d", exact(2.0 / (3.0 * d))),
        ];
        if let Some(gamma) = numeric_gamma {
            let numeric =
                beta_prime_channel(gamma + d, gamma).and_then(|ch| ch.lower_bound_report());
            let gap = match numeric {
                Ok(r) => Some(units.log(EstimateWithError::new(
                    r.gap,
                    r.truth.abs_error.hypot(r.bound.abs_error),
                    r.truth.method,
                ))),
                Err(e @ condmean::Error::Convergence { .. }) => {
                    diag.warn(format!("numeric gap at d = {d}: {e}"));
                    None
                }
                Err(e) => return Err(e.into()),
            };
            cells.push(Cell::Value("gap_numeric", gap));
        }
        t.push(cells);
    }
    Ok(t)
}

pub fn vector(
    spec: &str,
    cfg: &VectorEstimateConfig,
    units: Units,
    diag: &mut Diagnostics,
    out: impl Write,
) -> Result<(), CliError> {
    let ch: VectorChannel = spec.parse()?;
    let mut b: VectorBounds = vector_bounds(&ch, cfg)?;
    if let Err(e) = b.check_ordering() {
        diag.warn(format!("{spec}: {e}"));
    }
    if b.entropy.clipped > 0 {
        diag.warn(format!(
            "{} sampled observations were pulled back into the expectation region",
            b.entropy.clipped
        ));
    }
    for e in [
        &mut b.truth,
        &mut b.h_x,
        &mut b.h_y,
        &mut b.lower_main,
        &mut b.ub_jensen,
        &mut b.ub_maxent,
        &mut b.entropy.h_y,
        &mut b.entropy.e_log_det,
        &mut b.entropy.truth,
        &mut b.entropy.ln_det_mmse,
    ] {
        *e = units.log(*e);
    }
    #[derive(serde::Serialize)]
    struct Record<'a> {
        config: &'a VectorEstimateConfig,
        #[serde(flatten)]
        bounds: &'a VectorBounds,
    }
    write_json(
        &Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            kind: "vector-bounds",
            units,
            payload: Record {
                config: cfg,
                bounds: &b,
            },
        },
        out,
    )
}
