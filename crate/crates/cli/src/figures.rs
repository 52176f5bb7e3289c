use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use condmean::awgn::{GRID_SDS, TAIL_SDS};
use condmean::bounds::costa_comparison;
use condmean::numerics::{COMBINED_FACTOR, COMBINED_FLOOR};
use condmean::rate::{log_spaced_grid, Agents, RateLossBounds};
use condmean::EstimateWithError;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{expofam_table, family_at, rate_curve, sweep_table, Diagnostics};
use crate::error::CliError;
use crate::output::{create, write_json, Cell, Table, Units, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl FigureId {
    fn name(self) -> &'static str {
        match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
        }
    }
}

/// Default input-variance grid for the bound and Costa figures (`gm2` needs σ_X² > 1).
pub const VARIANCE_GRID: [f64; 7] = [1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];
pub const FIG3_FAMILIES: [&str; 3] = ["gm2", "exponential", "uniform"];
pub const RATE_FAMILIES: [&str; 3] = ["laplace", "exponential", "uniform"];
pub const COSTA_ALPHAS: [f64; 2] = [0.4, 2.0 / 3.0];
pub const FIG5_AGENTS: [u32; 3] = [2, 5, 10];
pub const FIG6_AGENTS: [u32; 2] = [2, 10];

#[derive(Serialize)]
struct Tolerances {
    combined_error_factor: f64,
    combined_error_floor: f64,
    expectation_grid_sds: f64,
    far_tail_sds: f64,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    inputs: Vec<String>,
    parameters: BTreeMap<String, Value>,
    columns: Vec<String>,
    rows: usize,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    kind: &'static str,
    figure: &'static str,
    tool: &'static str,
    tool_version: &'static str,
    units: Units,
    seed: u64,
    noise_var: f64,
    grids: BTreeMap<String, Vec<f64>>,
    tolerances: Tolerances,
    files: Vec<FileEntry>,
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Emitter<'_> {
    fn emit(
        &mut self,
        name: String,
        table: &Table,
        inputs: Vec<String>,
        parameters: BTreeMap<String, Value>,
        rows: usize,
    ) -> Result<(), CliError> {
        let (_, file) = create(self.dir, &name)?;
        table.write(file)?;
        self.files.push(FileEntry {
            path: name,
            inputs,
            parameters,
            columns: table.header().to_vec(),
            rows,
        });
        Ok(())
    }
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// Distortion grid of the rate-loss figures at σ_X² = 1.
pub fn distortion_grid() -> Result<Vec<f64>, CliError> {
    Ok(log_spaced_grid(0.02, 1.0, 60)?)
}

/// `d` grid of the Beta-prime gap figure: 41 points, log-spaced over [0.01, 100].
pub fn d_grid() -> Vec<f64> {
    (0..=40)
        .map(|i| 10f64.powf(-2.0 + f64::from(i) / 10.0))
        .collect()
}

/// Writes the figure's CSV files and `<figure>_manifest.json` into `dir`.
pub fn emit(
    id: FigureId,
    dir: &Path,
    units: Units,
    seed: u64,
    diag: &mut Diagnostics,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let noise_var = 1.0;
    let mut out = Emitter {
        dir,
        files: Vec::new(),
    };
    let mut grids = BTreeMap::new();
    match id {
        FigureId::Fig3 => {
            grids.insert("sigma_x2".into(), VARIANCE_GRID.to_vec());
            for family in FIG3_FAMILIES {
                let t = sweep_table(family, &VARIANCE_GRID, noise_var, units, false, diag)?;
                let inputs = VARIANCE_GRID
                    .iter()
                    .map(|&v| family_at(family, v).map(|d| d.to_string()))
                    .collect::<Result<_, _>>()?;
                out.emit(
                    format!("fig3_{family}.csv"),
                    &t,
                    inputs,
                    params(&[("family", json!(family))]),
                    VARIANCE_GRID.len(),
                )?;
            }
        }
        FigureId::Fig4 => {
            grids.insert("sigma_x2".into(), VARIANCE_GRID.to_vec());
            grids.insert("alpha".into(), COSTA_ALPHAS.to_vec());
            let mut t = Table::new();
            let mut inputs = Vec::new();
            for &var in &VARIANCE_GRID {
                let input = family_at("uniform", var)?;
                for alpha in COSTA_ALPHAS {
                    let c = costa_comparison(&input, noise_var, alpha)?;
                    if c.gap_main < -c.rel_tol * c.n_y_alpha
                        || c.gap_costa < -c.rel_tol * c.n_y_alpha
                    {
                        diag.warn(format!("{input}, α = {alpha}: negative gap {c:?}"));
                    }
                    let q = EstimateWithError::quadrature;
                    t.push(vec![
                        Cell::Key("sigma_x2", var),
                        Cell::Key("alpha", alpha),
                        Cell::Value("n_y_alpha", Some(q(c.n_y_alpha, c.n_y_alpha_abs_error))),
                        Cell::Value("gap_main", Some(q(c.gap_main, c.gap_main_abs_error))),
                        Cell::Value("gap_costa", Some(q(c.gap_costa, c.gap_costa_abs_error))),
                    ]);
                }
                inputs.push(input.to_string());
            }
            let rows = VARIANCE_GRID.len() * COSTA_ALPHAS.len();
            out.emit(
                "fig4.csv".into(),
                &t,
                inputs,
                params(&[("family", json!("uniform"))]),
                rows,
            )?;
        }
        FigureId::Fig5 => {
            let grid = distortion_grid()?;
            grids.insert("D".into(), grid.clone());
            for family in RATE_FAMILIES {
                let input = family_at(family, 1.0)?;
                let mut t = Table::new();
                for m in FIG5_AGENTS {
                    let curve = rate_curve(&input, noise_var, Agents::Finite(m), &grid)?;
                    for rec in &curve.records {
                        let RateLossBounds {
                            ub_thm10, ub_prev, ..
                        } = rec.loss;
                        t.push(vec![
                            Cell::Key("D", rec.d),
                            Cell::Key("M", f64::from(m)),
                            Cell::Value("loss_ub_thm10", ub_thm10.estimate().map(|e| units.log(e))),
                            Cell::Value("loss_ub_prev", ub_prev.estimate().map(|e| units.log(e))),
                        ]);
                    }
                }
                out.emit(
                    format!("fig5_{family}.csv"),
                    &t,
                    vec![input.to_string()],
                    params(&[("M", json!(FIG5_AGENTS))]),
                    grid.len() * FIG5_AGENTS.len(),
                )?;
            }
        }
        FigureId::Fig6 => {
            let grid = distortion_grid()?;
            grids.insert("D".into(), grid.clone());
            for family in RATE_FAMILIES {
                let input = family_at(family, 1.0)?;
                for m in FIG6_AGENTS {
                    let curve = rate_curve(&input, noise_var, Agents::Finite(m), &grid)?;
                    let t = crate::commands::rate_table(&curve, units);
                    out.emit(
                        format!("fig6_{family}_M{m}.csv"),
                        &t,
                        vec![input.to_string()],
                        params(&[("M", json!(m))]),
                        grid.len(),
                    )?;
                }
            }
        }
        FigureId::Fig7 => {
            let ds = d_grid();
            grids.insert("d".into(), ds.clone());
            let t = expofam_table(&ds, None, units, diag)?;
            out.emit(
                "fig7.csv".into(),
                &t,
                vec!["betaprime (gap depends on d = alpha - gamma only)".into()],
                BTreeMap::new(),
                ds.len(),
            )?;
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        kind: "figure-manifest",
        figure: id.name(),
        tool: "cmean",
        tool_version: env!("CARGO_PKG_VERSION"),
        units,
        seed,
        noise_var,
        grids,
        tolerances: Tolerances {
            combined_error_factor: COMBINED_FACTOR,
            combined_error_floor: COMBINED_FLOOR,
            expectation_grid_sds: GRID_SDS,
            far_tail_sds: TAIL_SDS,
        },
        files: out.files,
    };
    let (_, file) = create(dir, &format!("{}_manifest.json", id.name()))?;
    write_json(&manifest, file)
}
