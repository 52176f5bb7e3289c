use std::f64::consts::{E, PI};
use std::io::Write;

use condmean::bounds::{bounds_report, costa_comparison};
use condmean::distributions::catalog;
use condmean::expofam::{beta_prime_channel, beta_prime_gap};
use condmean::numerics::{
    central_diff, combined_tolerance, entropy_power, richardson_diff, HALF_LN_2PI_E,
};
use condmean::rate::{
    kappa, log_spaced_grid, rate_loss_bounds, remote_lower_bounds, Agents, CeoSetting,
};
use condmean::vector::{
    entropy_cond_mean_vec, matrix, VectorChannel, VectorEstimateConfig, VectorInput,
};
use condmean::{InputDistribution, Result, ScalarChannel};

use crate::commands::Diagnostics;
use crate::error::CliError;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn channel(input: InputDistribution, noise: f64) -> Result<ScalarChannel> {
    ScalarChannel::new(input, noise)
}

fn gaussian_closed_form() -> Result<Check> {
    let ch = channel(InputDistribution::gaussian(0.0, 1.0)?, 1.0)?;
    let truth = ch.entropy_cond_mean()?.value;
    let closed = HALF_LN_2PI_E + 0.5 * 0.5f64.ln();
    let err = (truth - closed).abs();
    Ok(check(
        "gaussian-closed-form",
        err <= 1e-6,
        format!("|h − closed form| = {err:.2e}"),
    ))
}

fn bound_ordering() -> Result<Check> {
    let mut bad = Vec::new();
    for input in catalog(2.0)? {
        if let Err(e) = bounds_report(&channel(input.clone(), 1.0)?)?.check_ordering() {
            bad.push(format!("{input}: {e}"));
        }
    }
    Ok(check(
        "bound-ordering",
        bad.is_empty(),
        format!("{} violations {bad:?}", bad.len()),
    ))
}

fn identities() -> Result<[Check; 3]> {
    let (mut tweedie, mut hn, mut ltv): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for input in catalog(2.0)? {
        let var_x = input.variance();
        let ch = channel(input, 1.0)?;
        let sy = ch.output_variance().sqrt();
        for i in 0..9 {
            let y = ch.output_mean() + sy * (f64::from(i) - 4.0);
            let post = ch.posterior_point(y)?;
            let score =
                richardson_diff(|t| ch.ln_marginal_pdf(t).unwrap_or(f64::NAN), y, 1e-3 * sy)?;
            tweedie =
                tweedie.max((post.cond_mean - y - score).abs() / (1.0 + post.cond_mean.abs()));
            let slope = central_diff(|t| ch.cond_mean(t).unwrap_or(f64::NAN), y, 1e-4 * sy)?;
            hn = hn.max((slope - post.cond_var).abs() / (1.0 + post.cond_var));
        }
        let s = ch.statistics()?;
        ltv = ltv.max((s.mmse.value + s.var_cond_mean_direct.value - var_x).abs());
    }
    Ok([
        check(
            "tweedie",
            tweedie <= 1e-8,
            format!("max relative error {tweedie:.2e}"),
        ),
        check(
            "hatsell-nolte",
            hn <= 1e-4,
            format!("max relative error {hn:.2e}"),
        ),
        check(
            "total-variance",
            ltv <= 1e-5,
            format!("max error {ltv:.2e}"),
        ),
    ])
}

fn dual_epi() -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for input in catalog(2.0)? {
        let ch = channel(input, 1.0)?;
        let s = ch.statistics()?;
        let n_e = entropy_power(ch.entropy_cond_mean()?.value);
        let n_c = entropy_power(ch.conditional_entropy()?.value);
        worst = worst
            .max(n_e - s.var_cond_mean_direct.value)
            .max(n_c - s.mmse.value);
    }
    Ok(check(
        "dual-epi",
        worst <= 1e-6,
        format!("largest excess {worst:.2e}"),
    ))
}

fn sampled_oracle(seed: u64) -> Result<Check> {
    let ch = channel(InputDistribution::uniform(2.0)?, 1.0)?;
    let quad = ch.entropy_cond_mean()?.value;
    let sampled = ch.entropy_cond_mean_sampled(100_000, seed)?.value;
    let d = (quad - sampled).abs();
    Ok(check(
        "sampled-oracle",
        d <= 0.05,
        format!("|quadrature − sampled| = {d:.4}"),
    ))
}

fn remote_dominance() -> Result<Check> {
    let ch = channel(InputDistribution::laplace(2.0)?, 1.0)?;
    let lo = ch.mmse()?.value;
    let mut worst = f64::INFINITY;
    for d in log_spaced_grid(lo, 2.0, 10)? {
        match remote_lower_bounds(&ch, d) {
            Ok(r) => worst = worst.min(r.lb1.value - r.lb2.value + r.tolerance),
            Err(condmean::Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(check(
        "remote-dominance",
        worst >= 0.0,
        format!("min lb1 − lb2 + tol = {worst:.3e}"),
    ))
}

fn rate_loss_spot() -> Result<Check> {
    let s = CeoSetting::new(
        InputDistribution::gaussian(0.0, 1.0)?,
        1.0,
        Agents::Finite(2),
    )?;
    let v = rate_loss_bounds(&s, 0.75)?
        .ub_thm10
        .value()
        .unwrap_or(f64::NAN);
    Ok(check(
        "rate-loss-gaussian",
        (v - 0.09116).abs() <= 1e-5,
        format!("M = 2, D = 0.75: {v:.6}"),
    ))
}

fn kappa_gaussian() -> Result<Check> {
    let k = kappa(&InputDistribution::gaussian(0.0, 1.0)?)?.value.value;
    Ok(check(
        "kappa-gaussian",
        (k - 1.0).abs() <= 1e-6,
        format!("κ = {k:.9}"),
    ))
}

fn costa_endpoint() -> Result<Check> {
    let c = costa_comparison(&InputDistribution::uniform(2.0)?, 1.0, 1.0)?;
    Ok(check(
        "costa-endpoint",
        c.gap_costa.abs() <= 1e-9,
        format!("α = 1 Costa gap {:.2e}", c.gap_costa),
    ))
}

fn beta_prime() -> Result<[Check; 2]> {
    let gap1 = beta_prime_gap(1.0)?;
    let e1 = (gap1 - ((2.0 * PI * E).ln() - 2.0)).abs();
    let ch = beta_prime_channel(6.0, 3.0)?;
    let mut worst: f64 = 0.0;
    for y in [0.5, 2.0, 8.0] {
        let p = ch.posterior_direct(y)?;
        worst = worst
            .max((p.mean - 1.0 - 3.0 / y).abs())
            .max((p.var - 3.0 / (y * y)).abs());
    }
    Ok([
        check("betaprime-gap", e1 <= 1e-12, format!("gap(1) = {gap1:.9}")),
        check(
            "betaprime-posterior",
            worst <= 1e-6,
            format!("max error {worst:.2e}"),
        ),
    ])
}

fn vector_checks(seed: u64) -> Result<[Check; 2]> {
    let kw = matrix(&[&[1.0, 0.3], &[0.3, 0.8]])?;
    let a = matrix(&[&[1.0, 0.5], &[-0.3, 1.2]])?;
    let ch = VectorChannel::new("prod(uniform:var=1;laplace:var=1)".parse()?, a, kw)?;
    let mut jac: f64 = 0.0;
    for y in [[-1.0, 0.5], [0.0, 0.0], [1.5, -1.0]] {
        let post = ch.posterior(&y)?;
        let fd = ch.cond_mean_jacobian_fd(&y, 1e-4)?;
        let stated = ch.hatsell_nolte_jacobian(&post);
        jac = jac.max((fd - &stated).norm() / stated.norm());
    }
    let id = matrix(&[&[1.0, 0.0], &[0.0, 1.0]])?;
    let gauss = VectorChannel::isotropic(VectorInput::gaussian(id)?, 1.0)?;
    let cfg = VectorEstimateConfig {
        entropy_samples: 20_000,
        expectation_samples: 500,
        k: 4,
        seed,
    };
    let t = entropy_cond_mean_vec(&gauss, &cfg)?.truth;
    let exact = (PI * E).ln();
    let tol = combined_tolerance(&[t.abs_error]);
    Ok([
        check(
            "vector-jacobian",
            jac <= 1e-3,
            format!("max relative error {jac:.2e}"),
        ),
        check(
            "vector-gaussian",
            (t.value - exact).abs() <= tol,
            format!("{:.4} vs ln(πe) = {exact:.4} (tol {tol:.4})", t.value),
        ),
    ])
}

/// Runs the invariant suite and prints `PASS`/`FAIL name: detail` per property.
pub fn run(seed: u64, diag: &mut Diagnostics, mut out: impl Write) -> Result<(), CliError> {
    let mut checks = vec![gaussian_closed_form()?, bound_ordering()?];
    checks.extend(identities()?);
    checks.push(dual_epi()?);
    checks.push(sampled_oracle(seed)?);
    checks.push(remote_dominance()?);
    checks.push(rate_loss_spot()?);
    checks.push(kappa_gaussian()?);
    checks.push(costa_endpoint()?);
    checks.extend(beta_prime()?);
    checks.extend(vector_checks(seed)?);
    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        writeln!(
            out,
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    writeln!(
        out,
        "{} checks, {failed} failed (seed {seed})",
        checks.len()
    )?;
    out.flush()?;
    for c in checks.iter().filter(|c| !c.pass) {
        diag.warn(format!("selftest {} failed: {}", c.name, c.detail));
    }
    Ok(())
}
