use condmean::bounds::bounds_report;
use condmean::distributions::InputDistribution;
use condmean::expofam::{beta_prime_channel, beta_prime_gap};
use condmean::numerics::{central_diff, entropy_power, richardson_diff};
use condmean::rate::{log_spaced_grid, read_rate_csv, Agents, CeoSetting, RateCurve};
use condmean::vector::{matrix, VectorChannel, VectorInput};
use condmean::ScalarChannel;
use proptest::prelude::*;

fn scalar_input() -> impl Strategy<Value = InputDistribution> {
    (0usize..5, 0.3f64..6.0).prop_map(|(kind, var)| match kind {
        0 => InputDistribution::gaussian(0.0, var).unwrap(),
        1 => InputDistribution::uniform(var).unwrap(),
        2 => InputDistribution::exponential(var).unwrap(),
        3 => InputDistribution::laplace(var).unwrap(),
        _ => InputDistribution::triangular(var).unwrap(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bound_chain_holds(input in scalar_input(), noise in 0.2f64..4.0) {
        let ch = ScalarChannel::new(input, noise).unwrap();
        let r = bounds_report(&ch).unwrap();
        prop_assert!(r.check_ordering().is_ok(), "{:?}", r);
        prop_assert!(r.entropy_power_slack() >= -1e-6);
    }

    #[test]
    fn tweedie_and_hatsell_nolte(input in scalar_input(), noise in 0.2f64..4.0, z in -3.0f64..3.0) {
        let ch = ScalarChannel::new(input, noise).unwrap();
        let sy = ch.output_variance().sqrt();
        let y = ch.output_mean() + z * sy;
        let post = ch.posterior_point(y).unwrap();
        let score = richardson_diff(|t| ch.ln_marginal_pdf(t).unwrap(), y, 1e-3 * sy).unwrap();
        prop_assert!((post.cond_mean - y - noise * score).abs() <= 1e-7 * (1.0 + post.cond_mean.abs()));
        let slope = central_diff(|t| ch.cond_mean(t).unwrap(), y, 1e-4 * sy).unwrap();
        prop_assert!((noise * slope - post.cond_var).abs() <= 1e-4 * (1.0 + post.cond_var));
        prop_assert!(post.cond_var > 0.0);
    }

    #[test]
    fn dual_variance_inequalities(input in scalar_input(), noise in 0.2f64..4.0) {
        let var_x = input.variance();
        let ch = ScalarChannel::new(input, noise).unwrap();
        let s = ch.statistics().unwrap();
        prop_assert!((s.mmse.value + s.var_cond_mean_direct.value - var_x).abs() <= 1e-6 * var_x);
        prop_assert!(s.mmse.value <= var_x * noise / (var_x + noise) + 1e-8);
        let n_e = entropy_power(ch.entropy_cond_mean().unwrap().value);
        prop_assert!(n_e <= s.var_cond_mean_direct.value * (1.0 + 1e-6));
    }

    #[test]
    fn input_spec_round_trips(input in scalar_input()) {
        let parsed: InputDistribution = input.to_string().parse().unwrap();
        prop_assert_eq!(parsed.to_string(), input.to_string());
        prop_assert!((parsed.variance() - input.variance()).abs() <= 1e-12 * input.variance());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_grid_is_inside_and_increasing(lo in 1e-3f64..1.0, width in 1e-2f64..10.0, n in 2usize..60) {
        let hi = lo + width;
        let g = log_spaced_grid(lo, hi, n).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g[0] > lo && g[n - 1] < hi);
    }

    #[test]
    fn beta_prime_posterior_closed_forms(gamma in 2.2f64..5.0, d in 0.3f64..6.0, y in 0.2f64..10.0) {
        let ch = beta_prime_channel(gamma + d, gamma).unwrap();
        let p = ch.posterior_direct(y).unwrap();
        prop_assert!((p.mean - (1.0 + d / y)).abs() <= 1e-7 * (1.0 + d / y));
        prop_assert!((p.var - d / (y * y)).abs() <= 1e-7 * d / (y * y));
    }

    #[test]
    fn beta_prime_gap_is_positive_and_decreasing(d in 0.01f64..100.0) {
        let g = beta_prime_gap(d).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!(beta_prime_gap(d * 1.1).unwrap() < g);
    }

    #[test]
    fn gaussian_vector_posterior_matches_conditioning(
        v1 in 0.3f64..3.0, v2 in 0.3f64..3.0, rho in -0.8f64..0.8,
        y1 in -2.0f64..2.0, y2 in -2.0f64..2.0,
    ) {
        let c = rho * (v1 * v2).sqrt();
        let kx = matrix(&[&[v1, c], &[c, v2]]).unwrap();
        let ch = VectorChannel::isotropic(VectorInput::gaussian(kx.clone()).unwrap(), 1.0).unwrap();
        let post = ch.posterior(&[y1, y2]).unwrap();
        let ky = &kx + nalgebra::DMatrix::identity(2, 2);
        let gain = &kx * ky.try_inverse().unwrap();
        let mean = &gain * nalgebra::DVector::from_vec(vec![y1, y2]);
        let cov = &kx - &gain * &kx;
        prop_assert!((&post.cond_mean - mean).norm() < 1e-7);
        prop_assert!((&post.cond_cov - &cov).norm() < 1e-7);
        prop_assert!(post.ln_det_cov().is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rate_csv_round_trips(m in 1u32..12, var in 0.5f64..3.0) {
        let setting = CeoSetting::new(InputDistribution::gaussian(0.0, var).unwrap(), 1.0, Agents::Finite(m)).unwrap();
        let grid = log_spaced_grid(0.05, 2.0 * var, 9).unwrap();
        let curve = RateCurve::compute(&setting, &grid).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let rows = read_rate_csv(buf.as_slice()).unwrap();
        for (row, rec) in rows.iter().zip(&curve.records) {
            prop_assert_eq!(row.d, rec.d);
            for (parsed, bound) in row.bounds.iter().zip(rec.bounds()) {
                prop_assert_eq!(parsed.map(|e| e.value), bound.value());
            }
        }
    }
}
