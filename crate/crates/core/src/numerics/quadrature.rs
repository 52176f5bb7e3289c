use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    GaussHermite,
    GaussLegendre,
    AdaptiveInterval,
}

/// Fixed nodes and positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`; only meaningful for Gauss–Hermite rules.
    pub fn expect_standard_normal(&self, f: impl Fn(f64) -> f64) -> f64 {
        debug_assert_eq!(self.kind, QuadratureKind::GaussHermite);
        self.apply(|x| f(std::f64::consts::SQRT_2 * x)) / PI.sqrt()
    }

    /// Legendre rule mapped from `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }
}

/// Physicists' Gauss–Hermite rule for the weight `e^{-x²}`.
///
/// Nodes whose weights underflow in double precision (orders above ~370)
/// are dropped, so every returned weight is strictly positive.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if !(1..=512).contains(&order) {
        return Err(Error::param(format!(
            "Gauss-Hermite order must lie in 1..=512, got {order}"
        )));
    }
    let n = order;
    let pim4 = PI.powf(-0.25);
    // Eigenvalues of the Jacobi matrix locate the roots; Newton on the
    // three-term recurrence then polishes them and yields accurate weights.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut roots: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    roots.sort_by(f64::total_cmp);
    let mut weights = vec![0.0; n];
    for (z, w) in roots.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..8 {
            let (p, pp) = orthonormal_hermite(n, *z, pim4);
            if pp == 0.0 || !pp.is_finite() {
                break;
            }
            let step = p / pp;
            *z -= step;
            if step.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, pp) = orthonormal_hermite(n, *z, pim4);
        *w = 2.0 / (pp * pp);
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let z = 0.5 * (roots[n - 1 - i] - roots[i]);
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        roots[i] = -z;
        roots[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
    }
    let (mut nodes, mut kept_weights) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (x, w) in roots.into_iter().zip(weights) {
        if w > 0.0 && w.is_finite() {
            nodes.push(x);
            kept_weights.push(w);
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights: kept_weights,
        kind: QuadratureKind::GaussHermite,
    })
}

/// Value of the degree-`n` orthonormal Hermite polynomial and its derivative.
fn orthonormal_hermite(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > 1024 {
        return Err(Error::param(format!(
            "Gauss-Legendre order must lie in 1..=1024, got {order}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, d) = legendre(n, z);
            pp = d;
            let step = p1 / pp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            pp = d;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::GaussLegendre,
    })
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, n as f64 * (z * p1 - p2) / (z * z - 1.0))
}

/// The 16-point Legendre rule used for all composite panels.
pub(crate) fn gl16() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16).expect("order 16 is valid"))
}

/// Composite Gauss–Legendre nodes over a union of panels.
#[derive(Debug, Clone, Default)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    /// Panels cover `[lo, hi]`, break at every interior point of `breaks`,
    /// and are no wider than `max_width`.
    pub fn new(lo: f64, hi: f64, breaks: &[f64], max_width: f64) -> Self {
        let mut out = PanelRule::default();
        out.rebuild(lo, hi, breaks, max_width);
        out
    }

    /// Same as [`PanelRule::new`], reusing the existing allocations.
    pub fn rebuild(&mut self, lo: f64, hi: f64, breaks: &[f64], max_width: f64) {
        debug_assert!(lo.is_finite() && hi.is_finite() && max_width > 0.0);
        self.nodes.clear();
        self.weights.clear();
        let mut cuts = vec![lo];
        cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let rule = gl16();
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let pieces = ((b - a) / max_width).ceil().max(1.0) as usize;
            let step = (b - a) / pieces as f64;
            for p in 0..pieces {
                let left = a + step * p as f64;
                let right = if p + 1 == pieces { b } else { left + step };
                for (x, w) in rule.mapped(left, right) {
                    self.nodes.push(x);
                    self.weights.push(w);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(m: u32) -> f64 {
        (1..=m).step_by(2).map(f64::from).product()
    }

    #[test]
    fn two_point_rule() {
        let r = gauss_hermite(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.nodes[0] + s).abs() < 1e-14 && (r.nodes[1] - s).abs() < 1e-14);
        for w in &r.weights {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_point_rule() {
        let r = gauss_hermite(1).unwrap();
        assert_eq!(r.nodes.len(), 1);
        assert!(r.nodes[0].abs() < 1e-15);
        assert!((r.weights[0] - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn order_range_is_enforced() {
        assert!(matches!(gauss_hermite(0), Err(Error::Parameter(_))));
        assert!(matches!(gauss_hermite(513), Err(Error::Parameter(_))));
    }

    #[test]
    fn second_moment_at_order_64() {
        let r = gauss_hermite(64).unwrap();
        let m2 = r.apply(|x| x * x);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_root_pi() {
        for n in [3, 10, 31, 96, 200, 370, 512] {
            let r = gauss_hermite(n).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "order {n}: {total}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn exact_for_monomials_up_to_degree_2n_minus_1() {
        for n in [4usize, 12, 40] {
            let r = gauss_hermite(n).unwrap();
            for j in 0..(2 * n as u32) {
                let got = r.apply(|x| x.powi(j as i32));
                let want = if j % 2 == 1 {
                    0.0
                } else {
                    double_factorial_odd(j.saturating_sub(1)) / 2f64.powi(j as i32 / 2) * PI.sqrt()
                };
                // Magnitude of the integrand, ∫|x|^j e^{-x²} = Γ((j+1)/2).
                let scale = statrs::function::gamma::gamma((j as f64 + 1.0) / 2.0);
                assert!(
                    (got - want).abs() <= 1e-10 * scale,
                    "n={n} j={j}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn standard_normal_reweighting() {
        let r = gauss_hermite(96).unwrap();
        assert!((r.expect_standard_normal(|_| 1.0) - 1.0).abs() < 1e-10);
        assert!((r.expect_standard_normal(|z| z * z) - 1.0).abs() < 1e-10);
        assert!((r.expect_standard_normal(|z| z.powi(4)) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let r = gauss_legendre(16).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!((r.apply(|x| x.powi(30)) - 2.0 / 31.0).abs() < 1e-14);
        let (a, b) = (1.0, 3.0);
        let s: f64 = r.mapped(a, b).map(|(x, w)| w * x * x).sum();
        assert!((s - 26.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn panels_honour_breaks_and_width() {
        let p = PanelRule::new(-1.0, 2.0, &[0.0, 5.0], 0.4);
        let total: f64 = p.weights.iter().sum();
        assert!((total - 3.0).abs() < 1e-13);
        // |x| has a kink at the break and is integrated exactly.
        assert!((p.apply(f64::abs) - 2.5).abs() < 1e-13);
        assert_eq!(p.len() % 16, 0);
    }
}
