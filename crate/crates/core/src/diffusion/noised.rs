//! Forward-noised mixture marginals and their exact score.
//!
//! Gaussian convolution preserves mixtures, so the marginal at step `i` is
//! again a mixture with means scaled by `sqrt(alpha_bar_i)` and shared scalar
//! covariance `alpha_bar_i sigma^2 + (1 - alpha_bar_i)`. That closed form
//! stands in for a learned score network in every toy experiment.

use crate::diffusion::schedule::DdpmSchedule;
use crate::gmm::{log_sum_exp, IsotropicGmm};
use crate::grid::{Grid2D, GridDensity};
use crate::point::Point;

/// The mixture marginal of the forward process at one step.
#[derive(Debug, Clone)]
pub struct NoisedGmm {
    pub step: usize,
    pub means: Vec<Point>,
    /// Scalar covariance of every component (isotropic).
    pub cov_scalar: f64,
}

pub fn noised_gmm_at(prior: &IsotropicGmm, sched: &DdpmSchedule, i: usize) -> NoisedGmm {
    let ab = sched.alpha_bar(i);
    let scale = ab.sqrt();
    NoisedGmm {
        step: i,
        means: prior.means().iter().map(|&m| m * scale).collect(),
        cov_scalar: ab * prior.sigma() * prior.sigma() + (1.0 - ab),
    }
}

impl NoisedGmm {
    pub fn log_pdf(&self, x: Point) -> f64 {
        let k = self.means.len() as f64;
        let log_norm = -(2.0 * std::f64::consts::PI * self.cov_scalar).ln();
        let inv_two_var = 1.0 / (2.0 * self.cov_scalar);
        let comps: Vec<f64> = self
            .means
            .iter()
            .map(|&mu| log_norm - (x - mu).norm_sq() * inv_two_var)
            .collect();
        log_sum_exp(&comps) - k.ln()
    }

    pub fn grid_density(&self, grid: Grid2D) -> crate::error::Result<GridDensity> {
        GridDensity::from_log_density(grid, |p| self.log_pdf(p))
    }

    /// Component responsibilities at `x` (softmax over component log pdfs).
    pub fn responsibilities(&self, x: Point) -> Vec<f64> {
        let logs: Vec<f64> = self
            .means
            .iter()
            .map(|&mu| -(x - mu).norm_sq() / (2.0 * self.cov_scalar))
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter().map(|&l| (l - lse).exp()).collect()
    }
}

/// Exact score `grad log p_i(x)` of the noised marginal:
/// `(sum_k w_k(x) scaled_mean_k - x) / cov`.
pub fn oracle_score(prior: &IsotropicGmm, sched: &DdpmSchedule, i: usize, x: Point) -> Point {
    let noised = noised_gmm_at(prior, sched, i);
    oracle_score_of(&noised, x)
}

pub fn oracle_score_of(noised: &NoisedGmm, x: Point) -> Point {
    let w = noised.responsibilities(x);
    let mut mean = Point::ORIGIN;
    for (&wk, &mu) in w.iter().zip(&noised.means) {
        mean += mu * wk;
    }
    (mean - x) * (1.0 / noised.cov_scalar)
}

/// Jacobian of the oracle score, `(Cov_w(c) / cov - I) / cov`, as a 2x2
/// row-major matrix. Used by the exact-gradient guidance variant.
pub fn oracle_score_jacobian(noised: &NoisedGmm, x: Point) -> [[f64; 2]; 2] {
    let w = noised.responsibilities(x);
    let mut mean = Point::ORIGIN;
    for (&wk, &mu) in w.iter().zip(&noised.means) {
        mean += mu * wk;
    }
    let mut cxx = 0.0;
    let mut cxy = 0.0;
    let mut cyy = 0.0;
    for (&wk, &mu) in w.iter().zip(&noised.means) {
        let d = mu - mean;
        cxx += wk * d.x * d.x;
        cxy += wk * d.x * d.y;
        cyy += wk * d.y * d.y;
    }
    let v = noised.cov_scalar;
    [
        [(cxx / v - 1.0) / v, cxy / v / v],
        [cxy / v / v, (cyy / v - 1.0) / v],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::build_linear_schedule;
    use crate::rng::SeedPolicy;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn quad_prior() -> IsotropicGmm {
        IsotropicGmm::symmetric_corners(2.0, 0.8)
    }

    #[test]
    fn step_zero_is_the_prior() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let noised = noised_gmm_at(&prior, &sched, 0);
        for (a, b) in noised.means.iter().zip(prior.means()) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
        assert_abs_diff_eq!(
            noised.cov_scalar,
            prior.sigma() * prior.sigma(),
            epsilon = 1e-15
        );
        let x = Point::new(1.0, -0.3);
        assert_abs_diff_eq!(noised.log_pdf(x), prior.log_pdf(x), epsilon = 1e-12);
    }

    #[test]
    fn terminal_marginal_is_nearly_standard_normal() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let grid = Grid2D::standard();
        let terminal = noised_gmm_at(&prior, &sched, 1000).grid_density(grid).unwrap();
        let std_normal = GridDensity::from_log_density(grid, |p| {
            -p.norm_sq() / 2.0 - (2.0 * std::f64::consts::PI).ln()
        })
        .unwrap();
        let tv = terminal.tv(&std_normal).unwrap();
        assert!(tv < 0.01, "terminal TV {tv}");
    }

    #[test]
    fn unit_sigma_prior_is_variance_fixed_point() {
        let prior = IsotropicGmm::new(vec![Point::new(1.0, 1.0)], 1.0);
        let sched = build_linear_schedule(100, 1e-3, 0.1).unwrap();
        for i in [0, 1, 50, 100] {
            let noised = noised_gmm_at(&prior, &sched, i);
            assert_abs_diff_eq!(noised.cov_scalar, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_mode_score_is_linear_pull() {
        let mu = Point::new(2.0, -1.0);
        let prior = IsotropicGmm::new(vec![mu], 0.8);
        let sched = build_linear_schedule(100, 1e-3, 0.05).unwrap();
        let i = 40;
        let noised = noised_gmm_at(&prior, &sched, i);
        let scaled = mu * sched.alpha_bar(i).sqrt();
        // At the scaled mean the score vanishes.
        let s = oracle_score(&prior, &sched, i, scaled);
        assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.0, epsilon = 1e-12);
        let x = Point::new(0.0, 0.0);
        let s = oracle_score(&prior, &sched, i, x);
        let expect = (scaled - x) * (1.0 / noised.cov_scalar);
        assert_abs_diff_eq!(s.x, expect.x, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, expect.y, epsilon = 1e-12);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let mut rng = SeedPolicy::new(111).experiment(0).root();
        for _ in 0..100 {
            let i = rng.random_range(1..=1000);
            let x = Point::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let w = noised_gmm_at(&prior, &sched, i).responsibilities(x);
            let total: f64 = w.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_score_matches_finite_differences() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let mut rng = SeedPolicy::new(112).experiment(0).root();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for _ in 0..1000 {
            let i = rng.random_range(1..=1000);
            let noised = noised_gmm_at(&prior, &sched, i);
            let x = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let s = oracle_score_of(&noised, x);
            let fd = Point::new(
                (noised.log_pdf(Point::new(x.x + h, x.y))
                    - noised.log_pdf(Point::new(x.x - h, x.y)))
                    / (2.0 * h),
                (noised.log_pdf(Point::new(x.x, x.y + h))
                    - noised.log_pdf(Point::new(x.x, x.y - h)))
                    / (2.0 * h),
            );
            max_rel = max_rel.max((s - fd).norm() / fd.norm().max(1e-6));
        }
        assert!(max_rel < 1e-4, "max rel error {max_rel}");
    }

    #[test]
    fn oracle_score_converges_to_prior_score() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let mut rng = SeedPolicy::new(113).experiment(0).root();
        let mut max_rel = 0.0f64;
        for _ in 0..200 {
            let x = Point::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let s1 = oracle_score(&prior, &sched, 1, x);
            let s0 = prior.grad_log_pdf(x);
            max_rel = max_rel.max((s1 - s0).norm() / s0.norm().max(1e-6));
        }
        assert!(max_rel < 1e-3, "max rel error at i=1: {max_rel}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let prior = quad_prior();
        let sched = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        let noised = noised_gmm_at(&prior, &sched, 300);
        let h = 1e-5;
        let mut rng = SeedPolicy::new(114).experiment(0).root();
        for _ in 0..50 {
            let x = Point::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let jac = oracle_score_jacobian(&noised, x);
            let fx = |p: Point| oracle_score_of(&noised, p);
            let dx = (fx(Point::new(x.x + h, x.y)) - fx(Point::new(x.x - h, x.y))) * (0.5 / h);
            let dy = (fx(Point::new(x.x, x.y + h)) - fx(Point::new(x.x, x.y - h))) * (0.5 / h);
            assert_abs_diff_eq!(jac[0][0], dx.x, epsilon = 1e-5);
            assert_abs_diff_eq!(jac[1][0], dx.y, epsilon = 1e-5);
            assert_abs_diff_eq!(jac[0][1], dy.x, epsilon = 1e-5);
            assert_abs_diff_eq!(jac[1][1], dy.y, epsilon = 1e-5);
        }
    }
}
