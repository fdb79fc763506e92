//! Isotropic Gaussian-mixture prior.
//!
//! Uniform weights, shared isotropic variance. All density work is done in
//! log space with log-sum-exp; values are only exponentiated when a grid is
//! normalized downstream.

use crate::point::Point;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Mixture prior `p(x) = (1/K) sum_k N(x; mu_k, sigma^2 I)`.
#[derive(Debug, Clone)]
pub struct IsotropicGmm {
    means: Vec<Point>,
    sigma: f64,
}

/// Stable log-sum-exp over a slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

impl IsotropicGmm {
    pub fn new(means: Vec<Point>, sigma: f64) -> Self {
        assert!(!means.is_empty(), "mixture needs at least one component");
        assert!(sigma > 0.0, "sigma must be positive");
        IsotropicGmm { means, sigma }
    }

    /// Four symmetric modes at (±a, ±a).
    pub fn symmetric_corners(a: f64, sigma: f64) -> Self {
        let means = vec![
            Point::new(a, a),
            Point::new(a, -a),
            Point::new(-a, a),
            Point::new(-a, -a),
        ];
        IsotropicGmm::new(means, sigma)
    }

    pub fn means(&self) -> &[Point] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    /// Mixture mean (uniform weights).
    pub fn mean(&self) -> Point {
        let k = self.means.len() as f64;
        self.means
            .iter()
            .fold(Point::ORIGIN, |acc, &m| acc + m * (1.0 / k))
    }

    /// `log p(x)` via log-sum-exp over components.
    pub fn log_pdf(&self, x: Point) -> f64 {
        let k = self.means.len() as f64;
        let log_norm = -(2.0 * std::f64::consts::PI * self.sigma * self.sigma).ln();
        let inv_two_var = 1.0 / (2.0 * self.sigma * self.sigma);
        let comps: Vec<f64> = self
            .means
            .iter()
            .map(|&mu| log_norm - (x - mu).norm_sq() * inv_two_var)
            .collect();
        log_sum_exp(&comps) - k.ln()
    }

    /// Gradient of `log p` at `x`: responsibility-weighted pull toward the means.
    pub fn grad_log_pdf(&self, x: Point) -> Point {
        let log_weights: Vec<f64> = self
            .means
            .iter()
            .map(|&mu| -(x - mu).norm_sq() / (2.0 * self.sigma * self.sigma))
            .collect();
        let lse = log_sum_exp(&log_weights);
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let mut grad = Point::ORIGIN;
        for (&mu, &lw) in self.means.iter().zip(&log_weights) {
            let w = (lw - lse).exp();
            grad += (mu - x) * (w * inv_var);
        }
        grad
    }

    /// One draw: uniform mode choice, then an isotropic Gaussian around it.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let idx = rng.random_range(0..self.means.len());
        let mu = self.means[idx];
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        Point::new(mu.x + self.sigma * zx, mu.y + self.sigma * zy)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Point> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedPolicy;
    use approx::assert_abs_diff_eq;

    /// Naive direct-summation density, deliberately avoiding the log-sum-exp
    /// path of the implementation.
    fn direct_log_pdf(gmm: &IsotropicGmm, x: Point) -> f64 {
        let var = gmm.sigma() * gmm.sigma();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var);
        let sum: f64 = gmm
            .means()
            .iter()
            .map(|&mu| norm * (-(x - mu).norm_sq() / (2.0 * var)).exp())
            .sum();
        (sum / gmm.n_components() as f64).ln()
    }

    fn quad_prior() -> IsotropicGmm {
        IsotropicGmm::symmetric_corners(2.0, 0.8)
    }

    #[test]
    fn standard_normal_peak() {
        let gmm = IsotropicGmm::new(vec![Point::ORIGIN], 1.0);
        let expected = (1.0 / (2.0 * std::f64::consts::PI)).ln();
        assert_abs_diff_eq!(gmm.log_pdf(Point::ORIGIN), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(gmm.log_pdf(Point::ORIGIN), -1.837877, epsilon = 1e-6);
    }

    #[test]
    fn matches_direct_summation() {
        let gmm = quad_prior();
        for &x in &[
            Point::new(2.0, 2.0),
            Point::new(0.3, -1.1),
            Point::new(-4.0, 4.0),
        ] {
            assert_abs_diff_eq!(gmm.log_pdf(x), direct_log_pdf(&gmm, x), epsilon = 1e-12);
        }
    }

    #[test]
    fn sign_flip_symmetry() {
        let gmm = quad_prior();
        let x = Point::new(2.0, 2.0);
        assert_eq!(gmm.log_pdf(x), gmm.log_pdf(-x));
        let y = Point::new(1.3, -0.4);
        assert_abs_diff_eq!(
            gmm.log_pdf(y),
            gmm.log_pdf(Point::new(-1.3, -0.4)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn grad_matches_central_differences() {
        let gmm = quad_prior();
        let h = 1e-6;
        for &x in &[Point::new(1.0, 0.5), Point::new(-2.5, 2.0)] {
            let g = gmm.grad_log_pdf(x);
            let fx = (gmm.log_pdf(Point::new(x.x + h, x.y))
                - gmm.log_pdf(Point::new(x.x - h, x.y)))
                / (2.0 * h);
            let fy = (gmm.log_pdf(Point::new(x.x, x.y + h))
                - gmm.log_pdf(Point::new(x.x, x.y - h)))
                / (2.0 * h);
            assert_abs_diff_eq!(g.x, fx, epsilon = 1e-5);
            assert_abs_diff_eq!(g.y, fy, epsilon = 1e-5);
        }
    }

    #[test]
    fn sample_means_converge() {
        let mut rng = SeedPolicy::new(11).experiment(0).root();
        let std_normal = IsotropicGmm::new(vec![Point::ORIGIN], 1.0);
        let n = 1_000_000;
        let draws = std_normal.sample(n, &mut rng);
        let mean = draws
            .iter()
            .fold(Point::ORIGIN, |acc, &p| acc + p * (1.0 / n as f64));
        assert!(mean.x.abs() < 0.005 && mean.y.abs() < 0.005, "{mean:?}");

        let gmm = quad_prior();
        let draws = gmm.sample(n, &mut rng);
        let mean = draws
            .iter()
            .fold(Point::ORIGIN, |acc, &p| acc + p * (1.0 / n as f64));
        assert!(mean.x.abs() < 0.02 && mean.y.abs() < 0.02, "{mean:?}");
    }

    #[test]
    fn component_frequencies_within_binomial_bounds() {
        let gmm = quad_prior();
        let mut rng = SeedPolicy::new(5).experiment(0).root();
        let n = 400_000usize;
        let draws = gmm.sample(n, &mut rng);
        // Nearest-mean assignment is essentially exact at sigma=0.8 vs. mode gap 4.
        let mut counts = [0usize; 4];
        for p in draws {
            let (idx, _) = gmm
                .means()
                .iter()
                .enumerate()
                .map(|(i, &m)| (i, (p - m).norm_sq()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            counts[idx] += 1;
        }
        let expect = n as f64 / 4.0;
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 4.0 * sd, "{counts:?}");
        }
    }
}
