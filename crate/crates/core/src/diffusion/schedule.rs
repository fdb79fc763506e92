//! Forward/reverse DDPM coefficients.

use crate::error::{Error, Result};

/// Noise schedule `{beta_i, alpha_i, alpha_bar_i, sigma_tilde_i}` for steps
/// `i = 1..=N`, with `alpha_bar_0 = 1`. Arrays are indexed by step, slot 0
/// holding the identity values.
#[derive(Debug, Clone)]
pub struct DdpmSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma_tilde: Vec<f64>,
}

impl DdpmSchedule {
    pub fn n_steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha[i]
    }

    pub fn alpha_bar(&self, i: usize) -> f64 {
        self.alpha_bar[i]
    }

    pub fn sigma_tilde(&self, i: usize) -> f64 {
        self.sigma_tilde[i]
    }
}

/// Linear beta ramp from `beta_min` to `beta_max` over `n` steps. The
/// cumulative products are accumulated in log space;
/// `sigma_tilde_i = sqrt(beta_i (1 - alpha_bar_{i-1}) / (1 - alpha_bar_i))`
/// is the posterior standard deviation (zero at the first step).
pub fn build_linear_schedule(n: usize, beta_min: f64, beta_max: f64) -> Result<DdpmSchedule> {
    if n == 0 {
        return Err(Error::InvalidParameter("schedule needs n >= 1".into()));
    }
    if !(0.0 < beta_min && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta range ({beta_min}, {beta_max}) must satisfy 0 < min <= max < 1"
        )));
    }
    let mut beta = vec![0.0];
    let mut alpha = vec![1.0];
    let mut alpha_bar = vec![1.0];
    let mut sigma_tilde = vec![0.0];
    let mut log_alpha_bar = 0.0;
    for i in 1..=n {
        let b = if n == 1 {
            beta_min
        } else {
            beta_min + (beta_max - beta_min) * (i - 1) as f64 / (n - 1) as f64
        };
        let a = 1.0 - b;
        log_alpha_bar += a.ln();
        let ab = log_alpha_bar.exp();
        let ab_prev = alpha_bar[i - 1];
        sigma_tilde.push((b * (1.0 - ab_prev) / (1.0 - ab)).sqrt());
        beta.push(b);
        alpha.push(a);
        alpha_bar.push(ab);
    }
    Ok(DdpmSchedule {
        beta,
        alpha,
        alpha_bar,
        sigma_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_step() {
        let s = build_linear_schedule(1, 0.5, 0.5).unwrap();
        assert_eq!(s.n_steps(), 1);
        assert_abs_diff_eq!(s.alpha_bar(1), 0.5, epsilon = 1e-15);
        assert_eq!(s.alpha_bar(0), 1.0);
        assert_eq!(s.sigma_tilde(1), 0.0);
    }

    #[test]
    fn thousand_step_default_terminal() {
        let s = build_linear_schedule(1000, 1e-4, 0.02).unwrap();
        // Log-space oracle for the product.
        let mut log_prod = 0.0;
        for i in 1..=1000usize {
            let b = 1e-4 + (0.02 - 1e-4) * (i - 1) as f64 / 999.0;
            log_prod += (1.0 - b).ln();
        }
        assert_abs_diff_eq!(s.alpha_bar(1000), log_prod.exp(), epsilon = 1e-12);
        assert!(s.alpha_bar(1000) < 1e-4, "terminal {}", s.alpha_bar(1000));
    }

    #[test]
    fn alpha_bar_nonincreasing() {
        for (n, lo, hi) in [(1usize, 0.3, 0.3), (10, 1e-3, 0.1), (1000, 1e-4, 0.02)] {
            let s = build_linear_schedule(n, lo, hi).unwrap();
            for i in 1..=n {
                assert!(s.alpha_bar(i) <= s.alpha_bar(i - 1));
                assert!(s.beta(i) > 0.0 && s.beta(i) < 1.0);
                assert!(s.sigma_tilde(i) >= 0.0);
            }
        }
    }

    #[test]
    fn invalid_ranges_error() {
        assert!(build_linear_schedule(10, 0.0, 0.1).is_err());
        assert!(build_linear_schedule(10, 0.2, 0.1).is_err());
        assert!(build_linear_schedule(10, 0.1, 1.0).is_err());
        assert!(build_linear_schedule(0, 0.1, 0.2).is_err());
    }
}
