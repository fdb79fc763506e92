//! Closed forms for the standard-normal score law: inverse Mills ratio, mean
//! residual life, and the local TV speeds of the truncated and tilted paths
//! under matched mean-score levels.

use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy)]
pub struct GaussianClosedForms {
    /// Inverse Mills ratio `lambda(m) = phi(m) / survival(m)`.
    pub lambda_mills: f64,
    /// Mean residual life `e(m) = lambda(m) - m`.
    pub mean_residual: f64,
    /// Local TV speed of the truncated path, `1 / e(m)`.
    pub v_hard: f64,
    /// Local TV speed of the tilted path, `1 / sqrt(2 pi)`, level-independent.
    pub v_klsc: f64,
}

pub fn gaussian_closed_forms(m: f64) -> GaussianClosedForms {
    let phi = (-0.5 * m * m).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let survival = 0.5 * erfc(m / std::f64::consts::SQRT_2);
    let lambda = phi / survival;
    let e = lambda - m;
    GaussianClosedForms {
        lambda_mills: lambda,
        mean_residual: e,
        v_hard: 1.0 / e,
        v_klsc: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn exact_values_at_zero() {
        let f = gaussian_closed_forms(0.0);
        assert_abs_diff_eq!(f.lambda_mills, (2.0 / PI).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(f.mean_residual, (2.0 / PI).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(f.v_hard, (PI / 2.0).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(f.v_klsc, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(f.lambda_mills, 0.797885, epsilon = 1e-6);
        assert_abs_diff_eq!(f.v_hard, 1.253314, epsilon = 1e-6);
        assert_abs_diff_eq!(f.v_klsc, 0.398942, epsilon = 1e-6);
    }

    #[test]
    fn hard_path_is_faster_everywhere() {
        for m in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let f = gaussian_closed_forms(m);
            assert!(f.v_hard > f.v_klsc, "m={m}");
        }
    }

    #[test]
    fn large_threshold_asymptote() {
        // e(m) ~ 1/m, so v_hard(m)/m -> 1.
        let f = gaussian_closed_forms(20.0);
        assert!((f.v_hard / 20.0 - 1.0).abs() < 0.01, "ratio {}", f.v_hard / 20.0);
    }

    #[test]
    fn mills_ratio_against_series() {
        // lambda(m) = m + 1/m - 2/m^3 + O(m^-5) for large m.
        let m = 12.0;
        let f = gaussian_closed_forms(m);
        let series = m + 1.0 / m - 2.0 / (m * m * m);
        assert!((f.lambda_mills - series).abs() < 1e-3);
    }
}
