//! High-dimensional typical-set checks: the chi-square lower-tail bound that
//! makes Gaussian modes exponentially atypical, and the TV lower bound for
//! mode-seeking samplers with bounded optimization error.

use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma_lr;

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTailCheck {
    /// Monte Carlo estimate of `P(|X| <= alpha sqrt(d))` for `X ~ N(0, I_d)`.
    pub mc_estimate: f64,
    /// Exact chi-square CDF via the regularized lower incomplete gamma.
    pub analytic_cdf: f64,
    /// Chernoff bound `exp(-(1 - alpha^2)^2 d / 4)`.
    pub bound: f64,
    pub satisfied: bool,
}

/// Compare `P(|X| <= alpha sqrt(d))` against its exponential bound, with the
/// analytic value and an independent Monte Carlo estimate side by side.
pub fn chi_square_tail_check(
    d: usize,
    alpha: f64,
    n_mc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ChiSquareTailCheck> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} must lie in (0, 1)"
        )));
    }
    let radius_sq = alpha * alpha * d as f64;
    let mut hits = 0usize;
    for _ in 0..n_mc {
        let mut norm_sq = 0.0;
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            norm_sq += z * z;
        }
        if norm_sq <= radius_sq {
            hits += 1;
        }
    }
    let mc_estimate = hits as f64 / n_mc as f64;
    // |X|^2 ~ chi^2_d: CDF(t) = P(d/2, t/2).
    let analytic_cdf = gamma_lr(d as f64 / 2.0, radius_sq / 2.0);
    let delta = 1.0 - alpha * alpha;
    let bound = (-delta * delta * d as f64 / 4.0).exp();
    Ok(ChiSquareTailCheck {
        mc_estimate,
        analytic_cdf,
        bound,
        satisfied: analytic_cdf <= bound,
    })
}

/// TV lower bound for a sampler that lands within radius `r` of the mode with
/// probability `1 - eta`, against a target putting mass `shell_mass` in that
/// ball: `TV >= (1 - eta) - shell_mass`.
pub fn tv_lower(eta: f64, shell_mass: f64) -> f64 {
    ((1.0 - eta) - shell_mass).max(0.0)
}
