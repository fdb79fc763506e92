//! Closed-form identities along the exponential-family path.

use crate::constraints;
use crate::error::{Error, Result};
use crate::gmm::IsotropicGmm;
use crate::grid::{GridDensity, KlDivergence};
use crate::score::ScoreField;

/// Step used for centered differences of the log-partition function.
const PSI_DIFF_STEP: f64 = 1e-3;

/// KL between two tilts of the same prior from the log-partition function:
/// `KL(q_beta || q_beta') = (beta - beta') psi'(beta) - (psi(beta) - psi(beta'))`,
/// with `psi'` taken by centered difference.
pub fn tilt_kl_closed_form<F: Fn(f64) -> f64>(psi: F, beta: f64, beta_prime: f64) -> f64 {
    if beta == beta_prime {
        return 0.0;
    }
    let h = PSI_DIFF_STEP;
    let dpsi = (psi(beta + h) - psi(beta - h)) / (2.0 * h);
    (beta - beta_prime) * dpsi - (psi(beta) - psi(beta_prime))
}

/// Residual of the KL chain-rule decomposition
/// `KL(q || p) = KL(q || q_beta) + beta E_q[s] - psi(beta)`,
/// with every term computed on the same grid so the identity is exact up to
/// rounding. Infinite KL on either side is reported as an error.
pub fn kl_decomposition_residual(
    q: &GridDensity,
    prior: &IsotropicGmm,
    score: &ScoreField,
    beta: f64,
) -> Result<f64> {
    let grid = *q.grid();
    let prior_density = GridDensity::from_log_density(grid, |p| prior.log_pdf(p))?;
    let scores = grid.map_centers(|p| score.eval(p));

    // Grid-consistent log partition: log sum p_i exp(beta s_i) dA over the
    // normalized prior cells.
    let max_exp = scores
        .iter()
        .map(|&s| beta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let z_shifted: f64 = prior_density
        .values()
        .iter()
        .zip(&scores)
        .map(|(&p, &s)| p * (beta * s - max_exp).exp())
        .sum::<f64>()
        * grid.cell_area();
    let psi = z_shifted.ln() + max_exp;

    let tilt_values: Vec<f64> = prior_density
        .values()
        .iter()
        .zip(&scores)
        .map(|(&p, &s)| p * (beta * s - max_exp).exp())
        .collect();
    let tilt_density = GridDensity::from_values(grid, tilt_values)?;

    let kl_q_p = match q.kl(&prior_density)? {
        KlDivergence::Finite(v) => v,
        KlDivergence::Infinite => return Err(Error::InfiniteKl),
    };
    let kl_q_tilt = match q.kl(&tilt_density)? {
        KlDivergence::Finite(v) => v,
        KlDivergence::Infinite => return Err(Error::InfiniteKl),
    };
    let mean_score = q.expectation(|p| score.eval(p));

    Ok((kl_q_p - (kl_q_tilt + beta * mean_score - psi)).abs())
}

/// Grid log-partition closure for use with [`tilt_kl_closed_form`].
pub fn grid_psi<'a>(
    prior: &'a IsotropicGmm,
    score: &'a ScoreField,
    grid: crate::grid::Grid2D,
) -> impl Fn(f64) -> f64 + 'a {
    move |beta: f64| {
        constraints::estimate_log_partition(
            score,
            prior,
            beta,
            constraints::PartitionMethod::Grid(grid),
        )
        .expect("grid partition estimate")
    }
}
