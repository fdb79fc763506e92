//! Constraint formulations over the prior.
//!
//! Two ways of pushing a prior toward high score: conditioning on the
//! super-level event `{s(x) > m'}` (hard truncation), and reweighting by
//! `exp(beta s(x))` (the exponential tilt, which is the KL-minimal
//! distribution among all laws with mean score at the target). The task tilt
//! adds a second exponential factor for an injected task score.

use crate::error::{Error, Result};
use crate::gmm::{log_sum_exp, IsotropicGmm};
use crate::grid::{Grid2D, GridDensity};
use crate::point::Point;
use crate::score::ScoreField;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Prior conditioned on the super-level event `{s > threshold}`.
#[derive(Debug, Clone)]
pub struct HardTruncation {
    pub score: ScoreField,
    pub threshold: f64,
    /// `p({s > threshold})`, estimated before the density is usable.
    pub event_mass: f64,
}

impl HardTruncation {
    /// Estimate the event mass by grid quadrature of the prior.
    pub fn estimate(
        score: ScoreField,
        threshold: f64,
        prior: &IsotropicGmm,
        grid: Grid2D,
    ) -> Result<Self> {
        let prior_density = GridDensity::from_log_density(grid, |p| prior.log_pdf(p))?;
        let event_mass = prior_density.mass_where(|p| score.eval(p) > threshold);
        if event_mass <= 0.0 {
            return Err(Error::InfeasibleThreshold { threshold });
        }
        Ok(HardTruncation {
            score,
            threshold,
            event_mass,
        })
    }

    /// `log p(x) - log p(E)` above the threshold, `-inf` below.
    pub fn log_density(&self, prior: &IsotropicGmm, x: Point) -> f64 {
        if self.score.eval(x) > self.threshold {
            prior.log_pdf(x) - self.event_mass.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Renormalized truncated density on the grid.
    pub fn grid_density(&self, prior: &IsotropicGmm, grid: Grid2D) -> Result<GridDensity> {
        let values = grid.map_centers(|p| {
            if self.score.eval(p) > self.threshold {
                prior.log_pdf(p).exp()
            } else {
                0.0
            }
        });
        GridDensity::from_values(grid, values)
    }
}

/// Exponentially tilted law `p(x) exp(beta s(x)) / Z(beta)`.
#[derive(Debug, Clone)]
pub struct ExponentialTilt {
    pub score: ScoreField,
    pub beta: f64,
    pub log_z: f64,
}

/// How to estimate log-partition functions and tilted moments.
pub enum PartitionMethod<'a> {
    Grid(Grid2D),
    MonteCarlo { n: usize, rng: &'a mut ChaCha8Rng },
}

impl ExponentialTilt {
    /// Build with `log Z(beta)` estimated by the given method.
    pub fn estimate(
        score: ScoreField,
        beta: f64,
        prior: &IsotropicGmm,
        method: PartitionMethod<'_>,
    ) -> Result<Self> {
        let log_z = estimate_log_partition(&score, prior, beta, method)?;
        Ok(ExponentialTilt { score, beta, log_z })
    }

    pub fn with_log_partition(score: ScoreField, beta: f64, log_z: f64) -> Self {
        ExponentialTilt { score, beta, log_z }
    }

    /// `log p(x) + beta s(x) - log Z(beta)`.
    pub fn log_density(&self, prior: &IsotropicGmm, x: Point) -> f64 {
        prior.log_pdf(x) + self.beta * self.score.eval(x) - self.log_z
    }

    pub fn grid_density(&self, prior: &IsotropicGmm, grid: Grid2D) -> Result<GridDensity> {
        let score = &self.score;
        let beta = self.beta;
        GridDensity::from_log_density(grid, |p| prior.log_pdf(p) + beta * score.eval(p))
    }
}

/// Two-constraint tilt `p(x) exp(beta s(x) + eta f_c(x)) / Z(beta, eta)`.
#[derive(Debug, Clone)]
pub struct TaskTilt {
    pub score: ScoreField,
    pub task_score: ScoreField,
    pub beta: f64,
    pub eta: f64,
    pub log_z: f64,
}

impl TaskTilt {
    pub fn estimate(
        score: ScoreField,
        task_score: ScoreField,
        beta: f64,
        eta: f64,
        prior: &IsotropicGmm,
        method: PartitionMethod<'_>,
    ) -> Result<Self> {
        // The combined exponent is itself a score field for partition purposes.
        let log_z = match method {
            PartitionMethod::Grid(grid) => {
                if beta == 0.0 && eta == 0.0 {
                    0.0
                } else {
                    let logs = grid.map_centers(|p| {
                        prior.log_pdf(p) + beta * score.eval(p) + eta * task_score.eval(p)
                    });
                    let n_p = grid.map_centers(|p| prior.log_pdf(p));
                    log_integral(&logs, grid) - log_integral(&n_p, grid)
                }
            }
            PartitionMethod::MonteCarlo { n, rng } => {
                if beta == 0.0 && eta == 0.0 {
                    0.0
                } else {
                    let exps: Vec<f64> = prior
                        .sample(n, rng)
                        .into_iter()
                        .map(|x| beta * score.eval(x) + eta * task_score.eval(x))
                        .collect();
                    log_sum_exp(&exps) - (n as f64).ln()
                }
            }
        };
        Ok(TaskTilt {
            score,
            task_score,
            beta,
            eta,
            log_z,
        })
    }

    pub fn with_log_partition(
        score: ScoreField,
        task_score: ScoreField,
        beta: f64,
        eta: f64,
        log_z: f64,
    ) -> Self {
        TaskTilt {
            score,
            task_score,
            beta,
            eta,
            log_z,
        }
    }

    /// `log p(x) + beta s(x) + eta f_c(x) - log Z`.
    pub fn log_density(&self, prior: &IsotropicGmm, x: Point) -> f64 {
        prior.log_pdf(x) + self.beta * self.score.eval(x) + self.eta * self.task_score.eval(x)
            - self.log_z
    }
}

fn log_integral(logs: &[f64], grid: Grid2D) -> f64 {
    log_sum_exp(logs) + grid.cell_area().ln()
}

/// `log Z(beta) = log E_p[exp(beta s(X))]`, by grid quadrature or Monte Carlo.
///
/// `beta = 0` returns 0 exactly: `Z(0)` is the total mass of `p` by
/// definition, and both estimators degenerate to their own normalizers.
pub fn estimate_log_partition(
    score: &ScoreField,
    prior: &IsotropicGmm,
    beta: f64,
    method: PartitionMethod<'_>,
) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    match method {
        PartitionMethod::Grid(grid) => {
            let tilted = grid.map_centers(|p| prior.log_pdf(p) + beta * score.eval(p));
            let base = grid.map_centers(|p| prior.log_pdf(p));
            // Normalizing by the prior's own grid mass keeps the estimate a
            // ratio of quadratures, cancelling the tiny leakage outside the
            // window.
            Ok(log_integral(&tilted, grid) - log_integral(&base, grid))
        }
        PartitionMethod::MonteCarlo { n, rng } => {
            if n == 0 {
                return Err(Error::InvalidParameter("mc partition with n=0".into()));
            }
            let scores = sample_scores(prior, score, n, rng);
            let exps: Vec<f64> = scores.iter().map(|&s| beta * s).collect();
            Ok(log_sum_exp(&exps) - (n as f64).ln())
        }
    }
}

/// Draw `n` prior points and evaluate the score on them.
pub fn sample_scores(
    prior: &IsotropicGmm,
    score: &ScoreField,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let points = prior.sample(n, rng);
    points.par_iter().map(|&p| score.eval(p)).collect()
}

/// Mean and variance of `s(X)` under the tilt at `beta`.
pub fn tilt_mean_variance(
    prior: &IsotropicGmm,
    score: &ScoreField,
    beta: f64,
    method: PartitionMethod<'_>,
) -> Result<(f64, f64)> {
    match method {
        PartitionMethod::Grid(grid) => {
            let logs = grid.map_centers(|p| prior.log_pdf(p) + beta * score.eval(p));
            let scores = grid.map_centers(|p| score.eval(p));
            Ok(weighted_moments_log(&logs, &scores))
        }
        PartitionMethod::MonteCarlo { n, rng } => {
            let scores = sample_scores(prior, score, n, rng);
            let stats = snis_stats(&scores, beta);
            Ok((stats.mean, stats.variance))
        }
    }
}

fn weighted_moments_log(log_weights: &[f64], values: &[f64]) -> (f64, f64) {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut wsum = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (&lw, &v) in log_weights.iter().zip(values) {
        let w = (lw - max).exp();
        wsum += w;
        m1 += w * v;
        m2 += w * v * v;
    }
    let mean = m1 / wsum;
    (mean, (m2 / wsum - mean * mean).max(0.0))
}

/// Self-normalized importance statistics for weights `exp(beta s_i)`.
#[derive(Debug, Clone, Copy)]
pub struct SnisStats {
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
}

pub fn snis_stats(scores: &[f64], beta: f64) -> SnisStats {
    let max = scores
        .iter()
        .map(|&s| beta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut wsum = 0.0;
    let mut w2sum = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for &s in scores {
        let w = (beta * s - max).exp();
        wsum += w;
        w2sum += w * w;
        m1 += w * s;
        m2 += w * s * s;
    }
    let mean = m1 / wsum;
    SnisStats {
        mean,
        variance: (m2 / wsum - mean * mean).max(0.0),
        ess: wsum * wsum / w2sum,
    }
}

/// Outcome of a one-knob moment calibration.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationResult {
    /// The calibrated knob: threshold `m'`, tilt strength `beta`, or guidance scale.
    pub knob: f64,
    pub achieved_mean: f64,
    pub iterations: usize,
    pub tolerance_met: bool,
    /// Effective sample size of the final weighted estimate, when importance
    /// weighting was involved.
    pub ess: Option<f64>,
    pub ess_warning: bool,
}

pub(crate) struct BisectOutcome {
    pub knob: f64,
    pub achieved: f64,
    pub iterations: usize,
    pub tolerance_met: bool,
}

/// Bisection for `f(knob) = target` with `f` nondecreasing on `[lo, hi]` and
/// the straddle already verified by the caller. Flat stretches resolve to the
/// midpoint of the final bracket.
pub(crate) fn bisect_increasing(
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
    budget: usize,
    mut f: impl FnMut(f64) -> f64,
) -> BisectOutcome {
    let mut iterations = 0;
    let mut knob = 0.5 * (lo + hi);
    let mut achieved = f64::NAN;
    while iterations < budget {
        knob = 0.5 * (lo + hi);
        achieved = f(knob);
        iterations += 1;
        if (achieved - target).abs() <= tol {
            return BisectOutcome {
                knob,
                achieved,
                iterations,
                tolerance_met: true,
            };
        }
        if achieved < target {
            lo = knob;
        } else {
            hi = knob;
        }
    }
    BisectOutcome {
        knob,
        achieved,
        iterations,
        tolerance_met: false,
    }
}

/// Calibrate the truncation threshold so `E[s | s > m'] = target_m`.
///
/// One proposal pool is drawn up front and reused across all bisection
/// iterates, which makes the estimated conditional mean monotone in the
/// threshold and the bisection well-posed.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_hard_threshold(
    prior: &IsotropicGmm,
    score: &ScoreField,
    target_m: f64,
    tol: f64,
    bracket: (f64, f64),
    pool_n: usize,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CalibrationResult> {
    let scores = sample_scores(prior, score, pool_n, rng);
    let cond_mean = |threshold: f64| -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &s in &scores {
            if s > threshold {
                sum += s;
                count += 1;
            }
        }
        if count == 0 {
            f64::INFINITY
        } else {
            sum / count as f64
        }
    };

    let (lo, hi) = bracket;
    let at_lo = cond_mean(lo);
    let at_hi = cond_mean(hi);
    if target_m <= at_lo {
        // Truncation is vacuous (or the target is below the unconditional
        // mean): report the bracket floor.
        return Ok(CalibrationResult {
            knob: lo,
            achieved_mean: at_lo,
            iterations: 0,
            tolerance_met: (at_lo - target_m).abs() <= tol,
            ess: None,
            ess_warning: false,
        });
    }
    if !at_hi.is_finite() || target_m > at_hi {
        return Err(Error::BracketFailure {
            lo,
            hi,
            target: target_m,
            at_lo,
            at_hi,
        });
    }
    let out = bisect_increasing(lo, hi, target_m, tol, budget, cond_mean);
    Ok(CalibrationResult {
        knob: out.knob,
        achieved_mean: out.achieved,
        iterations: out.iterations,
        tolerance_met: out.tolerance_met,
        ess: None,
        ess_warning: false,
    })
}

/// Calibrate the tilt strength so the tilted mean score hits `target_m`,
/// using one self-normalized importance pool reused across iterates.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_tilt_beta(
    prior: &IsotropicGmm,
    score: &ScoreField,
    target_m: f64,
    tol: f64,
    bracket: (f64, f64),
    n_proposals: usize,
    budget: usize,
    ess_floor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CalibrationResult> {
    let scores = sample_scores(prior, score, n_proposals, rng);
    let (lo, hi) = bracket;
    let stats_at = |beta: f64| snis_stats(&scores, beta);

    let at_lo = stats_at(lo.max(0.0));
    if target_m <= at_lo.mean {
        // Constraint inactive: the prior already meets the target.
        return Ok(CalibrationResult {
            knob: lo.max(0.0),
            achieved_mean: at_lo.mean,
            iterations: 0,
            tolerance_met: true,
            ess: Some(at_lo.ess),
            ess_warning: at_lo.ess < ess_floor,
        });
    }
    let at_hi = stats_at(hi);
    if target_m > at_hi.mean {
        return Err(Error::BracketFailure {
            lo,
            hi,
            target: target_m,
            at_lo: at_lo.mean,
            at_hi: at_hi.mean,
        });
    }
    let out = bisect_increasing(lo.max(0.0), hi, target_m, tol, budget, |beta| {
        stats_at(beta).mean
    });
    let final_stats = stats_at(out.knob);
    Ok(CalibrationResult {
        knob: out.knob,
        achieved_mean: out.achieved,
        iterations: out.iterations,
        tolerance_met: out.tolerance_met,
        ess: Some(final_stats.ess),
        ess_warning: final_stats.ess < ess_floor,
    })
}

/// Lower bound on the KL cost of meeting a task demand `r`, from samples of
/// the task score under the intrinsic tilt.
#[derive(Debug, Clone, Copy)]
pub struct TaskDistortionBound {
    pub value: f64,
    pub eta_star: f64,
    pub ess: f64,
    pub reliable: bool,
}

/// Maximize the concave dual `eta -> eta r - log E[exp(eta f_c)]` over
/// `[0, eta_max]` by golden-section search. The bound is zero when the demand
/// does not exceed the baseline mean of the task score.
pub fn task_distortion_lower_bound(
    task_values: &[f64],
    r: f64,
    eta_max: f64,
    ess_floor: f64,
) -> Result<TaskDistortionBound> {
    if task_values.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if !eta_max.is_finite() || eta_max <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta_max {eta_max} must be positive"
        )));
    }
    let n = task_values.len() as f64;
    let baseline = task_values.iter().sum::<f64>() / n;
    let log_mgf = |eta: f64| -> f64 {
        let exps: Vec<f64> = task_values.iter().map(|&f| eta * f).collect();
        log_sum_exp(&exps) - n.ln()
    };
    let dual = |eta: f64| eta * r - log_mgf(eta);

    if r <= baseline {
        let ess = ess_at(task_values, 0.0);
        return Ok(TaskDistortionBound {
            value: 0.0,
            eta_star: 0.0,
            ess,
            reliable: ess >= ess_floor,
        });
    }

    // Golden-section maximization of a concave 1-D function.
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = 0.0;
    let mut b = eta_max;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = dual(c);
    let mut fd = dual(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = dual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = dual(d);
        }
    }
    let eta_star = 0.5 * (a + b);
    let value = dual(eta_star).max(0.0);
    let ess = ess_at(task_values, eta_star);
    Ok(TaskDistortionBound {
        value,
        eta_star,
        ess,
        reliable: ess >= ess_floor,
    })
}

/// Deterministic stratified Gaussian sample: `mu + sigma * Phi^{-1}((i+0.5)/n)`.
///
/// Empirical moment-generating functions of this sample are midpoint
/// quadratures, converging at O(1/n) instead of the O(1/sqrt(n)) of i.i.d.
/// draws; the Legendre-transform checks depend on that.
pub fn stratified_gaussian(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (0..n)
        .map(|i| mu + sigma * normal.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

fn ess_at(values: &[f64], eta: f64) -> f64 {
    let max = values
        .iter()
        .map(|&f| eta * f)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut wsum = 0.0;
    let mut w2sum = 0.0;
    for &f in values {
        let w = (eta * f - max).exp();
        wsum += w;
        w2sum += w * w;
    }
    wsum * wsum / w2sum
}
