//! Finite-step threshold instability: the TV moved when the matched target
//! level of a constraint family is nudged by a small step.

use crate::constraints::{
    calibrate_hard_threshold, calibrate_tilt_beta, CalibrationResult, ExponentialTilt,
    HardTruncation, PartitionMethod,
};
use crate::error::Result;
use crate::gmm::IsotropicGmm;
use crate::grid::{Grid2D, GridDensity};
use crate::score::ScoreField;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    Hard,
    Klsc,
}

impl ConstraintFamily {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintFamily::Hard => "hard",
            ConstraintFamily::Klsc => "klsc",
        }
    }
}

/// Everything a matched-moment calibration needs, bundled so instability
/// sweeps reuse one configuration.
#[derive(Debug, Clone)]
pub struct InstabilityContext<'a> {
    pub prior: &'a IsotropicGmm,
    pub score: &'a ScoreField,
    pub grid: Grid2D,
    pub tol: f64,
    pub hard_bracket: (f64, f64),
    pub beta_bracket: (f64, f64),
    pub pool_n: usize,
    pub budget: usize,
    pub ess_floor: f64,
}

impl<'a> InstabilityContext<'a> {
    /// Calibrate one family to the target level and return its grid density.
    pub fn density_at_level(
        &self,
        family: ConstraintFamily,
        m: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(GridDensity, CalibrationResult)> {
        match family {
            ConstraintFamily::Hard => {
                let cal = calibrate_hard_threshold(
                    self.prior,
                    self.score,
                    m,
                    self.tol,
                    self.hard_bracket,
                    self.pool_n,
                    self.budget,
                    rng,
                )?;
                let trunc = HardTruncation::estimate(
                    self.score.clone(),
                    cal.knob,
                    self.prior,
                    self.grid,
                )?;
                Ok((trunc.grid_density(self.prior, self.grid)?, cal))
            }
            ConstraintFamily::Klsc => {
                let cal = calibrate_tilt_beta(
                    self.prior,
                    self.score,
                    m,
                    self.tol,
                    self.beta_bracket,
                    self.pool_n,
                    self.budget,
                    self.ess_floor,
                    rng,
                )?;
                let tilt = ExponentialTilt::estimate(
                    self.score.clone(),
                    cal.knob,
                    self.prior,
                    PartitionMethod::Grid(self.grid),
                )?;
                Ok((tilt.grid_density(self.prior, self.grid)?, cal))
            }
        }
    }
}

/// `TV(q_m, q_{m+eps})` between the two matched-moment members of a family,
/// each calibrated with its own proposal pool.
pub fn tv_instability(
    ctx: &InstabilityContext<'_>,
    family: ConstraintFamily,
    m: f64,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let (q_m, _) = ctx.density_at_level(family, m, rng)?;
    let (q_m_eps, _) = ctx.density_at_level(family, m + eps, rng)?;
    q_m.tv(&q_m_eps)
}

/// Discrete average of the finite-step instability over a set of levels.
pub fn mean_tv_instability(
    ctx: &InstabilityContext<'_>,
    levels: &[f64],
    eps: f64,
    family: ConstraintFamily,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut acc = 0.0;
    for &m in levels {
        acc += tv_instability(ctx, family, m, eps, rng)?;
    }
    Ok(acc / levels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedPolicy;
    use std::f64::consts::FRAC_PI_4;

    fn context<'a>(prior: &'a IsotropicGmm, score: &'a ScoreField) -> InstabilityContext<'a> {
        InstabilityContext {
            prior,
            score,
            grid: Grid2D::standard(),
            tol: 1e-3,
            hard_bracket: (0.0, 7.99),
            beta_bracket: (0.0, 64.0),
            pool_n: 500_000,
            budget: 200,
            ess_floor: 200.0,
        }
    }

    #[test]
    fn zero_step_is_zero() {
        let prior = IsotropicGmm::symmetric_corners(2.0, 0.8);
        let score = ScoreField::angular(FRAC_PI_4, 4.0);
        let ctx = context(&prior, &score);
        let mut rng = SeedPolicy::new(71).experiment(0).root();
        assert_eq!(
            tv_instability(&ctx, ConstraintFamily::Hard, 5.0, 0.0, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_level_mean_reduces_to_pointwise() {
        let prior = IsotropicGmm::symmetric_corners(2.0, 0.8);
        let score = ScoreField::angular(FRAC_PI_4, 4.0);
        let ctx = context(&prior, &score);
        let m = 5.0;
        let eps = 0.08;
        let single = {
            let mut rng = SeedPolicy::new(72).experiment(0).root();
            tv_instability(&ctx, ConstraintFamily::Klsc, m, eps, &mut rng).unwrap()
        };
        let mean = {
            let mut rng = SeedPolicy::new(72).experiment(0).root();
            mean_tv_instability(&ctx, &[m], eps, ConstraintFamily::Klsc, &mut rng).unwrap()
        };
        assert_eq!(single, mean);
    }

    #[test]
    fn hard_family_moves_more_at_m6() {
        let prior = IsotropicGmm::symmetric_corners(2.0, 0.8);
        let score = ScoreField::angular(FRAC_PI_4, 4.0);
        let ctx = context(&prior, &score);
        let mut rng = SeedPolicy::new(73).experiment(0).root();
        let hard = tv_instability(&ctx, ConstraintFamily::Hard, 6.0, 0.08, &mut rng).unwrap();
        let soft = tv_instability(&ctx, ConstraintFamily::Klsc, 6.0, 0.08, &mut rng).unwrap();
        assert!(soft < hard, "klsc {soft} vs hard {hard}");
    }
}
