//! Monte Carlo samplers for the two constraint families: rejection from the
//! prior for truncations, and self-normalized importance resampling for tilts.

use crate::error::{Error, Result};
use crate::gmm::IsotropicGmm;
use crate::point::Point;
use crate::score::ScoreField;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Draw from the truncated law by rejecting prior draws below the threshold.
pub fn rejection_sample_truncation(
    prior: &IsotropicGmm,
    score: &ScoreField,
    m_prime: f64,
    n_out: usize,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(n_out);
    let mut proposals = 0usize;
    while out.len() < n_out {
        if proposals >= budget {
            return Err(Error::RejectionBudgetExhausted {
                budget,
                accepted: out.len(),
                requested: n_out,
            });
        }
        let x = prior.sample_one(rng);
        proposals += 1;
        if score.eval(x) > m_prime {
            out.push(x);
        }
    }
    Ok(out)
}

/// Importance-resampled draws from the tilt at `beta`.
#[derive(Debug, Clone)]
pub struct SnisSample {
    pub points: Vec<Point>,
    pub ess: f64,
    pub ess_warning: bool,
}

/// Draw `n_proposals` from the prior, weight by `exp(beta s)`, and resample
/// `n_out` points multinomially.
pub fn snis_resample_tilt(
    prior: &IsotropicGmm,
    score: &ScoreField,
    beta: f64,
    n_proposals: usize,
    n_out: usize,
    ess_floor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SnisSample> {
    if n_proposals < n_out {
        return Err(Error::InvalidParameter(format!(
            "n_proposals {n_proposals} < n_out {n_out}"
        )));
    }
    let proposals = prior.sample(n_proposals, rng);
    let exponents: Vec<f64> = proposals.iter().map(|&p| beta * score.eval(p)).collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut cumulative = Vec::with_capacity(n_proposals);
    let mut running = 0.0;
    let mut w2 = 0.0;
    for &e in &exponents {
        let w = (e - max).exp();
        running += w;
        w2 += w * w;
        cumulative.push(running);
    }
    let ess = running * running / w2;

    let points = (0..n_out)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * running;
            let idx = cumulative.partition_point(|&c| c < u).min(n_proposals - 1);
            proposals[idx]
        })
        .collect();
    Ok(SnisSample {
        points,
        ess,
        ess_warning: ess < ess_floor,
    })
}
