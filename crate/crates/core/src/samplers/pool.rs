//! Finite-pool selection: top-prefix retrieval and exponential reweighting of
//! a fixed candidate pool.

use crate::error::{Error, Result};
use crate::gmm::IsotropicGmm;
use crate::point::Point;
use crate::score::ScoreField;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A pool of candidate points with their scores, sorted once by descending
/// score.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    points: Vec<Point>,
    scores: Vec<f64>,
    /// Permutation of indices ordered by descending score.
    sorted_index: Vec<usize>,
}

impl CandidatePool {
    pub fn new(points: Vec<Point>, score: &ScoreField) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let scores: Vec<f64> = points.par_iter().map(|&p| score.eval(p)).collect();
        let mut sorted_index: Vec<usize> = (0..points.len()).collect();
        sorted_index.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ok(CandidatePool {
            points,
            scores,
            sorted_index,
        })
    }

    pub fn from_prior(
        prior: &IsotropicGmm,
        score: &ScoreField,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        CandidatePool::new(prior.sample(n, rng), score)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sorted_index(&self) -> &[usize] {
        &self.sorted_index
    }

    /// Score of the i-th best candidate.
    pub fn sorted_score(&self, rank: usize) -> f64 {
        self.scores[self.sorted_index[rank]]
    }
}

/// Result of prefix matching on the sorted pool.
#[derive(Debug, Clone)]
pub struct RetrievalSelection {
    pub k: usize,
    pub selected: Vec<Point>,
    pub achieved: f64,
}

/// Pick the prefix of the descending-sorted pool whose mean score is closest
/// to the target; ties resolve to the smallest prefix. Deterministic given
/// the pool.
pub fn retrieval_topk_match(pool: &CandidatePool, target_m: f64) -> Result<RetrievalSelection> {
    let max_attainable = pool.sorted_score(0);
    if target_m > max_attainable {
        return Err(Error::InfeasibleRetrievalTarget {
            target: target_m,
            max_attainable,
        });
    }
    let mut best_k = 1;
    let mut best_gap = f64::INFINITY;
    let mut best_mean = 0.0;
    let mut running = 0.0;
    for (rank, &idx) in pool.sorted_index().iter().enumerate() {
        running += pool.scores()[idx];
        let k = rank + 1;
        let mean = running / k as f64;
        let gap = (mean - target_m).abs();
        if gap < best_gap {
            best_gap = gap;
            best_k = k;
            best_mean = mean;
        }
    }
    let selected = pool.sorted_index()[..best_k]
        .iter()
        .map(|&i| pool.points()[i])
        .collect();
    Ok(RetrievalSelection {
        k: best_k,
        selected,
        achieved: best_mean,
    })
}

/// Pool points with normalized exponential weights.
#[derive(Debug, Clone)]
pub struct WeightedSampleSet {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub ess: f64,
}

impl WeightedSampleSet {
    pub fn weighted_mean_score(&self, score: &ScoreField) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * score.eval(p))
            .sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Exponential reweighting of the pool: `w_i = exp(beta s_i) / sum_j exp(beta s_j)`,
/// normalized in log space.
pub fn empirical_tilt(pool: &CandidatePool, beta: f64) -> WeightedSampleSet {
    let max = pool
        .scores()
        .iter()
        .map(|&s| beta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = pool.scores().iter().map(|&s| (beta * s - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let weights: Vec<f64> = unnorm.iter().map(|&w| w / total).collect();
    let ess = 1.0 / weights.iter().map(|&w| w * w).sum::<f64>();
    WeightedSampleSet {
        points: pool.points().to_vec(),
        weights,
        ess,
    }
}
