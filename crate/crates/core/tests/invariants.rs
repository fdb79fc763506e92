//! Cross-module invariants: the variational identities along the tilt path,
//! the matched-moment dominance of the tilted family, and the distributional
//! correctness of the samplers against their analytic targets.

use induced::constraints::{
    calibrate_hard_threshold, calibrate_tilt_beta, estimate_log_partition, tilt_mean_variance,
    ExponentialTilt, HardTruncation, PartitionMethod,
};
use induced::diagnostics::{boundary_mass, ScalarScoreLaw};
use induced::grid::kde_to_grid;
use induced::samplers::{
    empirical_tilt, opt_reg_map, rejection_sample_truncation, retrieval_topk_match,
    snis_resample_tilt, CandidatePool, OptRunConfig,
};
use induced::{Grid2D, GridDensity, IsotropicGmm, Point, Regularizer, ScoreField, SeedPolicy};
use std::f64::consts::FRAC_PI_4;

fn quad_prior() -> IsotropicGmm {
    IsotropicGmm::symmetric_corners(2.0, 0.8)
}

fn angular() -> ScoreField {
    ScoreField::angular(FRAC_PI_4, 4.0)
}

fn grid() -> Grid2D {
    Grid2D::standard()
}

fn prior_density() -> GridDensity {
    let prior = quad_prior();
    GridDensity::from_log_density(grid(), |p| prior.log_pdf(p)).unwrap()
}

fn grid_psi(beta: f64) -> f64 {
    estimate_log_partition(&angular(), &quad_prior(), beta, PartitionMethod::Grid(grid()))
        .unwrap()
}

/// Tilted grid density with a grid-estimated partition function.
fn tilt_density(beta: f64) -> GridDensity {
    ExponentialTilt::estimate(angular(), beta, &quad_prior(), PartitionMethod::Grid(grid()))
        .unwrap()
        .grid_density(&quad_prior(), grid())
        .unwrap()
}

/// Solve `mu(beta) = target` on the grid (deterministic, no sampling).
fn beta_for_grid_mean(target: f64) -> f64 {
    let prior = quad_prior();
    let score = angular();
    let mut lo = 0.0;
    let mut hi = 64.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (mean, _) =
            tilt_mean_variance(&prior, &score, mid, PartitionMethod::Grid(grid())).unwrap();
        if mean < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn gibbs_inequality_with_equality_at_the_tilt() {
    // KL(q||p) >= beta E_q[s] - psi(beta) for any grid density q, with
    // equality exactly at the tilt.
    let prior = quad_prior();
    let score = angular();
    let p = prior_density();
    let beta_top = beta_for_grid_mean(7.0);
    let qs: Vec<(&str, GridDensity)> = vec![
        ("prior", p.clone()),
        ("tilt_0.4", tilt_density(0.4)),
        (
            "hard_3",
            HardTruncation::estimate(score.clone(), 3.0, &prior, grid())
                .unwrap()
                .grid_density(&prior, grid())
                .unwrap(),
        ),
    ];
    for beta in [0.0, 0.2 * beta_top, 0.6 * beta_top, beta_top] {
        let psi = grid_psi(beta);
        for (name, q) in &qs {
            let kl = q.kl(&p).unwrap().finite().unwrap();
            let mean = q.expectation(|x| score.eval(x));
            let lower = beta * mean - psi;
            assert!(
                kl >= lower - 1e-9,
                "{name} at beta={beta}: KL {kl} < bound {lower}"
            );
        }
        // Equality at the tilt itself.
        let q = tilt_density(beta);
        let kl = q.kl(&p).unwrap().finite().unwrap();
        let mean = q.expectation(|x| score.eval(x));
        let residual = (kl - (beta * mean - psi)).abs();
        assert!(residual < 1e-6, "equality residual {residual} at beta={beta}");
    }
}

#[test]
fn matched_moment_gap_is_strict_at_all_levels() {
    // With mu the grid-exact truncated mean and beta calibrated to mu, the
    // tilt dominates the truncation in KL, strictly.
    let prior = quad_prior();
    let score = angular();
    let p = prior_density();
    let mut rng = SeedPolicy::new(201).experiment(0).root();
    for m in [5.0, 6.0, 7.0] {
        let cal = calibrate_hard_threshold(
            &prior,
            &score,
            m,
            1e-3,
            (0.0, 7.99),
            2_000_000,
            200,
            &mut rng,
        )
        .unwrap();
        let trunc = HardTruncation::estimate(score.clone(), cal.knob, &prior, grid()).unwrap();
        let q_hard = trunc.grid_density(&prior, grid()).unwrap();
        let mu = q_hard.expectation(|x| score.eval(x));
        let beta = beta_for_grid_mean(mu);
        let q_soft = tilt_density(beta);
        let kl_hard = q_hard.kl(&p).unwrap().finite().unwrap();
        let kl_soft = q_soft.kl(&p).unwrap().finite().unwrap();
        assert!(
            kl_soft < kl_hard - 1e-3,
            "m={m}: soft {kl_soft} vs hard {kl_hard}"
        );
    }
}

#[test]
fn tilted_mean_monotone_in_beta() {
    let prior = quad_prior();
    let score = angular();
    let mut last = f64::NEG_INFINITY;
    for i in 0..=16 {
        let beta = i as f64 * 0.25;
        let (mean, var) =
            tilt_mean_variance(&prior, &score, beta, PartitionMethod::Grid(grid())).unwrap();
        assert!(mean >= last - 1e-9, "mean not monotone at beta={beta}");
        assert!(var >= 0.0);
        last = mean;
    }
}

#[test]
fn tilt_never_beats_hard_from_below_along_matched_levels() {
    // At every matched level, the tilt's KL stays below the truncation's;
    // pushing beta upward approaches the hard KL from below.
    let prior = quad_prior();
    let score = angular();
    let p = prior_density();
    for beta in [0.3, 0.8, 1.5, 3.0] {
        let q_soft = tilt_density(beta);
        let mu = q_soft.expectation(|x| score.eval(x));
        // Hard threshold matched to the same mean, solved on the grid.
        let mut lo = 0.0;
        let mut hi = 7.99;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let trunc = HardTruncation::estimate(score.clone(), mid, &prior, grid()).unwrap();
            let q = trunc.grid_density(&prior, grid()).unwrap();
            if q.expectation(|x| score.eval(x)) < mu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let trunc =
            HardTruncation::estimate(score.clone(), 0.5 * (lo + hi), &prior, grid()).unwrap();
        let q_hard = trunc.grid_density(&prior, grid()).unwrap();
        let kl_soft = q_soft.kl(&p).unwrap().finite().unwrap();
        let kl_hard = q_hard.kl(&p).unwrap().finite().unwrap();
        assert!(
            kl_soft <= kl_hard,
            "beta={beta}: soft {kl_soft} above hard {kl_hard}"
        );
    }
}

#[test]
fn prior_tail_fraction_matches_grid() {
    // Sampled mass of the super-level set at m=5 against grid quadrature.
    let prior = quad_prior();
    let score = angular();
    let p = prior_density();
    let target = p.mass_where(|x| score.eval(x) > 5.0);
    let mut rng = SeedPolicy::new(202).experiment(0).root();
    let n = 1_000_000usize;
    let hits = prior
        .sample(n, &mut rng)
        .into_iter()
        .filter(|&x| score.eval(x) > 5.0)
        .count();
    let frac = hits as f64 / n as f64;
    let sd = (target * (1.0 - target) / n as f64).sqrt();
    assert!(
        (frac - target).abs() < 3.0 * sd + 1e-4,
        "frac {frac} vs grid {target}"
    );
}

#[test]
fn rejection_sampler_matches_truncated_density() {
    let prior = quad_prior();
    let score = angular();
    let mut rng = SeedPolicy::new(203).experiment(0).root();
    // Threshold calibrated for the m=5 level.
    let cal = calibrate_hard_threshold(
        &prior,
        &score,
        5.0,
        1e-3,
        (0.0, 7.99),
        1_000_000,
        200,
        &mut rng,
    )
    .unwrap();
    let samples = rejection_sample_truncation(
        &prior,
        &score,
        cal.knob,
        50_000,
        20_000_000,
        &mut rng,
    )
    .unwrap();
    let kde = kde_to_grid(&samples, 0.15, grid()).unwrap();
    let trunc = HardTruncation::estimate(score.clone(), cal.knob, &prior, grid()).unwrap();
    let analytic = trunc.grid_density(&prior, grid()).unwrap();
    let tv = kde.tv(&analytic).unwrap();
    assert!(tv < 0.06, "rejection KDE TV {tv}");
}

#[test]
fn snis_sampler_matches_tilt_density() {
    let prior = quad_prior();
    let score = angular();
    let mut rng = SeedPolicy::new(204).experiment(0).root();
    let cal = calibrate_tilt_beta(
        &prior,
        &score,
        5.0,
        1e-3,
        (0.0, 64.0),
        1_000_000,
        200,
        200.0,
        &mut rng,
    )
    .unwrap();
    let out = snis_resample_tilt(&prior, &score, cal.knob, 1_000_000, 50_000, 200.0, &mut rng)
        .unwrap();
    let kde = kde_to_grid(&out.points, 0.15, grid()).unwrap();
    let analytic = tilt_density(cal.knob);
    let tv = kde.tv(&analytic).unwrap();
    assert!(tv < 0.06, "snis KDE TV {tv}");
}

#[test]
fn retrieval_concentrates_near_its_boundary() {
    // The retrieval prefix is a hard truncation of the pool, so its shell
    // fraction at the implied threshold exceeds the matched tilt set's.
    let prior = quad_prior();
    let score = angular();
    let m = 6.0;
    let delta = 0.05;
    let mut rng = SeedPolicy::new(205).experiment(0).root();
    let pool = CandidatePool::from_prior(&prior, &score, 1_000_000, &mut rng).unwrap();
    let sel = retrieval_topk_match(&pool, m).unwrap();
    let threshold = score.eval(*sel.selected.last().unwrap());
    let retrieval_scores: Vec<f64> = sel.selected.iter().map(|&p| score.eval(p)).collect();
    let retrieval_law = ScalarScoreLaw::from_samples(retrieval_scores).unwrap();
    // Shell just above the implied threshold (nudged below the minimum
    // selected score so the whole selection counts as the event).
    let bm_retrieval = boundary_mass(&retrieval_law, threshold - 1e-9, delta).unwrap();

    let cal = calibrate_tilt_beta(
        &prior,
        &score,
        sel.achieved,
        1e-3,
        (0.0, 64.0),
        1_000_000,
        200,
        200.0,
        &mut rng,
    )
    .unwrap();
    let tilt_set =
        snis_resample_tilt(&prior, &score, cal.knob, 1_000_000, 200_000, 200.0, &mut rng)
            .unwrap();
    let tilt_scores: Vec<f64> = tilt_set.points.iter().map(|&p| score.eval(p)).collect();
    let tilt_law = ScalarScoreLaw::from_samples(tilt_scores).unwrap();
    let bm_tilt = boundary_mass(&tilt_law, threshold - 1e-9, delta).unwrap();
    assert!(
        bm_retrieval > bm_tilt,
        "retrieval shell {bm_retrieval} vs tilt shell {bm_tilt}"
    );
}

#[test]
fn optimization_mismatches_prior_more_than_snis() {
    let prior = quad_prior();
    let score = angular();
    let p = prior_density();
    let policy = SeedPolicy::new(206);
    let cfg = OptRunConfig::default();
    let mut rng = policy.experiment(1).root();
    for (i, m) in [5.0, 6.0, 7.0].into_iter().enumerate() {
        let or = opt_reg_map(
            &score,
            &Regularizer::NegSecondCoord,
            &cfg,
            m,
            policy.experiment(10 + i as u32),
        )
        .unwrap();
        let kl_or = kde_to_grid(&or.samples, 0.15, grid())
            .unwrap()
            .kl(&p)
            .unwrap()
            .finite()
            .unwrap();
        let cal = calibrate_tilt_beta(
            &prior,
            &score,
            or.achieved,
            1e-3,
            (0.0, 64.0),
            1_000_000,
            200,
            200.0,
            &mut rng,
        )
        .unwrap();
        let tilt_set =
            snis_resample_tilt(&prior, &score, cal.knob, 1_000_000, 50_000, 200.0, &mut rng)
                .unwrap();
        let kl_snis = kde_to_grid(&tilt_set.points, 0.15, grid())
            .unwrap()
            .kl(&p)
            .unwrap()
            .finite()
            .unwrap();
        assert!(
            kl_or > kl_snis,
            "m={m}: OR KL {kl_or} not above SNIS KL {kl_snis}"
        );
    }
}

#[test]
fn empirical_tilt_and_snis_share_the_estimator() {
    // Identity between the two code paths on one pool.
    let prior = quad_prior();
    let score = angular();
    let mut rng = SeedPolicy::new(207).experiment(0).root();
    let pool = CandidatePool::from_prior(&prior, &score, 50_000, &mut rng).unwrap();
    let set = empirical_tilt(&pool, 1.7);
    let direct = induced::constraints::snis_stats(pool.scores(), 1.7).mean;
    assert!((set.weighted_mean_score(&score) - direct).abs() < 1e-9);
    let _ = Point::ORIGIN;
}
