//! Diffusion diagnostics: oracle-score accuracy, unguided marginal fidelity
//! along the reverse trajectory, and monotonicity of the achieved mean score
//! in the guidance strength.

use super::{stream, ExperimentOutcome};
use crate::config::ExperimentConfig;
use crate::report::Report;
use anyhow::Result;
use induced::diffusion::{
    energydps_reverse_to, energydps_sample, noised_gmm_at, oracle_score_of, GuidanceConfig,
};
use induced::grid::kde_to_grid;
use induced::{Point, SeedPolicy};
use rand::Rng;

pub fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<ExperimentOutcome> {
    let prior = cfg.prior();
    let score = cfg.score_field();
    let grid = cfg.grid2d();
    let sched = cfg.schedule()?;
    let n_steps = sched.n_steps();
    let policy = SeedPolicy::new(cfg.master_seed);
    let streams = policy.experiment(stream::DIFFUSION);
    let mut outcome = ExperimentOutcome::default();

    // Oracle score against central finite differences at random steps/points.
    let mut rng = streams.unit(1);
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    for _ in 0..1000 {
        let i = rng.random_range(1..=n_steps);
        let noised = noised_gmm_at(&prior, &sched, i);
        let x = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let s = oracle_score_of(&noised, x);
        let fd = Point::new(
            (noised.log_pdf(Point::new(x.x + h, x.y)) - noised.log_pdf(Point::new(x.x - h, x.y)))
                / (2.0 * h),
            (noised.log_pdf(Point::new(x.x, x.y + h)) - noised.log_pdf(Point::new(x.x, x.y - h)))
                / (2.0 * h),
        );
        max_rel = max_rel.max((s - fd).norm() / fd.norm().max(1e-6));
    }
    report.push("diffusion_check", "oracle", "-", "score_fd_max_rel_err", max_rel);
    if max_rel >= 1e-4 {
        eprintln!("diffusion_check: oracle score error {max_rel}");
        outcome.ordering_failures += 1;
    }

    // Unguided marginals against the analytic noised mixtures.
    let unguided = GuidanceConfig::unguided(n_steps);
    for (idx, stop) in [n_steps, n_steps / 2, n_steps / 4, 0].into_iter().enumerate() {
        let pts = energydps_reverse_to(
            &prior,
            &sched,
            &unguided,
            0.0,
            &score,
            cfg.samplers.sampler_n,
            stop,
            policy.experiment(stream::DIFFUSION + 10 + idx as u32),
        )?;
        let kde = kde_to_grid(&pts, cfg.kde.bandwidth, grid)?;
        let analytic = noised_gmm_at(&prior, &sched, stop).grid_density(grid)?;
        let tv = kde.tv(&analytic)?;
        let label = if stop == 0 { "prior".to_string() } else { format!("i{stop}") };
        report.push("diffusion_check", "unguided_marginal", label, "tv", tv);
        let gate = if stop == 0 { 0.05 } else { 0.06 };
        if tv >= gate {
            eprintln!("diffusion_check: unguided marginal TV {tv} at stop {stop}");
            outcome.ordering_failures += 1;
        }
    }

    // Achieved mean is nondecreasing in guidance strength under common seeds.
    let guidance = cfg.guidance_config();
    let mut last = f64::NEG_INFINITY;
    for strength in [0.0, 0.5, 1.0, 2.0] {
        let out = energydps_sample(
            &prior,
            &sched,
            &guidance,
            strength,
            &score,
            cfg.guidance.cal_n,
            policy.experiment(stream::DIFFUSION + 20),
        )?;
        report.push(
            "diffusion_check",
            "guidance_sweep",
            format!("{strength}"),
            "achieved_mean",
            out.achieved_mean,
        );
        if out.achieved_mean < last {
            eprintln!(
                "diffusion_check: mean not monotone at strength {strength}: {} < {last}",
                out.achieved_mean
            );
            outcome.ordering_failures += 1;
        }
        last = out.achieved_mean;
    }
    Ok(outcome)
}
