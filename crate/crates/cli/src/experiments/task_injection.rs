//! Task-injection distortion: the Legendre-dual lower bound on the KL cost of
//! meeting a task demand on top of the intrinsic tilt, swept over demand
//! levels, plus the synthetic Gaussian closed-form check.

use super::{stream, ExperimentOutcome};
use crate::config::ExperimentConfig;
use crate::report::Report;
use anyhow::Result;
use induced::constraints::{
    calibrate_tilt_beta, stratified_gaussian, task_distortion_lower_bound,
};
use induced::samplers::snis_resample_tilt;
use induced::{ScoreField, SeedPolicy};

pub fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<ExperimentOutcome> {
    let prior = cfg.prior();
    let score = cfg.score_field();
    let policy = SeedPolicy::new(cfg.master_seed);
    let streams = policy.experiment(stream::TASK);
    let mut outcome = ExperimentOutcome::default();

    // Intrinsic tilt at the first target level; the task score is the first
    // coordinate by default.
    let m = cfg.constraints.targets[0];
    let task_score = ScoreField::GaussianCoord { axis: 0 };
    let mut rng = streams.unit(1);
    let cal = calibrate_tilt_beta(
        &prior,
        &score,
        m,
        cfg.constraints.tol,
        (cfg.constraints.beta_bracket[0], cfg.constraints.beta_bracket[1]),
        cfg.constraints.calibration_pool,
        cfg.constraints.budget,
        cfg.constraints.ess_floor,
        &mut rng,
    )?;
    report.push_calibration("klsc", m, &cal);

    let mut rng = streams.unit(2);
    let tilt_draws = snis_resample_tilt(
        &prior,
        &score,
        cal.knob,
        cfg.task.snis_n,
        cfg.task.snis_n / 5,
        cfg.constraints.ess_floor,
        &mut rng,
    )?;
    if tilt_draws.ess_warning {
        eprintln!("task_injection: tilt resampling ESS {} below floor", tilt_draws.ess);
    }
    let task_values: Vec<f64> = tilt_draws.points.iter().map(|&p| task_score.eval(p)).collect();
    let baseline = task_values.iter().sum::<f64>() / task_values.len() as f64;
    report.push("task_injection", "dual_bound", format!("{m}"), "baseline_mean", baseline);

    let mut last = -1.0;
    for &offset in &cfg.task.r_offsets {
        let r = baseline + offset;
        let bound = task_distortion_lower_bound(
            &task_values,
            r,
            cfg.task.eta_max,
            cfg.constraints.ess_floor,
        )?;
        if !bound.reliable {
            eprintln!("task_injection: dual estimate at r={r} has low ESS {}", bound.ess);
        }
        report.push(
            "task_injection",
            "dual_bound",
            format!("{offset:.2}"),
            "bound",
            bound.value,
        );
        if offset == 0.0 && bound.value.abs() > 1e-3 {
            eprintln!("task_injection: bound at baseline is {}", bound.value);
            outcome.ordering_failures += 1;
        }
        if offset > 0.1 && bound.value <= 0.0 {
            eprintln!("task_injection: bound not positive at offset {offset}");
            outcome.ordering_failures += 1;
        }
        if bound.value < last - 1e-9 {
            eprintln!("task_injection: bound not monotone at offset {offset}");
            outcome.ordering_failures += 1;
        }
        last = bound.value;
    }

    // Synthetic Gaussian task score: the dual bound must match the Legendre
    // transform (r - mu)^2 / (2 sigma^2). The stratified sample keeps the
    // check about the optimizer rather than sampling noise.
    let (mu_f, sigma_f) = (cfg.task.synthetic_mu, cfg.task.synthetic_sigma);
    let synthetic = stratified_gaussian(mu_f, sigma_f, cfg.task.synthetic_n);
    for &offset in &[0.6, 0.9, 1.1] {
        let r = mu_f + offset;
        let expected = offset * offset / (2.0 * sigma_f * sigma_f);
        let bound =
            task_distortion_lower_bound(&synthetic, r, cfg.task.eta_max, cfg.constraints.ess_floor)?;
        let rel = (bound.value - expected).abs() / expected;
        report.push(
            "task_injection",
            "synthetic_gaussian",
            format!("{offset:.2}"),
            "bound",
            bound.value,
        );
        report.push(
            "task_injection",
            "synthetic_gaussian",
            format!("{offset:.2}"),
            "legendre_rel_err",
            rel,
        );
        if rel >= 1e-3 {
            eprintln!("task_injection: synthetic bound off by {rel} at offset {offset}");
            outcome.ordering_failures += 1;
        }
    }
    Ok(outcome)
}
