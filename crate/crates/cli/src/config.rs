//! Experiment configuration: one flat TOML file, grouped per subsystem, with
//! defaults matching the reference protocol. The parsed form round-trips
//! through serialization unchanged, and its serialized bytes are hashed into
//! every report row.

use anyhow::{Context, Result};
use induced::diffusion::{build_linear_schedule, DdpmSchedule, GuidanceConfig};
use induced::samplers::OptRunConfig;
use induced::{Grid2D, IsotropicGmm, Point, ScoreField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub prior: PriorConfig,
    pub score: ScoreConfig,
    pub grid: GridConfig,
    pub constraints: ConstraintsConfig,
    pub kde: KdeConfig,
    pub samplers: SamplersConfig,
    pub opt_reg: OptRegConfig,
    pub ddpm: DdpmConfig,
    pub guidance: GuidanceSection,
    pub task: TaskConfig,
    pub typical: TypicalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// Mode coordinates, one `[x, y]` pair per component.
    pub means: Vec<[f64; 2]>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    pub theta0: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub targets: Vec<f64>,
    pub delta: f64,
    pub eps: f64,
    pub calibration_pool: usize,
    pub tol: f64,
    pub hard_bracket: [f64; 2],
    pub beta_bracket: [f64; 2],
    pub ess_floor: f64,
    pub budget: usize,
    pub score_law_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeConfig {
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplersConfig {
    /// Output ensemble size per method.
    pub sampler_n: usize,
    pub retrieval_pool: usize,
    /// Matched-faithfulness gate |achieved - m|.
    pub match_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptRegConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    pub init_box: f64,
    pub lambda_bracket: [f64; 2],
    pub tol: f64,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpmConfig {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSection {
    pub zeta_bar: f64,
    pub strength: f64,
    pub gamma_bracket: [f64; 2],
    pub cal_n: usize,
    pub cal_tol: f64,
    pub budget: usize,
    pub cap: Option<f64>,
    pub exact_jacobian: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub eta_max: f64,
    /// Demand offsets above the baseline task-score mean.
    pub r_offsets: Vec<f64>,
    pub synthetic_mu: f64,
    pub synthetic_sigma: f64,
    pub synthetic_n: usize,
    pub snis_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypicalConfig {
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n_mc: usize,
    /// `(eta, shell_mass)` pairs for the mode-cover TV lower bound.
    pub tv_lower_pairs: Vec<[f64; 2]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 42,
            prior: PriorConfig {
                means: vec![[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]],
                sigma: 0.8,
            },
            score: ScoreConfig {
                theta0: std::f64::consts::FRAC_PI_4,
                scale: 4.0,
            },
            grid: GridConfig {
                xmin: -6.0,
                xmax: 6.0,
                ymin: -6.0,
                ymax: 6.0,
                nx: 600,
                ny: 600,
            },
            constraints: ConstraintsConfig {
                targets: vec![5.0, 6.0, 7.0],
                delta: 0.05,
                eps: 0.08,
                calibration_pool: 2_000_000,
                tol: 1e-3,
                hard_bracket: [0.0, 7.99],
                beta_bracket: [0.0, 64.0],
                ess_floor: 200.0,
                budget: 200,
                score_law_bins: 4096,
            },
            kde: KdeConfig { bandwidth: 0.15 },
            samplers: SamplersConfig {
                sampler_n: 50_000,
                retrieval_pool: 1_000_000,
                match_tol: 0.1,
            },
            opt_reg: OptRegConfig {
                restarts: 256,
                steps: 400,
                step_size: 0.05,
                init_box: 5.0,
                lambda_bracket: [0.0, 20.0],
                tol: 0.05,
                budget: 60,
            },
            ddpm: DdpmConfig {
                steps: 1000,
                beta_min: 1e-4,
                beta_max: 0.02,
            },
            guidance: GuidanceSection {
                zeta_bar: 0.001,
                strength: 1.0,
                gamma_bracket: [0.0, 32.0],
                cal_n: 4000,
                cal_tol: 0.1,
                budget: 40,
                cap: None,
                exact_jacobian: false,
            },
            task: TaskConfig {
                eta_max: 20.0,
                r_offsets: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
                synthetic_mu: 0.3,
                synthetic_sigma: 0.9,
                synthetic_n: 1_000_000,
                snis_n: 1_000_000,
            },
            typical: TypicalConfig {
                dims: vec![2, 8, 16, 64],
                alphas: vec![0.3, 0.5, 0.7],
                n_mc: 200_000,
                tv_lower_pairs: vec![[0.0, 0.0], [0.1, 0.01], [0.0, 1.2341e-4]],
            },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Short hex digest of the serialized config, echoed into every CSV row.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }

    pub fn prior(&self) -> IsotropicGmm {
        let means = self
            .prior
            .means
            .iter()
            .map(|&[x, y]| Point::new(x, y))
            .collect();
        IsotropicGmm::new(means, self.prior.sigma)
    }

    pub fn score_field(&self) -> ScoreField {
        ScoreField::angular(self.score.theta0, self.score.scale)
    }

    pub fn grid2d(&self) -> Grid2D {
        Grid2D::new(
            self.grid.xmin,
            self.grid.xmax,
            self.grid.ymin,
            self.grid.ymax,
            self.grid.nx,
            self.grid.ny,
        )
    }

    pub fn schedule(&self) -> induced::Result<DdpmSchedule> {
        build_linear_schedule(self.ddpm.steps, self.ddpm.beta_min, self.ddpm.beta_max)
    }

    pub fn guidance_config(&self) -> GuidanceConfig {
        GuidanceConfig {
            zeta: vec![self.guidance.zeta_bar; self.ddpm.steps + 1],
            strength: self.guidance.strength,
            cap: self.guidance.cap,
            exact_jacobian: self.guidance.exact_jacobian,
        }
    }

    pub fn opt_run_config(&self) -> OptRunConfig {
        OptRunConfig {
            restarts: self.opt_reg.restarts,
            steps: self.opt_reg.steps,
            step_size: self.opt_reg.step_size,
            init_box: self.opt_reg.init_box,
            lambda_bracket: (self.opt_reg.lambda_bracket[0], self.opt_reg.lambda_bracket[1]),
            tol: self.opt_reg.tol,
            budget: self.opt_reg.budget,
        }
    }

    /// One-line grid descriptor for report rows.
    pub fn grid_echo(&self) -> String {
        format!(
            "[{},{}]x[{},{}]@{}x{}",
            self.grid.xmin, self.grid.xmax, self.grid.ymin, self.grid.ymax, self.grid.nx,
            self.grid.ny
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, parsed);
        assert_eq!(cfg.hash(), parsed.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ExperimentConfig::default().to_toml();
        text.push_str("\nbogus_key = 1\n");
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn default_protocol_values() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.constraints.targets, vec![5.0, 6.0, 7.0]);
        assert_eq!(cfg.constraints.delta, 0.05);
        assert_eq!(cfg.constraints.eps, 0.08);
        assert_eq!(cfg.prior.sigma, 0.8);
        assert_eq!(cfg.score.scale, 4.0);
        assert_eq!(cfg.score.theta0, std::f64::consts::FRAC_PI_4);
    }
}
