//! The scalar law of `S = s(X)` and the tail quantities built on it:
//! survival, boundary (shell) mass, and hazard rates for the truncated and
//! tilted families.

use crate::error::{Error, Result};
use crate::gmm::IsotropicGmm;

/// Law of the scalar score, as either raw (optionally weighted) samples or a
/// 1-D density on a uniform midpoint grid.
#[derive(Debug, Clone)]
pub enum ScalarScoreLaw {
    Samples {
        values: Vec<f64>,
        weights: Option<Vec<f64>>,
    },
    Density1d {
        lo: f64,
        hi: f64,
        /// Density values at cell midpoints, normalized to integrate to one.
        pdf: Vec<f64>,
    },
}

impl ScalarScoreLaw {
    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        Ok(ScalarScoreLaw::Samples {
            values,
            weights: None,
        })
    }

    pub fn from_weighted_samples(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::EmptySampleSet);
        }
        Ok(ScalarScoreLaw::Samples {
            values,
            weights: Some(weights),
        })
    }

    /// Normalize midpoint density values on `[lo, hi]` into a law.
    pub fn from_density_grid(lo: f64, hi: f64, mut pdf: Vec<f64>) -> Result<Self> {
        if pdf.len() < 2 || !hi.is_finite() || !lo.is_finite() || hi <= lo {
            return Err(Error::InvalidParameter("degenerate 1-D density".into()));
        }
        let du = (hi - lo) / pdf.len() as f64;
        let total: f64 = pdf.iter().sum::<f64>() * du;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(
                "1-D density is not normalizable".into(),
            ));
        }
        pdf.iter_mut().for_each(|v| *v /= total);
        Ok(ScalarScoreLaw::Density1d { lo, hi, pdf })
    }

    /// Standard normal law tabulated on `[lo, hi]`.
    pub fn standard_normal(lo: f64, hi: f64, n_bins: usize) -> Self {
        let du = (hi - lo) / n_bins as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let pdf: Vec<f64> = (0..n_bins)
            .map(|j| {
                let u = lo + (j as f64 + 0.5) * du;
                norm * (-0.5 * u * u).exp()
            })
            .collect();
        ScalarScoreLaw::from_density_grid(lo, hi, pdf).expect("normal law is normalizable")
    }

    /// Law of the angular deviation score under the mixture prior, built from
    /// the exact angular marginal (radial integral in closed form via erf).
    ///
    /// The score `u = scale (1 - cos(theta - theta0))` maps to the deviation
    /// angle `a = arccos(1 - u/scale)`, so each bin's mass is the smooth
    /// integral `int [f_theta(theta0 + a) + f_theta(theta0 - a)] da` over the
    /// bin's angle range; integrating in `a` avoids the inverse-square-root
    /// endpoint singularities of the score density. Stored values are bin
    /// averages.
    pub fn angular_under_gmm(
        prior: &IsotropicGmm,
        theta0: f64,
        scale: f64,
        n_bins: usize,
    ) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        let hi = 2.0 * scale;
        let du = hi / n_bins as f64;
        const SUBSTEPS: usize = 8;
        let angle_at = |u: f64| (1.0 - u / scale).clamp(-1.0, 1.0).acos();
        let pdf: Vec<f64> = (0..n_bins)
            .map(|j| {
                let a_lo = angle_at(j as f64 * du);
                let a_hi = angle_at((j + 1) as f64 * du);
                let da = (a_hi - a_lo) / SUBSTEPS as f64;
                let mut mass = 0.0;
                for k in 0..SUBSTEPS {
                    let a = a_lo + (k as f64 + 0.5) * da;
                    mass += (angular_marginal(prior, theta0 + a)
                        + angular_marginal(prior, theta0 - a))
                        * da;
                }
                mass / du
            })
            .collect();
        ScalarScoreLaw::from_density_grid(0.0, hi, pdf)
    }

    /// Reweight a density law by `exp(beta u)` (the tilted score law).
    pub fn exponential_tilt(&self, beta: f64) -> Result<Self> {
        match self {
            ScalarScoreLaw::Density1d { lo, hi, pdf } => {
                let du = (hi - lo) / pdf.len() as f64;
                // Shift by the max exponent before exponentiating.
                let max = beta * if beta >= 0.0 { *hi } else { *lo };
                let tilted: Vec<f64> = pdf
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| {
                        let u = lo + (j as f64 + 0.5) * du;
                        f * (beta * u - max).exp()
                    })
                    .collect();
                ScalarScoreLaw::from_density_grid(*lo, *hi, tilted)
            }
            ScalarScoreLaw::Samples { .. } => Err(Error::NeedsDensityLaw),
        }
    }

    /// Survival `P(S > m)`.
    pub fn survival(&self, m: f64) -> f64 {
        match self {
            ScalarScoreLaw::Samples { values, weights } => {
                weighted_fraction(values, weights.as_deref(), |v| v > m)
            }
            ScalarScoreLaw::Density1d { .. } => self.tail_integral_weighted(m, 0.0),
        }
    }

    /// `int_m^hi f(u) exp(beta (u - m)) du` with partial-cell handling at `m`.
    fn tail_integral_weighted(&self, m: f64, beta: f64) -> f64 {
        let ScalarScoreLaw::Density1d { lo, hi, pdf } = self else {
            unreachable!("callers check the representation");
        };
        if m >= *hi {
            return 0.0;
        }
        let du = (hi - lo) / pdf.len() as f64;
        let m_eff = m.max(*lo);
        let mut acc = 0.0;
        for (j, &f) in pdf.iter().enumerate() {
            let cell_lo = lo + j as f64 * du;
            let cell_hi = cell_lo + du;
            if cell_hi <= m_eff {
                continue;
            }
            let a = cell_lo.max(m_eff);
            // Exact integral of exp(beta(u-m)) over [a, cell_hi], density
            // constant within the cell.
            let piece = if beta == 0.0 {
                cell_hi - a
            } else {
                ((beta * (cell_hi - m)).exp() - (beta * (a - m)).exp()) / beta
            };
            acc += f * piece;
        }
        acc
    }

    /// Density at `m` by linear interpolation between midpoints.
    fn density_at(&self, m: f64) -> Result<f64> {
        let ScalarScoreLaw::Density1d { lo, hi, pdf } = self else {
            return Err(Error::NeedsDensityLaw);
        };
        if m < *lo || m > *hi {
            return Ok(0.0);
        }
        let du = (hi - lo) / pdf.len() as f64;
        let t = (m - lo) / du - 0.5;
        if t <= 0.0 {
            return Ok(pdf[0]);
        }
        let last = pdf.len() - 1;
        if t >= last as f64 {
            return Ok(pdf[last]);
        }
        let j = t.floor() as usize;
        let frac = t - j as f64;
        Ok(pdf[j] * (1.0 - frac) + pdf[j + 1] * frac)
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarScoreLaw::Samples { values, weights } => match weights {
                Some(w) => {
                    let wsum: f64 = w.iter().sum();
                    values.iter().zip(w).map(|(&v, &w)| v * w).sum::<f64>() / wsum
                }
                None => values.iter().sum::<f64>() / values.len() as f64,
            },
            ScalarScoreLaw::Density1d { lo, hi, pdf } => {
                let du = (hi - lo) / pdf.len() as f64;
                pdf.iter()
                    .enumerate()
                    .map(|(j, &f)| f * (lo + (j as f64 + 0.5) * du))
                    .sum::<f64>()
                    * du
            }
        }
    }
}

fn weighted_fraction<F: Fn(f64) -> bool>(values: &[f64], weights: Option<&[f64]>, pred: F) -> f64 {
    match weights {
        Some(w) => {
            let total: f64 = w.iter().sum();
            values
                .iter()
                .zip(w)
                .filter(|(&v, _)| pred(v))
                .map(|(_, &w)| w)
                .sum::<f64>()
                / total
        }
        None => {
            values.iter().filter(|&&v| pred(v)).count() as f64 / values.len() as f64
        }
    }
}

/// Angular marginal of the mixture at angle `theta`: the radial integral of
/// the density along the ray, in closed form per component.
pub fn angular_marginal(prior: &IsotropicGmm, theta: f64) -> f64 {
    use statrs::function::erf::erfc;
    let sigma = prior.sigma();
    let var = sigma * sigma;
    let (ct, st) = (theta.cos(), theta.sin());
    let k = prior.n_components() as f64;
    let mut acc = 0.0;
    for mu in prior.means() {
        let b = ct * mu.x + st * mu.y;
        let perp_sq = mu.norm_sq() - b * b;
        // int_0^inf r exp(-(r-b)^2 / (2 var)) dr
        //   = var exp(-b^2/(2 var)) + b sigma sqrt(2 pi) Phi(b / sigma)
        let phi_b = 0.5 * erfc(-b / (sigma * std::f64::consts::SQRT_2));
        let radial = var * (-b * b / (2.0 * var)).exp()
            + b * sigma * (2.0 * std::f64::consts::PI).sqrt() * phi_b;
        acc += (-perp_sq / (2.0 * var)).exp() * radial;
    }
    acc / (2.0 * std::f64::consts::PI * var * k)
}

/// Conditional shell probability `P(m < S < m + delta | S > m)`.
pub fn boundary_mass(law: &ScalarScoreLaw, m: f64, delta: f64) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "shell width {delta} must be positive"
        )));
    }
    let above = law.survival(m);
    if above <= 0.0 {
        return Err(Error::ZeroSurvival(m));
    }
    let shell = match law {
        ScalarScoreLaw::Samples { values, weights } => {
            weighted_fraction(values, weights.as_deref(), |v| v > m && v < m + delta)
        }
        ScalarScoreLaw::Density1d { .. } => law.survival(m) - law.survival(m + delta),
    };
    Ok((shell / above).clamp(0.0, 1.0))
}

/// Hazard rate `f_S(m) / P(S > m)` of the score law at `m`.
pub fn hazard_hard(law: &ScalarScoreLaw, m: f64) -> Result<f64> {
    hazard_klsc(law, m, 0.0)
}

/// Hazard of the tilted law:
/// `f_S(m) e^{beta m} / int_m f_S(u) e^{beta u} du`, computed with the
/// exponent shifted to `m` so large tilts stay finite.
pub fn hazard_klsc(law: &ScalarScoreLaw, m: f64, beta: f64) -> Result<f64> {
    let f_m = law.density_at(m)?;
    let tail = law.tail_integral_weighted(m, beta);
    if tail <= 0.0 {
        return Err(Error::ZeroSurvival(m));
    }
    Ok(f_m / tail)
}
