//! Intrinsic score fields and regularizers.
//!
//! A score field is a scalar function over the toy space together with its
//! analytic gradient. The angular deviation score is the workhorse: it
//! depends only on the polar angle, so its range is exactly
//! `[0, 2*scale]` and it is invariant under radial scaling.

use crate::error::{Error, Result};
use crate::point::Point;
use std::fmt;
use std::sync::Arc;

type EvalFn = dyn Fn(Point) -> f64 + Send + Sync;
type GradFn = dyn Fn(Point) -> Point + Send + Sync;

/// User-supplied score with analytic gradient.
pub struct CustomScore {
    pub label: String,
    pub eval: Box<EvalFn>,
    pub grad: Box<GradFn>,
}

#[derive(Clone)]
pub enum ScoreField {
    /// `s(x) = scale * (1 - cos(angle(x) - theta0))`; gradient singular at the origin.
    Angular { theta0: f64, scale: f64 },
    /// `s(x) = x_axis` (axis 0 or 1); linear, used for Gaussian closed forms.
    GaussianCoord { axis: usize },
    /// `s(x) = base(x) - lambda * R(x)`, the objective behind mode-seeking optimization.
    Gibbs {
        base: Box<ScoreField>,
        lambda: f64,
        regularizer: Regularizer,
    },
    Custom(Arc<CustomScore>),
}

impl fmt::Debug for ScoreField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreField::Angular { theta0, scale } => f
                .debug_struct("Angular")
                .field("theta0", theta0)
                .field("scale", scale)
                .finish(),
            ScoreField::GaussianCoord { axis } => {
                f.debug_struct("GaussianCoord").field("axis", axis).finish()
            }
            ScoreField::Gibbs {
                base,
                lambda,
                regularizer,
            } => f
                .debug_struct("Gibbs")
                .field("base", base)
                .field("lambda", lambda)
                .field("regularizer", regularizer)
                .finish(),
            ScoreField::Custom(c) => write!(f, "Custom({})", c.label),
        }
    }
}

#[derive(Clone)]
pub enum Regularizer {
    /// `R(x) = -x_2`: rewards large second coordinate when subtracted with weight lambda.
    NegSecondCoord,
    Custom(Arc<CustomScore>),
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::NegSecondCoord => write!(f, "NegSecondCoord"),
            Regularizer::Custom(c) => write!(f, "Custom({})", c.label),
        }
    }
}

impl Regularizer {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            Regularizer::NegSecondCoord => -x.y,
            Regularizer::Custom(c) => (c.eval)(x),
        }
    }

    pub fn grad(&self, x: Point) -> Point {
        match self {
            Regularizer::NegSecondCoord => Point::new(0.0, -1.0),
            Regularizer::Custom(c) => (c.grad)(x),
        }
    }
}

impl ScoreField {
    pub fn angular(theta0: f64, scale: f64) -> Self {
        ScoreField::Angular { theta0, scale }
    }

    /// Evaluate the score. Total on finite input.
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            ScoreField::Angular { theta0, scale } => scale * (1.0 - (x.angle() - theta0).cos()),
            ScoreField::GaussianCoord { axis } => {
                if *axis == 0 {
                    x.x
                } else {
                    x.y
                }
            }
            ScoreField::Gibbs {
                base,
                lambda,
                regularizer,
            } => base.eval(x) - lambda * regularizer.value(x),
            ScoreField::Custom(c) => (c.eval)(x),
        }
    }

    /// Analytic gradient. The angular score errors at the exact origin; near
    /// the origin the gradient is finite but grows like `scale / |x|`, so
    /// iterative callers apply their own guard radius.
    pub fn grad(&self, x: Point) -> Result<Point> {
        match self {
            ScoreField::Angular { theta0, scale } => {
                let r_sq = x.norm_sq();
                if r_sq == 0.0 {
                    return Err(Error::OriginSingularity);
                }
                let dtheta = Point::new(-x.y / r_sq, x.x / r_sq);
                Ok(dtheta * (scale * (x.angle() - theta0).sin()))
            }
            ScoreField::GaussianCoord { axis } => Ok(if *axis == 0 {
                Point::new(1.0, 0.0)
            } else {
                Point::new(0.0, 1.0)
            }),
            ScoreField::Gibbs {
                base,
                lambda,
                regularizer,
            } => {
                let g = base.grad(x)?;
                Ok(g - regularizer.grad(x) * *lambda)
            }
            ScoreField::Custom(c) => Ok((c.grad)(x)),
        }
    }
}

/// `s(x) - lambda * R(x)`: the regularized objective and, read as a log
/// density, the unnormalized Gibbs law it is the mode of.
pub fn gibbs_log_density_unnorm(
    score: &ScoreField,
    reg: &Regularizer,
    lambda: f64,
    x: Point,
) -> f64 {
    score.eval(x) - lambda * reg.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn angular() -> ScoreField {
        ScoreField::angular(FRAC_PI_4, 4.0)
    }

    fn central_diff(score: &ScoreField, x: Point, h: f64) -> Point {
        let fx = (score.eval(Point::new(x.x + h, x.y)) - score.eval(Point::new(x.x - h, x.y)))
            / (2.0 * h);
        let fy = (score.eval(Point::new(x.x, x.y + h)) - score.eval(Point::new(x.x, x.y - h)))
            / (2.0 * h);
        Point::new(fx, fy)
    }

    #[test]
    fn angular_reference_values() {
        let s = angular();
        assert_abs_diff_eq!(s.eval(Point::new(1.0, 1.0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eval(Point::new(-1.0, -1.0)), 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            s.eval(Point::new(1.0, 0.0)),
            4.0 * (1.0 - FRAC_PI_4.cos()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s.eval(Point::new(1.0, 0.0)), 1.171573, epsilon = 1e-6);
    }

    #[test]
    fn angular_gradient_matches_finite_difference() {
        let s = angular();
        let g = s.grad(Point::new(1.0, 0.0)).unwrap();
        let fd = central_diff(&s, Point::new(1.0, 0.0), 1e-6);
        assert_abs_diff_eq!(g.x, fd.x, epsilon = 1e-6);
        assert_abs_diff_eq!(g.y, fd.y, epsilon = 1e-6);
    }

    #[test]
    fn angular_gradient_origin_is_domain_error() {
        assert!(matches!(
            angular().grad(Point::ORIGIN),
            Err(Error::OriginSingularity)
        ));
    }

    #[test]
    fn radial_scaling_invariance_and_range() {
        let s = angular();
        let mut rng = crate::rng::SeedPolicy::new(3).experiment(0).root();
        for _ in 0..200 {
            let x = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            if x.norm() < 1e-3 {
                continue;
            }
            let v = s.eval(x);
            assert!((0.0..=8.0).contains(&v));
            for c in [0.5, 2.0, 17.0] {
                assert_abs_diff_eq!(s.eval(x * c), v, epsilon = 1e-9);
            }
        }
        // Extremes are attained on the target ray and its antipode.
        assert_abs_diff_eq!(s.eval(Point::new(3.0, 3.0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eval(Point::new(-0.1, -0.1)), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_check_all_kinds() {
        let fields = vec![
            angular(),
            ScoreField::GaussianCoord { axis: 0 },
            ScoreField::Gibbs {
                base: Box::new(angular()),
                lambda: 1.3,
                regularizer: Regularizer::NegSecondCoord,
            },
        ];
        let mut rng = crate::rng::SeedPolicy::new(9).experiment(0).root();
        for field in &fields {
            let mut max_rel = 0.0f64;
            let mut checked = 0;
            while checked < 1000 {
                let x = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                if x.norm() < 0.05 {
                    continue;
                }
                checked += 1;
                let g = field.grad(x).unwrap();
                let fd = central_diff(field, x, 1e-5);
                let denom = fd.norm().max(1e-8);
                max_rel = max_rel.max((g - fd).norm() / denom);
            }
            assert!(max_rel < 1e-4, "{field:?}: max rel error {max_rel}");
        }
    }

    #[test]
    fn gibbs_reference_values() {
        let s = angular();
        let reg = Regularizer::NegSecondCoord;
        let x = Point::new(0.0, 1.0);
        // lambda = 0 reduces to the bare score.
        assert_eq!(gibbs_log_density_unnorm(&s, &reg, 0.0, x), s.eval(x));
        let v = gibbs_log_density_unnorm(&s, &reg, 1.0, x);
        assert_abs_diff_eq!(v, 4.0 * (1.0 - FRAC_PI_4.cos()) + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.171573, epsilon = 1e-6);
    }

    #[test]
    fn angular_max_at_antipode() {
        let s = ScoreField::angular(PI / 3.0, 4.0);
        let antipode = Point::new((PI / 3.0 + PI).cos(), (PI / 3.0 + PI).sin());
        assert_abs_diff_eq!(s.eval(antipode), 8.0, epsilon = 1e-12);
    }
}
