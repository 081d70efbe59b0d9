use rand::Rng;
use serde::Serialize;

use crate::curves::ParametrizedCurve;
use crate::error::{Error, Result};
use crate::group::{HorizontalVector, Point};
use crate::metric::{self, Ball};
use crate::sampling;

use super::field::ScalarField;

/// Difference-quotient estimate with an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub error: f64,
    /// Index of the step whose extrapolation was selected.
    pub level: usize,
}

/// `t_k = 2^{-k}` for `k = 6..=20`.
pub fn default_steps() -> Vec<f64> {
    (6..=20).map(|k| 2f64.powi(-k)).collect()
}

fn check_steps(steps: &[f64]) -> Result<()> {
    if steps.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 steps".into()));
    }
    if steps.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || steps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("steps must be positive and strictly decreasing".into()));
    }
    Ok(())
}

/// Symmetric quotients of `fun` at `at`, Richardson-extrapolated between
/// consecutive steps; the level with the smallest change between successive
/// extrapolations is reported, and that change is the error bar.
pub fn derivative_1d<F: Fn(f64) -> f64>(fun: F, at: f64, steps: &[f64]) -> Result<DerivativeEstimate> {
    check_steps(steps)?;
    let quotients: Vec<f64> = steps.iter().map(|&t| (fun(at + t) - fun(at - t)) / (2.0 * t)).collect();
    if quotients.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite("difference quotient"));
    }
    let scale = fun(at).abs().max(1.0);
    let mut growth = 0;
    for k in 1..quotients.len() {
        let noise = 8.0 * f64::EPSILON * scale / steps[k];
        let (prev, cur) = (quotients[k - 1].abs(), quotients[k].abs());
        if cur > 1.1 * prev + noise && cur > noise {
            growth += 1;
            if growth >= 2 {
                return Err(Error::Diverging(quotients[k - 1], quotients[k]));
            }
        } else {
            growth = 0;
        }
    }
    let extrapolated: Vec<f64> = (1..quotients.len())
        .map(|k| {
            let r2 = (steps[k - 1] / steps[k]).powi(2);
            (r2 * quotients[k] - quotients[k - 1]) / (r2 - 1.0)
        })
        .collect();
    let mut best = DerivativeEstimate {
        value: extrapolated[0],
        error: f64::INFINITY,
        level: 1,
    };
    for k in 1..extrapolated.len() {
        let diff = (extrapolated[k] - extrapolated[k - 1]).abs();
        if diff < best.error {
            best = DerivativeEstimate {
                value: extrapolated[k],
                error: diff,
                level: k + 1,
            };
        }
    }
    Ok(best)
}

/// `E f(x)`: derivative of `t -> f(x + t E(x))` at `0`.
pub fn directional_derivative(f: &ScalarField, x: &Point, e: &HorizontalVector, steps: &[f64]) -> Result<DerivativeEstimate> {
    e.ensure_unit()?;
    if e.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: e.n(),
        });
    }
    derivative_1d(|t| f.eval(&e.line_point(x, t)), 0.0, steps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub along_g: DerivativeEstimate,
    pub along_h: DerivativeEstimate,
    pub difference: f64,
    pub agree: bool,
}

/// Tolerance for matching the two curves' position and velocity.
const CURVE_MATCH_TOL: f64 = 1e-6;

fn check_tangent<C: ParametrizedCurve + ?Sized>(curve: &C, at: f64, x: &Point, e: &HorizontalVector, which: &str) -> Result<()> {
    let pos = curve.point_at(at);
    if pos.euclidean_dist(x) > CURVE_MATCH_TOL {
        return Err(Error::InvalidArgument(format!(
            "curve {which} does not pass through x at the common parameter"
        )));
    }
    let h = 1e-6;
    let plus = curve.point_at(at + h);
    let minus = curve.point_at(at - h);
    let dev = plus
        .projection()
        .iter()
        .zip(minus.projection())
        .zip(e.coeffs())
        .map(|((a, b), c)| ((a - b) / (2.0 * h) - c).powi(2))
        .sum::<f64>()
        .sqrt();
    if dev > 1e-4 {
        return Err(Error::InvalidArgument(format!(
            "curve {which} is not tangent to E at the common parameter (deviation {dev:e})"
        )));
    }
    Ok(())
}

/// Compares `(f o g)'` and `(f o h)'` at the common parameter `at`, where
/// both curves pass through `x` with projected velocity `p(E)`.
pub fn curve_directional_consistency<G, H>(
    f: &ScalarField,
    x: &Point,
    e: &HorizontalVector,
    g: &G,
    h: &H,
    at: f64,
    steps: &[f64],
) -> Result<ConsistencyReport>
where
    G: ParametrizedCurve + ?Sized,
    H: ParametrizedCurve + ?Sized,
{
    e.ensure_unit()?;
    check_tangent(g, at, x, e, "g")?;
    check_tangent(h, at, x, e, "h")?;
    let along_g = derivative_1d(|t| f.eval(&g.point_at(t)), at, steps)?;
    let along_h = derivative_1d(|t| f.eval(&h.point_at(t)), at, steps)?;
    let difference = (along_g.value - along_h.value).abs();
    Ok(ConsistencyReport {
        along_g,
        along_h,
        difference,
        agree: difference <= along_g.error + along_h.error + 1e-8,
    })
}

/// Sampling region: the CC ball minus an inner ball of radius `inner`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Region {
    pub ball: Ball,
    pub inner: f64,
}

impl Region {
    pub fn ball(center: Point, radius: f64) -> Self {
        Region {
            ball: Ball { center, radius },
            inner: 0.0,
        }
    }

    pub fn annulus(center: Point, inner: f64, outer: f64) -> Self {
        Region {
            ball: Ball { center, radius: outer },
            inner,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        loop {
            let x = metric::sample_ball(rng, &self.ball);
            if self.inner <= 0.0 {
                return x;
            }
            let z = self.ball.center.inverse().mul_unchecked(&x);
            if metric::lower_norm(&z) >= self.inner {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub pair_sup: f64,
    pub dir_sup: f64,
    /// `pair_sup <= dir_sup (1 + tol) + tol`.
    pub consistent: bool,
    /// `dir_sup` stays within the declared bound (true when none is declared).
    pub within_declared: bool,
    pub samples: usize,
}

/// Sampled suprema of difference quotients over pairs and of directional
/// derivatives over points and unit directions.
///
/// Half of the pairs lie on common horizontal lines, where the distance is
/// exact; the rest use the conservative upper bound.
pub fn lipschitz_estimate(f: &ScalarField, region: &Region, samples: usize, seed: u64, tol: f64) -> Result<LipschitzEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need >= 100 samples, got {samples}")));
    }
    let n = region.ball.center.n();
    let steps = default_steps();
    let mut rng = sampling::rng_for(seed, "lipschitz-pairs");
    let mut pair_sup: f64 = 0.0;
    for i in 0..samples {
        let x = region.sample(&mut rng);
        let (y, d) = if i % 2 == 0 {
            let e = sampling::unit_horizontal(&mut rng, n);
            let t = region.ball.radius * rng.gen_range(1e-3..1.0);
            (e.line_point(&x, t), t)
        } else {
            let y = region.sample(&mut rng);
            let d = metric::cc_upper_value(&x, &y)?;
            (y, d)
        };
        if d > 0.0 {
            let q = (f.eval(&x) - f.eval(&y)).abs() / d;
            if q.is_finite() {
                pair_sup = pair_sup.max(q);
            }
        }
    }
    let mut rng = sampling::rng_for(seed, "lipschitz-directions");
    let mut dir_sup: f64 = 0.0;
    let mut dir_err: f64 = 0.0;
    for _ in 0..samples {
        let x = region.sample(&mut rng);
        let e = sampling::unit_horizontal(&mut rng, n);
        if let Ok(d) = directional_derivative(f, &x, &e, &steps) {
            if d.value.abs() > dir_sup {
                dir_sup = d.value.abs();
                dir_err = d.error;
            }
        }
    }
    let within_declared = f.declared_lip.is_none_or(|l| dir_sup <= l * (1.0 + 1e-6) + dir_err);
    Ok(LipschitzEstimate {
        pair_sup,
        dir_sup,
        consistent: pair_sup <= dir_sup * (1.0 + tol) + tol,
        within_declared,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::HLinearMap;

    #[test]
    fn hlinear_derivative_is_one() {
        let e = HorizontalVector::new(vec![0.6, 0.8]).unwrap();
        let f = ScalarField::hlinear(HLinearMap::new(1.0, e.clone()).unwrap());
        let x = Point::new(&[0.3], &[-0.2], 0.7).unwrap();
        let d = directional_derivative(&f, &x, &e, &default_steps()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn vertical_and_constant_fields() {
        let e = HorizontalVector::x(1, 0);
        let o = Point::origin(1);
        let d = directional_derivative(&ScalarField::vertical(), &o, &e, &default_steps()).unwrap();
        assert_eq!(d.value, 0.0);
        let d = directional_derivative(&ScalarField::constant(3.0), &o, &e, &default_steps()).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn rejects_non_unit_and_short_schedules() {
        let f = ScalarField::constant(0.0);
        let o = Point::origin(1);
        let e = HorizontalVector::new(vec![2.0, 0.0]).unwrap();
        assert!(matches!(
            directional_derivative(&f, &o, &e, &default_steps()),
            Err(Error::NonUnitDirection(_))
        ));
        let e = HorizontalVector::x(1, 0);
        assert!(directional_derivative(&f, &o, &e, &[0.1, 0.01]).is_err());
    }

    #[test]
    fn divergence_is_flagged() {
        let f = ScalarField::new("sqrt", None, |x| x.a()[0].signum() * x.a()[0].abs().sqrt());
        let e = HorizontalVector::x(1, 0);
        let r = directional_derivative(&f, &Point::origin(1), &e, &default_steps());
        assert!(matches!(r, Err(Error::Diverging(_, _))));
    }
}
