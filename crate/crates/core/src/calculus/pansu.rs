use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{HLinearMap, HorizontalVector, Point};
use crate::metric;
use crate::sampling;

use super::derivative::{directional_derivative, DerivativeEstimate};
use super::field::ScalarField;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PansuReport {
    pub candidate: HLinearMap,
    pub radii: Vec<f64>,
    pub residuals: Vec<f64>,
    pub samples_used: usize,
}

impl PansuReport {
    /// Accepts differentiability when the residual at the smallest radius
    /// is below `tol`.
    pub fn differentiable(&self, tol: f64) -> bool {
        self.residuals.last().is_some_and(|r| *r < tol)
    }

    /// `radius,residual` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,residual\n");
        for (r, v) in self.radii.iter().zip(&self.residuals) {
            out.push_str(&format!("{r:e},{v:e}\n"));
        }
        out
    }
}

/// Points `w` with `cc_upper(0, w) <= 1`, drawn by rejection from the box
/// `[-1, 1]^{2n+1}`.
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<Point> {
    let ball = metric::Ball {
        center: Point::origin(n),
        radius: 1.0,
    };
    (0..count).map(|_| metric::sample_ball(rng, &ball)).collect()
}

/// Per radius `t`: `sup_w |f(x delta_t(w)) - f(x) - t L(w)| / t` over the
/// sampled `w` with `cc_upper(0, w) <= 1`; inadmissible samples are dropped.
pub fn pansu_residual(f: &ScalarField, x: &Point, l: &HLinearMap, radii: &[f64], ws: &[Point]) -> Result<PansuReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
    }
    if l.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: l.n(),
        });
    }
    let origin = Point::origin(x.n());
    let mut admissible = Vec::with_capacity(ws.len());
    for w in ws {
        if metric::cc_upper_value(&origin, w)? <= 1.0 {
            admissible.push(w);
        }
    }
    let fx = f.eval(x);
    let residuals = radii
        .iter()
        .map(|&t| {
            admissible
                .iter()
                .map(|w| (f.eval(&x.mul_unchecked(&w.dilate_unchecked(t))) - fx - t * l.eval(w)).abs() / t)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(PansuReport {
        candidate: l.clone(),
        radii: radii.to_vec(),
        residuals,
        samples_used: admissible.len(),
    })
}

/// Convenience wrapper drawing `samples` unit-ball points from `seed`.
pub fn pansu_residual_sampled(f: &ScalarField, x: &Point, l: &HLinearMap, radii: &[f64], samples: usize, seed: u64) -> Result<PansuReport> {
    let mut rng = sampling::rng_for(seed, "pansu");
    let ws = sample_unit_ball(&mut rng, x.n(), samples);
    pansu_residual(f, x, l, radii, &ws)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Holds,
    Fails,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub decision: Decision,
    pub star: DerivativeEstimate,
    pub competitor: DerivativeEstimate,
    /// Largest `lhs / (K |t|)` over the grid.
    pub worst_ratio: f64,
}

/// Tests whether the competitor `(x, E)` satisfies `Ef(x) >= E_* f(x_*)`
/// and, for every `t` in the grid,
/// `|(f(x + tE_*(x)) - f(x)) - (f(x_* + tE_*(x_*)) - f(x_*))|
///  <= K |t| ((Ef(x) - E_* f(x_*)) lip)^{1/4}`.
///
/// Error bars of both derivatives propagate into a tri-state answer.
#[allow(clippy::too_many_arguments)]
pub fn almost_maximal_pair_check(
    f: &ScalarField,
    x_star: &Point,
    e_star: &HorizontalVector,
    x: &Point,
    e: &HorizontalVector,
    k: f64,
    lip: f64,
    t_grid: &[f64],
    steps: &[f64],
) -> Result<PairCheck> {
    if t_grid.iter().any(|t| !(t.abs() < 1.0)) {
        return Err(Error::InvalidArgument("t grid must lie in (-1, 1)".into()));
    }
    let star = directional_derivative(f, x_star, e_star, steps)?;
    let competitor = directional_derivative(f, x, e, steps)?;
    let identical = x == x_star && e == e_star;
    let fx = f.eval(x);
    let fs = f.eval(x_star);
    let mut worst_ratio: f64 = 0.0;
    let mut lhs_max = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let lhs = ((f.eval(&e_star.line_point(x, t)) - fx) - (f.eval(&e_star.line_point(x_star, t)) - fs)).abs();
        if t != 0.0 {
            worst_ratio = worst_ratio.max(lhs / (k * t.abs()));
        }
        lhs_max.push((t, lhs));
    }
    if identical {
        return Ok(PairCheck {
            decision: Decision::Holds,
            star,
            competitor,
            worst_ratio,
        });
    }
    let err = star.error + competitor.error;
    let gap = competitor.value - star.value;
    if gap + err < 0.0 {
        return Ok(PairCheck {
            decision: Decision::Fails,
            star,
            competitor,
            worst_ratio,
        });
    }
    let mut decision = if gap - err >= 0.0 {
        Decision::Holds
    } else {
        Decision::Indeterminate
    };
    let rhs = |g: f64| (g.max(0.0) * lip).powf(0.25);
    for (t, lhs) in lhs_max {
        let slack = 1e-12 * (1.0 + fx.abs() + fs.abs());
        if lhs > k * t.abs() * rhs(gap + err) + slack {
            decision = Decision::Fails;
            break;
        }
        if lhs > k * t.abs() * rhs(gap - err) + slack {
            decision = Decision::Indeterminate;
        }
    }
    Ok(PairCheck {
        decision,
        star,
        competitor,
        worst_ratio,
    })
}
