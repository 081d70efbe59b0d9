use serde::{Deserialize, Serialize};

use crate::calculus::{directional_derivative, Decision, DerivativeEstimate, ScalarField};
use crate::error::{Error, Result};
use crate::group::{HorizontalVector, Point};
use crate::uds::NCover;

/// A point together with a unit horizontal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub x: Point,
    pub e: HorizontalVector,
}

impl Pair {
    /// Checks `omega(E) = 1` and membership of `x` in the cover at `level`.
    pub fn new(x: Point, e: HorizontalVector, cover: &NCover, level: usize) -> Result<Self> {
        e.ensure_unit()?;
        if !cover.contains(&x, level)? {
            return Err(Error::InvalidArgument(format!("point is outside the cover at level {level}")));
        }
        Ok(Pair { x, e })
    }

    /// Pair without the cover check (direction still checked).
    pub fn unchecked(x: Point, e: HorizontalVector) -> Result<Self> {
        e.ensure_unit()?;
        Ok(Pair { x, e })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonOutcome {
    pub decision: Decision,
    /// Smallest `sigma` for which the increment clause holds on the grid
    /// (may be negative), taken at the central derivative values.
    pub needed_sigma: f64,
    pub first: DerivativeEstimate,
    pub second: DerivativeEstimate,
}

/// `max_t lhs(t) / (K |t|) - gap^{1/4}`, where `lhs(t)` compares the
/// increments of `h` along the first pair's direction at both points.
pub(crate) fn needed_sigma(h: &ScalarField, p1: &Pair, p2: &Pair, gap: f64, k: f64, t_grid: &[f64]) -> f64 {
    let h1 = h.eval(&p1.x);
    let h2 = h.eval(&p2.x);
    let quarter = gap.max(0.0).powf(0.25);
    let mut worst = f64::NEG_INFINITY;
    for &t in t_grid {
        if t == 0.0 {
            continue;
        }
        let lhs = ((h.eval(&p1.e.line_point(&p2.x, t)) - h2) - (h.eval(&p1.e.line_point(&p1.x, t)) - h1)).abs();
        worst = worst.max(lhs / (k * t.abs()) - quarter);
    }
    if worst == f64::NEG_INFINITY {
        -quarter
    } else {
        worst
    }
}

/// Decides `(x, E) <=_{(h, sigma)} (x', E')` from derivative estimates.
#[allow(clippy::too_many_arguments)]
pub(crate) fn decide(
    h: &ScalarField,
    p1: &Pair,
    d1: DerivativeEstimate,
    p2: &Pair,
    d2: DerivativeEstimate,
    sigma: f64,
    k: f64,
    t_grid: &[f64],
) -> ComparisonOutcome {
    let err = d1.error + d2.error;
    let gap = d2.value - d1.value;
    let needed = needed_sigma(h, p1, p2, gap, k, t_grid);
    let identical = p1 == p2;
    let decision = if identical {
        Decision::Holds
    } else if gap + err < 0.0 {
        Decision::Fails
    } else {
        let lo = needed_sigma(h, p1, p2, gap + err, k, t_grid);
        let hi = needed_sigma(h, p1, p2, (gap - err).max(0.0), k, t_grid);
        if lo > sigma {
            Decision::Fails
        } else if hi <= sigma && gap - err >= 0.0 {
            Decision::Holds
        } else {
            Decision::Indeterminate
        }
    };
    ComparisonOutcome {
        decision,
        needed_sigma: needed,
        first: d1,
        second: d2,
    }
}

/// `(x, E) <=_{(h, sigma)} (x', E')`: `Eh(x) <= E'h(x')` and, for every grid
/// `t` in `(-1, 1)`,
/// `|(h(x' + tE(x')) - h(x')) - (h(x + tE(x)) - h(x))| <= K (sigma + (E'h(x') - Eh(x))^{1/4}) |t|`.
pub fn comparison_le(
    h: &ScalarField,
    p1: &Pair,
    p2: &Pair,
    sigma: f64,
    k: f64,
    t_grid: &[f64],
    steps: &[f64],
) -> Result<ComparisonOutcome> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if t_grid.iter().any(|t| !(t.abs() < 1.0)) {
        return Err(Error::InvalidArgument("t grid must lie in (-1, 1)".into()));
    }
    let d1 = directional_derivative(h, &p1.x, &p1.e, steps)?;
    let d2 = directional_derivative(h, &p2.x, &p2.e, steps)?;
    Ok(decide(h, p1, d1, p2, d2, sigma, k, t_grid))
}
