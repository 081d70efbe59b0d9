use std::fmt;
use std::sync::Arc;

use crate::group::{norm, HLinearMap, HorizontalVector, Point};
use crate::metric;

type EvalFn = dyn Fn(&Point) -> f64 + Send + Sync;

/// A real function on `H^n` with an optional CC-Lipschitz bound.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<EvalFn>,
    pub declared_lip: Option<f64>,
    pub label: String,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("declared_lip", &self.declared_lip)
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(label: impl Into<String>, declared_lip: Option<f64>, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            eval: Arc::new(f),
            declared_lip,
            label: label.into(),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (self.eval)(x)
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::new(format!("const({value})"), Some(0.0), move |_| value)
    }

    pub fn hlinear(map: HLinearMap) -> Self {
        let lip = map.lip;
        ScalarField::new(format!("hlinear(lip={lip})"), Some(lip), move |x| map.eval(x))
    }

    /// `x -> (|p(x)|^4 + c^2)^{1/4}`.
    pub fn koranyi_gauge() -> Self {
        ScalarField::new("koranyi", None, |x| x.koranyi_norm())
    }

    /// Midpoint of the CC bracket to `target`; evaluates to NaN whenever the
    /// bracket is wider than `max_width`, so estimators never consume an
    /// unreliable value silently.
    pub fn cc_distance_to(target: Point, max_width: f64) -> Self {
        ScalarField::new("cc-distance", None, move |x| match metric::cc_bracket(&target, x) {
            Ok((lo, hi)) if hi - lo <= max_width => 0.5 * (lo + hi),
            _ => f64::NAN,
        })
    }

    /// The vertical coordinate `x -> x_{2n+1}`; not Lipschitz.
    pub fn vertical() -> Self {
        ScalarField::new("vertical", None, |x| x.c())
    }

    /// `x -> lip (|p(x) + R p(E)| - R)`: Lipschitz constant `lip`, derivative
    /// `lip` along `E` at the origin, and equal to `lip <x, E(0)>` up to
    /// `O(|p(x)|^2 / R)`.
    pub fn maximal_at_origin(e: &HorizontalVector, lip: f64, radius: f64) -> Self {
        let shift: Vec<f64> = e.coeffs().iter().map(|v| radius * v).collect();
        ScalarField::new(format!("maximal(lip={lip}, R={radius})"), Some(lip), move |x| {
            let moved: Vec<f64> = x.projection().iter().zip(&shift).map(|(a, b)| a + b).collect();
            lip * (norm(&moved) - radius)
        })
    }

    /// Pointwise maximum; Lipschitz bound is the largest declared bound.
    pub fn max_of(fields: Vec<ScalarField>) -> Self {
        let lip = combined_lip(&fields);
        let label = format!("max[{}]", labels(&fields));
        ScalarField::new(label, lip, move |x| {
            fields.iter().map(|f| f.eval(x)).fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Pointwise minimum; Lipschitz bound is the largest declared bound.
    pub fn min_of(fields: Vec<ScalarField>) -> Self {
        let lip = combined_lip(&fields);
        let label = format!("min[{}]", labels(&fields));
        ScalarField::new(label, lip, move |x| fields.iter().map(|f| f.eval(x)).fold(f64::INFINITY, f64::min))
    }

    pub fn plus(self, other: ScalarField) -> Self {
        let lip = match (self.declared_lip, other.declared_lip) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let label = format!("{}+{}", self.label, other.label);
        ScalarField::new(label, lip, move |x| self.eval(x) + other.eval(x))
    }

    /// `x -> f(g x)`; left translation preserves the Lipschitz bound.
    pub fn left_translate(self, g: Point) -> Self {
        let label = format!("{}@translated", self.label);
        let lip = self.declared_lip;
        ScalarField::new(label, lip, move |x| self.eval(&g.mul_unchecked(x)))
    }
}

fn combined_lip(fields: &[ScalarField]) -> Option<f64> {
    fields
        .iter()
        .map(|f| f.declared_lip)
        .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
}

fn labels(fields: &[ScalarField]) -> String {
    fields.iter().map(|f| f.label.as_str()).collect::<Vec<_>>().join(",")
}
