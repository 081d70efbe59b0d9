//! Horizontal curves stored as planar polylines with exact lifts.
//!
//! A planar segment from `P` to `Q` lifts to a horizontal segment whose
//! vertical coordinate grows by `2 * symplectic(Q - P, P)`; the quadratic
//! terms of the lift integrand cancel on straight segments, so every path
//! here is piecewise linear in `R^{2n+1}` and horizontal by construction.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::group::{dot, norm, symplectic, HorizontalVector, Point};
use crate::metric;

/// Anything that can be evaluated as a curve in `H^n`.
pub trait ParametrizedCurve {
    fn point_at(&self, t: f64) -> Point;
}

impl<F: Fn(f64) -> Point> ParametrizedCurve for F {
    fn point_at(&self, t: f64) -> Point {
        self(t)
    }
}

/// A horizontal curve: strictly increasing knots, planar positions at the
/// knots (linear in between), and the vertical coordinate at the first knot.
///
/// The knots double as the finite exceptional set where the derivative may
/// fail to exist.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalPath {
    knots: Vec<f64>,
    planar: Vec<Vec<f64>>,
    c0: f64,
    vertical: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    knots: Vec<f64>,
    planar: Vec<Vec<f64>>,
    c0: f64,
}

impl Serialize for HorizontalPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PathRepr {
            knots: self.knots.clone(),
            planar: self.planar.clone(),
            c0: self.c0,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HorizontalPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PathRepr::deserialize(d)?;
        HorizontalPath::new(r.knots, r.planar, r.c0).map_err(serde::de::Error::custom)
    }
}

/// Derivative of a path at a parameter; `at_knot` marks the exceptional set,
/// where the right-hand derivative is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDerivative {
    pub vector: Vec<f64>,
    pub at_knot: bool,
}

impl HorizontalPath {
    pub fn new(knots: Vec<f64>, planar: Vec<Vec<f64>>, c0: f64) -> Result<Self> {
        if knots.len() < 2 || knots.len() != planar.len() {
            return Err(Error::InvalidArgument(format!(
                "path needs >= 2 knots matching the planar vertices ({} knots, {} vertices)",
                knots.len(),
                planar.len()
            )));
        }
        let dim = planar[0].len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::ZeroDimension);
        }
        if planar.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidArgument("planar vertices of unequal dimension".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
        }
        if !c0.is_finite() || knots.iter().any(|t| !t.is_finite()) || planar.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("path"));
        }
        let mut vertical = Vec::with_capacity(knots.len());
        vertical.push(c0);
        for w in planar.windows(2) {
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(q, p)| q - p).collect();
            let last = *vertical.last().unwrap();
            vertical.push(last + 2.0 * symplectic(&d, &w[0]));
        }
        Ok(HorizontalPath {
            knots,
            planar,
            c0,
            vertical,
        })
    }

    pub fn n(&self) -> usize {
        self.planar[0].len() / 2
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn planar(&self) -> &[Vec<f64>] {
        &self.planar
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn start(&self) -> Point {
        self.knot_point(0)
    }

    pub fn end(&self) -> Point {
        self.knot_point(self.knots.len() - 1)
    }

    pub fn knot_point(&self, i: usize) -> Point {
        Point::raw(self.planar[i].clone(), self.vertical[i])
    }

    fn segment_index(&self, t: f64) -> usize {
        let k = self.knots.len();
        match self.knots.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(k - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(k - 2),
        }
    }

    /// Evaluates the path; outside the domain the end segments are extended
    /// linearly (still horizontal).
    pub fn eval(&self, t: f64) -> Point {
        let j = self.segment_index(t);
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let s = (t - t0) / (t1 - t0);
        let p = &self.planar[j];
        let q = &self.planar[j + 1];
        let horiz: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + s * (b - a)).collect();
        let c = self.vertical[j] + s * (self.vertical[j + 1] - self.vertical[j]);
        Point::raw(horiz, c)
    }

    /// Full derivative in `R^{2n+1}` (right-hand at knots).
    pub fn derivative(&self, t: f64) -> PathDerivative {
        let at_knot = self.knots.contains(&t);
        let k = self.knots.len();
        let mut j = self.segment_index(t);
        if at_knot && t == self.knots[k - 1] {
            j = k - 2;
        }
        PathDerivative {
            vector: self.segment_velocity(j),
            at_knot,
        }
    }

    /// Constant velocity of segment `j` in `R^{2n+1}`.
    pub fn segment_velocity(&self, j: usize) -> Vec<f64> {
        let dt = self.knots[j + 1] - self.knots[j];
        let mut v: Vec<f64> = self.planar[j + 1].iter().zip(&self.planar[j]).map(|(q, p)| (q - p) / dt).collect();
        v.push((self.vertical[j + 1] - self.vertical[j]) / dt);
        v
    }

    /// Horizontal length, i.e. the Euclidean length of the projected polyline.
    pub fn horizontal_length(&self) -> f64 {
        self.planar
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(q, p)| (q - p) * (q - p)).sum::<f64>().sqrt())
            .sum()
    }

    /// Lipschitz constant w.r.t. the CC distance: the largest projected speed.
    pub fn lipschitz_constant(&self) -> f64 {
        (0..self.segments())
            .map(|j| {
                let dt = self.knots[j + 1] - self.knots[j];
                let d: f64 = self.planar[j + 1]
                    .iter()
                    .zip(&self.planar[j])
                    .map(|(q, p)| (q - p) * (q - p))
                    .sum::<f64>()
                    .sqrt();
                d / dt
            })
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean deviation of the projected velocity from `target`,
    /// taken over all segments (i.e. off the knot set).
    pub fn max_projected_deviation(&self, target: &[f64]) -> f64 {
        (0..self.segments())
            .map(|j| {
                let v = self.segment_velocity(j);
                v[..v.len() - 1]
                    .iter()
                    .zip(target)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Left translation `g * path`.
    pub fn translate(&self, g: &Point) -> Result<HorizontalPath> {
        if g.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: g.n(),
            });
        }
        let start = g.mul_unchecked(&self.start());
        let planar = self
            .planar
            .iter()
            .map(|p| p.iter().zip(g.projection()).map(|(a, b)| a + b).collect())
            .collect();
        HorizontalPath::new(self.knots.clone(), planar, start.c())
    }

    /// Affine reparametrization `t -> scale * t + shift` of the knots.
    pub fn reparametrize(&self, scale: f64, shift: f64) -> Result<HorizontalPath> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("reparametrization must be increasing".into()));
        }
        let knots = self.knots.iter().map(|t| scale * t + shift).collect();
        HorizontalPath::new(knots, self.planar.clone(), self.c0)
    }
}

impl ParametrizedCurve for HorizontalPath {
    fn point_at(&self, t: f64) -> Point {
        self.eval(t)
    }
}

/// Lifts a planar polyline starting at `base` with uniform knots on `[0, 1]`.
pub fn lift_planar(polyline: &[Vec<f64>], base: &Point) -> Result<HorizontalPath> {
    if polyline.len() < 2 {
        return Err(Error::InvalidArgument("polyline needs at least 2 vertices".into()));
    }
    if polyline[0].len() != 2 * base.n() {
        return Err(Error::DimensionMismatch {
            expected: base.n(),
            got: polyline[0].len() / 2,
        });
    }
    let scale = 1.0 + norm(base.projection());
    let gap: f64 = polyline[0]
        .iter()
        .zip(base.projection())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "base does not project onto the first vertex (gap {gap:e})"
        )));
    }
    let k = polyline.len() - 1;
    let knots = (0..=k).map(|i| i as f64 / k as f64).collect();
    HorizontalPath::new(knots, polyline.to_vec(), base.c())
}

pub fn horizontal_length(path: &HorizontalPath) -> f64 {
    path.horizontal_length()
}

pub fn lipschitz_constant(path: &HorizontalPath) -> f64 {
    path.lipschitz_constant()
}

/// Finite-difference residual of the lift identity
/// `c' = 2 sum (x_i' x_{n+i} - x_{n+i}' x_i)` at parameter `t` with step `h`.
pub fn lift_residual<C: ParametrizedCurve + ?Sized>(curve: &C, t: f64, h: f64) -> f64 {
    let plus = curve.point_at(t + h).coords();
    let minus = curve.point_at(t - h).coords();
    let mid = curve.point_at(t);
    let m = plus.len() - 1;
    let d: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    (d[m] - 2.0 * symplectic(&d[..m], mid.projection())).abs()
}

/// `(1/2)(p + (c / |p|^2) J p)` with `J(a, b) = (-b, a)`: the planar corner
/// of the two-leg curve joining `0` to `(p, c)`.
fn two_leg_corner(p: &[f64], c: f64) -> Vec<f64> {
    let n = p.len() / 2;
    let l2 = dot(p, p);
    let k = c / l2;
    let mut mid = Vec::with_capacity(2 * n);
    for i in 0..n {
        mid.push(0.5 * (p[i] - k * p[n + i]));
    }
    for i in 0..n {
        mid.push(0.5 * (p[n + i] + k * p[i]));
    }
    mid
}

/// The two-leg horizontal curve on `[0, 1]` joining `0` to `y`.
///
/// The first leg runs radially to the corner, the second closes the
/// vertical gap; requires `p(y) != 0`.
pub fn gamma_y(y: &Point) -> Result<HorizontalPath> {
    let p = y.projection();
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::Undefined("gamma_y needs p(y) != 0"));
    }
    let corner = two_leg_corner(p, y.c());
    HorizontalPath::new(vec![0.0, 0.5, 1.0], vec![vec![0.0; p.len()], corner, p.to_vec()], 0.0)
}

/// Bound on `Lip(gamma_y)`: `L (1 + c^2/L^4 + 4c^2/L^2)^{1/2}`.
pub fn gamma_y_lip_bound(y: &Point) -> f64 {
    let l = norm(y.projection());
    let c = y.c();
    l * (1.0 + c * c / l.powi(4) + 4.0 * c * c / (l * l)).sqrt()
}

/// Bound on `|gamma_y' - (a, b, 0)|`: `|c|/L (1 + 4L^2)^{1/2}`.
pub fn gamma_y_deviation_bound(y: &Point) -> f64 {
    let l = norm(y.projection());
    y.c().abs() / l * (1.0 + 4.0 * l * l).sqrt()
}

/// Largest full-derivative deviation of `path` from `(p(y), 0)`.
pub fn gamma_y_deviation(path: &HorizontalPath, y: &Point) -> f64 {
    let mut target = y.projection().to_vec();
    target.push(0.0);
    (0..path.segments())
        .map(|j| {
            let v = path.segment_velocity(j);
            v.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Proved admissible range for the modification parameter:
/// `Delta(eta) = min(eta / 1632, 1/2)`.
pub fn delta_max(eta: f64) -> f64 {
    (eta / 1632.0).min(0.5)
}

/// Parameters of the line modification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifyLineParams {
    pub x: Point,
    pub u: Point,
    pub e: HorizontalVector,
    pub r: f64,
    pub delta: f64,
    pub eta: f64,
}

impl ModifyLineParams {
    /// `s = r / Delta`.
    pub fn s(&self) -> f64 {
        self.r / self.delta
    }

    /// `zeta = r <u, E(0)>`.
    pub fn zeta(&self) -> f64 {
        self.r * dot(self.u.projection(), self.e.coeffs())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_below(delta_max(self.eta))
    }

    fn validate_below(&self, dmax: f64) -> Result<()> {
        let n = self.x.n();
        if self.u.n() != n || self.e.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if self.u.n() != n { self.u.n() } else { self.e.n() },
            });
        }
        self.e.ensure_unit()?;
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta < dmax) {
            return Err(Error::InvalidArgument(format!("Delta = {} outside (0, {dmax})", self.delta)));
        }
        if !(self.r > 0.0 && self.r < self.delta) {
            return Err(Error::InvalidArgument(format!(
                "r = {} outside (0, Delta = {})",
                self.r, self.delta
            )));
        }
        let du = metric::cc_bounds(&Point::origin(n), &self.u)?.upper;
        if du > 1.0 {
            return Err(Error::InvalidArgument(format!("d(u) upper bound {du} exceeds 1")));
        }
        Ok(())
    }
}

/// Modifies the horizontal line `t -> x + t E(x)` so it passes through
/// `x delta_r(u)` at `zeta`, leaving it unchanged for `|t| >= s`.
///
/// The returned path lives on `[-2s, 2s]`. On `[-s, zeta]` it is the
/// two-leg curve joining `(sE(0)) delta_r(u)` from `0`, translated by
/// `x (-sE(0))` and rescaled; on `[zeta, s]` the mirrored construction with
/// `-E`, traversed backwards from `x (sE(0))`.
pub fn modify_line(params: &ModifyLineParams) -> Result<(HorizontalPath, f64)> {
    params.validate()?;
    build_modified_line(params)
}

/// Same construction with `Delta` anywhere in `(0, 1/2)`, ignoring the
/// `eta / 1632` cap. Used to probe how far the cap can be relaxed.
pub fn modify_line_uncapped(params: &ModifyLineParams) -> Result<(HorizontalPath, f64)> {
    params.validate_below(0.5)?;
    build_modified_line(params)
}

fn build_modified_line(params: &ModifyLineParams) -> Result<(HorizontalPath, f64)> {
    let n = params.x.n();
    let s = params.s();
    let zeta = params.zeta();
    let e = params.e.coeffs();
    let target = params.u.dilate_unchecked(params.r);

    let w1 = params.e.step(s).mul_unchecked(&target);
    let w2 = params.e.step(-s).mul_unchecked(&target);
    let corner1 = two_leg_corner(w1.projection(), w1.c());
    let corner2 = two_leg_corner(w2.projection(), w2.c());

    let along = |t: f64| -> Vec<f64> { e.iter().map(|v| t * v).collect::<Vec<f64>>() };
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };

    let local = vec![
        along(-2.0 * s),
        along(-s),
        add(&along(-s), &corner1),
        target.projection().to_vec(),
        add(&along(s), &corner2),
        along(s),
        along(2.0 * s),
    ];
    let knots = vec![-2.0 * s, -s, 0.5 * (zeta - s), zeta, 0.5 * (zeta + s), s, 2.0 * s];
    let start = params.e.step(-2.0 * s);
    let path = HorizontalPath::new(knots, local, start.c())?;
    debug_assert_eq!(path.n(), n);
    Ok((path.translate(&params.x)?, zeta))
}
