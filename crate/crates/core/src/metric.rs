//! Two-sided bounds for the Carnot-Caratheodory distance.
//!
//! The exact distance is never computed; every query returns a bracket
//! `[lower, upper]` whose upper end is the length of an explicit horizontal
//! witness path.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curves::{self, HorizontalPath, ModifyLineParams};
use crate::error::{Error, Result};
use crate::group::{dot, norm, HorizontalVector, Point};
use crate::sampling;

/// Number of chords used to approximate circular arcs.
pub const ARC_SEGMENTS: usize = 2048;

/// Absolute tolerance for distance comparisons on unit-scale inputs.
pub const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBounds {
    pub lower: f64,
    pub upper: f64,
    #[serde(skip)]
    pub witness: Option<HorizontalPath>,
}

impl DistanceBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_dims(x: &Point, y: &Point) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: y.n(),
        });
    }
    Ok(())
}

/// Lower bound of `d(0, z)`.
pub(crate) fn lower_norm(z: &Point) -> f64 {
    norm(z.projection()).max(z.c().abs().sqrt())
}

/// `max(|p(x) - p(y)|, sqrt|(x^{-1} y)_{2n+1}|)`.
pub fn cc_lower(x: &Point, y: &Point) -> Result<f64> {
    check_dims(x, y)?;
    Ok(lower_norm(&x.inverse().mul_unchecked(y)))
}

/// `N sin(theta/N) - sin(theta)`, with a series near zero to avoid
/// cancellation.
fn chord_excess(theta: f64, segments: usize) -> f64 {
    let nn = segments as f64;
    if theta < 0.1 {
        let mut sum = 0.0;
        let mut term = theta;
        let mut fact = 1.0;
        for k in 1..=6 {
            term *= theta * theta;
            fact *= ((2 * k) * (2 * k + 1)) as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * term / fact * (1.0 - nn.powi(-2 * k));
        }
        sum
    } else {
        nn * (theta / nn).sin() - theta.sin()
    }
}

/// Area between an inscribed `N`-chord arc of angle `theta` and its chord,
/// divided by the squared chord length.
fn arc_area_ratio(theta: f64, segments: usize) -> f64 {
    let s = (0.5 * theta).sin();
    chord_excess(theta, segments) / (8.0 * s * s)
}

/// Arc angle whose `N`-chord polygon encloses `q * L^2` with its chord.
fn solve_arc_angle(q: f64, segments: usize) -> f64 {
    let mut lo = (6.0 * q).min(PI);
    while lo > 0.0 && arc_area_ratio(lo, segments) >= q {
        lo *= 0.5;
    }
    let mut hi = (24.0 * q).min(2.0 * PI);
    if hi >= 2.0 * PI || arc_area_ratio(hi, segments) < q {
        hi = 2.0 * PI;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if arc_area_ratio(mid, segments) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Length of the `N`-chord arc joining `0` to `z` (requires `p(z) != 0`).
fn arc_length(l: f64, c: f64, segments: usize) -> f64 {
    if c == 0.0 {
        return l;
    }
    let theta = solve_arc_angle(c.abs() / (4.0 * l * l), segments);
    let nn = segments as f64;
    nn * l * (theta / (2.0 * nn)).sin() / (0.5 * theta).sin()
}

fn gamma_y_length(l: f64, c: f64) -> f64 {
    let k = c / (l * l);
    l * (1.0 + k * k).sqrt()
}

/// Length of the closed regular `N`-gon route to `(0, c)`.
fn loop_length(c: f64, segments: usize) -> f64 {
    let nn = segments as f64;
    (c.abs() * nn * (PI / nn).tan()).sqrt()
}

/// Upper bound of `d(0, z)` without building the witness.
pub(crate) fn upper_norm(z: &Point) -> f64 {
    let l = norm(z.projection());
    let c = z.c();
    if l == 0.0 {
        return loop_length(c, ARC_SEGMENTS);
    }
    arc_length(l, c, ARC_SEGMENTS).min(gamma_y_length(l, c))
}

/// Planar basis `(e, Je)` of the plane carrying the route; `symplectic(e, Je) = 1`.
fn route_plane(p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.len() / 2;
    let l = norm(p);
    let e: Vec<f64> = if l == 0.0 {
        let mut e = vec![0.0; 2 * n];
        e[0] = 1.0;
        e
    } else {
        p.iter().map(|v| v / l).collect()
    };
    let mut je = vec![0.0; 2 * n];
    for i in 0..n {
        je[i] = -e[n + i];
        je[n + i] = e[i];
    }
    (e, je)
}

fn embed(e: &[f64], je: &[f64], u: f64, v: f64) -> Vec<f64> {
    e.iter().zip(je).map(|(a, b)| u * a + v * b).collect()
}

/// Vertices of the arc through `0` and `(chord, 0)` of angle `theta`, bulging
/// towards `+v` when `side > 0`; traversal is clockwise for `side > 0`, which
/// lifts to a positive vertical displacement.
fn arc_points(chord: f64, radius: f64, theta: f64, side: f64, segments: usize) -> Vec<(f64, f64)> {
    (0..=segments)
        .map(|k| {
            let phi = theta * k as f64 / segments as f64;
            let r = 2.0 * radius * (0.5 * phi).sin();
            let a = 0.5 * theta - 0.5 * phi;
            (r * a.cos(), side * r * a.sin())
        })
        .enumerate()
        .map(|(k, pt)| if k == segments { (chord, 0.0) } else { pt })
        .collect()
}

fn witness_for(z: &Point) -> HorizontalPath {
    let n = z.n();
    let p = z.projection();
    let l = norm(p);
    let c = z.c();
    let side = if c >= 0.0 { 1.0 } else { -1.0 };
    let (e, je) = route_plane(p);
    let planar: Vec<Vec<f64>> = if l == 0.0 && c == 0.0 {
        vec![vec![0.0; 2 * n], vec![0.0; 2 * n]]
    } else if l == 0.0 {
        let nn = ARC_SEGMENTS as f64;
        let radius = (c.abs() / (2.0 * nn * (2.0 * PI / nn).sin())).sqrt();
        let mut pts = arc_points(0.0, radius, 2.0 * PI, side, ARC_SEGMENTS);
        pts[ARC_SEGMENTS] = (0.0, 0.0);
        pts.into_iter().map(|(u, v)| embed(&e, &je, u, v)).collect()
    } else if c == 0.0 {
        vec![vec![0.0; 2 * n], p.to_vec()]
    } else if arc_length(l, c, ARC_SEGMENTS) <= gamma_y_length(l, c) {
        let theta = solve_arc_angle(c.abs() / (4.0 * l * l), ARC_SEGMENTS);
        let radius = l / (2.0 * (0.5 * theta).sin());
        let mut pts: Vec<Vec<f64>> = arc_points(l, radius, theta, side, ARC_SEGMENTS)
            .into_iter()
            .map(|(u, v)| embed(&e, &je, u, v))
            .collect();
        *pts.last_mut().unwrap() = p.to_vec();
        pts
    } else {
        return curves::gamma_y(z).expect("projection is nonzero");
    };
    curves::lift_planar(&planar, &Point::origin(n)).expect("well-formed route")
}

/// Upper bound with an explicit witness path from `x` towards `y`.
///
/// The witness is the shorter of the two-leg curve and a chord polygon on
/// the circular arc whose lift closes the vertical gap, or a closed
/// polygonal loop when `p(x) = p(y)`. Its terminal point agrees with `y` up
/// to rounding of the vertical coordinate.
pub fn cc_upper(x: &Point, y: &Point) -> Result<(f64, HorizontalPath)> {
    check_dims(x, y)?;
    let z = x.inverse().mul_unchecked(y);
    let path = witness_for(&z).translate(x)?;
    Ok((path.horizontal_length(), path))
}

/// Upper bound only, skipping the witness construction.
pub fn cc_upper_value(x: &Point, y: &Point) -> Result<f64> {
    check_dims(x, y)?;
    Ok(upper_norm(&x.inverse().mul_unchecked(y)))
}

pub fn cc_bounds(x: &Point, y: &Point) -> Result<DistanceBounds> {
    let lower = cc_lower(x, y)?;
    let (upper, witness) = cc_upper(x, y)?;
    Ok(DistanceBounds {
        lower,
        upper: upper.max(lower),
        witness: Some(witness),
    })
}

/// Bracket without the witness path.
pub fn cc_bracket(x: &Point, y: &Point) -> Result<(f64, f64)> {
    let lower = cc_lower(x, y)?;
    let upper = cc_upper_value(x, y)?;
    Ok((lower, upper.max(lower)))
}

/// Square loop from `0` to `(0, c)`: side `sqrt|c| / 2`, perimeter `2 sqrt|c|`.
pub fn square_route(n: usize, c: f64) -> Result<HorizontalPath> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let side = 0.5 * c.abs().sqrt();
    let sgn = if c >= 0.0 { 1.0 } else { -1.0 };
    let (e, je) = route_plane(&vec![0.0; 2 * n]);
    let corners = [(0.0, 0.0), (0.0, sgn * side), (side, sgn * side), (side, 0.0), (0.0, 0.0)];
    let planar: Vec<Vec<f64>> = corners.iter().map(|&(u, v)| embed(&e, &je, u, v)).collect();
    curves::lift_planar(&planar, &Point::origin(n))
}

/// CC ball `{y : d(center, y) <= radius}`, sampled through upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEstimate {
    pub c_h: f64,
    pub c_a: f64,
    pub c_m: f64,
    pub c_v: f64,
    pub region: Ball,
    pub samples: usize,
}

/// Euclidean Lipschitz constant of `x -> E(x)` over unit `E`.
pub const VECTOR_FIELD_LIP: f64 = 2.0;

/// Sample of the ball: `center * z` with `z` drawn from the enclosing box.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, ball: &Ball) -> Point {
    let n = ball.center.n();
    let r = ball.radius;
    loop {
        let z = sampling::box_point(rng, n, r, r * r);
        if upper_norm(&z) <= r {
            return ball.center.mul_unchecked(&z);
        }
    }
}

/// Smallest `C_H` with `|x-y|/C_H <= d(x,y) <= C_H |x-y|^{1/2}` over the
/// sampled pairs, checking each side against the conservative end of the
/// bracket.
pub fn holder_constant<R: Rng + ?Sized>(rng: &mut R, ball: &Ball, pairs: usize) -> Result<f64> {
    let mut c_h: f64 = 1.0;
    for _ in 0..pairs {
        let x = sample_ball(rng, ball);
        let y = sample_ball(rng, ball);
        let eu = x.euclidean_dist(&y);
        if eu == 0.0 {
            continue;
        }
        let (lower, upper) = cc_bracket(&x, &y)?;
        c_h = c_h.max(eu / lower).max(upper / eu.sqrt());
    }
    Ok(c_h)
}

/// Empirical `C_angle(S)`: pairs of Lipschitz-`S` horizontal curves agreeing
/// at `0` with projected velocities differing by at most `A`, measured by
/// `d(g(t), h(t)) / (sqrt(A) |t|)`.
pub fn angle_constant<R: Rng + ?Sized>(rng: &mut R, n: usize, lip: f64, pairs: usize) -> Result<f64> {
    const PIECES: usize = 8;
    let mut c_a: f64 = 1.0;
    for _ in 0..pairs {
        let a = 10f64.powf(rng.gen_range(-6.0..0.0)).min(lip);
        let knots: Vec<f64> = (0..=PIECES).map(|k| -1.0 + 2.0 * k as f64 / PIECES as f64).collect();
        let mut gv = Vec::with_capacity(PIECES);
        let mut hv = Vec::with_capacity(PIECES);
        for _ in 0..PIECES {
            let speed = rng.gen_range(0.0..=(lip - a));
            let v: Vec<f64> = sampling::unit_vector(rng, 2 * n).into_iter().map(|x| speed * x).collect();
            let u = sampling::unit_vector(rng, 2 * n);
            hv.push(v.iter().zip(&u).map(|(p, q)| p + a * q).collect::<Vec<f64>>());
            gv.push(v);
        }
        let g = path_through_origin(&knots, &gv)?;
        let h = path_through_origin(&knots, &hv)?;
        for k in 1..=20 {
            let t = k as f64 / 20.0;
            for &tt in &[t, -t] {
                let (_, upper) = cc_bracket(&g.eval(tt), &h.eval(tt))?;
                c_a = c_a.max(upper / (a.sqrt() * t));
            }
        }
    }
    Ok(c_a)
}

/// Horizontal path with the given piecewise-constant velocities, translated
/// so that it passes through `0` at `t = 0`.
fn path_through_origin(knots: &[f64], velocities: &[Vec<f64>]) -> Result<HorizontalPath> {
    let dim = velocities[0].len();
    let mut planar = vec![vec![0.0; dim]];
    for (j, v) in velocities.iter().enumerate() {
        let dt = knots[j + 1] - knots[j];
        let last = planar.last().unwrap().clone();
        planar.push(last.iter().zip(v).map(|(p, q)| p + dt * q).collect());
    }
    let path = HorizontalPath::new(knots.to_vec(), planar, 0.0)?;
    let at0 = path.eval(0.0);
    path.translate(&at0.inverse())
}

/// Empirical modification constant: the largest
/// `|(p o g)' - p(E)| / Delta` over sampled line modifications, with `u`
/// sampled on the boundary of the unit ball.
pub fn modification_constant<R: Rng + ?Sized>(rng: &mut R, n: usize, eta: f64, samples: usize) -> Result<f64> {
    let mut c_m: f64 = 1.0;
    let dmax = curves::delta_max(eta);
    for _ in 0..samples {
        let e = sampling::unit_horizontal(rng, n);
        let raw = sampling::box_point(rng, n, 1.0, 1.0);
        let scale = upper_norm(&raw);
        if scale == 0.0 {
            continue;
        }
        let u = raw.dilate_unchecked((1.0 - 1e-9) / scale);
        let delta = dmax * rng.gen_range(0.05..0.95);
        let r = delta * rng.gen_range(0.05..0.95);
        let params = ModifyLineParams {
            x: Point::origin(n),
            u,
            e: e.clone(),
            r,
            delta,
            eta,
        };
        let (path, _) = curves::modify_line(&params)?;
        c_m = c_m.max(path.max_projected_deviation(e.coeffs()) / delta);
    }
    Ok(c_m)
}

/// Fits every constant on the ball; `samples` counts the Holder pairs.
pub fn holder_fit(region: &Ball, samples: usize, seed: u64) -> Result<ConstantsEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("holder_fit needs >= 100 samples, got {samples}")));
    }
    if !(region.radius > 0.0) || !region.radius.is_finite() {
        return Err(Error::InvalidArgument(format!("empty region (radius {})", region.radius)));
    }
    let n = region.center.n();
    let c_h = holder_constant(&mut sampling::rng_for(seed, "holder"), region, samples)?;
    let c_a = angle_constant(&mut sampling::rng_for(seed, "angle"), n, 2.0, (samples / 10).max(10))?;
    let c_m = modification_constant(&mut sampling::rng_for(seed, "modify"), n, 0.5, (samples / 10).max(10))?;
    Ok(ConstantsEstimate {
        c_h,
        c_a,
        c_m,
        c_v: VECTOR_FIELD_LIP,
        region: region.clone(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PansuDistanceSample {
    pub d_z: f64,
    pub margin: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PansuDistanceReport {
    pub d_u: f64,
    pub samples: Vec<PansuDistanceSample>,
    pub inequality_holds: bool,
    pub max_residual: f64,
}

/// Checks `d(uz) >= d(u) + <z, u/d(u)>` on the lower bound and reports the
/// residual `(d(uz) - d(u) - <z, u/d(u)>) / d(z)` on the upper bound.
pub fn distance_pansu_check(u_dir: &HorizontalVector, z_samples: &[Point], tol: f64) -> Result<PansuDistanceReport> {
    if z_samples.is_empty() {
        return Err(Error::InvalidArgument("no z samples".into()));
    }
    let u = u_dir.at_origin();
    let d_u = norm(u.projection());
    if d_u == 0.0 {
        return Err(Error::InvalidArgument("u must have nonzero projection".into()));
    }
    let mut samples = Vec::with_capacity(z_samples.len());
    for z in z_samples {
        check_dims(&u, z)?;
        let uz = u.mul_unchecked(z);
        let linear = d_u + dot(z.projection(), u.projection()) / d_u;
        let margin = lower_norm(&uz) - linear;
        let d_z = lower_norm(z);
        let residual = if d_z == 0.0 {
            0.0
        } else {
            (upper_norm(&uz) - linear).max(0.0) / d_z
        };
        samples.push(PansuDistanceSample { d_z, margin, residual });
    }
    Ok(PansuDistanceReport {
        d_u,
        inequality_holds: samples.iter().all(|s| s.margin >= -tol),
        max_residual: samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        samples,
    })
}

/// One line of a batch distance query.
#[derive(Debug, Clone, Deserialize)]
pub struct BatchQuery {
    pub x: Point,
    pub y: Point,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchAnswer {
    pub lower: f64,
    pub upper: f64,
}

pub fn answer(query: &BatchQuery) -> Result<BatchAnswer> {
    let (lower, upper) = cc_bracket(&query.x, &query.y)?;
    Ok(BatchAnswer { lower, upper })
}
