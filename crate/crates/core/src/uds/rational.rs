//! Exact rational data: points, unit directions and horizontal lines.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::group::{HorizontalVector, Point};

pub type Q = BigRational;

fn q(p: i64, d: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(d))
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn sym(u: &[Q], w: &[Q]) -> Q {
    let n = u.len() / 2;
    let mut s = Q::zero();
    for i in 0..n {
        s += &u[i] * &w[n + i] - &u[n + i] * &w[i];
    }
    s
}

fn dotq(u: &[Q], w: &[Q]) -> Q {
    u.iter().zip(w).fold(Q::zero(), |acc, (a, b)| acc + a * b)
}

/// A point of `H^n` with exact rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalPoint {
    pub horiz: Vec<Q>,
    pub c: Q,
}

impl RationalPoint {
    pub fn origin(n: usize) -> Self {
        RationalPoint {
            horiz: vec![Q::zero(); 2 * n],
            c: Q::zero(),
        }
    }

    /// Exact conversion of a floating point `Point` (every finite double is rational).
    pub fn from_point(x: &Point) -> Result<Self> {
        let conv = |v: f64| Q::from_float(v).ok_or(Error::NonFinite("rational conversion"));
        Ok(RationalPoint {
            horiz: x.projection().iter().map(|&v| conv(v)).collect::<Result<_>>()?,
            c: conv(x.c())?,
        })
    }

    pub fn n(&self) -> usize {
        self.horiz.len() / 2
    }

    pub fn to_point(&self) -> Point {
        Point::raw(self.horiz.iter().map(to_f64).collect(), to_f64(&self.c))
    }

    pub fn mul(&self, other: &RationalPoint) -> RationalPoint {
        RationalPoint {
            horiz: self.horiz.iter().zip(&other.horiz).map(|(a, b)| a + b).collect(),
            c: &self.c + &other.c - sym(&self.horiz, &other.horiz) * q(2, 1),
        }
    }

    pub fn dilate(&self, r: &Q) -> RationalPoint {
        RationalPoint {
            horiz: self.horiz.iter().map(|a| a * r).collect(),
            c: &self.c * r * r,
        }
    }

    /// `t h` as a point with zero vertical coordinate.
    pub fn step(h: &[Q], t: &Q) -> RationalPoint {
        RationalPoint {
            horiz: h.iter().map(|a| a * t).collect(),
            c: Q::zero(),
        }
    }

    /// Sum of height excesses of all coordinates.
    pub fn excess(&self) -> u64 {
        self.horiz.iter().chain(std::iter::once(&self.c)).map(excess).sum()
    }
}

/// Height excess `|p| + q - 1` of `p/q` in lowest terms.
pub fn excess(v: &Q) -> u64 {
    let h = v.numer().abs() + v.denom().clone() - BigInt::one();
    h.to_u64().unwrap_or(u64::MAX)
}

/// All rationals with height excess exactly `e`, in a fixed order.
pub fn rationals_with_excess(e: u64) -> Vec<Q> {
    if e == 0 {
        return vec![Q::zero()];
    }
    let h = e as i64 + 1;
    let mut out = Vec::new();
    for d in 1..h {
        let p = h - d;
        if p.gcd(&d) == 1 {
            out.push(q(p, d));
            out.push(q(-p, d));
        }
    }
    out
}

/// All `m`-tuples of rationals whose excesses sum to exactly `e`.
fn tuples_with_excess(m: usize, e: u64, table: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if m == 0 {
        return if e == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 0..=e {
        let rest = tuples_with_excess(m - 1, e - first, table);
        if rest.is_empty() {
            continue;
        }
        for v in &table[first as usize] {
            for r in &rest {
                let mut t = Vec::with_capacity(m);
                t.push(v.clone());
                t.extend(r.iter().cloned());
                out.push(t);
            }
        }
    }
    out
}

/// Inverse stereographic projection `w -> ((1-|w|^2)/(1+|w|^2), 2w/(1+|w|^2))`
/// onto the unit sphere of `R^{m+1}`.
pub fn stereographic(w: &[Q]) -> Vec<Q> {
    let w2 = dotq(w, w);
    let denom = Q::one() + &w2;
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push((Q::one() - &w2) / &denom);
    for v in w {
        out.push(v * q(2, 1) / &denom);
    }
    out
}

/// Directions paired with their excess: stereographic images of parameter
/// tuples, plus the pole `(-1, 0, ..., 0)` at excess 1.
fn directions(n: usize, max_excess: u64, table: &[Vec<Q>]) -> Vec<(u64, Vec<Q>)> {
    let mut out = Vec::new();
    for e in 0..=max_excess {
        if e == 1 {
            let mut pole = vec![Q::zero(); 2 * n];
            pole[0] = q(-1, 1);
            out.push((1, pole));
        }
        for w in tuples_with_excess(2 * n - 1, e, table) {
            out.push((e, stereographic(&w)));
        }
    }
    out
}

/// A horizontal line `t -> base (t dir(0))` with exact rational data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalLine {
    pub base: RationalPoint,
    pub dir: Vec<Q>,
}

impl RationalLine {
    /// Line with an exactly unit direction.
    pub fn new(base: RationalPoint, dir: Vec<Q>) -> Result<Self> {
        if dir.len() != base.horiz.len() {
            return Err(Error::DimensionMismatch {
                expected: base.n(),
                got: dir.len() / 2,
            });
        }
        if dotq(&dir, &dir) != Q::one() {
            return Err(Error::NonUnitDirection(to_f64(&dotq(&dir, &dir)).sqrt()));
        }
        Ok(RationalLine { base, dir })
    }

    /// Line with any nonzero rational direction; the set it traces is the
    /// horizontal line through `base` in that direction.
    pub fn through(base: RationalPoint, dir: Vec<Q>) -> Result<Self> {
        if dir.len() != base.horiz.len() {
            return Err(Error::DimensionMismatch {
                expected: base.n(),
                got: dir.len() / 2,
            });
        }
        if dir.iter().all(|v| v.is_zero()) {
            return Err(Error::InvalidArgument("zero direction".into()));
        }
        Ok(RationalLine { base, dir })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn is_unit(&self) -> bool {
        dotq(&self.dir, &self.dir) == Q::one()
    }

    pub fn point(&self, t: &Q) -> RationalPoint {
        self.base.mul(&RationalPoint::step(&self.dir, t))
    }

    pub fn direction_f64(&self) -> Vec<f64> {
        self.dir.iter().map(to_f64).collect()
    }

    /// Canonical description independent of the base point: the direction
    /// scaled to unit first nonzero entry, and the point of the line whose
    /// projection is orthogonal to the direction.
    pub fn canonical_key(&self) -> Vec<Q> {
        let lead = self.dir.iter().find(|v| !v.is_zero()).expect("nonzero direction").clone();
        let h: Vec<Q> = self.dir.iter().map(|v| v / &lead).collect();
        let hh = dotq(&h, &h);
        let t = -dotq(&self.base.horiz, &h) / hh;
        let foot = self.base.mul(&RationalPoint::step(&h, &t));
        let mut key = h;
        key.extend(foot.horiz);
        key.push(foot.c);
        key
    }
}

impl Serialize for RationalLine {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            base: Vec<String>,
            dir: Vec<String>,
        }
        let mut base: Vec<String> = self.base.horiz.iter().map(|v| v.to_string()).collect();
        base.push(self.base.c.to_string());
        Repr {
            base,
            dir: self.dir.iter().map(|v| v.to_string()).collect(),
        }
        .serialize(s)
    }
}

/// Horizontal lines whose base coordinates and stereographic direction
/// parameters have total height excess at most `height`, deduplicated and
/// ordered by total excess.
///
/// The enumeration at a given height is a prefix of the enumeration at any
/// larger height; index 0 is the line through `0` with direction `X_1`.
pub fn enumerate_lines(n: usize, height: u64) -> Result<Vec<RationalLine>> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    if height == 0 {
        return Err(Error::InvalidArgument("height must be >= 1".into()));
    }
    let table: Vec<Vec<Q>> = (0..=height).map(rationals_with_excess).collect();
    let dirs = directions(n, height, &table);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for total in 0..=height {
        for (de, dir) in &dirs {
            if *de > total {
                continue;
            }
            for coords in tuples_with_excess(2 * n + 1, total - de, &table) {
                let mut coords = coords;
                let c = coords.pop().unwrap();
                let line = RationalLine {
                    base: RationalPoint { horiz: coords, c },
                    dir: dir.clone(),
                };
                if seen.insert(line.canonical_key()) {
                    out.push(line);
                }
            }
        }
    }
    Ok(out)
}

/// Best rational approximation of `x` within `tol` by continued fractions.
pub fn approximate(x: f64, tol: f64) -> Q {
    let mut h = (BigInt::one(), BigInt::zero());
    let mut k = (BigInt::zero(), BigInt::one());
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = BigInt::from(a as i64);
        let hn = &ai * &h.0 + &h.1;
        let kn = &ai * &k.0 + &k.1;
        h = (hn, h.0);
        k = (kn, k.0);
        let approx = Q::new(h.0.clone(), k.0.clone());
        let frac = r - a;
        if (to_f64(&approx) - x).abs() <= tol || frac == 0.0 {
            return approx;
        }
        r = 1.0 / frac;
        if !r.is_finite() {
            return approx;
        }
    }
    Q::new(h.0, k.0)
}

/// Exact rational unit direction within Euclidean distance `tol` of `e`.
///
/// Stereographic coordinates of `e` (from whichever pole is farther) are
/// approximated by continued fractions with a tightening tolerance.
pub fn rationalize_direction(e: &HorizontalVector, tol: f64) -> Result<Vec<Q>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let h = e.normalized()?;
    let h = h.coeffs();
    let flip = h[0] < 0.0;
    let s = if flip { -1.0 } else { 1.0 };
    let w: Vec<f64> = h[1..].iter().map(|v| v / (1.0 + s * h[0])).collect();
    let mut inner = tol / 4.0;
    loop {
        let wq: Vec<Q> = w.iter().map(|&v| approximate(v, inner)).collect();
        let mut dir = stereographic(&wq);
        if flip {
            dir[0] = -dir[0].clone();
        }
        let dist = dir.iter().zip(h).map(|(a, b)| (to_f64(a) - b).powi(2)).sum::<f64>().sqrt();
        if dist <= tol || inner < 1e-300 {
            return Ok(dir);
        }
        inner *= 0.25;
    }
}

fn two_leg_corner(p: &[Q], c: &Q) -> Vec<Q> {
    let n = p.len() / 2;
    let k = c / dotq(p, p);
    let half = q(1, 2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push((&p[i] - &k * &p[n + i]) * &half);
    }
    for i in 0..n {
        out.push((&p[n + i] + &k * &p[i]) * &half);
    }
    out
}

/// Lines carrying the consecutive segments of the lifted polyline through
/// the given planar vertices, starting at `start`.
fn segment_lines(start: &RationalPoint, planar: &[Vec<Q>]) -> Result<Vec<RationalLine>> {
    let mut point = start.clone();
    let mut out = Vec::new();
    for w in planar.windows(2) {
        let d: Vec<Q> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        if d.iter().all(|v| v.is_zero()) {
            continue;
        }
        let next = point.mul(&RationalPoint::step(&d, &Q::one()));
        out.push(RationalLine::through(point, d)?);
        point = next;
    }
    Ok(out)
}

/// The two lines carrying `x gamma_y` for rational `x`, `y` with `p(y) != 0`.
pub fn gamma_y_lines(x: &RationalPoint, y: &RationalPoint) -> Result<Vec<RationalLine>> {
    if y.horiz.iter().all(|v| v.is_zero()) {
        return Err(Error::Undefined("gamma_y needs p(y) != 0"));
    }
    let corner = two_leg_corner(&y.horiz, &y.c);
    let n = x.n();
    let local = [vec![Q::zero(); 2 * n], corner, y.horiz.clone()];
    let planar: Vec<Vec<Q>> = local.iter().map(|v| v.iter().zip(&x.horiz).map(|(a, b)| a + b).collect()).collect();
    segment_lines(x, &planar)
}

/// The lines carrying the modified line built from exact data `x`, `u`,
/// unit rational `e`, `r`, `Delta`; mirrors the floating point construction.
pub fn modify_line_lines(x: &RationalPoint, u: &RationalPoint, e: &[Q], r: &Q, delta: &Q) -> Result<Vec<RationalLine>> {
    let s = r / delta;
    let target = u.dilate(r);
    let w1 = RationalPoint::step(e, &s).mul(&target);
    let w2 = RationalPoint::step(e, &-s.clone()).mul(&target);
    let corner1 = two_leg_corner(&w1.horiz, &w1.c);
    let corner2 = two_leg_corner(&w2.horiz, &w2.c);
    let along = |t: &Q| -> Vec<Q> { e.iter().map(|v| v * t).collect() };
    let add = |a: &[Q], b: &[Q]| -> Vec<Q> { a.iter().zip(b).map(|(p, q)| p + q).collect() };
    let two = q(2, 1);
    let local = [
        along(&(-&s * &two)),
        along(&-s.clone()),
        add(&along(&-s.clone()), &corner1),
        target.horiz.clone(),
        add(&along(&s), &corner2),
        along(&s),
        along(&(&s * &two)),
    ];
    let start = x.mul(&RationalPoint::step(e, &(-&s * &two)));
    let planar: Vec<Vec<Q>> = local.iter().map(|v| add(v, &x.horiz)).collect();
    segment_lines(&start, &planar)
}

pub fn q_from_f64(v: f64) -> Result<Q> {
    Q::from_float(v).ok_or(Error::NonFinite("rational conversion"))
}

pub fn q_ratio(p: i64, d: i64) -> Q {
    q(p, d)
}
