//! Arithmetic of the Heisenberg group `H^n`.
//!
//! Points are triples `(a, b, c)` with `a, b` in `R^n` and `c` real. The group
//! law is
//!
//! ```text
//! (a, b, c)(a', b', c') = (a + a', b + b', c + c' - 2(<a, b'> - <b, a'>))
//! ```
//!
//! with identity `0` and inverse `x^{-1} = -x`. The horizontal layer is
//! spanned by the left-invariant fields `X_i = e_i + 2 b_i e_{2n+1}` and
//! `Y_i = e_{n+i} - 2 a_i e_{2n+1}`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on `|omega(E) - 1|` for a direction to count as unit.
pub const UNIT_TOL: f64 = 1e-12;

/// Symplectic pairing `sum_i (u_i w_{n+i} - u_{n+i} w_i)` on `R^{2n}`.
///
/// The vertical part of the group law is `-2 * symplectic(p(x), p(y))`.
pub fn symplectic(u: &[f64], w: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), w.len());
    let n = u.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += u[i] * w[n + i] - u[n + i] * w[i];
    }
    acc
}

pub(crate) fn dot(u: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(w).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// A point of `H^n`, stored as its projection `p(x) = (a, b)` and vertical
/// coordinate `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    horiz: Vec<f64>,
    c: f64,
}

impl Point {
    pub fn new(a: &[f64], b: &[f64], c: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        let mut horiz = Vec::with_capacity(2 * a.len());
        horiz.extend_from_slice(a);
        horiz.extend_from_slice(b);
        Self::from_parts(horiz, c)
    }

    /// Builds a point from its projection and vertical coordinate.
    pub fn from_parts(horiz: Vec<f64>, c: f64) -> Result<Self> {
        if horiz.is_empty() || !horiz.len().is_multiple_of(2) {
            return Err(Error::ZeroDimension);
        }
        if !c.is_finite() || horiz.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(Point { horiz, c })
    }

    /// Builds a point from the flat coordinate list `[a..., b..., c]`.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "a point of H^n needs 2n+1 coordinates, got {}",
                coords.len()
            )));
        }
        let (horiz, c) = coords.split_at(coords.len() - 1);
        Self::from_parts(horiz.to_vec(), c[0])
    }

    pub fn origin(n: usize) -> Self {
        Point {
            horiz: vec![0.0; 2 * n],
            c: 0.0,
        }
    }

    /// Unchecked constructor for internal hot paths.
    pub(crate) fn raw(horiz: Vec<f64>, c: f64) -> Self {
        Point { horiz, c }
    }

    pub fn n(&self) -> usize {
        self.horiz.len() / 2
    }

    pub fn a(&self) -> &[f64] {
        &self.horiz[..self.n()]
    }

    pub fn b(&self) -> &[f64] {
        &self.horiz[self.n()..]
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// The projection `p(x)` onto the first `2n` coordinates.
    pub fn projection(&self) -> &[f64] {
        &self.horiz
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.horiz.clone();
        v.push(self.c);
        v
    }

    pub fn is_origin(&self) -> bool {
        self.c == 0.0 && self.horiz.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, other: &Point) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(())
    }

    /// Group product `self * other`.
    pub fn mul(&self, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Point) -> Point {
        let n = self.n();
        let mut horiz = Vec::with_capacity(2 * n);
        let mut twist = 0.0;
        for i in 0..n {
            horiz.push(self.horiz[i] + other.horiz[i]);
            twist += self.horiz[i] * other.horiz[n + i] - self.horiz[n + i] * other.horiz[i];
        }
        for i in 0..n {
            horiz.push(self.horiz[n + i] + other.horiz[n + i]);
        }
        Point {
            horiz,
            c: self.c + other.c - 2.0 * twist,
        }
    }

    pub fn inverse(&self) -> Point {
        Point {
            horiz: self.horiz.iter().map(|v| -v).collect(),
            c: -self.c,
        }
    }

    /// `self^{-1} * other`, the displacement used by every left-invariant
    /// quantity.
    pub fn delta_to(&self, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(self.inverse().mul_unchecked(other))
    }

    /// Anisotropic dilation `delta_r(a, b, c) = (r a, r b, r^2 c)`.
    pub fn dilate(&self, r: f64) -> Result<Point> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidDilation(r));
        }
        Ok(self.dilate_unchecked(r))
    }

    pub(crate) fn dilate_unchecked(&self, r: f64) -> Point {
        Point {
            horiz: self.horiz.iter().map(|v| r * v).collect(),
            c: r * r * self.c,
        }
    }

    /// Koranyi gauge `(|(a, b)|^4 + c^2)^{1/4}`.
    pub fn koranyi_norm(&self) -> f64 {
        let h2 = dot(&self.horiz, &self.horiz);
        (h2 * h2 + self.c * self.c).sqrt().sqrt()
    }

    /// Euclidean distance in `R^{2n+1}`.
    pub fn euclidean_dist(&self, other: &Point) -> f64 {
        let mut acc = (self.c - other.c).powi(2);
        for (x, y) in self.horiz.iter().zip(&other.horiz) {
            acc += (x - y).powi(2);
        }
        acc.sqrt()
    }

    /// Componentwise Euclidean sum `self + v` for a vector `v` of length `2n+1`.
    pub fn add_vector(&self, v: &[f64]) -> Result<Point> {
        if v.len() != 2 * self.n() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: v.len() / 2,
            });
        }
        let horiz = self.horiz.iter().zip(v).map(|(x, y)| x + y).collect();
        Ok(Point {
            horiz,
            c: self.c + v[2 * self.n()],
        })
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Point::from_coords(&v).map_err(serde::de::Error::custom)
    }
}

/// Group product; free-function form of [`Point::mul`].
pub fn group_mul(x: &Point, y: &Point) -> Result<Point> {
    x.mul(y)
}

pub fn dilate(r: f64, x: &Point) -> Result<Point> {
    x.dilate(r)
}

/// Koranyi distance `||x^{-1} y||_K`.
pub fn koranyi_dist(x: &Point, y: &Point) -> Result<f64> {
    Ok(x.delta_to(y)?.koranyi_norm())
}

/// A left-invariant horizontal field `E = sum h_i X_i + h_{n+i} Y_i`,
/// represented by its coefficient vector `h = p(E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalVector {
    coeffs: Vec<f64>,
}

impl HorizontalVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || !coeffs.len().is_multiple_of(2) {
            return Err(Error::ZeroDimension);
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("horizontal vector"));
        }
        Ok(HorizontalVector { coeffs })
    }

    pub(crate) fn raw(coeffs: Vec<f64>) -> Self {
        HorizontalVector { coeffs }
    }

    /// The field `X_i` (zero-based `i`).
    pub fn x(n: usize, i: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * n];
        coeffs[i] = 1.0;
        HorizontalVector { coeffs }
    }

    /// The field `Y_i` (zero-based `i`).
    pub fn y(n: usize, i: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * n];
        coeffs[n + i] = 1.0;
        HorizontalVector { coeffs }
    }

    pub fn n(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `omega(E) = |p(E)|`.
    pub fn omega(&self) -> f64 {
        norm(&self.coeffs)
    }

    pub fn is_unit(&self) -> bool {
        (self.omega() - 1.0).abs() <= UNIT_TOL
    }

    pub fn ensure_unit(&self) -> Result<()> {
        if self.is_unit() {
            Ok(())
        } else {
            Err(Error::NonUnitDirection(self.omega()))
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let w = self.omega();
        if w == 0.0 {
            return Err(Error::Undefined("cannot normalize the zero field"));
        }
        Ok(HorizontalVector {
            coeffs: self.coeffs.iter().map(|v| v / w).collect(),
        })
    }

    pub fn scaled(&self, t: f64) -> Self {
        HorizontalVector {
            coeffs: self.coeffs.iter().map(|v| t * v).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `E(0)` as a point of `H^n`; its vertical coordinate is zero.
    pub fn at_origin(&self) -> Point {
        Point::raw(self.coeffs.clone(), 0.0)
    }

    /// The point `t E(0)`.
    pub fn step(&self, t: f64) -> Point {
        Point::raw(self.coeffs.iter().map(|v| t * v).collect(), 0.0)
    }

    /// `E(x)` as a vector of `R^{2n+1}`.
    pub fn vector_at(&self, x: &Point) -> Result<Vec<f64>> {
        if x.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.n(),
            });
        }
        let mut v = self.coeffs.clone();
        v.push(2.0 * symplectic(&self.coeffs, x.projection()));
        Ok(v)
    }

    /// The point `x + t E(x)`, computed as the group product `x (t E(0))`.
    pub fn line_point(&self, x: &Point, t: f64) -> Point {
        x.mul_unchecked(&self.step(t))
    }
}

impl Serialize for HorizontalVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coeffs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HorizontalVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        HorizontalVector::new(v).map_err(serde::de::Error::custom)
    }
}

pub fn vector_at(e: &HorizontalVector, x: &Point) -> Result<Vec<f64>> {
    e.vector_at(x)
}

/// An H-linear map `x -> lip * <p(x), p(dir)>` with `dir` a unit field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HLinearMap {
    pub lip: f64,
    pub dir: HorizontalVector,
}

impl HLinearMap {
    pub fn new(lip: f64, dir: HorizontalVector) -> Result<Self> {
        if !(lip >= 0.0) || !lip.is_finite() {
            return Err(Error::InvalidArgument(format!("lip must be >= 0, got {lip}")));
        }
        dir.ensure_unit()?;
        Ok(HLinearMap { lip, dir })
    }

    pub fn zero(n: usize) -> Self {
        HLinearMap {
            lip: 0.0,
            dir: HorizontalVector::x(n, 0),
        }
    }

    /// The map `x -> <p(x), v>`; `lip = |v|`.
    pub fn from_vector(v: &[f64]) -> Self {
        let n = v.len() / 2;
        let lip = norm(v);
        if lip == 0.0 {
            return Self::zero(n);
        }
        HLinearMap {
            lip,
            dir: HorizontalVector::raw(v.iter().map(|x| x / lip).collect()),
        }
    }

    pub fn n(&self) -> usize {
        self.dir.n()
    }

    /// The representing vector `lip * p(dir)`.
    pub fn vector(&self) -> Vec<f64> {
        self.dir.coeffs.iter().map(|v| self.lip * v).collect()
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.lip * dot(x.projection(), &self.dir.coeffs)
    }

    /// Horizontal derivative `E L(x) = lip * <p(E), p(dir)>`; independent of `x`.
    pub fn derivative(&self, e: &HorizontalVector) -> f64 {
        self.lip * dot(e.coeffs(), &self.dir.coeffs)
    }

    pub fn plus(&self, other: &HLinearMap) -> HLinearMap {
        let v: Vec<f64> = self.vector().iter().zip(other.vector()).map(|(x, y)| x + y).collect();
        HLinearMap::from_vector(&v)
    }
}

pub fn hlinear_eval(l: &HLinearMap, x: &Point) -> f64 {
    l.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1(a: f64, b: f64, c: f64) -> Point {
        Point::new(&[a], &[b], c).unwrap()
    }

    #[test]
    fn mul_examples() {
        let x = p1(0.3, -1.2, 2.5);
        assert_eq!(x.mul(&Point::origin(1)).unwrap(), x);
        assert_eq!(p1(1.0, 0.0, 0.0).mul(&p1(0.0, 1.0, 0.0)).unwrap(), p1(1.0, 1.0, -2.0));
        assert!(x.mul(&x.inverse()).unwrap().is_origin());
    }

    #[test]
    fn mul_dimension_mismatch() {
        let x = Point::origin(1);
        let y = Point::origin(2);
        assert!(matches!(x.mul(&y), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dilation_examples() {
        let x = p1(1.0, 2.0, 1.0);
        assert_eq!(x.dilate(1.0).unwrap(), x);
        assert_eq!(x.dilate(3.0).unwrap(), p1(3.0, 6.0, 9.0));
        assert_eq!(x.dilate(0.5).unwrap().dilate(2.0).unwrap(), x);
        assert!(matches!(x.dilate(0.0), Err(Error::InvalidDilation(_))));
        assert!(x.dilate(-1.0).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let x1 = HorizontalVector::x(1, 0);
        let y1 = HorizontalVector::y(1, 0);
        assert_eq!(x1.vector_at(&Point::origin(1)).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(x1.vector_at(&p1(0.0, 1.0, 0.0)).unwrap(), vec![1.0, 0.0, 2.0]);
        assert_eq!(y1.vector_at(&p1(1.0, 0.0, 0.0)).unwrap(), vec![0.0, 1.0, -2.0]);
    }

    #[test]
    fn koranyi_examples() {
        let o = Point::origin(1);
        let x = p1(0.7, 0.1, -3.0);
        assert_eq!(koranyi_dist(&x, &x).unwrap(), 0.0);
        assert!((koranyi_dist(&o, &p1(0.0, 0.0, 4.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!((koranyi_dist(&o, &p1(3.0, 4.0, 0.0)).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hlinear_examples() {
        let l = HLinearMap::new(1.0, HorizontalVector::x(2, 0)).unwrap();
        assert_eq!(l.eval(&Point::origin(2)), 0.0);
        let t = 0.37;
        let x = Point::new(&[t, 0.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(l.eval(&x), t);
        let y = Point::new(&[0.2, -1.0], &[0.4, 3.0], 1.5).unwrap();
        assert!((l.eval(&y.dilate(2.0).unwrap()) - 2.0 * l.eval(&y)).abs() < 1e-15);
        assert!(HLinearMap::new(1.0, HorizontalVector::new(vec![1.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn serde_flat_arrays() {
        let x = p1(1.0, 2.0, 3.0);
        assert_eq!(serde_json::to_string(&x).unwrap(), "[1.0,2.0,3.0]");
        let back: Point = serde_json::from_str("[1.0,2.0,3.0]").unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<Point>("[1.0,2.0]").is_err());
        let e: HorizontalVector = serde_json::from_str("[0.6,0.8]").unwrap();
        assert!(e.is_unit());
    }
}
