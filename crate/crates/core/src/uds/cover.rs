//! Finite tube covers of the enumerated rational horizontal lines.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::HorizontalPath;
use crate::error::{Error, Result};
use crate::group::{dot, norm, symplectic, Point};
use crate::metric;
use crate::sampling;

use super::rational::{enumerate_lines, RationalLine};

pub const DEFAULT_HEIGHT: u64 = 8;
pub const DEFAULT_DEPTH: usize = 12;
pub const DEFAULT_CLIP: f64 = 10.0;

/// Relative tolerance for deciding that a floating point lies on a line.
const ON_LINE_TOL: f64 = 1e-9;

/// Floating point geometry of one line, with its clipped parameter range.
#[derive(Debug, Clone)]
struct LineGeom {
    base: Vec<f64>,
    base_c: f64,
    dir: Vec<f64>,
    dir2: f64,
    /// `2 symplectic(dir, p(base))`: vertical growth per unit parameter.
    slope: f64,
    clip: Option<(f64, f64)>,
}

impl LineGeom {
    fn new(line: &RationalLine, clip: f64) -> Self {
        let base = line.base.to_point();
        let dir = line.direction_f64();
        let slope = 2.0 * symplectic(&dir, base.projection());
        let mut g = LineGeom {
            base: base.projection().to_vec(),
            base_c: base.c(),
            dir2: dot(&dir, &dir),
            dir,
            slope,
            clip: None,
        };
        g.clip = g.clip_range(clip);
        g
    }

    /// Parameter interval on which the line stays in `[-clip, clip]^{2n+1}`;
    /// every coordinate is affine in the parameter.
    fn clip_range(&self, clip: f64) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let coords = self
            .base
            .iter()
            .zip(&self.dir)
            .map(|(b, d)| (*b, *d))
            .chain(std::iter::once((self.base_c, self.slope)));
        for (b, d) in coords {
            if d == 0.0 {
                if b.abs() > clip {
                    return None;
                }
            } else {
                let (t0, t1) = ((-clip - b) / d, (clip - b) / d);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    fn point(&self, t: f64) -> Point {
        let horiz = self.base.iter().zip(&self.dir).map(|(b, d)| b + t * d).collect();
        Point::raw(horiz, self.base_c + t * self.slope)
    }

    /// Parameter of the planar foot of `x` and the planar distance to it.
    fn planar_foot(&self, x: &Point) -> (f64, f64) {
        let p = x.projection();
        let along: f64 = p.iter().zip(&self.base).zip(&self.dir).map(|((a, b), d)| (a - b) * d).sum();
        let t = along / self.dir2;
        let perp: f64 = p
            .iter()
            .zip(&self.base)
            .zip(&self.dir)
            .map(|((a, b), d)| (a - b - t * d).powi(2))
            .sum::<f64>()
            .sqrt();
        (t, perp)
    }

    /// Whether `x` lies on the (unclipped) line up to rounding.
    fn on_line(&self, x: &Point) -> bool {
        let (t, perp) = self.planar_foot(x);
        let scale = 1.0 + norm(x.projection()) + x.c().abs() + t.abs() * self.dir2.sqrt();
        perp <= ON_LINE_TOL * scale && (x.c() - self.base_c - t * self.slope).abs() <= ON_LINE_TOL * scale
    }

    /// Parameter length of the clipped segment (zero when empty).
    fn clipped_length(&self) -> f64 {
        self.clip.map_or(0.0, |(a, b)| (b - a) * self.dir2.sqrt())
    }

    /// Conservative test `dist(x, clipped segment) <= r`: a planar lower
    /// bound rejects, then upper bounds along the segment near the foot.
    fn within(&self, x: &Point, r: f64) -> bool {
        self.segment_distance(x, r, true).is_some()
    }

    /// Smallest upper bound found for `dist(x, clipped segment)` when it is
    /// at most `r`; with `early` the search stops at the first success.
    fn segment_distance(&self, x: &Point, r: f64, early: bool) -> Option<f64> {
        let (t0, t1) = self.clip?;
        let (foot, perp) = self.planar_foot(x);
        let speed = self.dir2.sqrt();
        let reach = r / speed;
        if perp > r || foot < t0 - reach || foot > t1 + reach {
            return None;
        }
        if foot >= t0 && foot <= t1 && self.on_line(x) {
            return Some(0.0);
        }
        // Along the line `x^{-1} y(t)` has vertical part `c0 + c1 t` and
        // `d >= sqrt|c|`, so only parameters with `|c0 + c1 t| <= r^2` and
        // planar distance at most `r` can come within `r`.
        let xinv = x.inverse();
        let c0 = xinv.mul_unchecked(&self.point(0.0)).c();
        let c1 = xinv.mul_unchecked(&self.point(1.0)).c() - c0;
        let half = (r * r - perp * perp).max(0.0).sqrt() / speed;
        let (mut a, mut b) = ((foot - half).max(t0), (foot + half).min(t1));
        let r2 = r * r * (1.0 + 1e-12);
        if c1 == 0.0 {
            if c0.abs() > r2 {
                return None;
            }
        } else {
            let (v0, v1) = ((-r2 - c0) / c1, (r2 - c0) / c1);
            a = a.max(v0.min(v1));
            b = b.min(v0.max(v1));
        }
        if a > b {
            return None;
        }
        let dist = |t: f64| metric::cc_upper_value(x, &self.point(t)).unwrap_or(f64::INFINITY);
        let mut best = dist(foot.clamp(a, b));
        if early && best <= r {
            return Some(best);
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let m1 = b - g * (b - a);
            let m2 = a + g * (b - a);
            let (d1, d2) = (dist(m1), dist(m2));
            best = best.min(d1).min(d2);
            if early && best <= r {
                return Some(best);
            }
            if d1 < d2 {
                b = m2;
            } else {
                a = m1;
            }
        }
        (best <= r).then_some(best)
    }
}

/// Volume of the unit Euclidean ball of `R^{2n}`.
fn unit_ball_volume(n: usize) -> f64 {
    PI.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>()
}

/// Lines grouped by direction, each group sorted by the offset along a fixed
/// unit normal, so that only lines with a nearby offset are tested exactly.
#[derive(Debug, Clone, Default)]
struct LineIndex {
    groups: Vec<DirectionGroup>,
}

#[derive(Debug, Clone)]
struct DirectionGroup {
    normal: Vec<f64>,
    max_base: f64,
    /// `(offset, line index)` sorted by offset.
    offsets: Vec<(f64, usize)>,
}

impl LineIndex {
    fn new<'a>(geoms: impl Iterator<Item = &'a LineGeom>) -> Self {
        let mut by_dir: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups: Vec<DirectionGroup> = Vec::new();
        for (i, g) in geoms.enumerate() {
            let key: Vec<u64> = g.dir.iter().map(|d| d.to_bits()).collect();
            let slot = *by_dir.entry(key).or_insert_with(|| {
                groups.push(DirectionGroup {
                    normal: unit_normal(&g.dir),
                    max_base: 0.0,
                    offsets: Vec::new(),
                });
                groups.len() - 1
            });
            let group = &mut groups[slot];
            group.max_base = group.max_base.max(norm(&g.base));
            group.offsets.push((dot(&g.base, &group.normal), i));
        }
        for group in &mut groups {
            group.offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        LineIndex { groups }
    }

    /// Smallest index of a line passing through `x` up to rounding.
    fn line_through<'a>(&self, geom: impl Fn(usize) -> &'a LineGeom, x: &Point) -> Option<usize> {
        let p = x.projection();
        let size = 1.0 + 2.0 * norm(p) + x.c().abs();
        let mut best: Option<usize> = None;
        for group in &self.groups {
            // On a line the normal offset differs by at most the planar
            // distance, which the on-line test bounds by the tolerance times
            // at most `size + |base|`.
            let reach = 2.0 * ON_LINE_TOL * (size + group.max_base);
            let s = dot(p, &group.normal);
            let start = group.offsets.partition_point(|(o, _)| *o < s - reach);
            for &(o, i) in &group.offsets[start..] {
                if o > s + reach {
                    break;
                }
                if best.is_none_or(|b| i < b) && geom(i).on_line(x) {
                    best = Some(i);
                }
            }
        }
        best
    }
}

/// A unit vector orthogonal to the nonzero vector `d`.
fn unit_normal(d: &[f64]) -> Vec<f64> {
    let i = (0..d.len()).max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())).unwrap_or(0);
    let j = if i == 0 { 1 } else { 0 };
    let mut w = vec![0.0; d.len()];
    w[i] = -d[j];
    w[j] = d[i];
    let len = norm(&w);
    w.iter_mut().for_each(|v| *v /= len);
    w
}

/// Analytic volume bound for the union of tubes of radii `c / 2^i`: a tube
/// of radius `r` around a segment of parameter length `l` is covered by
/// `l/r + 2` CC balls of radius `2r`, each of volume at most
/// `(2r)^{2n+2} 2 omega_{2n}`.
fn volume_bound(lengths: &[f64], c: f64, n: usize) -> f64 {
    let ball = 2.0 * unit_ball_volume(n);
    let dim = (2 * n + 2) as i32;
    let mut r = c;
    let mut total = 0.0;
    for &l in lengths {
        if r == 0.0 {
            break;
        }
        if l > 0.0 {
            total += (l * 2f64.powi(dim) * r.powi(dim - 1) + 2.0 * (2.0 * r).powi(dim)) * ball;
        }
        r *= 0.5;
    }
    total
}

/// Largest `c` (by bisection) whose volume bound does not exceed `target`.
fn radius_constant(lengths: &[f64], target: f64, n: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while volume_bound(lengths, hi, n) <= target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if volume_bound(lengths, mid, n) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Cover description written alongside constructed covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverManifest {
    pub n: usize,
    pub height: u64,
    pub depth: usize,
    pub clip: f64,
    pub lines: usize,
    pub extra_lines: usize,
    /// `c_k` for `k = 1..=depth`; line `i` gets radius `c_k / 2^i`.
    pub radius_constants: Vec<f64>,
    /// Analytic volume bound for each level.
    pub volume_bounds: Vec<f64>,
    pub tube_shape: String,
}

/// Tube covers `U_1 ⊃ ... ⊃ U_depth` of the enumerated lines; extra lines
/// belong to every level with radius zero.
#[derive(Debug, Clone)]
pub struct NCover {
    n: usize,
    height: u64,
    clip: f64,
    lines: Vec<RationalLine>,
    geoms: Vec<LineGeom>,
    extra: Vec<RationalLine>,
    extra_geoms: Vec<LineGeom>,
    index: LineIndex,
    constants: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub level: usize,
    pub samples: usize,
    pub hits: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub region_volume: f64,
    /// Analytic bound `2^{-k}` divided by the region volume.
    pub bound_fraction: f64,
}

/// Axis-aligned box of `R^{2n+1}` for Monte Carlo sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn cube(n: usize, center: &[f64], half: f64) -> Self {
        assert_eq!(center.len(), 2 * n + 1);
        BoxRegion {
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let coords: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        Point::from_coords(&coords).expect("box dimension")
    }
}

/// Wilson score interval at 95%.
fn wilson(hits: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    let low = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if hits == n { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

impl NCover {
    pub fn build(n: usize, height: u64, depth: usize, clip: f64) -> Result<Self> {
        Self::build_with_lines(n, height, depth, clip, Vec::new())
    }

    /// Builds the cover and registers additional rational lines, which may
    /// have non-unit rational directions.
    pub fn build_with_lines(n: usize, height: u64, depth: usize, clip: f64, extra: Vec<RationalLine>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be >= 1".into()));
        }
        if !(clip > 0.0) {
            return Err(Error::InvalidArgument("clip half-width must be positive".into()));
        }
        if let Some(l) = extra.iter().find(|l| l.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: l.n() });
        }
        let lines = enumerate_lines(n, height)?;
        let geoms: Vec<LineGeom> = lines.iter().map(|l| LineGeom::new(l, clip)).collect();
        let lengths: Vec<f64> = geoms.iter().map(|g| g.clipped_length()).collect();
        let mut constants: Vec<f64> = Vec::with_capacity(depth);
        for k in 1..=depth {
            let c = radius_constant(&lengths, 2f64.powi(-(k as i32)), n);
            let c = constants.last().map_or(c, |prev: &f64| c.min(*prev));
            constants.push(c);
        }
        let extra_geoms: Vec<LineGeom> = extra.iter().map(|l| LineGeom::new(l, clip)).collect();
        let index = LineIndex::new(geoms.iter().chain(&extra_geoms));
        Ok(NCover {
            n,
            height,
            clip,
            lines,
            geoms,
            extra,
            extra_geoms,
            index,
            constants,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.constants.len()
    }

    pub fn lines(&self) -> &[RationalLine] {
        &self.lines
    }

    pub fn extra_lines(&self) -> &[RationalLine] {
        &self.extra
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.depth() {
            return Err(Error::LevelOutOfRange {
                requested: level,
                depth: self.depth(),
            });
        }
        Ok(())
    }

    /// Tube radius of line `index` at `level`.
    pub fn radius(&self, level: usize, index: usize) -> Result<f64> {
        self.check_level(level)?;
        Ok(self.constants[level - 1] * 2f64.powi(-(index.min(2000) as i32)))
    }

    pub fn volume_bound(&self, level: usize) -> Result<f64> {
        self.check_level(level)?;
        let lengths: Vec<f64> = self.geoms.iter().map(|g| g.clipped_length()).collect();
        Ok(volume_bound(&lengths, self.constants[level - 1], self.n))
    }

    /// Index of a line (enumerated first, then extra) containing `x`.
    pub fn line_through(&self, x: &Point) -> Option<usize> {
        let main = self.geoms.len();
        self.index
            .line_through(|i| if i < main { &self.geoms[i] } else { &self.extra_geoms[i - main] }, x)
    }

    /// Largest `rho` (conservatively) with the closed ball `B(x, rho)`
    /// inside the level tube union; zero when no tube contains `x`.
    pub fn interior_margin(&self, x: &Point, level: usize) -> Result<f64> {
        self.check_level(level)?;
        let mut r = self.constants[level - 1];
        let mut best: f64 = 0.0;
        for g in &self.geoms {
            if r == 0.0 || r <= best {
                break;
            }
            if let Some(d) = g.segment_distance(x, r, false) {
                best = best.max(r - d);
            }
            r *= 0.5;
        }
        Ok(best)
    }

    /// Points on the first `max_index` enumerated lines (and on any line
    /// through `x`) whose upper distance to `x` is below `radius`, sampled at
    /// the planar foot of `x` and at the given parameter offsets.
    pub fn points_near(&self, x: &Point, radius: f64, offsets: &[f64], max_index: usize) -> Vec<Point> {
        let mut out = Vec::new();
        let own = self.line_through(x);
        let all = self.geoms.iter().chain(&self.extra_geoms).enumerate();
        for (i, g) in all {
            if i >= max_index && Some(i) != own {
                continue;
            }
            let (foot, perp) = g.planar_foot(x);
            if perp >= radius {
                continue;
            }
            let speed = g.dir2.sqrt();
            for &o in std::iter::once(&0.0).chain(offsets) {
                let p = g.point(foot + o * radius / speed);
                if metric::cc_upper_value(x, &p).is_ok_and(|d| d < radius) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Whether `x` lies in `U_1 ∩ ... ∩ U_level`.
    ///
    /// Radii shrink with the level, so membership in `U_level` through a
    /// given line implies membership in every earlier level.
    pub fn contains(&self, x: &Point, level: usize) -> Result<bool> {
        self.check_level(level)?;
        if x.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.n(),
            });
        }
        if self.line_through(x).is_some() {
            return Ok(true);
        }
        let c = self.constants[level - 1];
        let mut r = c;
        for g in &self.geoms {
            if r == 0.0 {
                break;
            }
            if g.within(x, r) {
                return Ok(true);
            }
            r *= 0.5;
        }
        Ok(false)
    }

    /// Samples the path at its knots and at `samples` uniform parameters.
    pub fn curve_in_cover(&self, path: &HorizontalPath, level: usize, samples: usize) -> Result<bool> {
        let (a, b) = path.domain();
        let mut ts: Vec<f64> = path.knots().to_vec();
        for i in 0..samples {
            ts.push(a + (b - a) * (i as f64 + 0.5) / samples as f64);
        }
        for t in ts {
            if !self.contains(&path.eval(t), level)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn measure_mc(&self, level: usize, region: &BoxRegion, samples: usize, seed: u64) -> Result<MeasureEstimate> {
        self.check_level(level)?;
        if samples < 1000 {
            return Err(Error::InvalidArgument(format!("need >= 1000 samples, got {samples}")));
        }
        if region.lo.len() != 2 * self.n + 1 || region.hi.len() != 2 * self.n + 1 {
            return Err(Error::InvalidArgument("region dimension".into()));
        }
        let mut rng = sampling::rng_for(seed, "uds-measure");
        let points: Vec<Point> = (0..samples).map(|_| region.sample(&mut rng)).collect();
        let hits: Vec<bool> = points.par_iter().map(|p| self.contains(p, level)).collect::<Result<Vec<bool>>>()?;
        let hits = hits.into_iter().filter(|h| *h).count();
        let (ci_low, ci_high) = wilson(hits, samples);
        let region_volume = region.volume();
        Ok(MeasureEstimate {
            level,
            samples,
            hits,
            fraction: hits as f64 / samples as f64,
            ci_low,
            ci_high,
            region_volume,
            bound_fraction: 2f64.powi(-(level as i32)) / region_volume,
        })
    }

    pub fn manifest(&self) -> CoverManifest {
        let lengths: Vec<f64> = self.geoms.iter().map(|g| g.clipped_length()).collect();
        CoverManifest {
            n: self.n,
            height: self.height,
            depth: self.depth(),
            clip: self.clip,
            lines: self.lines.len(),
            extra_lines: self.extra.len(),
            radius_constants: self.constants.clone(),
            volume_bounds: self.constants.iter().map(|&c| volume_bound(&lengths, c, self.n)).collect(),
            tube_shape: "CC neighborhoods of clipped line segments, radius c_k / 2^i".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_bounds_respect_levels() {
        let cover = NCover::build(1, 3, 6, DEFAULT_CLIP).unwrap();
        for k in 1..=6 {
            assert!(cover.volume_bound(k).unwrap() <= 2f64.powi(-(k as i32)));
            if k > 1 {
                assert!(cover.radius(k, 0).unwrap() <= cover.radius(k - 1, 0).unwrap());
            }
        }
        assert!(matches!(cover.contains(&Point::origin(1), 7), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn points_on_lines_and_far_away() {
        let cover = NCover::build(1, 3, 4, DEFAULT_CLIP).unwrap();
        let on = Point::new(&[0.25], &[0.0], 0.0).unwrap();
        for k in 1..=4 {
            assert!(cover.contains(&on, k).unwrap());
        }
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (a, b) = wilson(0, 1000);
        assert_eq!(a, 0.0);
        assert!(b > 0.0 && b < 0.01);
        let (a, b) = wilson(500, 1000);
        assert!(a < 0.5 && b > 0.5);
    }
}
