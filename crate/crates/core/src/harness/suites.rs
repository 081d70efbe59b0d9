use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::report::{Series, SuiteResult};
use crate::calculus::{
    almost_maximal_pair_check, curve_directional_consistency, default_steps, directional_derivative, lipschitz_estimate, mean_value_search,
    pansu_residual_sampled, verify_mean_value, Decision, MeanValueInstance, Region, ScalarField,
};
use crate::curves::{self, HorizontalPath, ModifyLineParams};
use crate::error::{Error, Result};
use crate::group::{norm, symplectic, HLinearMap, HorizontalVector, Point};
use crate::maximizer::{self, MaximizerConfig};
use crate::metric::{self, Ball};
use crate::sampling;
use crate::uds::{rational, BoxRegion, NCover, RationalPoint};

/// Running count of checks, failures and the smallest margin.
struct Tally {
    trials: usize,
    failures: usize,
    worst: f64,
    notes: Vec<String>,
    metrics: BTreeMap<String, f64>,
    series: Vec<Series>,
}

const MAX_NOTES: usize = 8;

impl Tally {
    fn new() -> Self {
        Tally {
            trials: 0,
            failures: 0,
            worst: f64::INFINITY,
            notes: Vec::new(),
            metrics: BTreeMap::new(),
            series: Vec::new(),
        }
    }

    fn note(&mut self, text: String) {
        if self.notes.len() < MAX_NOTES {
            self.notes.push(text);
        }
    }

    /// One check passing iff `margin >= 0`.
    fn check(&mut self, margin: f64, what: impl FnOnce() -> String) {
        self.trials += 1;
        if margin.is_finite() {
            self.worst = self.worst.min(margin);
        }
        if !(margin >= 0.0) {
            self.failures += 1;
            let text = format!("{} (margin {margin:e})", what());
            self.note(text);
        }
    }

    fn flag(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            let text = what();
            self.note(text);
        }
    }

    /// Records a construction error as a failed trial.
    fn error(&mut self, context: &str, e: Error) {
        self.flag(false, || format!("{context}: {e}"));
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn finish(self, suite: &str, seed: u64) -> SuiteResult {
        SuiteResult {
            suite: suite.to_string(),
            trials: self.trials,
            failures: self.failures,
            worst_margin: if self.worst.is_finite() { self.worst } else { 0.0 },
            seed,
            metrics: self.metrics,
            notes: self.notes,
            series: self.series,
            wall_time: None,
        }
    }
}

fn rng(cfg: &RunConfig, suite: &str) -> ChaCha8Rng {
    sampling::rng_for(cfg.seed, &format!("suite-{suite}"))
}

fn relative_spread(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn random_polyline(rng: &mut ChaCha8Rng, n: usize, segments: usize) -> Vec<Vec<f64>> {
    (0..=segments)
        .map(|_| (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn random_path(rng: &mut ChaCha8Rng, n: usize) -> Result<HorizontalPath> {
    let segments = rng.gen_range(1..=8);
    let polyline = random_polyline(rng, n, segments);
    let base = Point::from_parts(polyline[0].clone(), rng.gen_range(-1.0..1.0))?;
    curves::lift_planar(&polyline, &base)
}

fn lift(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let tol = cfg.tolerances.lift;
    let mut rng = rng(cfg, "lift");
    for _ in 0..cfg.trials_for("lift") {
        let path = match random_path(&mut rng, n) {
            Ok(p) => p,
            Err(e) => {
                tally.error("lift_planar", e);
                continue;
            }
        };
        let knots = path.knots();
        let j = rng.gen_range(0..knots.len() - 1);
        let (a, b) = (knots[j], knots[j + 1]);
        let t = a + (b - a) * rng.gen_range(0.1..0.9);
        let h = 1e-3 * (b - a);
        let r = curves::lift_residual(&path, t, h);
        tally.check(tol - r, || format!("horizontality residual {r:e} at t = {t}"));
    }
    // Closed form on a regular polygon approximating the unit circle.
    let segments = 10_000;
    let circle: Vec<Vec<f64>> = (0..=segments)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / segments as f64;
            let mut v = vec![0.0; 2 * n];
            v[0] = th.cos();
            v[n] = th.sin();
            v
        })
        .collect();
    let base = Point::from_parts(circle[0].clone(), 0.0)?;
    let c = curves::lift_planar(&circle, &base)?.end().c();
    tally.metric("circle_vertical", c);
    tally.check(tol - (c + 4.0 * PI).abs(), || {
        format!("unit circle lifts to vertical {c}, expected -4 pi")
    });
    // A line through the origin has no vertical component.
    let dir = sampling::unit_vector(&mut rng, 2 * n);
    let line: Vec<Vec<f64>> = [-1.0, 0.0, 0.5, 2.0].iter().map(|s| dir.iter().map(|d| s * d).collect()).collect();
    let c = curves::lift_planar(&line, &Point::from_parts(line[0].clone(), 0.0)?)?.end().c();
    tally.check(1e-12 - c.abs(), || format!("line through the origin lifts to vertical {c}"));
    Ok(())
}

fn horizontaldistances(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let mut rng = rng(cfg, "horizontaldistances");
    for i in 0..cfg.trials_for("horizontaldistances") {
        let x = sampling::box_point(&mut rng, cfg.n, 2.0, 4.0);
        let w = if i % 4 == 0 { rng.gen_range(0.5..2.0) } else { 1.0 };
        let e = sampling::unit_horizontal(&mut rng, cfg.n).scaled(w);
        let t = rng.gen_range(-2.0..2.0);
        let (lo, hi) = metric::cc_bracket(&x, &e.line_point(&x, t))?;
        let exact = t.abs() * e.omega();
        let err = (lo - exact).abs().max((hi - exact).abs());
        tally.check(cfg.tolerances.distance - err, || {
            format!("bracket [{lo}, {hi}] misses |t| omega = {exact}")
        });
    }
    Ok(())
}

fn lipschitzhorizontal(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let mut rng = rng(cfg, "lipschitzhorizontal");
    let tol = cfg.tolerances.distance;
    for _ in 0..cfg.trials_for("lipschitzhorizontal") {
        let path = random_path(&mut rng, cfg.n)?;
        let lip = path.lipschitz_constant();
        let (a, b) = path.domain();
        let s = rng.gen_range(a..b);
        let t = rng.gen_range(a..b);
        let lower = metric::cc_lower(&path.eval(s), &path.eval(t))?;
        tally.check(lip * (t - s).abs() * (1.0 + 1e-12) + tol - lower, || {
            format!("d(g({s}), g({t})) >= {lower} exceeds Lip_E(p o g) |t - s|")
        });
        // On one segment the distance equals the projected length.
        let knots = path.knots();
        let j = (0..knots.len() - 1)
            .max_by(|&i, &k| {
                let vi = norm(&path.segment_velocity(i)[..2 * cfg.n]);
                let vk = norm(&path.segment_velocity(k)[..2 * cfg.n]);
                vi.total_cmp(&vk)
            })
            .unwrap_or(0);
        let (s, t) = (knots[j], knots[j + 1]);
        let speed = norm(&path.segment_velocity(j)[..2 * cfg.n]);
        let (lo, hi) = metric::cc_bracket(&path.eval(s), &path.eval(t))?;
        let exact = speed * (t - s);
        let err = (lo - exact).abs().max((hi - exact).abs());
        tally.check(tol * exact.max(1.0) - err, || {
            format!("fastest segment: bracket [{lo}, {hi}] differs from Lip_E (t - s) = {exact}")
        });
    }
    Ok(())
}

fn smooth_field() -> ScalarField {
    ScalarField::new("smooth", None, |x: &Point| {
        let a: f64 = x.a().iter().map(|v| v.sin()).sum();
        let b: f64 = x.b().iter().map(|v| v.cos()).sum();
        a + 0.5 * b + 0.25 * x.c().sin()
    })
}

fn welldefined(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let mut rng = rng(cfg, "welldefined");
    let f = smooth_field();
    let steps = default_steps();
    for _ in 0..cfg.trials_for("welldefined") {
        let x = sampling::box_point(&mut rng, n, 1.0, 1.0);
        let e = sampling::unit_horizontal(&mut rng, n);
        let w: Vec<f64> = sampling::unit_vector(&mut rng, 2 * n)
            .into_iter()
            .map(|v| v * rng.gen_range(0.0..1.0))
            .collect();
        let omega = symplectic(e.coeffs(), &w);
        let (xg, eg) = (x.clone(), e.clone());
        let g = move |t: f64| eg.line_point(&xg, t);
        let (xh, eh) = (x.clone(), e.clone());
        let h = move |t: f64| {
            let horiz: Vec<f64> = eh.coeffs().iter().zip(&w).map(|(a, b)| t * a + t * t * b).collect();
            let c = -2.0 / 3.0 * t.powi(3) * omega;
            xh.mul(&Point::from_parts(horiz, c).expect("finite")).expect("same dimension")
        };
        match curve_directional_consistency(&f, &x, &e, &g, &h, 0.0, &steps) {
            Ok(r) => {
                let slack = r.along_g.error + r.along_h.error + 1e-8;
                tally.check(slack - r.difference, || {
                    format!("derivatives along two tangent curves differ by {:e}", r.difference)
                });
            }
            Err(e) => tally.error("curve consistency", e),
        }
    }
    Ok(())
}

fn lipismaximal(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let samples = cfg.trials_for("lipismaximal").max(100);
    let tol = cfg.tolerances.lipschitz;
    let region = Region::annulus(Point::origin(n), 0.5, 2.0);
    let e = HorizontalVector::x(n, 0);
    let declared = [
        ScalarField::maximal_at_origin(&e, 0.5, 1.0),
        ScalarField::hlinear(HLinearMap::new(0.7, HorizontalVector::y(n, n - 1))?),
        ScalarField::min_of(vec![
            ScalarField::hlinear(HLinearMap::new(0.3, e.clone())?),
            ScalarField::maximal_at_origin(&HorizontalVector::y(n, 0), 0.4, 2.0),
        ]),
    ];
    for (k, f) in declared.iter().enumerate() {
        let est = lipschitz_estimate(f, &region, samples, cfg.seed.wrapping_add(k as u64), tol)?;
        let bound = f.declared_lip.unwrap_or(f64::INFINITY);
        tally.trials += est.samples.saturating_sub(2);
        tally.check(bound * (1.0 + tol) - est.dir_sup, || {
            format!("{}: directional sup {} above declared {bound}", f.label, est.dir_sup)
        });
        tally.flag(est.consistent, || {
            format!("{}: pair sup {} exceeds directional sup {}", f.label, est.pair_sup, est.dir_sup)
        });
        tally.metric(&format!("{}_dir_sup", f.label), est.dir_sup);
    }
    let gauge = ScalarField::koranyi_gauge();
    let est = lipschitz_estimate(&gauge, &region, samples, cfg.seed.wrapping_add(99), tol)?;
    tally.trials += est.samples.saturating_sub(1);
    tally.metric("koranyi_pair_sup", est.pair_sup);
    tally.metric("koranyi_dir_sup", est.dir_sup);
    tally.check(0.05 * est.pair_sup - (est.dir_sup - est.pair_sup).abs(), || {
        format!(
            "Koranyi gauge: directional sup {} not within 5% of pair sup {}",
            est.dir_sup, est.pair_sup
        )
    });
    Ok(())
}

fn goodcurve(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let mut rng = rng(cfg, "goodcurve");
    let mut checked = 0;
    while checked < cfg.trials_for("goodcurve") {
        let y = sampling::box_point(&mut rng, n, 2.0, 4.0);
        if norm(y.projection()) < 1e-3 {
            continue;
        }
        checked += 1;
        let path = curves::gamma_y(&y)?;
        let end_err = path.end().euclidean_dist(&y).max(path.start().euclidean_dist(&Point::origin(n)));
        tally.check(1e-12 - end_err, || format!("gamma_y endpoint error {end_err:e}"));
        let lip = path.lipschitz_constant();
        let bound = curves::gamma_y_lip_bound(&y);
        tally.check(bound * (1.0 + 1e-12) - lip, || format!("Lip {lip} above bound {bound}"));
        let dev = curves::gamma_y_deviation(&path, &y);
        let dbound = curves::gamma_y_deviation_bound(&y);
        tally.check(dbound * (1.0 + 1e-12) - dev, || {
            format!("derivative deviation {dev} above bound {dbound}")
        });
    }
    Ok(())
}

/// Random point with `upper_norm = scale`.
fn point_at_scale(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Point {
    loop {
        let w = sampling::box_point(rng, n, 1.0, 1.0);
        let d = metric::upper_norm(&w);
        if d > 1e-6 {
            return w.dilate_unchecked(scale / d);
        }
    }
}

fn differentiabilityofdistance(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let tol = &cfg.tolerances;
    let mut rng = rng(cfg, "differentiabilityofdistance");
    let u = HorizontalVector::x(n, 0);
    let trials = cfg.trials_for("differentiabilityofdistance");
    let zs: Vec<Point> = (0..trials)
        .map(|_| {
            let s = 0.5 * rng.gen_range(0.0f64..1.0).max(1e-6);
            point_at_scale(&mut rng, n, s)
        })
        .collect();
    let report = metric::distance_pansu_check(&u, &zs, tol.margin)?;
    for s in &report.samples {
        tally.check(s.margin + tol.margin, || format!("d(uz) below the linear bound by {:e}", -s.margin));
    }
    let mut series = Series::new("residual-vs-radius", &["radius", "residual"]);
    let scales = [1e-1, 1e-2, 1e-3, 1e-4];
    let per_scale = (trials / 5).max(20);
    let mut residuals = Vec::new();
    for &scale in &scales {
        let zs: Vec<Point> = (0..per_scale).map(|_| point_at_scale(&mut rng, n, scale)).collect();
        let r = metric::distance_pansu_check(&u, &zs, tol.margin)?.max_residual;
        series.rows.push(vec![scale, r]);
        residuals.push(r);
    }
    for w in residuals.windows(2) {
        tally.check(w[0] - w[1], || format!("residual rose from {} to {}", w[0], w[1]));
    }
    let last = *residuals.last().unwrap();
    tally.metric("residual_at_smallest_scale", last);
    tally.check(tol.distance_residual - last, || format!("residual {last} at the smallest scale"));
    tally.series.push(series);
    Ok(())
}

fn maximality(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let e = HorizontalVector::x(n, 0);
    let lip = 1.0;
    let f = ScalarField::maximal_at_origin(&e, lip, 1.0);
    let x = Point::origin(n);
    let d = directional_derivative(&f, &x, &e, &default_steps())?;
    tally.check(1e-8 - (d.value - lip).abs(), || {
        format!("E f(0) = {} differs from Lip = {lip}", d.value)
    });
    let l = HLinearMap::new(lip, e)?;
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let samples = cfg.trials_for("maximality").max(1);
    let report = pansu_residual_sampled(&f, &x, &l, &radii, samples, cfg.seed)?;
    tally.trials += report.samples_used;
    let mut series = Series::new("residual-vs-radius", &["radius", "residual"]);
    for (r, v) in report.radii.iter().zip(&report.residuals) {
        series.rows.push(vec![*r, *v]);
    }
    for w in report.residuals.windows(2) {
        tally.check(w[0] - w[1], || format!("Pansu residual rose from {} to {}", w[0], w[1]));
    }
    let last = *report.residuals.last().unwrap();
    tally.metric("residual_at_smallest_radius", last);
    tally.check(cfg.tolerances.pansu - last, || {
        format!("Pansu residual {last} at the smallest radius")
    });
    tally.series.push(series);
    Ok(())
}

fn uds(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let p = &cfg.uds;
    let cover = NCover::build(n, p.height_for(n), p.depth, p.clip)?;
    tally.metric("lines", cover.lines().len() as f64);
    for k in 1..=p.depth {
        let vb = cover.volume_bound(k)?;
        let cap = 2f64.powi(-(k as i32));
        tally.check(cap - vb, || format!("level {k}: volume bound {vb:e} above {cap:e}"));
        if k < p.depth {
            let i = (k * 37) % cover.lines().len();
            let (r0, r1) = (cover.radius(k, i)?, cover.radius(k + 1, i)?);
            tally.check(r0 - r1, || format!("radius of line {i} grows from level {k} to {}", k + 1));
        }
    }
    let region = BoxRegion::cube(n, &vec![0.0; 2 * n + 1], p.mc_half_width);
    let mut series = Series::new("measure-vs-level", &["level", "fraction", "ci_low", "ci_high", "bound_fraction"]);
    for &k in &p.mc_levels {
        let m = cover.measure_mc(k, &region, p.mc_samples.max(1000), cfg.seed)?;
        series.rows.push(vec![k as f64, m.fraction, m.ci_low, m.ci_high, m.bound_fraction]);
        tally.check(m.bound_fraction - m.ci_low, || {
            format!(
                "level {k}: Monte Carlo lower bound {} above the analytic fraction {}",
                m.ci_low, m.bound_fraction
            )
        });
    }
    tally.series.push(series);
    // Nesting U_{k+1} within U_k on points near and away from the lines.
    let mut rng = rng(cfg, "uds");
    let lines = cover.lines().len().min(256);
    let queries: Vec<Point> = (0..cfg.trials_for("uds"))
        .map(|i| {
            if i % 2 == 0 {
                sampling::box_point(&mut rng, n, 1.0, 1.0)
            } else {
                let line = &cover.lines()[rng.gen_range(0..lines)];
                let t = rng.gen_range(-1.0..1.0);
                let on = line.point(&rational::q_from_f64(t).expect("finite")).to_point();
                let jitter = 10f64.powf(rng.gen_range(-6.0..-1.0));
                let v: Vec<f64> = sampling::unit_vector(&mut rng, 2 * n + 1).into_iter().map(|c| c * jitter).collect();
                on.add_vector(&v).expect("finite")
            }
        })
        .collect();
    let depth = p.depth;
    let memberships: Vec<Vec<bool>> = queries
        .par_iter()
        .map(|q| (1..=depth).map(|k| cover.contains(q, k)).collect::<Result<Vec<bool>>>())
        .collect::<Result<Vec<_>>>()?;
    for (q, levels) in queries.iter().zip(&memberships) {
        let nested = levels.windows(2).all(|w| w[0] || !w[1]);
        tally.flag(nested, || format!("membership not nested at {:?}", q.coords()));
    }
    let hits = memberships.iter().filter(|l| l[0]).count();
    tally.metric("level1_query_hits", hits as f64);
    Ok(())
}

fn random_modify_params(rng: &mut ChaCha8Rng, n: usize) -> ModifyLineParams {
    let x = sampling::box_point(rng, n, 1.0, 1.0);
    let scale = (1.0 - 1e-9) * rng.gen_range(0.0f64..1.0).max(1e-3);
    let u = point_at_scale(rng, n, scale);
    let e = sampling::unit_horizontal(rng, n);
    let eta = rng.gen_range(0.1..1.0);
    let delta = curves::delta_max(eta) * rng.gen_range(0.05..0.95);
    let r = delta * rng.gen_range(0.05..0.95);
    ModifyLineParams { x, u, e, r, delta, eta }
}

struct ModificationPosts {
    /// Distance from `x + tE(x)` at `|t| >= s`.
    on_line: f64,
    /// Distance of `g(zeta)` from `x delta_r(u)`.
    miss: f64,
    lip: f64,
    /// `1 + eta Delta`.
    bound: f64,
}

fn modification_posts(params: &ModifyLineParams, path: &HorizontalPath, zeta: f64) -> ModificationPosts {
    let s = params.s();
    let on_line = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]
        .iter()
        .map(|k| path.eval(k * s).euclidean_dist(&params.e.line_point(&params.x, k * s)))
        .fold(0.0, f64::max);
    let target = params.x.mul_unchecked(&params.u.dilate_unchecked(params.r));
    ModificationPosts {
        on_line,
        miss: path.eval(zeta).euclidean_dist(&target),
        lip: path.lipschitz_constant(),
        bound: 1.0 + params.eta * params.delta,
    }
}

/// Largest `Delta / eta` on the grid `2^j / 1632` below which every draw of
/// the uncapped construction still satisfies all properties.
fn largest_empirical_ratio(rng: &mut ChaCha8Rng, n: usize, draws: usize, tol: f64) -> f64 {
    let eta = 0.5;
    let mut best = 0.0;
    for j in 0..=10 {
        let ratio = 2f64.powi(j) / 1632.0;
        let delta = ratio * eta;
        if delta >= 0.5 {
            break;
        }
        let holds = (0..draws).all(|_| {
            let mut params = random_modify_params(rng, n);
            params.eta = eta;
            params.delta = delta;
            params.r = delta * rng.gen_range(0.05..0.95);
            match curves::modify_line_uncapped(&params) {
                Ok((path, zeta)) => {
                    let p = modification_posts(&params, &path, zeta);
                    p.on_line <= tol && p.miss <= tol && p.lip <= p.bound * (1.0 + 1e-12)
                }
                Err(_) => false,
            }
        });
        if !holds {
            break;
        }
        best = ratio;
    }
    best
}

/// Largest `|(p o g)' - p(E)| / Delta` over draws, after checking the
/// other properties of the modified line.
fn modification_draws(rng: &mut ChaCha8Rng, n: usize, trials: usize, tol: f64, tally: &mut Tally) -> f64 {
    let mut c_m: f64 = 0.0;
    for _ in 0..trials {
        let params = random_modify_params(rng, n);
        let (path, zeta) = match curves::modify_line(&params) {
            Ok(v) => v,
            Err(e) => {
                tally.error("modify_line", e);
                continue;
            }
        };
        let posts = modification_posts(&params, &path, zeta);
        tally.check(tol - posts.on_line, || {
            format!("modified line leaves x + tE(x) for |t| >= s by {:e}", posts.on_line)
        });
        tally.check(tol - posts.miss, || format!("g(zeta) misses x delta_r(u) by {:e}", posts.miss));
        tally.check(posts.bound - posts.lip, || {
            format!("Lip {} above 1 + eta Delta = {}", posts.lip, posts.bound)
        });
        c_m = c_m.max(path.max_projected_deviation(params.e.coeffs()) / params.delta);
    }
    c_m
}

fn random_rational_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<rational::Q> {
    let w: Vec<rational::Q> = (0..2 * n - 1)
        .map(|_| rational::q_ratio(rng.gen_range(-6..=6), rng.gen_range(1..=6)))
        .collect();
    rational::stereographic(&w)
}

fn newcurveg(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let trials = cfg.trials_for("newcurveg");
    let tol = cfg.tolerances.distance;
    let c_m = modification_draws(&mut rng(cfg, "newcurveg"), n, trials, tol, tally);
    let mut alt = Tally::new();
    let c_m_alt = modification_draws(&mut sampling::rng_for(cfg.alt_seed, "suite-newcurveg"), n, trials, tol, &mut alt);
    tally.metric("c_m", c_m);
    tally.metric("c_m_alt_seed", c_m_alt);
    tally.flag(c_m.is_finite(), || "C_m is not finite".into());
    let spread = relative_spread(c_m, c_m_alt);
    tally.check(cfg.tolerances.stability - spread, || {
        format!("C_m differs by {spread:.3} across seeds")
    });
    let probe_draws = (trials / 10).clamp(1, 50);
    tally.metric("delta_over_eta_cap", 1.0 / 1632.0);
    tally.metric(
        "delta_over_eta_empirical",
        largest_empirical_ratio(&mut rng(cfg, "newcurveg-cap"), n, probe_draws, tol),
    );

    // Modified lines built from rational data lie in every cover level.
    let mut rng = rng(cfg, "newcurveg-rational");
    let mut extra = Vec::new();
    let mut paths = Vec::new();
    let draws = (trials / 50).clamp(1, 20);
    while paths.len() < draws {
        let q = |rng: &mut ChaCha8Rng, m: i64| rational::q_ratio(rng.gen_range(-m..=m), rng.gen_range(1..=m));
        let x = RationalPoint {
            horiz: (0..2 * n).map(|_| q(&mut rng, 4)).collect(),
            c: q(&mut rng, 4),
        };
        let u = RationalPoint {
            horiz: (0..2 * n).map(|_| q(&mut rng, 8) / rational::q_ratio(4, 1)).collect(),
            c: q(&mut rng, 8) / rational::q_ratio(16, 1),
        };
        let e = random_rational_unit(&mut rng, n);
        let delta = rational::q_ratio(1, 4000);
        let r = rational::q_ratio(rng.gen_range(1..=9), 10) * &delta;
        let e_f: Vec<f64> = e.iter().map(rational::to_f64).collect();
        let params = ModifyLineParams {
            x: x.to_point(),
            u: u.to_point(),
            e: HorizontalVector::new(e_f)?,
            r: rational::to_f64(&r),
            delta: rational::to_f64(&delta),
            eta: 1.0,
        };
        if params.validate().is_err() {
            continue;
        }
        extra.extend(rational::modify_line_lines(&x, &u, &e, &r, &delta)?);
        paths.push(curves::modify_line(&params)?.0);
    }
    let cover = NCover::build_with_lines(n, 1, cfg.uds.depth, cfg.uds.clip, extra)?;
    for (i, path) in paths.iter().enumerate() {
        for k in 1..=cover.depth() {
            let inside = cover.curve_in_cover(path, k, 64)?;
            tally.flag(inside, || format!("rational modified line {i} leaves the level-{k} cover"));
        }
    }
    Ok(())
}

fn closedirection(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let trials = cfg.trials_for("closedirection").max(1);
    let c_a = metric::angle_constant(&mut rng(cfg, "closedirection"), cfg.n, 2.0, trials)?;
    let c_alt = metric::angle_constant(&mut sampling::rng_for(cfg.alt_seed, "suite-closedirection"), cfg.n, 2.0, trials)?;
    tally.trials += 2 * trials - 1;
    tally.metric("c_a", c_a);
    tally.metric("c_a_alt_seed", c_alt);
    let spread = relative_spread(c_a, c_alt);
    tally.check(cfg.tolerances.stability - spread, || {
        format!("C_a differs by {spread:.3} across seeds")
    });
    Ok(())
}

fn scalarlip(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let tol = &cfg.tolerances;
    let steps = default_steps();
    let mut rng = rng(cfg, "scalarlip");
    for _ in 0..cfg.trials_for("scalarlip") {
        let e = sampling::unit_horizontal(&mut rng, n);
        let l = HLinearMap::new(1.0, e.clone())?;
        let x = sampling::box_point(&mut rng, n, 2.0, 4.0);
        let y = sampling::box_point(&mut rng, n, 2.0, 4.0);
        let hom = (l.eval(&x.mul(&y)?) - l.eval(&x) - l.eval(&y)).abs();
        tally.check(tol.group - hom, || format!("L(xy) - L(x) - L(y) = {hom:e}"));
        let r = rng.gen_range(0.1..3.0);
        let dil = (l.eval(&x.dilate(r)?) - r * l.eval(&x)).abs();
        tally.check(tol.group - dil, || format!("L(delta_r x) - r L(x) = {dil:e}"));
        let lower = metric::cc_lower(&x, &y)?;
        let diff = (l.eval(&x) - l.eval(&y)).abs();
        tally.check(lower + tol.margin - diff, || {
            format!("|L(x) - L(y)| = {diff} above d(x, y) >= {lower}")
        });
        let other = sampling::unit_horizontal(&mut rng, n);
        let field = ScalarField::hlinear(l.clone());
        let d = directional_derivative(&field, &x, &other, &steps)?;
        let exact: f64 = other.coeffs().iter().zip(e.coeffs()).map(|(a, b)| a * b).sum();
        tally.check(1e-8 - (d.value - exact).abs(), || {
            format!("E L(x) = {} differs from <p(E), p(E')> = {exact}", d.value)
        });
        let along = (l.eval(&e.line_point(&x, r)) - l.eval(&x)) / r;
        tally.check(tol.group - (along - 1.0).abs(), || {
            format!("slope {along} along E differs from Lip = 1")
        });
    }
    Ok(())
}

/// `psi` linear with slope `b`, `phi = psi +` a tent of height `h` on
/// `[-s, s]` peaking at `zeta`.
fn mean_value_instance(rng: &mut ChaCha8Rng) -> Result<MeanValueInstance> {
    let s: f64 = 1.0;
    let height: f64 = rng.gen_range(0.1..0.5);
    let b: f64 = rng.gen_range(-0.2..0.2);
    let lip_phi = height / (0.5 * s) + b.abs();
    let l = 2.0 * (lip_phi + b.abs()) + 1e-3;
    let v: f64 = 1.0 / 33.0;
    let rho: f64 = s * (s * l / (v * height)).sqrt() * 1.01;
    let sigma = v.powi(3) * (height / (s * l)).powi(2) * (1.0 - 1e-9);
    let end = rho.log2().ceil().exp2();
    let spacing = 2.0 * end / crate::calculus::mean_value::DEFAULT_GRID as f64;
    let zeta = (rng.gen_range(-0.45..0.45) / spacing).round() * spacing;
    let tent = move |t: f64| {
        if t <= -s || t >= s {
            0.0
        } else if t <= zeta {
            height * (t + s) / (zeta + s)
        } else {
            height * (s - t) / (s - zeta)
        }
    };
    MeanValueInstance::from_fns(
        -end,
        end,
        crate::calculus::mean_value::DEFAULT_GRID + 1,
        move |t| b * t + tent(t),
        move |t| b * t,
        s,
        zeta,
        rho,
        v,
        sigma,
        l,
    )
}

fn meanvalue(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let mut rng = rng(cfg, "meanvalue");
    for i in 0..cfg.trials_for("meanvalue") {
        let result = mean_value_instance(&mut rng).and_then(|inst| {
            let r = mean_value_search(&inst, &BTreeSet::new())?;
            Ok((verify_mean_value(&inst, &r)?, r))
        });
        match result {
            Ok((ok, r)) => tally.flag(ok, || format!("instance {i}: tau = {} fails a conclusion", r.tau)),
            Err(e) => tally.error(&format!("instance {i}"), e),
        }
    }
    Ok(())
}

fn almostmax(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let steps = default_steps();
    let grid = [-0.5, -0.1, -0.01, 0.01, 0.1, 0.5];
    let k = 8.0;
    let mut rng = rng(cfg, "almostmax");
    for i in 0..cfg.trials_for("almostmax") {
        let lip = rng.gen_range(0.2..1.0);
        let dir = sampling::unit_horizontal(&mut rng, n);
        let f = ScalarField::hlinear(HLinearMap::new(lip, dir.clone())?);
        let xs = sampling::box_point(&mut rng, n, 1.0, 1.0);
        let es = sampling::unit_horizontal(&mut rng, n);
        let (x, e) = if i % 5 == 0 {
            (xs.clone(), es.clone())
        } else {
            (sampling::box_point(&mut rng, n, 1.0, 1.0), sampling::unit_horizontal(&mut rng, n))
        };
        let dot = |a: &HorizontalVector| -> f64 { a.coeffs().iter().zip(dir.coeffs()).map(|(p, q)| p * q).sum() };
        let gap = lip * (dot(&e) - dot(&es));
        let check = almost_maximal_pair_check(&f, &xs, &es, &x, &e, k, lip, &grid, &steps)?;
        let ok = match check.decision {
            Decision::Holds => gap >= -1e-9,
            Decision::Fails => gap < 1e-9,
            Decision::Indeterminate => gap.abs() < 1e-6,
        };
        tally.flag(ok, || {
            format!("pair {i}: decision {:?} with exact derivative gap {gap:e}", check.decision)
        });
    }
    Ok(())
}

fn algorithm(cfg: &RunConfig, tally: &mut Tally) -> Result<()> {
    let n = cfg.n;
    let config = MaximizerConfig {
        max_steps: cfg.trials_for("algorithm"),
        seed: cfg.seed,
        ..cfg.maximizer.clone()
    };
    let x1 = HorizontalVector::x(n, 0);
    let f0 = ScalarField::hlinear(HLinearMap::new(0.5, x1.clone())?);
    let x0 = Point::origin(n);
    let region = Ball {
        center: x0.clone(),
        radius: 2.0 + config.delta0,
    };
    let constants = metric::holder_fit(&region, 1000, cfg.seed)?;
    tally.metric("c_h", constants.c_h);
    tally.metric("c_a", constants.c_a);
    let cover = config.build_cover(n)?;
    let traj = maximizer::run(&f0, &x0, &x1, &config, &constants, &cover)?;
    let report = maximizer::verify_trajectory(&traj);
    tally.flag(traj.terminated.is_none(), || format!("terminated early: {:?}", traj.terminated));
    tally.flag(report.steps == config.max_steps, || {
        format!("{} of {} steps", report.steps, config.max_steps)
    });
    for v in &report.violations {
        tally.flag(false, || v.clone());
    }
    let mut series = Series::new("derivative-vs-step", &["step", "derivative", "sigma", "delta", "candidates"]);
    for s in &traj.states {
        series
            .rows
            .push(vec![s.m as f64, s.derivative, s.sigma, s.delta, s.candidates as f64]);
    }
    let last = traj.final_state();
    let drift = metric::cc_upper_value(&last.e.at_origin(), &x1.at_origin())?;
    tally.check(last.sigma - drift, || {
        format!("final direction {drift} from X1, sigma {}", last.sigma)
    });
    tally.metric("final_derivative", last.derivative);
    tally.metric("max_sup_gap", traj.states.iter().map(|s| s.sup_gap).fold(0.0, f64::max));
    tally.trials += report.steps.saturating_sub(1);
    tally.series.push(series);
    Ok(())
}

/// Runs one registered suite; the result is a pure function of the config.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteResult> {
    let run: fn(&RunConfig, &mut Tally) -> Result<()> = match name {
        "lift" => lift,
        "horizontaldistances" => horizontaldistances,
        "lipschitzhorizontal" => lipschitzhorizontal,
        "welldefined" => welldefined,
        "lipismaximal" => lipismaximal,
        "goodcurve" => goodcurve,
        "differentiabilityofdistance" => differentiabilityofdistance,
        "maximality" => maximality,
        "uds" => uds,
        "newcurveg" => newcurveg,
        "closedirection" => closedirection,
        "scalarlip" => scalarlip,
        "meanvalue" => meanvalue,
        "almostmax" => almostmax,
        "algorithm" => algorithm,
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    let mut tally = Tally::new();
    if let Err(e) = run(cfg, &mut tally) {
        tally.error("suite aborted", e);
    }
    Ok(tally.finish(name, cfg.seed))
}
