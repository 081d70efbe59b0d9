use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{default_steps, directional_derivative, Decision, DerivativeEstimate, ScalarField};
use crate::error::{Error, Result};
use crate::group::{norm, HLinearMap, HorizontalVector, Point};
use crate::metric::{self, ConstantsEstimate};
use crate::sampling;
use crate::uds::{rational, NCover};

use super::comparison::{decide, Pair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaximizerConfig {
    pub delta0: f64,
    pub mu: f64,
    pub k: f64,
    pub candidate_budget: usize,
    pub directions_per_step: usize,
    pub max_steps: usize,
    pub t_grid: Vec<f64>,
    pub uds_level: usize,
    pub uds_height: u64,
    pub uds_depth: usize,
    /// Only the first `line_limit` enumerated lines supply candidate points.
    pub line_limit: usize,
    pub seed: u64,
}

impl Default for MaximizerConfig {
    fn default() -> Self {
        MaximizerConfig {
            delta0: 0.5,
            mu: 0.25,
            k: 8.0,
            candidate_budget: 512,
            directions_per_step: 16,
            max_steps: 10,
            t_grid: vec![-0.5, -0.25, -0.1, -0.01, -0.001, 0.001, 0.01, 0.1, 0.25, 0.5],
            uds_level: 12,
            uds_height: 4,
            uds_depth: 12,
            line_limit: 64,
            seed: 0,
        }
    }
}

impl MaximizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.k >= 8.0) {
            return bad(format!("K must be >= 8, got {}", self.k));
        }
        if !(self.delta0 > 0.0) || !(self.mu > 0.0) {
            return bad("delta0 and mu must be positive".into());
        }
        if self.candidate_budget == 0 || self.directions_per_step == 0 {
            return bad("candidate budget and directions per step must be positive".into());
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.abs() < 1.0) || *t == 0.0) {
            return bad("t grid must be nonempty with nonzero entries in (-1, 1)".into());
        }
        if self.uds_level == 0 || self.uds_level > self.uds_depth {
            return bad(format!("uds level {} outside 1..={}", self.uds_level, self.uds_depth));
        }
        Ok(())
    }

    pub fn build_cover(&self, n: usize) -> Result<NCover> {
        NCover::build(n, self.uds_height, self.uds_depth, crate::uds::DEFAULT_CLIP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub m: usize,
    /// `f_m - f_0` (after scaling of `f_0`).
    pub accum: HLinearMap,
    pub x: Point,
    pub e: HorizontalVector,
    pub sigma: f64,
    pub t: f64,
    pub lambda: Option<f64>,
    pub delta: f64,
    pub epsilon: Option<f64>,
    /// `E_m f_m(x_m)`.
    pub derivative: f64,
    pub derivative_error: f64,
    pub candidates: usize,
    pub members: usize,
    pub indeterminate: usize,
    pub only_incumbent: bool,
    /// Largest sampled derivative over all candidates minus `derivative`.
    #[serde(default)]
    pub sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: MaximizerConfig,
    pub c_a: f64,
    pub c_h: f64,
    pub c_v: f64,
    /// Factor applied to `f_0` so that its Lipschitz bound is at most 1/2.
    pub f0_scale: f64,
    /// Whether `E_0` was replaced by `-E_0`.
    pub flipped: bool,
    pub states: Vec<IterationState>,
    pub terminated: Option<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> &IterationState {
        self.states.last().expect("trajectory is nonempty")
    }

    pub fn final_pair(&self) -> Pair {
        let s = self.final_state();
        Pair {
            x: s.x.clone(),
            e: s.e.clone(),
        }
    }

    /// `f = scale * f_0 + accum` of the final state.
    pub fn final_field(&self, f0: &ScalarField) -> ScalarField {
        scaled(f0, self.f0_scale).plus(ScalarField::hlinear(self.final_state().accum.clone()))
    }

    /// One JSON object per state.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.states {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn scaled(f: &ScalarField, scale: f64) -> ScalarField {
    if scale == 1.0 {
        return f.clone();
    }
    let g = f.clone();
    ScalarField::new(format!("{}*{scale}", f.label), f.declared_lip.map(|l| l * scale), move |x| {
        scale * g.eval(x)
    })
}

/// Directional derivative of `f_0 + accum`; the linear part is exact.
fn derivative_of(f0: &ScalarField, accum: &HLinearMap, x: &Point, e: &HorizontalVector) -> Result<DerivativeEstimate> {
    let mut d = directional_derivative(f0, x, e, &default_steps())?;
    d.value += accum.derivative(e);
    Ok(d)
}

fn add_vectors(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

/// Shared data of one run.
pub struct Context<'a> {
    pub f0: ScalarField,
    pub config: &'a MaximizerConfig,
    pub c_a: f64,
    pub c_h: f64,
    pub c_v: f64,
    pub cover: &'a NCover,
}

fn rational_unit(v: &HorizontalVector) -> Result<HorizontalVector> {
    let q = rational::rationalize_direction(v, 1e-12)?;
    let coeffs: Vec<f64> = q.iter().map(rational::to_f64).collect();
    let l = norm(&coeffs);
    HorizontalVector::new(coeffs.iter().map(|c| c / l).collect())
}

/// Unit direction of the numerical horizontal gradient of `f_0 + accum` at `x`.
fn gradient_direction(f0: &ScalarField, accum: &HLinearMap, x: &Point) -> Option<HorizontalVector> {
    let n = x.n();
    let grad: Vec<f64> = (0..2 * n)
        .map(|i| {
            let basis = if i < n {
                HorizontalVector::x(n, i)
            } else {
                HorizontalVector::y(n, i - n)
            };
            derivative_of(f0, accum, x, &basis).map(|d| d.value).unwrap_or(0.0)
        })
        .collect();
    if norm(&grad) < 1e-9 {
        return None;
    }
    HorizontalVector::new(grad).ok().and_then(|g| g.normalized().ok())
}

/// Candidate directions: the incumbent, the gradient direction, rational
/// perturbations of the incumbent and uniform samples, keeping only those
/// within `sigma_j` of every earlier `E_j`.
fn candidate_directions(ctx: &Context<'_>, history: &[IterationState], accum: &HLinearMap, m: usize) -> Result<Vec<HorizontalVector>> {
    let prev = history.last().expect("nonempty history");
    let n = prev.e.n();
    let mut rng = sampling::rng_for(ctx.config.seed, &format!("maximizer-directions-{m}"));
    let want = ctx.config.directions_per_step;
    let mut pool = Vec::with_capacity(want);
    if let Some(g) = gradient_direction(&ctx.f0, accum, &prev.x) {
        pool.push(rational_unit(&g)?);
    }
    let perturbed = want / 2;
    while pool.len() + 1 < want {
        let raw = if pool.len() < perturbed {
            let u = sampling::unit_vector(&mut rng, 2 * n);
            let scale = 0.25 * prev.sigma * rng.gen_range(0.0..1.0);
            add_vectors(prev.e.coeffs(), &u, scale)
        } else {
            sampling::unit_vector(&mut rng, 2 * n)
        };
        pool.push(rational_unit(&HorizontalVector::new(raw)?)?);
    }
    let mut dirs = vec![prev.e.clone()];
    for e in pool {
        if dirs.contains(&e) {
            continue;
        }
        if history.iter().all(|h| direction_distance(&e, &h.e) <= h.sigma) {
            dirs.push(e);
        }
    }
    Ok(dirs)
}

fn candidate_points(ctx: &Context<'_>, prev: &IterationState) -> Result<Vec<Point>> {
    let offsets = [-0.5, -0.25, 0.25, 0.5];
    let mut pts = vec![prev.x.clone()];
    for p in ctx.cover.points_near(&prev.x, prev.delta, &offsets, ctx.config.line_limit) {
        if pts.iter().any(|q| q.euclidean_dist(&p) < 1e-12) {
            continue;
        }
        if ctx.cover.contains(&p, ctx.config.uds_level)? {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Checks the increment condition at `delta` on a 32-point grid of `|t| < T(delta)`.
#[allow(clippy::too_many_arguments)]
fn delta_condition(
    ctx: &Context<'_>,
    fm: &ScalarField,
    prev: &IterationState,
    x: &Point,
    e: &HorizontalVector,
    slope: f64,
    eps: f64,
    delta: f64,
) -> bool {
    let reach = ctx.c_h * ctx.c_h * (1.0 + ctx.c_v).sqrt() * delta.sqrt() / eps;
    let fx = fm.eval(x);
    let fp = fm.eval(&prev.x);
    (1..=16).all(|k| {
        let t0 = reach * k as f64 / 17.0;
        [t0, -t0].iter().all(|&t| {
            let lhs = ((fm.eval(&e.line_point(x, t)) - fx) - (fm.eval(&prev.e.line_point(&prev.x, t)) - fp)).abs();
            lhs <= slope * t.abs() * (1.0 + 1e-12) + 1e-14
        })
    })
}

/// One iteration: schedules, the finite candidate set `D_m`, the selected
/// pair, `epsilon_m` and `delta_m`.
pub fn step(ctx: &Context<'_>, history: &[IterationState]) -> Result<IterationState> {
    let prev = history
        .last()
        .ok_or_else(|| Error::InvalidArgument("step needs at least the initial state".into()))?;
    let m = prev.m + 1;
    let accum_vec = add_vectors(&prev.accum.vector(), prev.e.coeffs(), prev.t);
    let accum = HLinearMap::from_vector(&accum_vec);
    let fm = ctx.f0.clone().plus(ScalarField::hlinear(accum.clone()));
    let sigma = prev.sigma / 5.0;
    let t = (prev.t / 2.0).min(prev.sigma / (4.0 * m as f64)) / 2.0;
    let lambda = t * sigma.powi(4) / (4.0 * ctx.c_a.powi(4));

    let incumbent = Pair {
        x: prev.x.clone(),
        e: prev.e.clone(),
    };
    let d_inc = derivative_of(&ctx.f0, &accum, &prev.x, &prev.e)?;

    let budget = ctx.config.candidate_budget;
    let mut candidates = vec![incumbent.clone()];
    if budget > 1 {
        let dirs = candidate_directions(ctx, history, &accum, m)?;
        let points = candidate_points(ctx, prev)?;
        'outer: for p in &points {
            for e in &dirs {
                if candidates.len() >= budget {
                    break 'outer;
                }
                let c = Pair {
                    x: p.clone(),
                    e: e.clone(),
                };
                if c != incumbent {
                    candidates.push(c);
                }
            }
        }
    }

    let sigma_prev = prev.sigma;
    let k = ctx.config.k;
    let grid = &ctx.config.t_grid;
    let evaluated: Vec<(f64, f64, f64, Decision)> = candidates
        .par_iter()
        .map(|c| {
            let d = derivative_of(&ctx.f0, &accum, &c.x, &c.e)?;
            let out = decide(&fm, &incumbent, d_inc, c, d, sigma_prev, k, grid);
            Ok((d.value, d.error, out.needed_sigma, out.decision))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut indeterminate = 0;
    let mut members = 0;
    let mut best: Option<usize> = None;
    for (i, (value, _, needed, decision)) in evaluated.iter().enumerate() {
        match decision {
            Decision::Indeterminate => indeterminate += 1,
            Decision::Holds if *needed < sigma_prev => {
                members += 1;
                if best.is_none_or(|b| *value > evaluated[b].0) {
                    best = Some(i);
                }
            }
            _ => {}
        }
    }
    let chosen = best.ok_or_else(|| Error::InvalidArgument("incumbent rejected from its own candidate set".into()))?;
    let (value, error, needed, _) = evaluated[chosen];
    let sup_gap = evaluated.iter().map(|e| e.0).fold(value, f64::max) - value;
    let pair = candidates[chosen].clone();
    let epsilon = (sigma_prev - needed.max(0.0)) / 2.0;

    let moved = metric::cc_upper_value(&prev.x, &pair.x)?;
    let room = (prev.delta - moved) / 2.0;
    if !(room > 0.0) {
        return Err(Error::InvalidArgument(format!("step {m}: selected point leaves the previous ball")));
    }
    let level = m.min(ctx.cover.depth());
    let margin = ctx.cover.interior_margin(&pair.x, level)?;
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("step {m}: no open tube around the selected point")));
    }
    let slope = value - d_inc.value + sigma_prev;
    let mut delta = (room / 2.0).min(margin * (1.0 - 1e-9));
    let mut found = false;
    for _ in 0..200 {
        if delta_condition(ctx, &fm, prev, &pair.x, &pair.e, slope, epsilon, delta) {
            found = true;
            break;
        }
        delta /= 2.0;
    }
    if !found {
        return Err(Error::InvalidArgument(format!("step {m}: no admissible delta found")));
    }

    Ok(IterationState {
        m,
        accum,
        x: pair.x,
        e: pair.e,
        sigma,
        t,
        lambda: Some(lambda),
        delta,
        epsilon: Some(epsilon),
        derivative: value,
        derivative_error: error,
        candidates: candidates.len(),
        members,
        indeterminate,
        only_incumbent: candidates.len() == 1,
        sup_gap,
    })
}

/// Runs the iteration from `(x0, e0)`; the returned trajectory holds every
/// accepted state, with `terminated` set when a step could not be completed.
pub fn run(
    f0: &ScalarField,
    x0: &Point,
    e0: &HorizontalVector,
    config: &MaximizerConfig,
    constants: &ConstantsEstimate,
    cover: &NCover,
) -> Result<Trajectory> {
    config.validate()?;
    e0.ensure_unit()?;
    let lip = f0
        .declared_lip
        .ok_or_else(|| Error::Config("f0 needs a declared Lipschitz bound".into()))?;
    let f0_scale = if lip > 0.5 { 0.5 / lip } else { 1.0 };
    let f0s = scaled(f0, f0_scale);
    if !cover.contains(x0, config.uds_level)? {
        return Err(Error::InvalidArgument("x0 is outside the cover".into()));
    }
    let n = x0.n();
    let accum = HLinearMap::zero(n);
    let d0 = derivative_of(&f0s, &accum, x0, e0)?;
    let flipped = d0.value < 0.0;
    let (e0, d0) = if flipped {
        (e0.neg(), DerivativeEstimate { value: -d0.value, ..d0 })
    } else {
        (e0.clone(), d0)
    };
    let mut states = vec![IterationState {
        m: 0,
        accum,
        x: x0.clone(),
        e: e0,
        sigma: 2.0,
        t: (0.25f64).min(config.mu / 2.0),
        lambda: None,
        delta: config.delta0,
        epsilon: None,
        derivative: d0.value,
        derivative_error: d0.error,
        candidates: 0,
        members: 0,
        indeterminate: 0,
        only_incumbent: false,
        sup_gap: 0.0,
    }];
    let ctx = Context {
        f0: f0s,
        config,
        c_a: constants.c_a,
        c_h: constants.c_h,
        c_v: constants.c_v,
        cover,
    };
    let mut terminated = None;
    for _ in 0..config.max_steps {
        match step(&ctx, &states) {
            Ok(s) => states.push(s),
            Err(e) => {
                terminated = Some(e.to_string());
                break;
            }
        }
    }
    Ok(Trajectory {
        config: config.clone(),
        c_a: constants.c_a,
        c_h: constants.c_h,
        c_v: constants.c_v,
        f0_scale,
        flipped,
        states,
        terminated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub steps: usize,
    pub violations: Vec<String>,
}

impl TrajectoryReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Distance upper bound between `E(0)` and `E'(0)`.
fn direction_distance(a: &HorizontalVector, b: &HorizontalVector) -> f64 {
    metric::cc_upper_value(&a.at_origin(), &b.at_origin()).unwrap_or(f64::INFINITY)
}

/// Lists every violated schedule, nesting, monotonicity and drift property.
pub fn verify_trajectory(traj: &Trajectory) -> TrajectoryReport {
    let mut v = Vec::new();
    let s = &traj.states;
    for m in 1..s.len() {
        let (p, c) = (&s[m - 1], &s[m]);
        let mf = m as f64;
        if !(c.sigma > 0.0 && c.sigma < p.sigma / 4.0) {
            v.push(format!("step {m}: sigma {} not in (0, {})", c.sigma, p.sigma / 4.0));
        }
        if !(c.sigma <= 2.0 / 4f64.powi(m as i32)) {
            v.push(format!("step {m}: sigma {} exceeds 2/4^m", c.sigma));
        }
        let t_cap = (p.t / 2.0).min(p.sigma / (4.0 * mf));
        if !(c.t > 0.0 && c.t < t_cap) {
            v.push(format!("step {m}: t {} not in (0, {t_cap})", c.t));
        }
        let l_cap = c.t * c.sigma.powi(4) / (2.0 * traj.c_a.powi(4));
        if !c.lambda.is_some_and(|l| l > 0.0 && l < l_cap) {
            v.push(format!("step {m}: lambda {:?} not in (0, {l_cap})", c.lambda));
        }
        if !c.epsilon.is_some_and(|e| e > 0.0 && e < p.sigma) {
            v.push(format!("step {m}: epsilon {:?} not in (0, {})", c.epsilon, p.sigma));
        }
        let moved = metric::cc_upper_value(&p.x, &c.x).unwrap_or(f64::INFINITY);
        if !(c.delta > 0.0 && c.delta < (p.delta - moved) / 2.0) {
            v.push(format!(
                "step {m}: ball of radius {} not nested (moved {moved}, previous {})",
                c.delta, p.delta
            ));
        }
        if !(c.derivative > p.derivative) {
            v.push(format!("step {m}: derivative {} not above {}", c.derivative, p.derivative));
        }
        let expected = add_vectors(&p.accum.vector(), p.e.coeffs(), p.t);
        let got = c.accum.vector();
        if expected.iter().zip(&got).any(|(a, b)| (a - b).abs() > 1e-12) {
            v.push(format!("step {m}: perturbation is not f_(m-1) + t_(m-1) <x, E_(m-1)(0)>"));
        }
    }
    for m in 1..s.len() {
        for q in m..s.len() {
            let d = direction_distance(&s[q].e, &s[m].e);
            if d > s[m].sigma {
                v.push(format!("directions {q} and {m} drift {d} beyond sigma_{m} = {}", s[m].sigma));
            }
        }
    }
    if let (Some(first), Some(last)) = (s.first(), s.last()) {
        if last.accum.lip > traj.config.mu * (1.0 + 1e-12) {
            v.push(format!("Lip(f - f0) = {} exceeds mu = {}", last.accum.lip, traj.config.mu));
        }
        let moved = metric::cc_upper_value(&first.x, &last.x).unwrap_or(f64::INFINITY);
        if moved > traj.config.delta0 {
            v.push(format!("final point moved {moved} beyond delta0 = {}", traj.config.delta0));
        }
    }
    TrajectoryReport {
        steps: s.len().saturating_sub(1),
        violations: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Ball;

    fn constants() -> ConstantsEstimate {
        ConstantsEstimate {
            c_h: 2.0,
            c_a: 2.0,
            c_m: 1.0,
            c_v: 2.0,
            region: Ball {
                center: Point::origin(1),
                radius: 1.0,
            },
            samples: 0,
        }
    }

    fn config(steps: usize) -> MaximizerConfig {
        MaximizerConfig {
            max_steps: steps,
            candidate_budget: 128,
            directions_per_step: 8,
            ..MaximizerConfig::default()
        }
    }

    #[test]
    fn smooth_trajectory_is_clean() {
        let f0 = ScalarField::new("smooth", Some(1.0), |x: &Point| 0.8 * x.a()[0].sin() + 0.6 * x.b()[0].cos());
        let cfg = config(4);
        let cover = cfg.build_cover(1).unwrap();
        let traj = run(&f0, &Point::origin(1), &HorizontalVector::x(1, 0), &cfg, &constants(), &cover).unwrap();
        assert_eq!(traj.f0_scale, 0.5);
        assert!(traj.states.len() >= 2, "terminated: {:?}", traj.terminated);
        let report = verify_trajectory(&traj);
        assert!(report.clean(), "{:?}", report.violations);
        let lines = traj.to_jsonl().unwrap();
        assert_eq!(lines.lines().count(), traj.states.len());
    }

    #[test]
    fn linear_field_keeps_its_optimum() {
        let f0 = ScalarField::hlinear(HLinearMap::new(0.5, HorizontalVector::x(1, 0)).unwrap());
        let cfg = MaximizerConfig::default();
        let cover = cfg.build_cover(1).unwrap();
        let traj = run(&f0, &Point::origin(1), &HorizontalVector::x(1, 0), &cfg, &constants(), &cover).unwrap();
        assert_eq!(traj.states.len(), cfg.max_steps + 1, "terminated: {:?}", traj.terminated);
        let report = verify_trajectory(&traj);
        assert!(report.clean(), "{:?}", report.violations);
        assert_eq!(traj.final_state().e, HorizontalVector::x(1, 0));
    }

    #[test]
    fn negative_start_flips_direction() {
        let f0 = ScalarField::new("neg", Some(0.5), |x: &Point| -0.5 * x.a()[0]);
        let cfg = config(1);
        let cover = cfg.build_cover(1).unwrap();
        let traj = run(&f0, &Point::origin(1), &HorizontalVector::x(1, 0), &cfg, &constants(), &cover).unwrap();
        assert!(traj.flipped);
        assert!(traj.states[0].derivative > 0.0);
    }

    #[test]
    fn budget_one_keeps_incumbent() {
        let f0 = ScalarField::new("lin", Some(0.5), |x: &Point| 0.5 * x.a()[0]);
        let cfg = MaximizerConfig {
            candidate_budget: 1,
            ..config(2)
        };
        let cover = cfg.build_cover(1).unwrap();
        let traj = run(&f0, &Point::origin(1), &HorizontalVector::x(1, 0), &cfg, &constants(), &cover).unwrap();
        for s in &traj.states[1..] {
            assert!(s.only_incumbent);
            assert_eq!(s.x, Point::origin(1));
        }
    }

    #[test]
    fn rejects_small_k() {
        let cfg = MaximizerConfig {
            k: 4.0,
            ..MaximizerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
