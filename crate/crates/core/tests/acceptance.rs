//! Acceptance run: one PASS/FAIL line per criterion, with expected values
//! recomputed here from closed forms independent of the library code paths.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use hcalc::calculus::{mean_value_search, pansu_residual_sampled, MeanValueInstance, ScalarField};
use hcalc::harness::{run_all, run_suite, Report, RunConfig, SUITES};
use hcalc::maximizer::{self, MaximizerConfig};
use hcalc::metric::{self, Ball};
use hcalc::uds::{rational, BoxRegion, NCover, RationalPoint};
use hcalc::{curves, HLinearMap, HorizontalPath, HorizontalVector, ModifyLineParams, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xacce_0000 + seed)
}

fn box_coords(rng: &mut ChaCha8Rng, n: usize, h: f64, v: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-h..=h)).collect();
    x.push(rng.gen_range(-v..=v));
    x
}

fn pt(coords: &[f64]) -> Point {
    Point::from_coords(coords).expect("finite coordinates")
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.iter().map(|c| c / l).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// `sum_i (u_i w_{n+i} - u_{n+i} w_i)`.
fn omega(u: &[f64], w: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[i] * w[n + i] - u[n + i] * w[i]).sum()
}

/// `(a, b, c)(a', b', c') = (a + a', b + b', c + c' - 2(<a, b'> - <b, a'>))`.
fn mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len() - 1;
    let mut out: Vec<f64> = x[..m].iter().zip(&y[..m]).map(|(a, b)| a + b).collect();
    out.push(x[m] + y[m] - 2.0 * omega(&x[..m], &y[..m]));
    out
}

fn dilate(x: &[f64], r: f64) -> Vec<f64> {
    let m = x.len() - 1;
    let mut out: Vec<f64> = x[..m].iter().map(|v| r * v).collect();
    out.push(r * r * x[m]);
    out
}

/// `x + t E(x)` with `X_i = d_{a_i} + 2 b_i d_c` and `Y_i = d_{b_i} - 2 a_i d_c`.
fn along_field(x: &[f64], h: &[f64], t: f64) -> Vec<f64> {
    let m = x.len() - 1;
    let mut out: Vec<f64> = x[..m].iter().zip(h).map(|(a, e)| a + t * e).collect();
    out.push(x[m] - 2.0 * t * omega(&x[..m], h));
    out
}

/// Finite-difference horizontality residual `|c' - 2 sum(a' b - b' a)|` at
/// `t`, with a central step inside the segment containing `t`.
fn horizontality_residual(path: &HorizontalPath, t: f64, h: f64) -> f64 {
    let (p, q, m) = (path.eval(t - h).coords(), path.eval(t + h).coords(), path.eval(t).coords());
    let k = m.len() - 1;
    let vel: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (b - a) / (2.0 * h)).collect();
    let n = k / 2;
    let expected: f64 = 2.0 * (0..n).map(|i| vel[i] * m[n + i] - vel[n + i] * m[i]).sum::<f64>();
    (vel[k] - expected).abs()
}

/// Largest residual over `samples` random interior parameters.
fn path_residual(path: &HorizontalPath, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let knots = path.knots();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let j = rng.gen_range(0..knots.len() - 1);
        let (a, b) = (knots[j], knots[j + 1]);
        if b - a <= 0.0 {
            continue;
        }
        let t = a + (b - a) * rng.gen_range(0.3..0.7);
        worst = worst.max(horizontality_residual(path, t, 0.2 * (b - a)));
    }
    worst
}

/// Largest planar speed over the segments, from the knot points.
fn planar_lip(path: &HorizontalPath) -> f64 {
    let knots = path.knots();
    let planar = path.planar();
    (0..knots.len() - 1)
        .filter(|&j| knots[j + 1] > knots[j])
        .map(|j| dist(&planar[j + 1], &planar[j]) / (knots[j + 1] - knots[j]))
        .fold(0.0, f64::max)
}

fn relative_spread(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn is_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Point whose CC upper bound from the origin equals `scale`.
fn at_scale(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    loop {
        let w = box_coords(rng, n, 1.0, 1.0);
        let d = metric::cc_upper_value(&Point::origin(n), &pt(&w)).unwrap();
        if d > 1e-6 {
            return dilate(&w, scale / d);
        }
    }
}

fn group_axioms() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        let mut rng = rng(1 + n as u64);
        for _ in 0..10_000 {
            let (x, y, z) = (
                box_coords(&mut rng, n, 2.0, 4.0),
                box_coords(&mut rng, n, 2.0, 4.0),
                box_coords(&mut rng, n, 2.0, 4.0),
            );
            let (px, py, pz) = (pt(&x), pt(&y), pt(&z));
            let xy = px.mul(&py).unwrap();
            worst = worst.max(dist(&xy.coords(), &mul(&x, &y)));
            let left = xy.mul(&pz).unwrap().coords();
            let right = px.mul(&py.mul(&pz).unwrap()).unwrap().coords();
            worst = worst.max(dist(&left, &right));
            worst = worst.max(dist(&px.mul(&Point::origin(n)).unwrap().coords(), &x));
            worst = worst.max(norm(&px.mul(&px.inverse()).unwrap().coords()));
            let r = rng.gen_range(0.1..3.0);
            let lhs = xy.dilate(r).unwrap().coords();
            worst = worst.max(dist(&lhs, &mul(&dilate(&x, r), &dilate(&y, r))));
            let h = unit(&mut rng, 2 * n);
            let t = rng.gen_range(-2.0..2.0);
            let e = HorizontalVector::new(h.clone()).unwrap();
            worst = worst.max(dist(&e.line_point(&px, t).coords(), &along_field(&x, &h, t)));
            let mut step = h.iter().map(|v| t * v).collect::<Vec<f64>>();
            step.push(0.0);
            worst = worst.max(dist(&mul(&x, &step), &along_field(&x, &h, t)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-10 && secs < 5.0,
        format!("max residual {worst:.2e} over 2x10^4 instances in {secs:.2}s"),
    )
}

fn lift_identity() -> Outcome {
    let mut rng = rng(10);
    let mut worst: f64 = 0.0;
    let mut paths: Vec<HorizontalPath> = Vec::new();
    for n in [1, 2] {
        for _ in 0..20 {
            let y = box_coords(&mut rng, n, 2.0, 4.0);
            paths.push(hcalc::gamma_y(&pt(&y)).unwrap());
            let poly: Vec<Vec<f64>> = (0..6).map(|_| box_coords(&mut rng, n, 2.0, 0.0)[..2 * n].to_vec()).collect();
            let mut base = poly[0].clone();
            base.push(rng.gen_range(-1.0..1.0));
            paths.push(hcalc::lift_planar(&poly, &pt(&base)).unwrap());
            let (a, b) = (box_coords(&mut rng, n, 1.0, 1.0), box_coords(&mut rng, n, 1.0, 1.0));
            paths.push(metric::cc_upper(&pt(&a), &pt(&b)).unwrap().1);
            paths.push(metric::square_route(n, rng.gen_range(-2.0..2.0)).unwrap());
            paths.push(curves::modify_line(&modify_params(&mut rng, n)).unwrap().0);
        }
    }
    for path in &paths {
        worst = worst.max(path_residual(path, &mut rng, 1000));
    }
    // Polygon lift: each chord from P to Q adds 2(a_Q b_P - a_P b_Q).
    let mut closed_form: f64 = 0.0;
    for _ in 0..50 {
        let poly: Vec<Vec<f64>> = (0..9).map(|_| box_coords(&mut rng, 1, 2.0, 0.0)[..2].to_vec()).collect();
        let c0 = rng.gen_range(-1.0..1.0);
        let path = hcalc::lift_planar(&poly, &pt(&[poly[0][0], poly[0][1], c0])).unwrap();
        let mut c = c0;
        for j in 0..poly.len() {
            if j > 0 {
                c += 2.0 * (poly[j][0] * poly[j - 1][1] - poly[j - 1][0] * poly[j][1]);
            }
            closed_form = closed_form.max((path.knot_point(j).c() - c).abs() / c.abs().max(1.0));
        }
    }
    let line: Vec<Vec<f64>> = [-1.5, -0.25, 0.0, 0.5, 2.0].iter().map(|t| vec![0.6 * t, -0.8 * t]).collect();
    let line_path = hcalc::lift_planar(&line, &pt(&[-0.9, 1.2, 0.0])).unwrap();
    let line_vertical = (0..line.len()).map(|j| line_path.knot_point(j).c().abs()).fold(0.0, f64::max);
    let segments = 10_000;
    let circle: Vec<Vec<f64>> = (0..=segments)
        .map(|k| {
            let s = 2.0 * PI * k as f64 / segments as f64;
            vec![s.cos(), s.sin()]
        })
        .collect();
    let loop_path = hcalc::lift_planar(&circle, &pt(&[1.0, 0.0, 0.0])).unwrap();
    let circle_err = (loop_path.end().c() - loop_path.start().c() + 4.0 * PI).abs();
    let pass = worst <= 1e-6 && closed_form <= 1e-12 && line_vertical <= 1e-12 && circle_err <= 1e-6;
    (
        pass,
        format!(
            "residual {worst:.2e} on {} paths; polygon lift {closed_form:.1e}; line vertical {line_vertical:.1e}; circle {circle_err:.2e} from -4pi",
            paths.len()
        ),
    )
}

fn horizontal_distances() -> Outcome {
    let mut rng = rng(20);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + i % 2;
        let x = box_coords(&mut rng, n, 2.0, 4.0);
        let w = if i % 3 == 0 { rng.gen_range(0.2..2.0) } else { 1.0 };
        let h: Vec<f64> = unit(&mut rng, 2 * n).iter().map(|v| w * v).collect();
        let t = rng.gen_range(-2.0..2.0);
        let y = along_field(&x, &h, t);
        let (lo, hi) = metric::cc_bracket(&pt(&x), &pt(&y)).unwrap();
        let exact = t.abs() * norm(&h);
        worst = worst.max((lo - exact).abs()).max((hi - exact).abs());
    }
    (worst <= 1e-9, format!("bracket within {worst:.2e} of |t| omega(E) on 10^3 draws"))
}

/// `gamma_y` evaluated from its two-leg closed form.
fn gamma_closed(y: &[f64], t: f64) -> Vec<f64> {
    let k = y.len() - 1;
    let n = k / 2;
    let (a, b, c) = (&y[..n], &y[n..k], y[k]);
    let l2 = norm(&y[..k]).powi(2);
    let mut first: Vec<f64> = (0..n).map(|i| a[i] - b[i] * c / l2).collect();
    first.extend((0..n).map(|i| b[i] + a[i] * c / l2));
    first.push(0.0);
    let mut second: Vec<f64> = (0..n).map(|i| a[i] + b[i] * c / l2).collect();
    second.extend((0..n).map(|i| b[i] - a[i] * c / l2));
    second.push(2.0 * c);
    if t <= 0.5 {
        first.iter().map(|v| t * v).collect()
    } else {
        first.iter().zip(&second).map(|(f, s)| 0.5 * f + (t - 0.5) * s).collect()
    }
}

fn goodcurve() -> Outcome {
    let lip_bound = |l: f64, c: f64| l * (1.0 + c * c / l.powi(4) + 4.0 * c * c / (l * l)).sqrt();
    let dev_bound = |l: f64, c: f64| c.abs() / l * (1.0 + 4.0 * l * l).sqrt();
    let mut rng = rng(30);
    let (mut end_err, mut shape_err): (f64, f64) = (0.0, 0.0);
    let (mut lip_margin, mut dev_margin) = (f64::INFINITY, f64::INFINITY);
    let mut count = 0;
    while count < 10_000 {
        let n = 1 + count % 2;
        let y = box_coords(&mut rng, n, 2.0, 4.0);
        let l = norm(&y[..2 * n]);
        if l < 1e-3 {
            continue;
        }
        count += 1;
        let c = y[2 * n];
        let path = hcalc::gamma_y(&pt(&y)).unwrap();
        let scale = 1.0 + norm(&y);
        end_err = end_err
            .max(norm(&path.start().coords()) / scale)
            .max(dist(&path.end().coords(), &y) / scale);
        for t in [0.1, 0.25, 0.5, 0.6, 0.9] {
            shape_err = shape_err.max(dist(&path.eval(t).coords(), &gamma_closed(&y, t)) / scale);
        }
        let lb = lip_bound(l, c);
        lip_margin = lip_margin
            .min((lb - planar_lip(&path)) / lb)
            .min((lb - path.lipschitz_constant()) / lb);
        let mut target = y[..2 * n].to_vec();
        target.push(0.0);
        let db = dev_bound(l, c);
        // Each leg is affine in every coordinate, so chord slopes are the
        // derivative.
        for (s, t) in [(0.0, 0.5), (0.5, 1.0)] {
            let chord = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| (v - u) / (t - s)).collect::<Vec<f64>>();
            let expected = chord(&gamma_closed(&y, s), &gamma_closed(&y, t));
            let measured = chord(&path.eval(s).coords(), &path.eval(t).coords());
            shape_err = shape_err.max(dist(&expected, &measured) / scale.powi(2));
            if db > 0.0 {
                dev_margin = dev_margin.min((db - dist(&measured, &target)) / db);
            }
        }
    }
    let example = pt(&[1.0, 0.0, 1.0]);
    let example_ok = (curves::gamma_y_lip_bound(&example) - 6f64.sqrt()).abs() < 1e-15
        && (curves::gamma_y_deviation_bound(&example) - 5f64.sqrt()).abs() < 1e-15
        && (lip_bound(1.0, 1.0) - 6f64.sqrt()).abs() < 1e-15;
    let slack = -1e-12;
    let pass = end_err <= 1e-12 && shape_err <= 1e-9 && lip_margin >= slack && dev_margin >= slack && example_ok;
    (
        pass,
        format!(
            "endpoints {end_err:.1e}; closed form {shape_err:.1e}; relative margins Lip {lip_margin:.2e}, deviation {dev_margin:.2e}; y=(1,0,1) bounds sqrt6/sqrt5 {example_ok}"
        ),
    )
}

fn holder() -> Outcome {
    let ball = Ball {
        center: Point::origin(1),
        radius: 2.0,
    };
    let mut rng = rng(40);
    let mut c_h: f64 = 1.0;
    let mut pairs = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let x = metric::sample_ball(&mut rng, &ball);
        let y = metric::sample_ball(&mut rng, &ball);
        let eu = dist(&x.coords(), &y.coords());
        if eu == 0.0 {
            continue;
        }
        let (lo, hi) = metric::cc_bracket(&x, &y).unwrap();
        c_h = c_h.max(eu / lo).max(hi / eu.sqrt());
        pairs.push((eu, lo, hi));
    }
    let holds = pairs.iter().all(|&(eu, lo, hi)| eu / c_h <= lo && hi <= c_h * eu.sqrt());
    let library = metric::holder_constant(&mut rng, &ball, 10_000).unwrap();
    let agree = relative_spread(c_h, library) <= 0.1;
    // Vertical pairs: sqrt(eps) <= d <= sqrt(pi eps).
    let (mut low, mut high) = (f64::INFINITY, 0.0f64);
    for k in 0..=50 {
        let eps = 10f64.powf(-6.0 + 5.0 * k as f64 / 50.0);
        let x = metric::sample_ball(&mut rng, &ball);
        let y = x.mul(&pt(&[0.0, 0.0, eps])).unwrap();
        let eu = dist(&x.coords(), &y.coords());
        let (lo, hi) = metric::cc_bracket(&x, &y).unwrap();
        low = low.min(lo / eu.sqrt());
        high = high.max(hi / eu.sqrt());
    }
    let vertical_ok = low >= 1.0 - 1e-9 && high <= PI.sqrt() * (1.0 + 1e-3);
    (
        holds && agree && vertical_ok && c_h.is_finite(),
        format!("C_H = {c_h:.4} on 10^4 pairs (library fit {library:.4}); vertical d/sqrt|x-y| in [{low:.4}, {high:.4}]"),
    )
}

fn distance_differentiability() -> Outcome {
    let mut rng = rng(50);
    let u = [1.0, 0.0, 0.0];
    let mut margin = f64::INFINITY;
    let mut zs = Vec::new();
    for _ in 0..1000 {
        let scale = 0.5 * rng.gen_range(1e-6..1.0);
        let z = at_scale(&mut rng, 1, scale);
        let lo = metric::cc_lower(&Point::origin(1), &pt(&mul(&u, &z))).unwrap();
        margin = margin.min(lo - (1.0 + z[0]));
        zs.push(pt(&z));
    }
    let report = metric::distance_pansu_check(&HorizontalVector::x(1, 0), &zs, 1e-9).unwrap();
    let scales = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut ours = Vec::new();
    let mut library = Vec::new();
    for &s in &scales {
        let zs: Vec<Vec<f64>> = (0..200).map(|_| at_scale(&mut rng, 1, s)).collect();
        let mut worst: f64 = 0.0;
        for z in &zs {
            let (lo, hi) = metric::cc_bracket(&Point::origin(1), &pt(&mul(&u, z))).unwrap();
            let d_z = metric::cc_lower(&Point::origin(1), &pt(z)).unwrap();
            let linear = 1.0 + z[0];
            worst = worst.max((hi - linear).abs().max((lo - linear).abs()) / d_z);
        }
        ours.push(worst);
        let pts: Vec<Point> = zs.iter().map(|z| pt(z)).collect();
        library.push(
            metric::distance_pansu_check(&HorizontalVector::x(1, 0), &pts, 1e-9)
                .unwrap()
                .max_residual,
        );
    }
    let pass = margin >= -1e-9
        && report.inequality_holds
        && is_decreasing(&ours)
        && is_decreasing(&library)
        && ours[3] < 1e-2
        && library[3] < 1e-2;
    (
        pass,
        format!(
            "min margin {margin:.2e}; residuals {:.1e} {:.1e} {:.1e} {:.1e}",
            ours[0], ours[1], ours[2], ours[3]
        ),
    )
}

fn maximality_pansu() -> Outcome {
    let e = HorizontalVector::x(1, 0);
    let f = ScalarField::maximal_at_origin(&e, 1.0, 1.0);
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let report = pansu_residual_sampled(&f, &Point::origin(1), &HLinearMap::new(1.0, e).unwrap(), &radii, 1000, 7).unwrap();
    let mut rng = rng(60);
    let ws: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let scale = rng.gen_range(0.0..1.0);
            at_scale(&mut rng, 1, scale)
        })
        .collect();
    let ours: Vec<f64> = radii
        .iter()
        .map(|&r| {
            ws.iter()
                .map(|w| {
                    let y = dilate(w, r);
                    (f.eval(&pt(&y)) - y[0]).abs() / r
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let pass = is_decreasing(&ours) && ours[3] < 1e-3 && is_decreasing(&report.residuals) && report.residuals[3] < 1e-3;
    (
        pass,
        format!("residual at radius 1e-4: {:.2e} (library {:.2e})", ours[3], report.residuals[3]),
    )
}

fn modify_params(rng: &mut ChaCha8Rng, n: usize) -> ModifyLineParams {
    let eta = rng.gen_range(0.1..1.0);
    let delta = curves::delta_max(eta) * rng.gen_range(0.05..0.95);
    let scale = (1.0 - 1e-9) * rng.gen_range(1e-3..1.0);
    ModifyLineParams {
        x: pt(&box_coords(rng, n, 1.0, 1.0)),
        u: pt(&at_scale(rng, n, scale)),
        e: HorizontalVector::new(unit(rng, 2 * n)).unwrap(),
        r: delta * rng.gen_range(0.05..0.95),
        delta,
        eta,
    }
}

/// Checks the four properties of the modified line on `draws` parameter
/// draws and returns the empirical `C_m` with the worst property error.
fn modification_draws(seed: u64, draws: usize) -> (f64, f64) {
    let mut rng = rng(seed);
    let (mut c_m, mut worst): (f64, f64) = (0.0, 0.0);
    for i in 0..draws {
        let n = 1 + i % 2;
        let p = modify_params(&mut rng, n);
        let (path, zeta) = curves::modify_line(&p).unwrap();
        let (x, u, h) = (p.x.coords(), p.u.coords(), p.e.coeffs().to_vec());
        let s = p.r / p.delta;
        for k in [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0] {
            worst = worst.max(dist(&path.eval(k * s).coords(), &along_field(&x, &h, k * s)));
        }
        let expected_zeta = p.r * u[..2 * n].iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        worst = worst.max((zeta - expected_zeta).abs());
        worst = worst.max(dist(&path.eval(expected_zeta).coords(), &mul(&x, &dilate(&u, p.r))));
        worst = worst.max((planar_lip(&path) - (1.0 + p.eta * p.delta)).max(0.0));
        let knots = path.knots();
        let planar = path.planar();
        for j in 0..knots.len() - 1 {
            let dt = knots[j + 1] - knots[j];
            if dt > 0.0 {
                let v: Vec<f64> = planar[j + 1].iter().zip(&planar[j]).map(|(a, b)| (a - b) / dt).collect();
                c_m = c_m.max(dist(&v, &h) / p.delta);
            }
        }
    }
    (c_m, worst)
}

fn newcurveg() -> Outcome {
    let (c_m, worst) = modification_draws(70, 1000);
    let (c_alt, worst_alt) = modification_draws(71, 1000);
    let stable = relative_spread(c_m, c_alt) <= 0.1;
    // Rational data: the curve's lines are registered and every level holds it.
    let mut rng = rng(72);
    let q = |rng: &mut ChaCha8Rng, m: i64| rational::q_ratio(rng.gen_range(-m..=m), rng.gen_range(1..=m));
    let mut inside = true;
    let mut built = 0;
    while built < 5 {
        let x = RationalPoint {
            horiz: (0..2).map(|_| q(&mut rng, 4)).collect(),
            c: q(&mut rng, 4),
        };
        let u = RationalPoint {
            horiz: (0..2).map(|_| q(&mut rng, 8) / rational::q_ratio(4, 1)).collect(),
            c: q(&mut rng, 8) / rational::q_ratio(16, 1),
        };
        let e = rational::stereographic(&[rational::q_ratio(rng.gen_range(-6..=6), rng.gen_range(1..=6))]);
        let delta = rational::q_ratio(1, 4000);
        let r = rational::q_ratio(rng.gen_range(1..=9), 10) * &delta;
        let params = ModifyLineParams {
            x: x.to_point(),
            u: u.to_point(),
            e: HorizontalVector::new(e.iter().map(rational::to_f64).collect()).unwrap(),
            r: rational::to_f64(&r),
            delta: rational::to_f64(&delta),
            eta: 1.0,
        };
        if params.validate().is_err() {
            continue;
        }
        built += 1;
        let lines = rational::modify_line_lines(&x, &u, &e, &r, &delta).unwrap();
        let cover = NCover::build_with_lines(1, 1, 12, 10.0, lines).unwrap();
        let path = curves::modify_line(&params).unwrap().0;
        for k in 1..=12 {
            inside &= cover.curve_in_cover(&path, k, 256).unwrap();
        }
    }
    let mut cfg = RunConfig::default();
    cfg.trials.insert("newcurveg".into(), 1000);
    let suite = run_suite("newcurveg", &cfg).unwrap();
    let pass = worst <= 1e-9 && worst_alt <= 1e-9 && stable && inside && suite.passed();
    (
        pass,
        format!(
            "property error {:.1e}; C_m {c_m:.4} vs {c_alt:.4} across seeds; rational curves in every level {inside}; suite failures {}",
            worst.max(worst_alt),
            suite.failures
        ),
    )
}

/// Fitted `C_a` over pairs of Lipschitz-2 curves through `0` whose planar
/// velocities differ by at most `A`, sampled with `seed`.
fn angle_fit(seed: u64, pairs: usize) -> f64 {
    let mut rng = rng(seed);
    let lip = 2.0;
    let pieces = 8;
    let knots: Vec<f64> = (0..=pieces).map(|k| -1.0 + 2.0 * k as f64 / pieces as f64).collect();
    let mut c_a: f64 = 1.0;
    for _ in 0..pairs {
        let a = 10f64.powf(rng.gen_range(-6.0..0.0));
        let (mut g, mut h) = (vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]]);
        for j in 0..pieces {
            let speed = rng.gen_range(0.0..=(lip - a));
            let v: Vec<f64> = unit(&mut rng, 2).iter().map(|c| speed * c).collect();
            let w: Vec<f64> = v.iter().zip(unit(&mut rng, 2)).map(|(p, q)| p + a * q).collect();
            let dt = knots[j + 1] - knots[j];
            let (lg, lh) = (g[j].clone(), h[j].clone());
            g.push(lg.iter().zip(&v).map(|(p, q)| p + dt * q).collect());
            h.push(lh.iter().zip(&w).map(|(p, q)| p + dt * q).collect());
        }
        let through_origin = |planar: Vec<Vec<f64>>| {
            let path = HorizontalPath::new(knots.clone(), planar, 0.0).unwrap();
            let at0 = path.eval(0.0);
            path.translate(&at0.inverse()).unwrap()
        };
        let (g, h) = (through_origin(g), through_origin(h));
        for k in 1..=20 {
            for t in [k as f64 / 20.0, -(k as f64) / 20.0] {
                let (_, hi) = metric::cc_bracket(&g.eval(t), &h.eval(t)).unwrap();
                c_a = c_a.max(hi / (a.sqrt() * t.abs()));
            }
        }
    }
    c_a
}

fn closedirection() -> Outcome {
    let first = angle_fit(80, 1000);
    let second = angle_fit(81, 1000);
    let library = metric::angle_constant(&mut rng(82), 1, 2.0, 1000).unwrap();
    let spread = relative_spread(first, second).max(relative_spread(first, library));
    (
        spread <= 0.1,
        format!("C_a {first:.4} / {second:.4} across seeds, library {library:.4}; spread {spread:.3}"),
    )
}

fn mean_value() -> Outcome {
    let mut rng = rng(90);
    let mut failures = 0;
    let grid = 1usize << 14;
    for _ in 0..100 {
        let s = 1.0f64;
        let height: f64 = rng.gen_range(0.1..0.5);
        let b: f64 = rng.gen_range(-0.2..0.2);
        let l = 2.0 * (height / (0.5 * s) + 2.0 * b.abs()) + 1e-3;
        let v: f64 = 1.0 / 33.0;
        let rho = s * (s * l / (v * height)).sqrt() * 1.01;
        let sigma = v.powi(3) * (height / (s * l)).powi(2) * (1.0 - 1e-9);
        let end = rho.log2().ceil().exp2();
        let spacing = 2.0 * end / grid as f64;
        let zeta = (rng.gen_range(-0.45..0.45) / spacing).round() * spacing;
        let phi = move |t: f64| {
            let tent = if t <= -s || t >= s {
                0.0
            } else if t <= zeta {
                height * (t + s) / (zeta + s)
            } else {
                height * (s - t) / (s - zeta)
            };
            b * t + tent
        };
        let psi = move |t: f64| b * t;
        let inst = MeanValueInstance::from_fns(-end, end, grid + 1, phi, psi, s, zeta, rho, v, sigma, l).unwrap();
        let Ok(found) = mean_value_search(&inst, &BTreeSet::new()) else {
            failures += 1;
            continue;
        };
        let tau = found.tau;
        let d_tau = (phi(tau + spacing) - phi(tau - spacing)) / (2.0 * spacing);
        let d_psi = (psi(spacing) - psi(-spacing)) / (2.0 * spacing);
        let first = tau.abs() < s && (tau - zeta).abs() > 0.5 * spacing && d_tau >= d_psi + v * (phi(zeta) - psi(zeta)).abs() / s;
        let slope = 4.0 * (1.0 + 20.0 * v) * ((d_tau - d_psi) * l).sqrt();
        let k_tau = ((tau + end) / spacing).round() as i64;
        let k_zero = (end / spacing).round() as i64;
        let (lo, hi) = (-k_tau.min(k_zero), grid as i64 - k_tau.max(k_zero));
        let second = (lo..=hi).filter(|&k| k != 0).all(|k| {
            let t = k as f64 * spacing;
            let lhs = (phi(tau + t) - phi(tau)) - (psi(t) - psi(0.0));
            lhs.abs() <= slope * t.abs() * (1.0 + 1e-9)
        });
        if !(first && second) {
            failures += 1;
        }
    }
    (failures == 0, format!("{failures} failures on 100 instances"))
}

fn algorithm() -> Outcome {
    let config = MaximizerConfig::default();
    let x1 = HorizontalVector::x(1, 0);
    let f0 = ScalarField::hlinear(HLinearMap::new(0.5, x1.clone()).unwrap());
    let x0 = Point::origin(1);
    let region = Ball {
        center: x0.clone(),
        radius: 2.0 + config.delta0,
    };
    let constants = metric::holder_fit(&region, 1000, 0).unwrap();
    let cover = config.build_cover(1).unwrap();
    let traj = maximizer::run(&f0, &x0, &x1, &config, &constants, &cover).unwrap();
    let report = maximizer::verify_trajectory(&traj);
    let states = &traj.states;
    let up = |a: &Point, b: &Point| metric::cc_upper_value(a, b).unwrap();
    let mut issues = Vec::new();
    if states.len() != config.max_steps + 1 {
        issues.push(format!("{} states", states.len()));
    }
    for (i, s) in states.iter().enumerate().skip(1) {
        let prev = &states[i - 1];
        if s.sigma > 2.0 / 4f64.powi(s.m as i32) {
            issues.push(format!("sigma_{} = {}", s.m, s.sigma));
        }
        if s.derivative <= prev.derivative {
            issues.push(format!("derivative not increasing at step {}", s.m));
        }
        if up(&prev.x, &s.x) + s.delta > prev.delta {
            issues.push(format!("ball {} not nested", s.m));
        }
        for later in &states[i..] {
            if up(&later.e.at_origin(), &s.e.at_origin()) > s.sigma {
                issues.push(format!("direction {} drifts beyond sigma_{}", later.m, s.m));
            }
        }
    }
    let last = traj.final_state();
    if norm(&last.accum.vector()) > config.mu {
        issues.push("Lip(f - f0) above mu".into());
    }
    let field = traj.final_field(&f0);
    let h = 1e-6;
    let fd = (field.eval(&last.e.line_point(&last.x, h)) - field.eval(&last.e.line_point(&last.x, -h))) / (2.0 * h);
    if (fd - last.derivative).abs() > 1e-6 {
        issues.push(format!("derivative {} vs finite difference {fd}", last.derivative));
    }
    let drift = up(&last.e.at_origin(), &x1.at_origin());
    if drift > last.sigma {
        issues.push(format!("final direction {drift} from X1"));
    }
    let pass = report.clean() && report.steps == 10 && issues.is_empty();
    (
        pass,
        format!(
            "{} steps, {} violations, {} oracle issues; final derivative {:.6}, drift {drift:.2e} <= sigma {:.2e}",
            report.steps,
            report.violations.len(),
            issues.len(),
            last.derivative,
            last.sigma
        ),
    )
}

/// Clipped parameter interval of `base + t dir` inside `[-clip, clip]^{2n+1}`.
fn clip_range(base: &[f64], dir: &[f64], slope: f64, clip: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (b, d) in base.iter().zip(dir.iter().chain(std::iter::once(&slope))) {
        if *d == 0.0 {
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

fn uds() -> Outcome {
    let (n, depth, clip) = (1, 12, 10.0);
    let cover = NCover::build(n, 8, depth, clip).unwrap();
    let manifest = cover.manifest();
    // Tube of radius r around a segment of length l: at most l/r + 2 balls
    // of radius 2r, each of volume (2r)^4 * 2 * pi.
    let lengths: Vec<f64> = cover
        .lines()
        .iter()
        .map(|line| {
            let base = line.base.to_point().coords();
            let dir = line.direction_f64();
            let slope = -2.0 * omega(&base[..2], &dir);
            clip_range(&base, &dir, slope, clip).map_or(0.0, |(a, b)| (b - a) * norm(&dir))
        })
        .collect();
    let mut volume_ok = true;
    for k in 1..=depth {
        let c = manifest.radius_constants[k - 1];
        let ours: f64 = lengths
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let r = c * 0.5f64.powi(i.min(2000) as i32);
                if *l > 0.0 {
                    (16.0 * l * r.powi(3) + 2.0 * (2.0 * r).powi(4)) * 2.0 * PI
                } else {
                    0.0
                }
            })
            .sum();
        let cap = 0.5f64.powi(k as i32);
        volume_ok &= ours <= cap * (1.0 + 1e-12) && cover.volume_bound(k).unwrap() <= cap;
    }
    let region = BoxRegion::cube(n, &[0.0; 3], 0.1);
    let mut mc_ok = true;
    let mut fractions = Vec::new();
    for k in [1, 6, 12] {
        let m = cover.measure_mc(k, &region, 100_000, 5).unwrap();
        let z: f64 = 1.959_963_984_540_054;
        let p = m.hits as f64 / m.samples as f64;
        let nf = m.samples as f64;
        let centre = (p + z * z / (2.0 * nf)) / (1.0 + z * z / nf);
        let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / (1.0 + z * z / nf);
        let low = if m.hits == 0 { 0.0 } else { (centre - half).max(0.0) };
        let bound = 0.5f64.powi(k as i32) / region.volume();
        mc_ok &= (low - m.ci_low).abs() < 1e-12 && low <= bound && (m.bound_fraction - bound).abs() < 1e-12 * bound;
        fractions.push(format!("k={k}: {p:.4} vs {:.3}", bound.min(1.0)));
    }
    let mut rng = rng(100);
    let mut violations = 0;
    let near = cover.lines().len().min(256);
    for i in 0..10_000 {
        let q = if i % 2 == 0 {
            box_coords(&mut rng, n, 1.0, 1.0)
        } else {
            let line = &cover.lines()[rng.gen_range(0..near)];
            let base = line.base.to_point().coords();
            let on = along_field(&base, &line.direction_f64(), rng.gen_range(-1.0..1.0));
            let jitter = 10f64.powf(rng.gen_range(-6.0..-1.0));
            on.iter().zip(unit(&mut rng, 3)).map(|(a, b)| a + jitter * b).collect()
        };
        let levels: Vec<bool> = (1..=depth).map(|k| cover.contains(&pt(&q), k).unwrap()).collect();
        if levels.windows(2).any(|w| w[1] && !w[0]) {
            violations += 1;
        }
    }
    let pass = volume_ok && mc_ok && violations == 0;
    (
        pass,
        format!(
            "volume bounds <= 2^-k for k <= 12: {volume_ok}; MC {}; nesting violations {violations} / 10^4",
            fractions.join(", ")
        ),
    )
}

fn end_to_end() -> Outcome {
    let cfg = RunConfig::default();
    let names: Vec<String> = SUITES.iter().map(|(s, _)| s.to_string()).collect();
    let start = Instant::now();
    let first = run_all(&cfg, &names).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let second = run_all(&cfg, &names).unwrap();
    let a = Report::new(&cfg, &first).unwrap().to_json().unwrap();
    let b = Report::new(&cfg, &second).unwrap().to_json().unwrap();
    let pass_all = first.iter().all(|s| s.passed());
    let failed: Vec<&str> = first.iter().filter(|s| !s.passed()).map(|s| s.suite.as_str()).collect();
    (
        pass_all && secs < 600.0 && a == b,
        format!(
            "aggregate pass {pass_all} {failed:?}; {secs:.1}s; identical report on repeat {}",
            a == b
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("group axioms and x(tE(0)) = x + tE(x)", group_axioms),
        ("lift identity", lift_identity),
        ("horizontal distances", horizontal_distances),
        ("good curve bounds", goodcurve),
        ("Holder comparison", holder),
        ("differentiability of the distance", distance_differentiability),
        ("maximality implies differentiability", maximality_pansu),
        ("modified lines", newcurveg),
        ("close direction, close position", closedirection),
        ("mean value search", mean_value),
        ("maximizer trajectory", algorithm),
        ("UDS model", uds),
        ("end-to-end verify", end_to_end),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != i + 1) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check();
        if !pass {
            failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
