use approx::assert_abs_diff_eq;
use hcalc::{curves, gamma_y, lift_planar, modify_line, HorizontalVector, ModifyLineParams, Point};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Point> {
    (prop::collection::vec(-2.0f64..2.0, 2 * n), -4.0f64..4.0).prop_map(|(h, c)| Point::from_parts(h, c).unwrap())
}

/// `|c' - 2 sum(a' b - b' a)|` from central differences inside segment `j`.
fn residual(path: &hcalc::HorizontalPath, j: usize) -> f64 {
    let (a, b) = (path.knots()[j], path.knots()[j + 1]);
    let (t, h) = (0.5 * (a + b), 0.25 * (b - a));
    let (p, q, m) = (path.eval(t - h).coords(), path.eval(t + h).coords(), path.eval(t).coords());
    let k = m.len() - 1;
    let n = k / 2;
    let v: Vec<f64> = p.iter().zip(&q).map(|(x, y)| (y - x) / (2.0 * h)).collect();
    let expected: f64 = 2.0 * (0..n).map(|i| v[i] * m[n + i] - v[n + i] * m[i]).sum::<f64>();
    (v[k] - expected).abs()
}

proptest! {
    #[test]
    fn lifted_polylines_are_horizontal(pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 2..8), c0 in -1.0f64..1.0) {
        let base = Point::from_parts(pts[0].clone(), c0).unwrap();
        let path = lift_planar(&pts, &base).unwrap();
        for j in 0..path.segments() {
            prop_assert!(residual(&path, j) <= 1e-9);
        }
    }

    #[test]
    fn translation_preserves_length_and_lipschitz(y in point(2), g in point(2)) {
        prop_assume!(planar_norm(&y) > 1e-3);
        let path = gamma_y(&y).unwrap();
        let moved = path.translate(&g).unwrap();
        prop_assert!((moved.horizontal_length() - path.horizontal_length()).abs() <= 1e-12 * (1.0 + path.horizontal_length()));
        prop_assert!((moved.lipschitz_constant() - path.lipschitz_constant()).abs() <= 1e-12 * (1.0 + path.lipschitz_constant()));
    }

    #[test]
    fn gamma_y_joins_origin_to_y_within_its_bounds(y in point(1)) {
        prop_assume!(planar_norm(&y) > 1e-3);
        let path = gamma_y(&y).unwrap();
        prop_assert!(path.start().euclidean_dist(&Point::origin(1)) <= 1e-12);
        prop_assert!(path.end().euclidean_dist(&y) <= 1e-12 * (1.0 + y.koranyi_norm().powi(2)));
        let lip = curves::gamma_y_lip_bound(&y);
        prop_assert!(path.lipschitz_constant() <= lip * (1.0 + 1e-12));
        prop_assert!(curves::gamma_y_deviation(&path, &y) <= curves::gamma_y_deviation_bound(&y) * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn gamma_y_example_bounds() {
    let y = Point::from_coords(&[1.0, 0.0, 1.0]).unwrap();
    let path = gamma_y(&y).unwrap();
    assert_abs_diff_eq!(curves::gamma_y_lip_bound(&y), 6f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(curves::gamma_y_deviation_bound(&y), 5f64.sqrt(), epsilon = 1e-15);
    assert!(path.end().euclidean_dist(&y) <= 1e-12);
    assert!(gamma_y(&Point::from_coords(&[0.0, 0.0, 1.0]).unwrap()).is_err());
}

#[test]
fn unit_circle_lift_loses_four_pi() {
    let n = 10_000;
    let pts: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let s = std::f64::consts::TAU * k as f64 / n as f64;
            vec![s.cos(), s.sin()]
        })
        .collect();
    let path = lift_planar(&pts, &Point::from_coords(&[1.0, 0.0, 0.0]).unwrap()).unwrap();
    assert_abs_diff_eq!(path.end().c(), -4.0 * std::f64::consts::PI, epsilon = 1e-6);
}

#[test]
fn zero_displacement_keeps_the_line() {
    let params = ModifyLineParams {
        x: Point::from_coords(&[0.5, -0.25, 1.0]).unwrap(),
        u: Point::origin(1),
        e: HorizontalVector::x(1, 0),
        r: 1e-5,
        delta: 2e-5,
        eta: 0.1,
    };
    let (path, zeta) = modify_line(&params).unwrap();
    assert_eq!(zeta, 0.0);
    let (a, b) = path.domain();
    for k in 0..=16 {
        let t = a + (b - a) * k as f64 / 16.0;
        assert!(path.eval(t).euclidean_dist(&params.e.line_point(&params.x, t)) <= 1e-12);
    }
}

#[test]
fn modified_line_passes_through_the_target() {
    let params = ModifyLineParams {
        x: Point::origin(1),
        u: Point::from_coords(&[0.0, 1.0, 0.0]).unwrap(),
        e: HorizontalVector::x(1, 0),
        r: 0.01,
        delta: 1e-5 * 5.0,
        eta: 0.1,
    };
    assert!(params.validate().is_err(), "r must stay below Delta");
    let params = ModifyLineParams { r: 1e-5, ..params };
    let (path, zeta) = modify_line(&params).unwrap();
    assert_eq!(zeta, 0.0);
    let target = Point::from_coords(&[0.0, 1e-5, 0.0]).unwrap();
    assert!(path.eval(zeta).euclidean_dist(&target) <= 1e-12);
    assert!(path.lipschitz_constant() <= 1.0 + params.eta * params.delta);
    let s = params.s();
    assert!(path.eval(s).euclidean_dist(&params.e.line_point(&params.x, s)) <= 1e-12);
}

#[test]
fn delta_range_is_enforced() {
    let params = ModifyLineParams {
        x: Point::origin(1),
        u: Point::origin(1),
        e: HorizontalVector::x(1, 0),
        r: 1e-6,
        delta: curves::delta_max(0.1) * 1.5,
        eta: 0.1,
    };
    assert!(modify_line(&params).is_err());
}

fn planar_norm(y: &Point) -> f64 {
    y.projection().iter().map(|v| v * v).sum::<f64>().sqrt()
}
