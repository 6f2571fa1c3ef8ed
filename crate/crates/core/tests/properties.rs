mod common;

use convexjet::bodies::{check_body_conditions, BodyClass, NormalData};
use convexjet::conditions::{check_c, check_cw1_default};
use convexjet::envelope::conv_envelope_grid;
use convexjet::grid::{GridSpec, ScalarGrid};
use convexjet::jet::Jet1;
use convexjet::minimal::build_m;
use convexjet::whitney::{decompose, whitney_extend_jet, ClosedSetApprox};
use proptest::prelude::*;

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2)
}

fn distinct(points: Vec<Vec<f64>>, sep: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if out
            .iter()
            .all(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() >= sep)
        {
            out.push(p);
        }
    }
    out
}

fn values_1d(res: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, res)
}

fn grid_1d(values: Vec<f64>) -> ScalarGrid<f64> {
    let spec = GridSpec::cube(1, -1.0, 1.0, values.len()).unwrap();
    ScalarGrid::new(spec, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partition_weights_sum_to_one(pts in prop::collection::vec(point2(), 1..6), x in point2()) {
        let pts = distinct(pts, 0.05);
        let set = ClosedSetApprox::points(pts).unwrap();
        let d = decompose(&set, &[-1.5, -1.5], &[1.5, 1.5], 10).unwrap();
        if let Ok(terms) = d.partition_eval(&x) {
            let s: f64 = terms.iter().map(|t| t.weight).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            let g: f64 = terms.iter().map(|t| t.gradient[0]).sum();
            prop_assert!(g.abs() <= 1e-9 * terms.iter().map(|t| t.gradient[0].abs()).sum::<f64>().max(1.0));
            prop_assert!(terms.iter().all(|t| (0.0..=1.0).contains(&t.weight)));
        }
    }

    #[test]
    fn whitney_extension_reproduces_affine_jets(
        pts in prop::collection::vec(point2(), 1..6),
        slope in point2(),
        offset in -1.0f64..1.0,
        x in point2(),
    ) {
        let pts = distinct(pts, 0.05);
        let jet = Jet1::sample(pts.clone(), |p: &[f64]| (slope[0] * p[0] + slope[1] * p[1] + offset, slope.clone())).unwrap();
        let set = ClosedSetApprox::points(pts).unwrap();
        let d = decompose(&set, &[-1.5, -1.5], &[1.5, 1.5], 10).unwrap();
        if let Ok((v, g)) = whitney_extend_jet(&jet, &d, &x) {
            prop_assert!((v - (slope[0] * x[0] + slope[1] * x[1] + offset)).abs() < 1e-9);
            prop_assert!((g[0] - slope[0]).abs() < 1e-7 && (g[1] - slope[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn envelope_is_convex_minorant(values in values_1d(17)) {
        let g = grid_1d(values.clone());
        let e = conv_envelope_grid(&g, &[]).unwrap();
        for (a, b) in e.grid.values.iter().zip(&values) {
            prop_assert!(*a <= *b + 1e-12);
        }
        prop_assert!(e.grid.midpoint_slack(500, 1) >= -1e-12);
        // Second differences of the envelope are nonnegative.
        for w in e.grid.values.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn envelope_is_monotone(values in values_1d(13), bumps in values_1d(13)) {
        let lower = grid_1d(values.clone());
        let upper = grid_1d(values.iter().zip(&bumps).map(|(v, b)| v + b.abs()).collect());
        let el = conv_envelope_grid(&lower, &[]).unwrap();
        let eu = conv_envelope_grid(&upper, &[]).unwrap();
        for (a, b) in el.grid.values.iter().zip(&eu.grid.values) {
            prop_assert!(*a <= *b + 1e-12);
        }
    }

    #[test]
    fn envelope_commutes_with_affine_shifts(
        values in prop::collection::vec(-2.0f64..2.0, 49),
        slope in point2(),
        offset in -1.0f64..1.0,
    ) {
        let spec = GridSpec::cube(2, -1.0, 1.0, 7).unwrap();
        let nodes = spec.nodes();
        let g = ScalarGrid::new(spec.clone(), values.clone()).unwrap();
        let shifted: Vec<f64> = values
            .iter()
            .zip(&nodes)
            .map(|(v, x)| v + slope[0] * x[0] + slope[1] * x[1] + offset)
            .collect();
        let gs = ScalarGrid::new(spec, shifted).unwrap();
        let e = conv_envelope_grid(&g, &[]).unwrap();
        let es = conv_envelope_grid(&gs, &[]).unwrap();
        for ((a, b), x) in e.grid.values.iter().zip(&es.grid.values).zip(&nodes) {
            prop_assert!((a + slope[0] * x[0] + slope[1] * x[1] + offset - b).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope_fixes_convex_samples(a in 0.0f64..2.0, b in -1.0f64..1.0) {
        let g = grid_1d((0..21).map(|i| {
            let x = -1.0 + i as f64 / 10.0;
            a * x * x + b * x + x.abs()
        }).collect());
        let e = conv_envelope_grid(&g, &[]).unwrap();
        for (p, q) in e.grid.values.iter().zip(&g.values) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn conditions_invariant_under_affine_shift(seed in 0u64..1000, slope in point2(), offset in -1.0f64..1.0) {
        let mut rng = common::rng(seed);
        let func = common::random_convex(&mut rng, 2, seed as usize);
        let pts = common::separated_points(&mut rng, 2, 8, 0.1);
        let jet = Jet1::sample(pts.clone(), |x| (func.f)(x)).unwrap();
        let shifted = Jet1::sample(pts, |x| {
            let (v, g) = (func.f)(x);
            (v + slope[0] * x[0] + slope[1] * x[1] + offset, vec![g[0] + slope[0], g[1] + slope[1]])
        }).unwrap();
        prop_assert!(check_c(&jet).holds && check_c(&shifted).holds);
        prop_assert!(check_cw1_default(&jet).holds && check_cw1_default(&shifted).holds);
        prop_assert!((check_c(&jet).margin - check_c(&shifted).margin).abs() < 1e-9);
    }

    #[test]
    fn minimal_extension_interpolates_convex_data(seed in 0u64..1000, x in point2()) {
        let mut rng = common::rng(seed);
        let func = common::random_convex(&mut rng, 2, seed as usize);
        let pts = common::separated_points(&mut rng, 2, 10, 0.1);
        let jet = Jet1::sample(pts.clone(), |x| (func.f)(x)).unwrap();
        let m = build_m(&jet);
        for (p, v) in pts.iter().zip(&jet.values) {
            prop_assert!((m.value(p) - v).abs() <= 1e-12 * jet.scale());
        }
        prop_assert!(m.value(&x) <= (func.f)(&x).0 + 1e-12);
    }

    #[test]
    fn body_conditions_rotation_invariant(angle in 0.0f64..6.3, count in 3usize..40) {
        let data = NormalData::<f64>::circle(count, BodyClass::C11).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let rot = |v: &Vec<f64>| vec![c * v[0] - s * v[1], s * v[0] + c * v[1]];
        let mut turned = data.clone();
        turned.points = data.points.iter().map(rot).collect();
        turned.normals = data.normals.iter().map(rot).collect();
        let a = check_body_conditions(&data);
        let b = check_body_conditions(&turned);
        prop_assert_eq!(a.holds, b.holds);
        prop_assert!((a.support.margin - b.support.margin).abs() < 1e-9);
        prop_assert!((a.tangency.margin - b.tangency.margin).abs() < 1e-9);
    }
}
