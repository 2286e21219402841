use ltlgcs::geometry::HPolytope;
use ltlgcs::ltl::label_set;
use ltlgcs::{BezierCurve, BezierSpline, LabelSet, Segment};
use proptest::prelude::*;

fn curve(pts: &[[f64; 2]]) -> BezierCurve {
    BezierCurve::new(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
}

#[test]
fn eval_midpoint() {
    let c = curve(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]);
    assert_eq!(c.eval(0.5).unwrap(), vec![1.0, 0.5]);
}

#[test]
fn derivative_examples() {
    let line = curve(&[[0.0, 0.0], [2.0, 0.0]]).derivative().unwrap();
    assert_eq!(line.control_points, vec![vec![2.0, 0.0]]);
    let d = curve(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        .derivative()
        .unwrap();
    assert_eq!(d.control_points, vec![vec![2.0, 2.0], vec![2.0, -2.0]]);
}

#[test]
fn containment_is_conservative() {
    let unit = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let inside = curve(&[[0.1, 0.1], [0.9, 0.5], [0.2, 0.9]]);
    assert!(inside.contained_in(&unit, 1e-6).unwrap());
    for p in inside.sample(100) {
        assert!(unit.contains(&p, 1e-9).unwrap());
    }
    // the middle control point is outside but the curve stays inside
    let bulge = curve(&[[0.1, 0.1], [0.5, 1.1], [0.9, 0.1]]);
    assert!(bulge
        .sample(1000)
        .iter()
        .all(|p| unit.contains(p, 0.0).unwrap()));
    assert!(!bulge.contained_in(&unit, 1e-6).unwrap());
}

#[test]
fn trace_keeps_one_letter_per_segment() {
    let seg = |label: LabelSet, x: f64| {
        Segment::new(
            curve(&[[x, 0.0], [x + 1.0, 0.0]]),
            format!("r{x}"),
            label,
            0,
        )
    };
    let sp = BezierSpline {
        segments: vec![
            seg(LabelSet::new(), 0.0),
            seg(label_set(["key1"]), 1.0),
            seg(label_set(["goal"]), 2.0),
        ],
        smoothness: 0,
    };
    assert_eq!(
        sp.trace().letters,
        vec![LabelSet::new(), label_set(["key1"]), label_set(["goal"])]
    );
    assert_eq!(sp.continuity_error().unwrap(), 0.0);
}

fn curve_strategy() -> impl Strategy<Value = BezierCurve> {
    (1usize..8, 1usize..4).prop_flat_map(|(k, n)| {
        proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, n), k + 1)
            .prop_map(|pts| BezierCurve::new(pts).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn endpoints_interpolate(c in curve_strategy()) {
        prop_assert_eq!(c.eval(0.0).unwrap(), c.control_points[0].clone());
        prop_assert_eq!(c.eval(1.0).unwrap(), c.control_points.last().unwrap().clone());
    }

    #[test]
    fn derivative_matches_finite_differences(c in curve_strategy(), s in 0.0..0.999f64) {
        let h = 1e-6;
        let k = c.order() as f64;
        let scale = c.control_points.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let d = c.derivative().unwrap().eval(s).unwrap();
        let (p0, p1) = (c.eval(s).unwrap(), c.eval(s + h).unwrap());
        for j in 0..c.dim() {
            let fd = (p1[j] - p0[j]) / h;
            prop_assert!((fd - d[j]).abs() <= 10.0 * h * k * k * scale, "fd {} vs {}", fd, d[j]);
        }
    }

    #[test]
    fn contained_curves_sample_inside(c in curve_strategy()) {
        if c.dim() == 2 {
            let unit = HPolytope::from_box(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
            if c.contained_in(&unit, 1e-6).unwrap() {
                for p in c.sample(1000) {
                    prop_assert!(unit.contains(&p, 1e-6).unwrap());
                }
            }
        }
    }

    #[test]
    fn contained_curves_sample_inside_when_scaled(c in curve_strategy()) {
        // shrink every curve into the box so the property is exercised
        let pts: Vec<Vec<f64>> = c.control_points.iter().map(|p| p.iter().map(|x| x / 5.0).collect()).collect();
        let c = BezierCurve::new(pts).unwrap();
        let lo = vec![-1.0; c.dim()];
        let hi = vec![1.0; c.dim()];
        let p = HPolytope::from_box(&lo, &hi).unwrap();
        prop_assert!(c.contained_in(&p, 1e-6).unwrap());
        for x in c.sample(1000) {
            prop_assert!(p.contains(&x, 1e-6).unwrap());
        }
    }
}
