//! Bezier curves and splines of unit-duration segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HPolytope;
use crate::ltl::{LabelSet, Word};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BezierCurve {
    pub control_points: Vec<Vec<f64>>,
}

impl BezierCurve {
    pub fn new(control_points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = control_points.first() else {
            return Err(Error::InvalidRequest(
                "a Bezier curve needs at least one control point".into(),
            ));
        };
        let n = first.len();
        if let Some(p) = control_points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        Ok(BezierCurve { control_points })
    }

    pub fn order(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.control_points[0].len()
    }

    pub fn start(&self) -> &[f64] {
        &self.control_points[0]
    }

    pub fn end(&self) -> &[f64] {
        self.control_points.last().unwrap()
    }

    /// Point at parameter `s` by de Casteljau's algorithm.
    pub fn eval(&self, s: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidRequest(format!(
                "Bezier parameter {s} outside [0, 1]"
            )));
        }
        if s == 0.0 {
            return Ok(self.start().to_vec());
        }
        if s == 1.0 {
            return Ok(self.end().to_vec());
        }
        let mut pts = self.control_points.clone();
        for level in (1..pts.len()).rev() {
            for i in 0..level {
                for j in 0..pts[i].len() {
                    pts[i][j] = (1.0 - s) * pts[i][j] + s * pts[i + 1][j];
                }
            }
        }
        Ok(pts.swap_remove(0))
    }

    /// Derivative with respect to the parameter: order `k - 1`, control
    /// points `k (g_{i+1} - g_i)`.
    pub fn derivative(&self) -> Result<BezierCurve> {
        let k = self.order();
        if k == 0 {
            return Err(Error::InvalidRequest(
                "cannot differentiate an order 0 Bezier curve".into(),
            ));
        }
        let pts = self
            .control_points
            .windows(2)
            .map(|w| {
                w[1].iter()
                    .zip(&w[0])
                    .map(|(b, a)| k as f64 * (b - a))
                    .collect()
            })
            .collect();
        Ok(BezierCurve {
            control_points: pts,
        })
    }

    /// The `r`-th derivative, `r <= order`.
    pub fn nth_derivative(&self, r: usize) -> Result<BezierCurve> {
        (0..r).try_fold(self.clone(), |c, _| c.derivative())
    }

    /// Sufficient test for containment of the whole curve: all control
    /// points lie in `p`.
    pub fn contained_in(&self, p: &HPolytope, tol: f64) -> Result<bool> {
        for q in &self.control_points {
            if !p.contains(q, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `n + 1` evenly spaced samples including both ends.
    pub fn sample(&self, n: usize) -> Vec<Vec<f64>> {
        (0..=n)
            .map(|i| {
                self.eval(i as f64 / n.max(1) as f64)
                    .expect("parameter in range")
            })
            .collect()
    }

    /// Sum of distances between consecutive control points.
    pub fn control_polygon_length(&self) -> f64 {
        self.control_points
            .windows(2)
            .map(|w| {
                w[1].iter()
                    .zip(&w[0])
                    .map(|(b, a)| (b - a).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }
}

/// One spline segment and the region it was planned in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub order: usize,
    pub control_points: Vec<Vec<f64>>,
    pub region: String,
    /// Region label at planning time; this is the trace letter.
    pub label: LabelSet,
    /// Product graph vertex the segment came from.
    pub vertex: usize,
}

impl Segment {
    pub fn new(
        curve: BezierCurve,
        region: impl Into<String>,
        label: LabelSet,
        vertex: usize,
    ) -> Self {
        Segment {
            order: curve.order(),
            control_points: curve.control_points,
            region: region.into(),
            label,
            vertex,
        }
    }

    pub fn curve(&self) -> BezierCurve {
        BezierCurve {
            control_points: self.control_points.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BezierSpline {
    pub segments: Vec<Segment>,
    pub smoothness: usize,
}

impl BezierSpline {
    /// One letter per segment; repeated labels are kept.
    pub fn trace(&self) -> Word {
        Word::finite(self.segments.iter().map(|s| s.label.clone()).collect())
    }

    /// Worst mismatch of position and derivatives up to the spline's
    /// smoothness over all junctions.
    pub fn continuity_error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pair in self.segments.windows(2) {
            let (u, v) = (pair[0].curve(), pair[1].curve());
            for r in 0..=self.smoothness {
                if r > u.order() || r > v.order() {
                    return Err(Error::InvalidRequest(format!(
                        "smoothness {} exceeds segment order {}",
                        self.smoothness,
                        u.order().min(v.order())
                    )));
                }
                let du = u.nth_derivative(r)?;
                let dv = v.nth_derivative(r)?;
                let gap = du
                    .end()
                    .iter()
                    .zip(dv.start())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(gap);
            }
        }
        Ok(worst)
    }

    pub fn start(&self) -> Option<&[f64]> {
        self.segments
            .first()
            .map(|s| s.control_points[0].as_slice())
    }

    pub fn num_control_points(&self) -> usize {
        self.segments.iter().map(|s| s.control_points.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::label_set;

    fn curve(pts: &[&[f64]]) -> BezierCurve {
        BezierCurve::new(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn endpoints_interpolate() {
        let c = curve(&[&[0.0, 0.0], &[1.0, 3.0], &[2.0, -1.0], &[4.0, 4.0]]);
        assert_eq!(c.eval(0.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(c.eval(1.0).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn quadratic_midpoint() {
        let c = curve(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]]);
        let p = c.eval(0.5).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(c.eval(1.5).is_err());
    }

    #[test]
    fn derivatives() {
        let line = curve(&[&[0.0, 0.0], &[2.0, 0.0]]);
        assert_eq!(
            line.derivative().unwrap().control_points,
            vec![vec![2.0, 0.0]]
        );

        let c = curve(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]]);
        assert_eq!(
            c.derivative().unwrap().control_points,
            vec![vec![2.0, 2.0], vec![2.0, -2.0]]
        );

        let cubic = curve(&[&[0.0], &[1.0], &[3.0], &[2.0]]);
        assert_eq!(cubic.derivative().unwrap().derivative().unwrap().order(), 1);
        assert!(curve(&[&[1.0]]).derivative().is_err());
    }

    #[test]
    fn containment_is_conservative() {
        let unit = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let inside = curve(&[&[0.1, 0.1], &[0.9, 0.5], &[0.2, 0.9]]);
        assert!(inside.contained_in(&unit, 0.0).unwrap());
        // middle control point sticks out, the curve itself does not
        let bulge = curve(&[&[0.0, 0.5], &[0.5, 1.2], &[1.0, 0.5]]);
        assert!(!bulge.contained_in(&unit, 1e-6).unwrap());
        assert!(bulge
            .sample(100)
            .iter()
            .all(|p| unit.contains(p, 1e-9).unwrap()));
    }

    #[test]
    fn trace_keeps_repeats() {
        let seg = |atoms: &[&str]| {
            Segment::new(
                curve(&[&[0.0], &[0.0]]),
                "r",
                label_set(atoms.iter().copied()),
                0,
            )
        };
        let sp = BezierSpline {
            segments: vec![seg(&[]), seg(&["key1"]), seg(&["key1"]), seg(&["goal"])],
            smoothness: 0,
        };
        let w = sp.trace();
        assert_eq!(w.len(), 4);
        assert_eq!(w.letters[1], w.letters[2]);
        assert!(w.lasso.is_none());
    }

    #[test]
    fn continuity_error_detects_kinks() {
        let a = curve(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let b = curve(&[&[2.0, 0.0], &[3.0, 0.0], &[4.0, 0.0]]);
        let c = curve(&[&[2.0, 0.0], &[2.0, 1.0], &[2.0, 2.0]]);
        let sp = |u: &BezierCurve, v: &BezierCurve, d| BezierSpline {
            segments: vec![
                Segment::new(u.clone(), "r", LabelSet::new(), 0),
                Segment::new(v.clone(), "r", LabelSet::new(), 1),
            ],
            smoothness: d,
        };
        assert!(sp(&a, &b, 1).continuity_error().unwrap() < 1e-12);
        assert!(sp(&a, &c, 0).continuity_error().unwrap() < 1e-12);
        assert!(sp(&a, &c, 1).continuity_error().unwrap() > 1.0);
    }
}
