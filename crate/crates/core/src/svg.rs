//! SVG drawing of planar scenarios and plans.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::LabeledRegion;
use crate::planner::Plan;

/// Samples per segment in the drawn path.
pub const SAMPLES_PER_SEGMENT: usize = 100;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 8] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
];

/// Points drawn for the plan's path, in workspace coordinates.
pub fn path_samples(plan: &Plan) -> Vec<[f64; 2]> {
    plan.spline
        .segments
        .iter()
        .flat_map(|s| s.curve().sample(SAMPLES_PER_SEGMENT))
        .map(|p| [p[0], p[1]])
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Regions as filled polygons with their names and labels, the spline as a
/// polyline and its control points as red dots. Unbounded regions are left
/// out.
pub fn render(regions: &[LabeledRegion], plan: Option<&Plan>) -> Result<String> {
    if let Some(r) = regions.iter().find(|r| r.polytope.dim() != 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: r.polytope.dim(),
        });
    }
    let mut polys = Vec::new();
    for r in regions {
        if r.polytope.is_bounded()? {
            let v = r.polytope.vertices_2d()?;
            if !v.is_empty() {
                polys.push((r, v));
            }
        }
    }
    let mut pts: Vec<[f64; 2]> = polys.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let samples = plan.map(path_samples).unwrap_or_default();
    pts.extend(&samples);
    if pts.is_empty() {
        return Err(Error::InvalidRequest("nothing to draw".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for j in 0..2 {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let height = (hi[1] - lo[1]) * scale + 2.0 * MARGIN;
    let to_px = |p: [f64; 2]| {
        (
            MARGIN + (p[0] - lo[0]) * scale,
            height - MARGIN - (p[1] - lo[1]) * scale,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    for (i, (r, v)) in polys.iter().enumerate() {
        let fill = if r.label.is_empty() {
            "#eeeeee"
        } else {
            PALETTE[i % PALETTE.len()]
        };
        let points: Vec<String> = v
            .iter()
            .map(|&p| {
                let (x, y) = to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"  <polygon points="{}" fill="{fill}" fill-opacity="0.6" stroke="#555555" stroke-width="1"/>"##,
            points.join(" ")
        );
        let c = [
            v.iter().map(|p| p[0]).sum::<f64>() / v.len() as f64,
            v.iter().map(|p| p[1]).sum::<f64>() / v.len() as f64,
        ];
        let (x, y) = to_px(c);
        let atoms: Vec<&str> = r.label.iter().map(String::as_str).collect();
        let text = if atoms.is_empty() {
            r.name.clone()
        } else {
            format!("{} {{{}}}", r.name, atoms.join(","))
        };
        let _ = writeln!(
            out,
            r#"  <text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            escape(&text)
        );
    }
    if let Some(plan) = plan {
        let line: Vec<String> = samples
            .iter()
            .map(|&p| {
                let (x, y) = to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"  <polyline points="{}" fill="none" stroke="#1f3b99" stroke-width="2"/>"##,
            line.join(" ")
        );
        for s in &plan.spline.segments {
            for p in &s.control_points {
                let (x, y) = to_px([p[0], p[1]]);
                let _ = writeln!(
                    out,
                    r#"  <circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="red"/>"#
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HPolytope;
    use crate::ltl::label_set;

    #[test]
    fn draws_regions() {
        let regions = vec![
            LabeledRegion::new(
                "r1",
                label_set(["a"]),
                HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            ),
            LabeledRegion::new(
                "r2",
                label_set::<_, &str>([]),
                HPolytope::from_box(&[1.0, 0.0], &[3.0, 1.0]).unwrap(),
            ),
        ];
        let svg = render(&regions, None).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains("r1 {a}"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn rejects_3d() {
        let r = LabeledRegion::new(
            "r",
            label_set::<_, &str>([]),
            HPolytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap(),
        );
        assert!(render(&[r], None).is_err());
    }
}
