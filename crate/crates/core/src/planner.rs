//! End-to-end planning: automaton, product graph, relaxation, rounding and
//! spline assembly, plus an independent check of the result.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::automata::{ltl_to_dba, ltlf_to_dfa, Automaton, AutomatonKind};
use crate::bezier::{BezierCurve, BezierSpline, Segment};
use crate::error::{Error, Result};
use crate::gcs::{product, CostSpec, Gcs, ProductOptions};
use crate::geometry::{LabeledRegion, CONTAINMENT_TOL};
use crate::ltl::{check_word, is_syntactically_cosafe, to_nnf, Formula, LabelSet, Word};
use crate::solver::{relative_gap, round, solve_relaxation, PathSolution, RoundingOptions};
use crate::ts::build_ts;

/// Allowed distance between the first control point and the start.
pub const START_TOL: f64 = 1e-9;
/// Allowed mismatch of derivatives at segment junctions.
pub const CONTINUITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct PlanRequest {
    pub formula: Formula,
    pub regions: Vec<LabeledRegion>,
    pub q0: Vec<f64>,
    pub order: usize,
    pub smoothness: usize,
    pub cost: CostSpec,
    pub rounding: RoundingOptions,
    pub strict_def5: bool,
}

impl PlanRequest {
    pub fn new(formula: Formula, regions: Vec<LabeledRegion>, q0: Vec<f64>) -> Self {
        PlanRequest {
            formula,
            regions,
            q0,
            order: 3,
            smoothness: 1,
            cost: CostSpec::default(),
            rounding: RoundingOptions::default(),
            strict_def5: false,
        }
    }

    pub fn product_options(&self) -> ProductOptions {
        ProductOptions {
            order: self.order,
            smoothness: self.smoothness,
            cost: self.cost.clone(),
            strict_def5: self.strict_def5,
        }
    }

    pub fn is_cosafe(&self) -> bool {
        is_syntactically_cosafe(&to_nnf(&self.formula))
    }

    /// Distinct region labels; the automaton only ever reads these.
    pub fn alphabet(&self) -> Vec<LabelSet> {
        let set: std::collections::BTreeSet<LabelSet> =
            self.regions.iter().map(|r| r.label.clone()).collect();
        set.into_iter().collect()
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub automaton: f64,
    pub product: f64,
    pub solve: f64,
}

impl Timing {
    pub fn total(&self) -> f64 {
        self.automaton + self.product + self.solve
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub spline: BezierSpline,
    /// Region labels of the segments. For infinite plans the last segment
    /// closes the loop and is not part of the word; the word repeats from
    /// `lasso`.
    pub trace: Word,
    pub cost: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub timing: Timing,
    pub kind: AutomatonKind,
    /// Product vertices visited, in order.
    pub vertices: Vec<usize>,
}

/// Outcome of [`verify`]: empty `violations` means the plan is valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub violations: Vec<String>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// The automaton for `req`: a DFA for co-safe formulas, a DBA otherwise.
pub fn compile_automaton(req: &PlanRequest) -> Result<Automaton> {
    let f = to_nnf(&req.formula);
    if is_syntactically_cosafe(&f) {
        ltlf_to_dfa(&f, &req.alphabet())
    } else {
        ltl_to_dba(&f, &req.alphabet())
    }
}

pub fn build_product(req: &PlanRequest, aut: &Automaton) -> Result<Gcs> {
    let ts = build_ts(req.regions.clone(), &req.q0)?;
    product(&ts, aut, &req.product_options(), &req.q0)
}

/// Relax, round and return the best path found.
pub fn solve_product(g: &Gcs, opts: &RoundingOptions) -> Result<PathSolution> {
    let rel = solve_relaxation(g)?;
    round(g, &rel, opts)
}

/// Plan with whichever algorithm fits the formula.
pub fn plan(req: &PlanRequest) -> Result<Plan> {
    if req.is_cosafe() {
        plan_cosafe(req)
    } else {
        plan_full(req)
    }
}

fn check_request(req: &PlanRequest) -> Result<()> {
    if req.q0.is_empty() {
        return Err(Error::InvalidRequest("start configuration is empty".into()));
    }
    if req.q0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidRequest(
            "start configuration is not finite".into(),
        ));
    }
    if req.regions.is_empty() {
        return Err(Error::InvalidRequest("no regions".into()));
    }
    if req.rounding.max_paths == 0 {
        return Err(Error::InvalidRequest(
            "rounding needs at least one path".into(),
        ));
    }
    Ok(())
}

/// Co-safe planning: one shortest path through the DFA product.
pub fn plan_cosafe(req: &PlanRequest) -> Result<Plan> {
    check_request(req)?;
    let f = to_nnf(&req.formula);
    if !is_syntactically_cosafe(&f) {
        return Err(Error::NotCoSafe(req.formula.to_string()));
    }
    let mut timing = Timing::default();
    let t = Instant::now();
    let aut = ltlf_to_dfa(&f, &req.alphabet())?;
    timing.automaton = elapsed(t);

    let t = Instant::now();
    let g = build_product(req, &aut)?;
    timing.product = elapsed(t);

    let t = Instant::now();
    let sol = solve_product(&g, &req.rounding)?;
    let segments = path_segments(&g, &sol)?;
    let spline = finish_spline(segments, req)?;
    timing.solve = elapsed(t);

    let plan = Plan {
        trace: spline.trace(),
        vertices: spline.segments.iter().map(|s| s.vertex).collect(),
        spline,
        cost: sol.cost,
        lower_bound: sol.lower_bound,
        gap: sol.gap,
        timing,
        kind: AutomatonKind::Dfa,
    };
    ensure_valid(plan, req, &aut)
}

/// Full LTL planning: a path to an accepting vertex, then a loop through
/// it. Accepting vertices that admit no loop are removed and the search
/// starts over.
pub fn plan_full(req: &PlanRequest) -> Result<Plan> {
    check_request(req)?;
    let f = to_nnf(&req.formula);
    let mut timing = Timing::default();
    let t = Instant::now();
    let aut = ltl_to_dba(&f, &req.alphabet())?;
    timing.automaton = elapsed(t);

    let t = Instant::now();
    let mut g = build_product(req, &aut)?;
    timing.product = elapsed(t);

    let t = Instant::now();
    let mut first = true;
    let (prefix, lasso) = loop {
        let p1 = match solve_product(&g, &req.rounding) {
            Ok(p) => p,
            Err(Error::UnsatisfiableInProduct(_) | Error::NoPathFound { .. }) if !first => {
                return Err(Error::NoLoopFound)
            }
            Err(e) => return Err(e),
        };
        first = false;
        let vf = p1.path[p1.path.len() - 2];
        let pin = p1.values[p1.path.len() - 2]
            .clone()
            .expect("region vertex has values");
        let closed = g
            .loop_graph(vf, pin)
            .and_then(|lg| solve_product(&lg, &req.rounding).map(|p2| (lg, p2)));
        match closed {
            Ok((lg, p2)) => break ((g.clone(), p1), (lg, p2)),
            Err(
                Error::NoLoopFound
                | Error::UnsatisfiableInProduct(_)
                | Error::NoPathFound { .. }
                | Error::RestrictionInfeasible(_),
            ) => {
                g = g.without_vertex(vf).map_err(|_| Error::NoLoopFound)?;
            }
            Err(e) => return Err(e),
        }
    };
    let ((g1, p1), (g2, p2)) = (prefix, lasso);
    let mut segments = path_segments(&g1, &p1)?;
    let m = segments.len();
    let mut cycle = path_segments(&g2, &p2)?;
    // The loop's first segment is the pinned copy of the last prefix segment.
    cycle.remove(0);
    let closing = segments[m - 1].clone();
    segments.extend(cycle);
    segments.push(closing);
    let spline = finish_spline(segments, req)?;
    timing.solve = elapsed(t);

    let body = &spline.segments[..spline.segments.len() - 1];
    let trace = Word {
        letters: body.iter().map(|s| s.label.clone()).collect(),
        lasso: Some(m - 1),
    };
    let cost = p1.cost + p2.cost;
    let lower_bound = p1.lower_bound + p2.lower_bound;
    let plan = Plan {
        trace,
        vertices: spline.segments.iter().map(|s| s.vertex).collect(),
        spline,
        cost,
        lower_bound,
        gap: relative_gap(cost, lower_bound),
        timing,
        kind: AutomatonKind::Dba,
    };
    ensure_valid(plan, req, &aut)
}

fn ensure_valid(plan: Plan, req: &PlanRequest, aut: &Automaton) -> Result<Plan> {
    let report = verify_with(&plan, req, aut);
    if report.ok() {
        Ok(plan)
    } else {
        Err(Error::VerificationFailed(report.violations.join("; ")))
    }
}

/// Segments for the region vertices of a solved path.
fn path_segments(g: &Gcs, sol: &PathSolution) -> Result<Vec<Segment>> {
    let n = g.dim;
    let mut out = Vec::new();
    for (&v, val) in sol.path.iter().zip(&sol.values) {
        let (Some(r), Some(x)) = (g.vertices[v].region, val) else {
            continue;
        };
        let curve = BezierCurve::new(x.chunks(n).map(<[f64]>::to_vec).collect())?;
        let region = &g.regions[r];
        out.push(Segment::new(
            curve,
            region.name.clone(),
            region.label.clone(),
            g.vertices[v].id,
        ));
    }
    if out.is_empty() {
        return Err(Error::NoPathFound {
            attempts: 0,
            failures: 0,
        });
    }
    Ok(out)
}

/// Remove solver noise: the start snaps to `q0` and adjacent segments share
/// their junction point exactly.
fn finish_spline(mut segments: Vec<Segment>, req: &PlanRequest) -> Result<BezierSpline> {
    segments[0].control_points[0] = req.q0.clone();
    for i in 1..segments.len() {
        let (a, b) = segments.split_at_mut(i);
        let end = a[i - 1].control_points.last_mut().unwrap();
        let start = &mut b[0].control_points[0];
        let mid: Vec<f64> = end
            .iter()
            .zip(start.iter())
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        *end = mid.clone();
        *start = mid;
    }
    Ok(BezierSpline {
        segments,
        smoothness: req.smoothness,
    })
}

/// Check a plan against the request from scratch.
pub fn verify(plan: &Plan, req: &PlanRequest) -> Verification {
    match compile_automaton(req) {
        Ok(aut) => verify_with(plan, req, &aut),
        Err(e) => Verification {
            violations: vec![format!("could not build the automaton: {e}")],
        },
    }
}

pub fn verify_with(plan: &Plan, req: &PlanRequest, aut: &Automaton) -> Verification {
    let mut bad = Vec::new();
    let segs = &plan.spline.segments;
    if segs.is_empty() {
        bad.push("spline has no segments".to_string());
        return Verification { violations: bad };
    }
    for (i, s) in segs.iter().enumerate() {
        if s.control_points.len() != req.order + 1 {
            bad.push(format!(
                "segment {i} has order {}, expected {}",
                s.control_points.len() - 1,
                req.order
            ));
        }
        let Some(region) = req.regions.iter().find(|r| r.name == s.region) else {
            bad.push(format!("segment {i} names unknown region `{}`", s.region));
            continue;
        };
        if region.label != s.label {
            bad.push(format!(
                "segment {i} carries a label that differs from region `{}`",
                s.region
            ));
        }
        match s.curve().contained_in(&region.polytope, CONTAINMENT_TOL) {
            Ok(true) => {}
            Ok(false) => bad.push(format!("segment {i} leaves region `{}`", s.region)),
            Err(e) => bad.push(format!("segment {i}: {e}")),
        }
    }
    if plan.spline.smoothness != req.smoothness {
        bad.push(format!(
            "spline smoothness {} differs from requested {}",
            plan.spline.smoothness, req.smoothness
        ));
    }
    match plan.spline.continuity_error() {
        Ok(e) if e <= CONTINUITY_TOL => {}
        Ok(e) => bad.push(format!("continuity error {e:.3e}")),
        Err(e) => bad.push(format!("continuity check failed: {e}")),
    }
    let start = plan.spline.start().unwrap();
    let off = start
        .iter()
        .zip(&req.q0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if start.len() != req.q0.len() || off > START_TOL {
        bad.push(format!(
            "spline starts {off:.3e} away from the start configuration"
        ));
    }

    let expected: Vec<LabelSet> = match plan.trace.lasso {
        None => segs.iter().map(|s| s.label.clone()).collect(),
        Some(_) => segs[..segs.len() - 1]
            .iter()
            .map(|s| s.label.clone())
            .collect(),
    };
    if plan.trace.letters != expected {
        bad.push("trace does not match the segment labels".into());
    }
    if let Some(i) = plan.trace.lasso {
        let (Some(first), Some(last)) = (segs.get(i), segs.last()) else {
            bad.push(format!("lasso index {i} out of range"));
            return Verification { violations: bad };
        };
        let drift = first
            .control_points
            .iter()
            .flatten()
            .zip(last.control_points.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if drift > CONTAINMENT_TOL {
            bad.push(format!(
                "loop does not close: last segment is {drift:.3e} from segment {i}"
            ));
        }
    }
    match aut.accepts(&plan.trace) {
        Ok(true) => {}
        Ok(false) => bad.push("automaton rejects the trace".into()),
        Err(e) => bad.push(format!("automaton run failed: {e}")),
    }
    match check_word(&req.formula, &plan.trace) {
        Ok(true) => {}
        Ok(false) => bad.push("trace does not satisfy the formula".into()),
        Err(e) => bad.push(format!("formula check failed: {e}")),
    }
    Verification { violations: bad }
}
