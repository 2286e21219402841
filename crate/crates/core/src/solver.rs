//! Shortest paths in a graph of convex sets: perspective relaxation,
//! randomized rounding, fixed-path restriction and a brute force oracle.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::{solve_conic, ConicProgram, ConicStatus, LinExpr};
use crate::error::{Error, Result};
use crate::gcs::{Gcs, Norm, PIN_TOL};

/// Flows below this are only tried after every other edge failed.
pub const FLOW_FLOOR: f64 = 1e-4;
/// Gaps below this are reported as zero.
pub const GAP_TOL: f64 = 1e-6;
/// Tolerance for the constraint re-check of restriction solutions.
pub const CONSTRAINT_TOL: f64 = 1e-6;

/// Where each edge's variables live in the relaxation.
#[derive(Clone, Debug)]
pub struct EdgeVars {
    pub y: usize,
    /// Perspective copy of the tail block, if the tail has free variables.
    pub z_tail: Option<usize>,
    pub z_head: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Relaxation {
    pub program: ConicProgram,
    pub edge_vars: Vec<EdgeVars>,
}

#[derive(Clone, Debug)]
pub struct RelaxationSolution {
    /// Flow per edge, clamped to `[0, 1]`.
    pub flows: Vec<f64>,
    pub lower_bound: f64,
    pub status: ConicStatus,
    pub diagnostics: String,
    /// Largest scalar flow conservation residual.
    pub conservation_residual: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PathSolution {
    /// Vertex indices from source to target.
    pub path: Vec<usize>,
    /// Flattened control points per path vertex; `None` for virtual ones.
    pub values: Vec<Option<Vec<f64>>>,
    pub cost: f64,
    pub lower_bound: f64,
    pub gap: f64,
    /// Rounding passes run and how many of them produced no usable path.
    pub attempts: usize,
    pub failures: usize,
}

pub fn relative_gap(cost: f64, bound: f64) -> f64 {
    let gap = (cost - bound) / bound.abs().max(1.0);
    if gap < GAP_TOL {
        0.0
    } else {
        gap
    }
}

/// Block expression helper: point coordinate `i` of a vertex block that is
/// either a variable range or `y` times a pinned vector.
fn block_entry(start: Option<usize>, pin: Option<&Vec<f64>>, y: usize, i: usize) -> LinExpr {
    match (start, pin) {
        (Some(s), _) => LinExpr::var(s + i),
        (None, Some(p)) => LinExpr::new().term(y, p[i]),
        (None, None) => LinExpr::new(),
    }
}

fn add_cost(p: &mut ConicProgram, g: &Gcs, entry: &dyn Fn(usize) -> LinExpr, name: &str) {
    for (ti, term) in g.cost.terms.iter().enumerate() {
        let rows: Vec<LinExpr> = term
            .rows
            .iter()
            .map(|row| {
                let mut e = LinExpr::new();
                for &(i, c) in row {
                    e.add_scaled(&entry(i), c);
                }
                e.compact()
            })
            .collect();
        if rows.iter().all(|r| r.terms.is_empty() && r.constant == 0.0) {
            continue;
        }
        match g.cost.norm {
            Norm::L2 => {
                let t = p.add_var(format!("{name}.t{ti}"));
                p.objective.add_term(t, term.weight);
                p.soc(LinExpr::var(t), rows);
            }
            Norm::L1 => {
                let s = p.add_block(format!("{name}.s{ti}"), rows.len());
                for (j, r) in rows.into_iter().enumerate() {
                    let sj = LinExpr::var(s.start + j);
                    let mut plus = sj.clone();
                    plus.add_scaled(&r, -1.0);
                    p.geq0(plus);
                    let mut minus = sj;
                    minus.add_scaled(&r, 1.0);
                    p.geq0(minus);
                    p.objective.add_term(s.start + j, term.weight);
                }
            }
        }
    }
}

/// Add `expr = 0`, dropping rows that are constant within tolerance.
/// A constant row that fails is kept so the solver sees the infeasibility.
fn add_equality(p: &mut ConicProgram, e: LinExpr) {
    let e = e.compact();
    if e.terms.is_empty() && e.constant.abs() <= PIN_TOL {
        return;
    }
    p.eq(e);
}

/// Perspective relaxation of the shortest path problem.
pub fn build_relaxation(g: &Gcs) -> Result<Relaxation> {
    let b = g.block_len();
    let n = g.dim;
    let mut p = ConicProgram::new();
    let mut edge_vars = Vec::with_capacity(g.edges.len());

    for (ei, e) in g.edges.iter().enumerate() {
        let (u, v) = (&g.vertices[e.from], &g.vertices[e.to]);
        let y = p.add_var(format!("y{ei}"));
        p.geq0(LinExpr::var(y));
        p.geq0(LinExpr::constant(1.0).term(y, -1.0));
        let free = |vx: &crate::gcs::Vertex| vx.has_variables() && vx.pin.is_none();
        let z_tail = free(u).then(|| p.add_block(format!("z{ei}"), b).start);
        let z_head = free(v).then(|| p.add_block(format!("zh{ei}"), b).start);

        // Perspective membership A z <= y b for every control point.
        for (start, vx) in [(z_tail, u), (z_head, v)] {
            let (Some(s), Some(r)) = (start, vx.region) else {
                continue;
            };
            let poly = &g.regions[r].polytope;
            if poly.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: poly.dim(),
                });
            }
            for pt in 0..g.num_points() {
                for row in 0..poly.num_constraints() {
                    let mut expr = LinExpr::new().term(y, poly.b[row]);
                    for j in 0..n {
                        expr.add_term(s + pt * n + j, -poly.a[(row, j)]);
                    }
                    p.geq0(expr);
                }
            }
        }

        for row in g.edge_constraints(e) {
            let mut expr = LinExpr::new().term(y, -row.rhs);
            for &(i, c) in &row.tail {
                expr.add_scaled(&block_entry(z_tail, u.pin.as_ref(), y, i), c);
            }
            for &(i, c) in &row.head {
                expr.add_scaled(&block_entry(z_head, v.pin.as_ref(), y, i), c);
            }
            add_equality(&mut p, expr);
        }

        if u.has_variables() {
            let pin = u.pin.clone();
            add_cost(
                &mut p,
                g,
                &|i| block_entry(z_tail, pin.as_ref(), y, i),
                &format!("c{ei}"),
            );
        }
        edge_vars.push(EdgeVars { y, z_tail, z_head });
    }

    let outs = g.out_lists();
    let mut ins = vec![Vec::new(); g.vertices.len()];
    for (i, e) in g.edges.iter().enumerate() {
        ins[e.to].push(i);
    }
    for v in 0..g.vertices.len() {
        let net = if v == g.source {
            1.0
        } else if v == g.target {
            -1.0
        } else {
            0.0
        };
        let mut flow = LinExpr::constant(-net);
        for &e in &outs[v] {
            flow.add_term(edge_vars[e].y, 1.0);
        }
        for &e in &ins[v] {
            flow.add_term(edge_vars[e].y, -1.0);
        }
        p.eq(flow);
        if !outs[v].is_empty() {
            let mut deg = LinExpr::constant(1.0);
            for &e in &outs[v] {
                deg.add_term(edge_vars[e].y, -1.0);
            }
            p.geq0(deg);
        }
        // Spatial conservation: the point entering v is the point leaving it.
        let vx = &g.vertices[v];
        if v != g.source && v != g.target && vx.has_variables() && vx.pin.is_none() {
            for i in 0..b {
                let mut e = LinExpr::new();
                for &ei in &ins[v] {
                    e.add_term(edge_vars[ei].z_head.expect("free head block") + i, 1.0);
                }
                for &ei in &outs[v] {
                    e.add_term(edge_vars[ei].z_tail.expect("free tail block") + i, -1.0);
                }
                p.eq(e);
            }
        }
    }

    Ok(Relaxation {
        program: p,
        edge_vars,
    })
}

/// Build and solve the relaxation.
pub fn solve_relaxation(g: &Gcs) -> Result<RelaxationSolution> {
    let rel = build_relaxation(g)?;
    let sol = solve_conic(&rel.program)?;
    match sol.status {
        ConicStatus::Optimal => {}
        ConicStatus::Infeasible => {
            return Err(Error::UnsatisfiableInProduct(format!(
                "the convex relaxation is infeasible ({})",
                sol.diagnostics
            )))
        }
        _ => {
            sol.require_optimal("solving the convex relaxation")?;
            unreachable!()
        }
    }
    let flows: Vec<f64> = rel
        .edge_vars
        .iter()
        .map(|ev| sol.x[ev.y].clamp(0.0, 1.0))
        .collect();
    let mut residual: f64 = 0.0;
    let mut net = vec![0.0; g.vertices.len()];
    for (i, e) in g.edges.iter().enumerate() {
        net[e.from] += sol.x[rel.edge_vars[i].y];
        net[e.to] -= sol.x[rel.edge_vars[i].y];
    }
    for (v, val) in net.iter().enumerate() {
        let want = if v == g.source {
            1.0
        } else if v == g.target {
            -1.0
        } else {
            0.0
        };
        residual = residual.max((val - want).abs());
    }
    Ok(RelaxationSolution {
        flows,
        lower_bound: sol.objective,
        status: sol.status,
        diagnostics: sol.diagnostics,
        conservation_residual: residual,
        x: sol.x,
    })
}

fn edge_map(g: &Gcs) -> HashMap<(usize, usize), usize> {
    g.edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.from, e.to), i))
        .collect()
}

/// Optimize the control points along a fixed vertex path.
pub fn restriction(g: &Gcs, path: &[usize]) -> Result<PathSolution> {
    let edges = edge_map(g);
    let path_edges: Vec<usize> = path
        .windows(2)
        .map(|w| {
            edges
                .get(&(w[0], w[1]))
                .copied()
                .ok_or_else(|| Error::InvalidRequest(format!("no edge {} -> {}", w[0], w[1])))
        })
        .collect::<Result<_>>()?;
    if path.first() != Some(&g.source) || path.last() != Some(&g.target) {
        return Err(Error::InvalidRequest(
            "path must run from source to target".into(),
        ));
    }

    let b = g.block_len();
    let n = g.dim;
    let mut p = ConicProgram::new();
    let mut starts: Vec<Option<usize>> = Vec::with_capacity(path.len());
    for (pos, &v) in path.iter().enumerate() {
        let vx = &g.vertices[v];
        if vx.has_variables() && vx.pin.is_none() {
            let s = p.add_block(format!("x{pos}"), b).start;
            let poly = &g.regions[vx.region.unwrap()].polytope;
            for pt in 0..g.num_points() {
                for row in 0..poly.num_constraints() {
                    let mut expr = LinExpr::constant(poly.b[row]);
                    for j in 0..n {
                        expr.add_term(s + pt * n + j, -poly.a[(row, j)]);
                    }
                    p.geq0(expr);
                }
            }
            starts.push(Some(s));
        } else {
            starts.push(None);
        }
    }
    // Pinned blocks enter as constants.
    let entry = |pos: usize, i: usize| -> LinExpr {
        match (starts[pos], &g.vertices[path[pos]].pin) {
            (Some(s), _) => LinExpr::var(s + i),
            (None, Some(pin)) => LinExpr::constant(pin[i]),
            (None, None) => LinExpr::new(),
        }
    };
    for (pos, &ei) in path_edges.iter().enumerate() {
        for row in g.edge_constraints(&g.edges[ei]) {
            let mut expr = LinExpr::constant(-row.rhs);
            for &(i, c) in &row.tail {
                expr.add_scaled(&entry(pos, i), c);
            }
            for &(i, c) in &row.head {
                expr.add_scaled(&entry(pos + 1, i), c);
            }
            add_equality(&mut p, expr);
        }
        if g.vertices[path[pos]].has_variables() {
            add_cost(&mut p, g, &|i| entry(pos, i), &format!("c{pos}"));
        }
    }

    let sol = solve_conic(&p)?;
    match sol.status {
        ConicStatus::Optimal => {}
        ConicStatus::Infeasible => {
            return Err(Error::RestrictionInfeasible(format!(
                "path {:?}: {}",
                path, sol.diagnostics
            )))
        }
        _ => {
            sol.require_optimal("solving a fixed-path restriction")?;
            unreachable!()
        }
    }
    let violation = p.max_violation(&sol.x);
    if violation > CONSTRAINT_TOL {
        return Err(Error::Backend {
            context: "re-checking a fixed-path restriction".into(),
            status: "ConstraintViolation".into(),
            diagnostics: format!("max violation {violation:.3e}; {}", sol.diagnostics),
        });
    }
    let values: Vec<Option<Vec<f64>>> = path
        .iter()
        .enumerate()
        .map(|(pos, &v)| match (starts[pos], &g.vertices[v].pin) {
            (Some(s), _) => Some(sol.x[s..s + b].to_vec()),
            (None, Some(pin)) => Some(pin.clone()),
            (None, None) => None,
        })
        .collect();
    let cost = path
        .iter()
        .zip(&values)
        .take(path.len() - 1)
        .filter_map(|(_, val)| val.as_ref().map(|x| g.cost.eval(x)))
        .sum();
    Ok(PathSolution {
        path: path.to_vec(),
        values,
        cost,
        lower_bound: f64::NEG_INFINITY,
        gap: f64::INFINITY,
        attempts: 1,
        failures: 0,
    })
}

#[derive(Clone, Debug)]
pub struct RoundingOptions {
    pub max_paths: usize,
    pub seed: u64,
    /// Vertex expansions allowed per depth-first search.
    pub step_budget: usize,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        RoundingOptions {
            max_paths: 10,
            seed: 0,
            step_budget: 100_000,
        }
    }
}

/// One randomized depth-first search from source to target over simple
/// paths. Outgoing edges are tried in a random order where an edge with
/// flow `y` comes first with probability proportional to `y`; edges with
/// flow below [`FLOW_FLOOR`] come last.
fn random_dfs(
    g: &Gcs,
    outs: &[Vec<usize>],
    flows: &[f64],
    rng: &mut ChaCha8Rng,
    budget: usize,
) -> Option<Vec<usize>> {
    let order = |v: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut keyed: Vec<(bool, f64, usize)> = outs[v]
            .iter()
            .map(|&e| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let y = flows[e];
                let low = y < FLOW_FLOOR;
                let w = if low { 1.0 } else { y };
                (low, -u.ln() / w, e)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        keyed.into_iter().map(|(_, _, e)| e).collect()
    };
    let mut on_path = vec![false; g.vertices.len()];
    let mut path = vec![g.source];
    on_path[g.source] = true;
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(order(g.source, rng), 0)];
    let mut steps = 0;
    while let Some((cands, next)) = stack.last_mut() {
        if *next >= cands.len() {
            stack.pop();
            let v = path.pop().unwrap();
            on_path[v] = false;
            continue;
        }
        let e = cands[*next];
        *next += 1;
        let w = g.edges[e].to;
        if on_path[w] {
            continue;
        }
        steps += 1;
        if steps > budget {
            return None;
        }
        path.push(w);
        if w == g.target {
            return Some(path);
        }
        on_path[w] = true;
        stack.push((order(w, rng), 0));
    }
    None
}

/// Randomized rounding: sample up to `max_paths` paths guided by the
/// relaxed flows, solve the restriction of each distinct one and keep the
/// cheapest. Costs within [`GAP_TOL`] tie; ties go to the shorter path, then
/// to the lexicographically smaller one. Sampling stops early once a path
/// meets the relaxation bound.
pub fn round(g: &Gcs, rel: &RelaxationSolution, opts: &RoundingOptions) -> Result<PathSolution> {
    let outs = g.out_lists();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<PathSolution> = None;
    let mut failures = 0;
    let mut attempts = 0;
    for _ in 0..opts.max_paths {
        if best
            .as_ref()
            .is_some_and(|b| relative_gap(b.cost, rel.lower_bound) == 0.0)
        {
            break;
        }
        attempts += 1;
        let Some(path) = random_dfs(g, &outs, &rel.flows, &mut rng, opts.step_budget) else {
            failures += 1;
            continue;
        };
        if !seen.insert(path.clone()) {
            continue;
        }
        match restriction(g, &path) {
            Ok(sol) => {
                if better(&sol, best.as_ref()) {
                    best = Some(sol);
                }
            }
            Err(Error::RestrictionInfeasible(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(mut sol) => {
            sol.lower_bound = rel.lower_bound;
            sol.gap = relative_gap(sol.cost, rel.lower_bound);
            sol.attempts = attempts;
            sol.failures = failures;
            Ok(sol)
        }
        None => Err(Error::NoPathFound {
            attempts: opts.max_paths,
            failures,
        }),
    }
}

fn better(sol: &PathSolution, best: Option<&PathSolution>) -> bool {
    match best {
        None => true,
        Some(b) => {
            let tol = GAP_TOL * b.cost.abs().max(1.0);
            sol.cost < b.cost - tol
                || ((sol.cost - b.cost).abs() <= tol
                    && (sol.path.len(), &sol.path) < (b.path.len(), &b.path))
        }
    }
}

/// Every simple source-target path, or an error past `budget` paths.
pub fn enumerate_simple_paths(g: &Gcs, budget: usize) -> Result<Vec<Vec<usize>>> {
    let outs = g.out_lists();
    let mut found = Vec::new();
    let mut on_path = vec![false; g.vertices.len()];
    fn go(
        g: &Gcs,
        outs: &[Vec<usize>],
        v: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        found: &mut Vec<Vec<usize>>,
        budget: usize,
    ) -> Result<()> {
        if v == g.target {
            if found.len() == budget {
                return Err(Error::PathBudgetExceeded(budget));
            }
            found.push(path.clone());
            return Ok(());
        }
        on_path[v] = true;
        for &e in &outs[v] {
            let w = g.edges[e].to;
            if !on_path[w] {
                path.push(w);
                go(g, outs, w, path, on_path, found, budget)?;
                path.pop();
            }
        }
        on_path[v] = false;
        Ok(())
    }
    let mut path = vec![g.source];
    go(
        g,
        &outs,
        g.source,
        &mut path,
        &mut on_path,
        &mut found,
        budget,
    )?;
    Ok(found)
}

/// Ground truth by exhaustive search over simple paths.
pub fn exact_oracle(g: &Gcs, max_simple_paths: usize) -> Result<PathSolution> {
    let paths = enumerate_simple_paths(g, max_simple_paths)?;
    let mut best: Option<PathSolution> = None;
    let mut failures = 0;
    for path in &paths {
        match restriction(g, path) {
            Ok(sol) => {
                if better(&sol, best.as_ref()) {
                    best = Some(sol);
                }
            }
            Err(Error::RestrictionInfeasible(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let mut sol = best.ok_or(Error::NoPathFound {
        attempts: paths.len(),
        failures,
    })?;
    sol.lower_bound = sol.cost;
    sol.gap = 0.0;
    sol.attempts = paths.len();
    sol.failures = failures;
    Ok(sol)
}

/// Random choice helper shared with generators.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::ltlf_to_dfa;
    use crate::gcs::{product, CostSpec, ProductOptions};
    use crate::geometry::{HPolytope, LabeledRegion};
    use crate::ltl::{label_set, parse};
    use crate::ts::build_ts;

    fn region(name: &str, atoms: &[&str], lo: [f64; 2], hi: [f64; 2]) -> LabeledRegion {
        LabeledRegion::new(
            name,
            label_set(atoms.iter().copied()),
            HPolytope::from_box(&lo, &hi).unwrap(),
        )
    }

    fn build(regions: Vec<LabeledRegion>, formula: &str, q0: [f64; 2], k: usize, d: usize) -> Gcs {
        let ts = build_ts(regions, &q0).unwrap();
        let dfa = ltlf_to_dfa(&parse(formula).unwrap(), &ts.observed_alphabet()).unwrap();
        product(
            &ts,
            &dfa,
            &ProductOptions {
                order: k,
                smoothness: d,
                cost: CostSpec::default(),
                strict_def5: false,
            },
            &q0,
        )
        .unwrap()
    }

    #[test]
    fn stationary_single_region() {
        let g = build(
            vec![region("a", &["a"], [0.0, 0.0], [1.0, 1.0])],
            "F a",
            [0.0, 0.0],
            3,
            1,
        );
        let rel = solve_relaxation(&g).unwrap();
        assert!(rel.lower_bound.abs() < 1e-6);
        let sol = round(&g, &rel, &RoundingOptions::default()).unwrap();
        assert!(sol.cost < 1e-6);
        assert_eq!(sol.gap, 0.0);
    }

    #[test]
    fn two_routes_prefers_shorter() {
        // start in the middle strip, `a` far to the right, `b` close on the left
        let g = build(
            vec![
                region("mid", &[], [0.0, 0.0], [4.0, 1.0]),
                region("a", &["a"], [4.0, 0.0], [5.0, 1.0]),
                region("b", &["b"], [-1.0, 0.0], [0.0, 1.0]),
            ],
            "F (a | b)",
            [1.0, 0.5],
            2,
            1,
        );
        let rel = solve_relaxation(&g).unwrap();
        let oracle = exact_oracle(&g, 100).unwrap();
        let sol = round(&g, &rel, &RoundingOptions::default()).unwrap();
        assert!(rel.lower_bound <= oracle.cost + 1e-6);
        assert!((sol.cost - oracle.cost).abs() < 1e-5);
        let last = sol.path[sol.path.len() - 2];
        assert_eq!(g.region_name(last), Some("b"));
        assert!(rel.conservation_residual < 1e-6);
    }

    #[test]
    fn rounding_is_deterministic() {
        let g = build(
            vec![
                region("mid", &[], [0.0, 0.0], [4.0, 1.0]),
                region("a", &["a"], [4.0, 0.0], [5.0, 1.0]),
                region("b", &["b"], [-1.0, 0.0], [0.0, 1.0]),
            ],
            "F a & F b",
            [1.0, 0.5],
            3,
            1,
        );
        let rel = solve_relaxation(&g).unwrap();
        let opts = RoundingOptions {
            seed: 7,
            ..Default::default()
        };
        let s1 = round(&g, &rel, &opts).unwrap();
        let s2 = round(&g, &rel, &opts).unwrap();
        assert_eq!(s1.path, s2.path);
        assert_eq!(s1.cost, s2.cost);
    }

    #[test]
    fn path_budget() {
        let g = build(
            vec![
                region("mid", &[], [0.0, 0.0], [4.0, 1.0]),
                region("a", &["a"], [4.0, 0.0], [5.0, 1.0]),
                region("b", &["b"], [-1.0, 0.0], [0.0, 1.0]),
            ],
            "F (a | b)",
            [1.0, 0.5],
            2,
            1,
        );
        assert!(matches!(
            enumerate_simple_paths(&g, 1),
            Err(Error::PathBudgetExceeded(1))
        ));
        let paths = enumerate_simple_paths(&g, 1000).unwrap();
        // direct to a, direct to b, and detours through the accepted copies
        assert!(paths.len() > 2);
        for p in &paths {
            let distinct: HashSet<_> = p.iter().collect();
            assert_eq!(distinct.len(), p.len());
            assert_eq!(p.last(), Some(&g.target));
        }
    }

    #[test]
    fn gap_clamp() {
        assert_eq!(relative_gap(1.0 + 1e-9, 1.0), 0.0);
        assert!((relative_gap(2.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((relative_gap(0.5, 0.0) - 0.5).abs() < 1e-12);
    }
}
