mod common;

use common::random_products;
use ltlgcs::conic::{solve_conic, ConicProgram, ConicStatus, LinExpr};
use ltlgcs::gcs::Gcs;
use ltlgcs::solver::{
    exact_oracle, relative_gap, restriction, round, solve_relaxation, PathSolution,
};
use ltlgcs::RoundingOptions;

const TOL: f64 = 1e-6;

/// Control points inside their regions and every edge constraint met.
fn assert_feasible(g: &Gcs, sol: &PathSolution) {
    let n = g.dim;
    for (i, &v) in sol.path.iter().enumerate() {
        let Some(x) = &sol.values[i] else { continue };
        let region = &g.regions[g.vertices[v].region.unwrap()];
        for p in x.chunks(n) {
            assert!(
                region.polytope.contains(p, TOL).unwrap(),
                "point {p:?} outside {}",
                region.name
            );
        }
    }
    for (i, w) in sol.path.windows(2).enumerate() {
        let e = g
            .edges
            .iter()
            .find(|e| e.from == w[0] && e.to == w[1])
            .expect("path uses an edge");
        for row in g.edge_constraints(e) {
            let val = |k: usize, terms: &[(usize, f64)]| -> f64 {
                match &sol.values[k] {
                    Some(x) => terms.iter().map(|&(j, c)| c * x[j]).sum(),
                    None => 0.0,
                }
            };
            let lhs = val(i, &row.tail) + val(i + 1, &row.head);
            assert!(
                (lhs - row.rhs).abs() <= TOL,
                "edge {w:?} residual {}",
                lhs - row.rhs
            );
        }
    }
}

#[test]
fn conic_examples() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.objective = LinExpr::var(x);
    p.geq0(LinExpr::var(x).plus(-3.0));
    assert!((solve_conic(&p).unwrap().objective - 3.0).abs() < 1e-7);

    let mut p = ConicProgram::new();
    let t = p.add_var("t");
    p.objective = LinExpr::var(t);
    p.soc(
        LinExpr::var(t),
        vec![LinExpr::constant(3.0), LinExpr::constant(4.0)],
    );
    assert!((solve_conic(&p).unwrap().objective - 5.0).abs() < 1e-7);

    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.objective = LinExpr::var(x);
    p.geq0(LinExpr::new().term(x, -1.0));
    p.geq0(LinExpr::var(x).plus(-1.0));
    assert_eq!(solve_conic(&p).unwrap().status, ConicStatus::Infeasible);
}

#[test]
fn bounds_are_sound_on_random_products() {
    for (seed, g, paths) in random_products(15, 200) {
        let rel = solve_relaxation(&g).unwrap();
        assert!(
            rel.conservation_residual <= TOL,
            "seed {seed}: residual {}",
            rel.conservation_residual
        );
        let oracle = exact_oracle(&g, 200).unwrap();
        let rounded = round(&g, &rel, &RoundingOptions::default()).unwrap();
        let slack = TOL * oracle.cost.abs().max(1.0);
        assert!(rel.lower_bound <= oracle.cost + slack, "seed {seed}");
        assert!(oracle.cost <= rounded.cost + slack, "seed {seed}");
        if rounded.gap == 0.0 {
            assert!(relative_gap(rounded.cost, rel.lower_bound) <= 1e-5);
        }
        assert_feasible(&g, &rounded);
        for p in paths.iter().take(5) {
            if let Ok(sol) = restriction(&g, p) {
                assert_feasible(&g, &sol);
                assert!(oracle.cost <= sol.cost + slack);
            }
        }
    }
}

#[test]
fn integral_relaxation_rounds_to_its_path() {
    // a single-route instance
    let s = common::load("chain_n7");
    let mut req = s.request();
    req.regions.retain(|r| !r.name.starts_with("detour"));
    let aut = ltlgcs::planner::compile_automaton(&req).unwrap();
    let g = ltlgcs::planner::build_product(&req, &aut).unwrap();
    let rel = solve_relaxation(&g).unwrap();
    let sol = round(&g, &rel, &RoundingOptions::default()).unwrap();
    assert_eq!(sol.gap, 0.0);
    assert_eq!(sol.attempts, 1);
    assert_eq!(sol.path, exact_oracle(&g, 200).unwrap().path);
}

#[test]
fn same_seed_same_path() {
    for (_, g, _) in random_products(5, 200) {
        let rel = solve_relaxation(&g).unwrap();
        let opts = RoundingOptions {
            seed: 9,
            ..Default::default()
        };
        let a = round(&g, &rel, &opts).unwrap();
        let b = round(&g, &rel, &opts).unwrap();
        assert_eq!(a.path, b.path);
        assert_eq!(a.cost, b.cost);
    }
}
