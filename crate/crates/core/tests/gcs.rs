mod common;

use common::{random_instance, random_products};
use ltlgcs::gcs::{edge_cost, Edge, Vertex, VertexKind};
use ltlgcs::solver::enumerate_simple_paths;
use ltlgcs::{CostSpec, Norm};

#[test]
fn edge_cost_examples() {
    let hop = [0.0, 0.0, 3.0, 4.0];
    assert!((edge_cost(&CostSpec::default(), 1, 2, 0).unwrap().eval(&hop) - 5.0).abs() < 1e-12);
    let l1 = CostSpec {
        norm: Norm::L1,
        ..Default::default()
    };
    assert!((edge_cost(&l1, 1, 2, 0).unwrap().eval(&hop) - 7.0).abs() < 1e-12);
    let line = [0.0, 0.0, 1.5, 2.0, 3.0, 4.0];
    assert!(
        (edge_cost(&CostSpec::default(), 2, 2, 1)
            .unwrap()
            .eval(&line)
            - 5.0)
            .abs()
            < 1e-12
    );
}

#[test]
fn product_projects_onto_ts_and_automaton() {
    let mut checked = 0;
    for seed in 0..60 {
        let Some(inst) = random_instance(seed) else {
            continue;
        };
        let (ts, aut, g) = (&inst.ts, &inst.aut, &inst.g);
        let step = |v: &Vertex| {
            let s = v.region.unwrap();
            aut.step(v.state.unwrap(), ts.label_of(s)).unwrap()
        };
        for e in &g.edges {
            let (u, v) = (&g.vertices[e.from], &g.vertices[e.to]);
            match (u.kind, v.kind) {
                (VertexKind::Source, VertexKind::Product) => {
                    assert_eq!(v.state, Some(aut.initial));
                    assert!(ts.initial.contains(&v.region.unwrap()));
                }
                (VertexKind::Product, VertexKind::Product) => {
                    assert!(ts.has_edge(u.region.unwrap(), v.region.unwrap()));
                    assert_eq!(step(u), v.state.unwrap());
                }
                (VertexKind::Product, VertexKind::Target) => assert!(aut.accepting[step(u)]),
                other => panic!("unexpected edge kinds {other:?}"),
            }
        }
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn every_path_word_is_accepted() {
    for (seed, g, paths) in random_products(30, 200) {
        let inst = random_instance(seed).unwrap();
        for p in &paths {
            let letters: Vec<_> = p[1..p.len() - 1]
                .iter()
                .map(|&v| g.label(v).unwrap().clone())
                .collect();
            assert!(
                inst.aut.accepts_finite(&letters).unwrap(),
                "seed {seed} path {p:?}"
            );
        }
    }
}

#[test]
fn pruning_keeps_every_path() {
    for (_, g, paths) in random_products(30, 200) {
        // hang a dead end and an unreachable vertex on the graph
        let mut h = g.clone();
        let first = h
            .vertices
            .iter()
            .position(|v| v.kind == VertexKind::Product)
            .unwrap();
        for _ in 0..2 {
            h.vertices.push(h.vertices[first].clone());
            h.self_loop.push(false);
        }
        let (dead, orphan) = (h.vertices.len() - 2, h.vertices.len() - 1);
        let edge = |from, to| Edge {
            from,
            to,
            stationary_tail: false,
        };
        h.edges.push(edge(first, dead));
        h.edges.push(edge(orphan, h.target));
        let before = enumerate_simple_paths(&h, 10_000).unwrap();
        assert_eq!(before.len(), paths.len());
        let pruned = h.prune().unwrap();
        assert_eq!(pruned.vertices.len(), g.vertices.len());
        assert_eq!(
            enumerate_simple_paths(&pruned, 10_000).unwrap().len(),
            paths.len()
        );
    }
}

#[test]
fn strict_mode_needs_accepting_state_on_the_vertex() {
    let s = common::load("shortest_path");
    let mut req = s.request();
    req.strict_def5 = true;
    let aut = ltlgcs::planner::compile_automaton(&req).unwrap();
    let g = ltlgcs::planner::build_product(&req, &aut).unwrap();
    for (_, e) in g.in_edges(g.target) {
        assert!(aut.accepting[g.vertices[e.from].state.unwrap()]);
    }
}
