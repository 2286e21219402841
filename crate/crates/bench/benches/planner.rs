use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ltlgcs::harness::chain_scenario;
use ltlgcs::plan;
use ltlgcs::planner::{build_product, compile_automaton, solve_product};
use ltlgcs_bench::load;

fn stages(c: &mut Criterion) {
    let mut group = c.benchmark_group("key_door_simple");
    group.sample_size(20);
    let req = load("key_door_simple").request();
    let aut = compile_automaton(&req).unwrap();
    let g = build_product(&req, &aut).unwrap();
    group.bench_function("automaton", |b| b.iter(|| compile_automaton(&req).unwrap()));
    group.bench_function("product", |b| b.iter(|| build_product(&req, &aut).unwrap()));
    group.bench_function("solve", |b| {
        b.iter(|| solve_product(&g, &req.rounding).unwrap())
    });
    group.finish();
}

fn corpus(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan");
    group.sample_size(10);
    for name in ["shortest_path", "key_door_3", "kl_loop", "multitarget"] {
        let req = load(name).request();
        group.bench_function(name, |b| b.iter(|| plan(&req).unwrap()));
    }
    group.finish();
}

fn orders(c: &mut Criterion) {
    let mut group = c.benchmark_group("order");
    group.sample_size(10);
    let base = load("key_door_simple").request();
    for k in [2, 6, 10] {
        let mut req = base.clone();
        req.order = k;
        let aut = compile_automaton(&req).unwrap();
        let g = build_product(&req, &aut).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &g, |b, g| {
            b.iter(|| solve_product(g, &req.rounding).unwrap())
        });
    }
    group.finish();
}

fn dimension(c: &mut Criterion) {
    let mut group = c.benchmark_group("dimension");
    group.sample_size(10);
    for n in [2, 8, 32] {
        let req = chain_scenario(n, 7, 1).build().unwrap().request();
        let aut = compile_automaton(&req).unwrap();
        let g = build_product(&req, &aut).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| solve_product(g, &req.rounding).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages, corpus, orders, dimension);
criterion_main!(benches);
