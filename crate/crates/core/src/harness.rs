//! Timing reports, order sweeps and synthetic scenarios.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PolytopeSpec;
use crate::planner::{build_product, compile_automaton, plan, solve_product, PlanRequest};
use crate::scenario::{RegionSpec, Scenario, ScenarioFile, ScenarioOptions, SCENARIO_VERSION};
use crate::solver::seeded_rng;

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub automaton: f64,
    pub product: f64,
    pub solve: f64,
    pub cost: f64,
    pub gap: f64,
    /// Set when the scenario failed; the timings are then NaN.
    pub error: Option<String>,
}

impl BenchRow {
    fn failed(scenario: String, e: &Error) -> Self {
        BenchRow {
            scenario,
            automaton: f64::NAN,
            product: f64::NAN,
            solve: f64::NAN,
            cost: f64::NAN,
            gap: f64::NAN,
            error: Some(e.to_string()),
        }
    }
}

/// Scenario files directly inside `dir`, sorted by name.
pub fn corpus_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Median stage times of `reps` runs.
pub fn bench_scenario(s: &Scenario, reps: usize) -> BenchRow {
    let req = s.request();
    let (mut a, mut p, mut v) = (Vec::new(), Vec::new(), Vec::new());
    let mut last = None;
    for _ in 0..reps.max(1) {
        match plan(&req) {
            Ok(pl) => {
                a.push(pl.timing.automaton);
                p.push(pl.timing.product);
                v.push(pl.timing.solve);
                last = Some(pl);
            }
            Err(e) => return BenchRow::failed(s.name().into(), &e),
        }
    }
    let pl = last.unwrap();
    BenchRow {
        scenario: s.name().into(),
        automaton: median(&mut a),
        product: median(&mut p),
        solve: median(&mut v),
        cost: pl.cost,
        gap: pl.gap,
        error: None,
    }
}

/// Bench every scenario in `dir`. Failures are recorded, never fatal.
pub fn bench_corpus(dir: impl AsRef<Path>, reps: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for f in corpus_files(dir)? {
        let fallback = f
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        match Scenario::load(&f) {
            Ok(s) => rows.push(bench_scenario(&s, reps)),
            Err(e) => rows.push(BenchRow::failed(fallback, &e)),
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("scenario,automaton_s,product_s,solve_s,cost,gap,status\n");
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{status}",
            r.scenario, r.automaton, r.product, r.solve, r.cost, r.gap
        );
    }
    out
}

pub fn bench_markdown(rows: &[BenchRow]) -> String {
    let mut out = String::from("| Example | LTL to DFA | Form GCS | Solve |\n|---|---|---|---|\n");
    for r in rows {
        match &r.error {
            None => {
                let _ = writeln!(
                    out,
                    "| {} | {:.3} s | {:.3} s | {:.3} s |",
                    r.scenario, r.automaton, r.product, r.solve
                );
            }
            Some(e) => {
                let _ = writeln!(
                    out,
                    "| {} | failed: {} | | |",
                    r.scenario,
                    e.replace('|', "/")
                );
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub order: usize,
    pub control_points: usize,
    pub solve: f64,
    pub cost: f64,
    pub error: Option<String>,
}

/// Solve the same request at each order in `orders`, timing only the
/// relaxation and rounding on a prebuilt product.
pub fn scaling(req: &PlanRequest, orders: &[usize]) -> Vec<ScalingRow> {
    orders
        .iter()
        .map(|&k| {
            let mut r = req.clone();
            r.order = k;
            let run = || -> Result<(usize, f64, f64)> {
                let aut = compile_automaton(&r)?;
                let g = build_product(&r, &aut)?;
                let t = Instant::now();
                let sol = solve_product(&g, &r.rounding)?;
                let secs = t.elapsed().as_secs_f64();
                let segments = sol.values.iter().filter(|v| v.is_some()).count();
                Ok((segments * (k + 1), secs, sol.cost))
            };
            match run() {
                Ok((control_points, solve, cost)) => ScalingRow {
                    order: k,
                    control_points,
                    solve,
                    cost,
                    error: None,
                },
                Err(e) => ScalingRow {
                    order: k,
                    control_points: 0,
                    solve: f64::NAN,
                    cost: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("order,control_points,solve_s,cost,status\n");
    for r in rows {
        let status = r.error.as_deref().map_or("ok".to_string(), |e| {
            format!("\"failed: {}\"", e.replace('"', "'"))
        });
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{status}",
            r.order, r.control_points, r.solve, r.cost
        );
    }
    out
}

/// Pairs of consecutive successful rows whose cost went up by more than
/// `tol` (relative).
pub fn cost_increases(rows: &[ScalingRow], tol: f64) -> Vec<(usize, usize)> {
    let ok: Vec<&ScalingRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    ok.windows(2)
        .filter(|w| w[1].cost > w[0].cost + tol * w[0].cost.abs().max(1.0))
        .map(|w| (w[0].order, w[1].order))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `boxes` random axis-aligned boxes in `R^n`, each overlapping the next
/// along the first axis, with a detour box beside the middle one. The
/// adjacency pattern does not depend on `n` or `seed`. The last box
/// is labeled `goal` and the task is `F goal`.
pub fn chain_scenario(n: usize, boxes: usize, seed: u64) -> ScenarioFile {
    assert!(n >= 1 && boxes >= 3);
    let mut rng = seeded_rng(seed);
    let mut regions = Vec::new();
    let mut add = |name: String,
                   label: Vec<String>,
                   x0: f64,
                   x1: f64,
                   shift: f64,
                   rng: &mut rand_chacha::ChaCha8Rng| {
        let mut lo = vec![x0];
        let mut hi = vec![x1];
        for _ in 1..n {
            let w: f64 = rng.gen_range(0.8..1.2);
            let c: f64 = shift + rng.gen_range(-0.1..0.1);
            lo.push(c - w);
            hi.push(c + w);
        }
        regions.push(RegionSpec {
            name,
            label,
            polytope: PolytopeSpec::Box { lo, hi },
        });
    };
    let mid = boxes / 2;
    for i in 0..boxes {
        let label = if i + 1 == boxes {
            vec!["goal".to_string()]
        } else {
            Vec::new()
        };
        let x0 = i as f64;
        add(format!("box{i}"), label, x0, x0 + 1.3, 0.0, &mut rng);
        if i == mid {
            // detour alongside the middle box
            add(
                format!("detour{i}"),
                Vec::new(),
                x0 - 0.2,
                x0 + 1.5,
                0.8,
                &mut rng,
            );
        }
    }
    let mut start = vec![0.5];
    start.extend(std::iter::repeat(0.0).take(n - 1));
    ScenarioFile {
        version: SCENARIO_VERSION.into(),
        name: format!("chain_n{n}"),
        note: Some("synthetic chain of random boxes".into()),
        dimension: n,
        atoms: None,
        regions,
        start,
        formula: "F goal".into(),
        options: ScenarioOptions {
            order: 3,
            smoothness: 1,
            seed,
            ..ScenarioOptions::default()
        },
    }
}
