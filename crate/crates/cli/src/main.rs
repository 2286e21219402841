use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ltlgcs::harness::{
    bench_corpus, bench_csv, bench_markdown, chain_scenario, cost_increases, scaling, scaling_csv,
};
use ltlgcs::planner::{build_product, compile_automaton, plan, verify};
use ltlgcs::{build_ts, svg, Error, Norm, PlanFile, Scenario};

#[derive(Parser)]
#[command(
    name = "ltlgcs",
    version,
    about = "LTL motion planning on graphs of convex sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
}

#[derive(clap::Args)]
struct Overrides {
    /// Path length norm.
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    /// Bezier order of every segment.
    #[arg(long)]
    order: Option<usize>,
    /// Continuity order enforced at junctions.
    #[arg(long)]
    smoothness: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_round_paths: Option<usize>,
    /// Target edges leave vertices whose own automaton state is accepting.
    #[arg(long)]
    strict_def5: bool,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        let o = &mut s.file.options;
        if let Some(n) = self.norm {
            o.norm = match n {
                NormArg::L1 => Norm::L1,
                NormArg::L2 => Norm::L2,
            };
        }
        if let Some(k) = self.order {
            o.order = k;
        }
        if let Some(d) = self.smoothness {
            o.smoothness = d;
        }
        if let Some(seed) = self.seed {
            o.seed = seed;
        }
        if let Some(m) = self.max_round_paths {
            o.max_round_paths = m;
        }
        if self.strict_def5 {
            o.strict_def5 = true;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write `<name>.plan.json` (and `<name>.svg` in 2-D).
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write DOT files of the abstraction, automaton and product.
        #[arg(long)]
        dot: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Time every scenario in a directory.
    Bench {
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Run scenarios concurrently; timings are then not meaningful.
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-solve one scenario for several Bezier orders.
    Scaling {
        scenario: PathBuf,
        /// Comma separated orders.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
        orders: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a plan file against its scenario.
    Verify { scenario: PathBuf, plan: PathBuf },
    /// Write a synthetic chain-of-boxes scenario.
    Chain {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        boxes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnsatisfiableInProduct(_) | Error::NoInitialRegion | Error::NoLoopFound => 3,
        Error::Backend { .. }
        | Error::NoPathFound { .. }
        | Error::RestrictionInfeasible(_)
        | Error::VerificationFailed(_)
        | Error::PathBudgetExceeded(_) => 4,
        _ => 2,
    }
}

fn report(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let body = json!({
        "error": e.kind(),
        "message": e.to_string(),
        "offset": e.offset(),
        "exit_code": code,
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn write(dir: &Path, file: String, contents: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn run(path: &Path, overrides: &Overrides, dot: bool, out: &Path) -> Result<(), Error> {
    let mut s = Scenario::load(path)?;
    overrides.apply(&mut s);
    let req = s.request();
    let name = s.name().to_string();
    if dot {
        let aut = compile_automaton(&req)?;
        let ts = build_ts(req.regions.clone(), &req.q0)?;
        write(out, format!("{name}.ts.dot"), &ts.to_dot())?;
        write(out, format!("{name}.automaton.dot"), &aut.to_dot())?;
        let g = build_product(&req, &aut)?;
        write(out, format!("{name}.product.dot"), &g.to_dot(None))?;
    }
    let p = plan(&req)?;
    let file = PlanFile::new(&s, p);
    let plan_path = write(out, format!("{name}.plan.json"), &file.to_json()?)?;
    println!(
        "{name}: {} segments, cost {:.6}, bound {:.6}, gap {:.2e}, times automaton {:.3}s product {:.3}s solve {:.3}s",
        file.plan.spline.segments.len(),
        file.plan.cost,
        file.plan.lower_bound,
        file.plan.gap,
        file.plan.timing.automaton,
        file.plan.timing.product,
        file.plan.timing.solve
    );
    println!("wrote {}", plan_path.display());
    if req.q0.len() == 2 {
        let svg_path = write(
            out,
            format!("{name}.svg"),
            &svg::render(&req.regions, Some(&file.plan))?,
        )?;
        println!("wrote {}", svg_path.display());
    }
    Ok(())
}

fn bench(corpus: &Path, reps: usize, parallel: bool, out: &Path) -> Result<(), Error> {
    let rows = if parallel {
        let files = ltlgcs::harness::corpus_files(corpus)?;
        std::thread::scope(|scope| {
            let handles: Vec<_> = files
                .iter()
                .map(|f| {
                    scope.spawn(move || match Scenario::load(f) {
                        Ok(s) => ltlgcs::harness::bench_scenario(&s, reps),
                        Err(e) => ltlgcs::harness::BenchRow {
                            scenario: f
                                .file_stem()
                                .unwrap_or_default()
                                .to_string_lossy()
                                .into_owned(),
                            automaton: f64::NAN,
                            product: f64::NAN,
                            solve: f64::NAN,
                            cost: f64::NAN,
                            gap: f64::NAN,
                            error: Some(e.to_string()),
                        },
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench thread panicked"))
                .collect::<Vec<_>>()
        })
    } else {
        bench_corpus(corpus, reps)?
    };
    write(out, "bench.csv".into(), &bench_csv(&rows))?;
    let table = bench_markdown(&rows);
    write(out, "bench.md".into(), &table)?;
    print!("{table}");
    Ok(())
}

fn run_scaling(
    path: &Path,
    orders: &[usize],
    overrides: &Overrides,
    out: &Path,
) -> Result<(), Error> {
    let mut s = Scenario::load(path)?;
    overrides.apply(&mut s);
    let req = s.request();
    if let Some(&k) = orders.iter().find(|&&k| k < (req.smoothness + 1).max(1)) {
        return Err(Error::InvalidRequest(format!(
            "order {k} is below smoothness + 1 = {}",
            req.smoothness + 1
        )));
    }
    let rows = scaling(&req, orders);
    let csv = scaling_csv(&rows);
    write(out, format!("{}.scaling.csv", s.name()), &csv)?;
    print!("{csv}");
    for (a, b) in cost_increases(&rows, 1e-6) {
        eprintln!("warning: cost increased from order {a} to order {b}");
    }
    Ok(())
}

fn run_verify(scenario: &Path, plan_path: &Path) -> Result<bool, Error> {
    let s = Scenario::load(scenario)?;
    let file = PlanFile::from_json(&std::fs::read_to_string(plan_path)?)?;
    let report = verify(&file.plan, &s.request());
    for v in &report.violations {
        println!("violation: {v}");
    }
    if report.ok() {
        println!("ok");
    }
    Ok(report.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            overrides,
            dot,
            out,
        } => run(&scenario, &overrides, dot, &out),
        Command::Bench {
            corpus,
            reps,
            parallel,
            out,
        } => bench(&corpus, reps, parallel, &out),
        Command::Scaling {
            scenario,
            orders,
            overrides,
            out,
        } => run_scaling(&scenario, &orders, &overrides, &out),
        Command::Verify { scenario, plan } => match run_verify(&scenario, &plan) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::Chain {
            dim,
            boxes,
            seed,
            out,
        } => chain_scenario(dim, boxes, seed)
            .to_json()
            .and_then(|text| std::fs::write(&out, text + "\n").map_err(Error::from)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
