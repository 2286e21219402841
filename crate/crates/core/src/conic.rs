//! Linear and second-order cone programs, solved with Clarabel.
//!
//! A [`ConicProgram`] is built from affine expressions over a flat vector of
//! scalar variables. Constraints are `expr = 0`, `expr >= 0`, and
//! `||(u_1, ..., u_m)|| <= t` for a list of expressions `[t, u_1, ..., u_m]`.

use std::fmt::Write as _;
use std::ops::Range;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

/// Affine expression `sum(coef * x[var]) + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: usize) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(mut self, v: usize, coef: f64) -> Self {
        self.add_term(v, coef);
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, v: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
    }

    /// Merge repeated variables and drop zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some((w, d)) if *w == v => *d += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    pub num_vars: usize,
    /// Named contiguous variable blocks, for dumps and diagnostics.
    pub blocks: Vec<(String, Range<usize>)>,
    /// Minimize this.
    pub objective: LinExpr,
    pub equalities: Vec<LinExpr>,
    pub nonnegs: Vec<LinExpr>,
    /// Each entry is `[t, u_1, ..., u_m]` meaning `||u|| <= t`.
    pub socs: Vec<Vec<LinExpr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Backend status name, iteration count and residuals.
    pub diagnostics: String,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }

    /// Turn a non-optimal status into an error carrying the diagnostics.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Backend {
                context: context.to_string(),
                status: format!("{:?}", self.status),
                diagnostics: self.diagnostics,
            })
        }
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocate `len` fresh variables.
    pub fn add_block(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let r = self.num_vars..self.num_vars + len;
        self.num_vars += len;
        self.blocks.push((name.into(), r.clone()));
        r
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.add_block(name, 1).start
    }

    pub fn eq(&mut self, e: LinExpr) {
        self.equalities.push(e);
    }

    pub fn geq0(&mut self, e: LinExpr) {
        self.nonnegs.push(e);
    }

    /// `lhs <= rhs`.
    pub fn leq(&mut self, lhs: &LinExpr, rhs: &LinExpr) {
        let mut e = rhs.clone();
        e.add_scaled(lhs, -1.0);
        self.nonnegs.push(e);
    }

    pub fn soc(&mut self, t: LinExpr, u: Vec<LinExpr>) {
        let mut row = Vec::with_capacity(u.len() + 1);
        row.push(t);
        row.extend(u);
        self.socs.push(row);
    }

    pub fn num_rows(&self) -> usize {
        self.equalities.len() + self.nonnegs.len() + self.socs.iter().map(Vec::len).sum::<usize>()
    }

    /// Largest violation of any constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for e in &self.nonnegs {
            worst = worst.max(-e.eval(x));
        }
        for row in &self.socs {
            let t = row[0].eval(x);
            let norm = row[1..]
                .iter()
                .map(|u| u.eval(x).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(norm - t);
        }
        worst
    }

    /// Plain text dump.
    ///
    /// ```text
    /// conic-program v1
    /// vars <n>
    /// block <name> <start> <len>
    /// min <expr>
    /// eq <expr>          (expr = 0)
    /// geq <expr>         (expr >= 0)
    /// soc <m> <expr>; <expr>; ...   (first >= norm of the rest)
    /// ```
    /// An expression is `<constant> [<coef>*x<index> ...]`.
    pub fn to_text(&self) -> String {
        fn expr(e: &LinExpr) -> String {
            let mut s = format!("{:e}", e.constant);
            for &(v, c) in &e.terms {
                let _ = write!(s, " {c:e}*x{v}");
            }
            s
        }
        let mut out = format!("conic-program v1\nvars {}\n", self.num_vars);
        for (name, r) in &self.blocks {
            let _ = writeln!(out, "block {name} {} {}", r.start, r.len());
        }
        let _ = writeln!(out, "min {}", expr(&self.objective));
        for e in &self.equalities {
            let _ = writeln!(out, "eq {}", expr(e));
        }
        for e in &self.nonnegs {
            let _ = writeln!(out, "geq {}", expr(e));
        }
        for row in &self.socs {
            let parts: Vec<String> = row.iter().map(expr).collect();
            let _ = writeln!(out, "soc {} {}", row.len() - 1, parts.join("; "));
        }
        out
    }
}

/// Solve with the interior-point backend. Infeasibility, unboundedness and
/// numerical trouble are reported through [`ConicSolution::status`]; only
/// malformed input is an error.
pub fn solve_conic(p: &ConicProgram) -> Result<ConicSolution> {
    let n = p.num_vars;
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // Clarabel form: A x + s = b with s in the cone. For `expr in K` take
    // s = expr, i.e. A = -coefficients and b = constant.
    let push = |e: &LinExpr,
                rows: &mut Vec<usize>,
                cols: &mut Vec<usize>,
                vals: &mut Vec<f64>,
                b: &mut Vec<f64>| {
        let r = b.len();
        for &(v, c) in &e.terms {
            rows.push(r);
            cols.push(v);
            vals.push(-c);
        }
        b.push(e.constant);
    };

    for e in &p.equalities {
        push(e, &mut rows, &mut cols, &mut vals, &mut b);
    }
    if !p.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(p.equalities.len()));
    }
    for e in &p.nonnegs {
        push(e, &mut rows, &mut cols, &mut vals, &mut b);
    }
    if !p.nonnegs.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(p.nonnegs.len()));
    }
    for row in &p.socs {
        for e in row {
            push(e, &mut rows, &mut cols, &mut vals, &mut b);
        }
        cones.push(SupportedConeT::SecondOrderConeT(row.len()));
    }

    if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
        return Err(Error::InvalidRequest(format!(
            "variable x{bad} out of range ({n} variables)"
        )));
    }
    if vals.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRequest(
            "non-finite constraint coefficient".into(),
        ));
    }

    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let pm = CscMatrix::<f64>::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(v, c) in &p.objective.terms {
        q[v] += c;
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRequest(
            "non-finite objective coefficient".into(),
        ));
    }

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .presolve_enable(true)
        .build()
        .map_err(|e| Error::InvalidRequest(format!("solver settings: {e:?}")))?;
    let mut solver =
        DefaultSolver::new(&pm, &q, &a, &b, &cones, settings).map_err(|e| Error::Backend {
            context: "setting up conic program".into(),
            status: "SetupError".into(),
            diagnostics: format!("{e}"),
        })?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => ConicStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConicStatus::Unbounded,
        _ => ConicStatus::NumericalFailure,
    };
    Ok(ConicSolution {
        status,
        objective: sol.obj_val + p.objective.constant,
        x: sol.x.clone(),
        diagnostics: format!(
            "backend status {:?} after {} iterations, primal residual {:.3e}, dual residual {:.3e}",
            sol.status, sol.iterations, sol.r_prim, sol.r_dual
        ),
    })
}
