//! Labeled H-polytopes `{x : A x <= b}` and the linear programs asked of them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{solve_conic, ConicProgram, ConicStatus, LinExpr};
use crate::error::{Error, Result};
use crate::ltl::LabelSet;

/// Default tolerance for user-facing containment checks.
pub const CONTAINMENT_TOL: f64 = 1e-6;
/// Threshold on the phase-1 slack below which a system counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct HPolytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl HPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::InvalidPolytope("no constraints".into()));
        }
        if a.ncols() == 0 {
            return Err(Error::InvalidPolytope("zero ambient dimension".into()));
        }
        if a.nrows() != b.len() {
            return Err(Error::InvalidPolytope(format!(
                "{} rows in A but {} entries in b",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolytope("non-finite entry".into()));
        }
        Ok(HPolytope { a, b })
    }

    /// From row-wise `A` and `b`.
    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidPolytope(format!(
                "ragged rows: {} vs {}",
                r.len(),
                n
            )));
        }
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        HPolytope::new(a, DVector::from_column_slice(b))
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::InvalidPolytope(format!(
                "box bound {i}: lo {} > hi {}",
                lo[i], hi[i]
            )));
        }
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        HPolytope::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.a.row(i).iter().copied().collect()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// Largest constraint violation `max_i (A_i x - b_i)`.
    pub fn violation(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok((0..self.num_constraints())
            .map(|i| self.a.row(i).iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `A x <= b + tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.violation(x)? <= tol)
    }

    /// Whether the two closed polytopes share a point. Touching faces count.
    pub fn intersects(&self, other: &HPolytope) -> Result<bool> {
        self.check_dim(other.dim())?;
        let n = self.dim();
        let mut p = ConicProgram::new();
        let x = p.add_block("x", n);
        let s = p.add_var("s");
        p.objective = LinExpr::var(s);
        // s >= -1 keeps the phase-1 program bounded.
        p.geq0(LinExpr::var(s).plus(1.0));
        for poly in [self, other] {
            for i in 0..poly.num_constraints() {
                let norm = poly.a.row(i).norm();
                let scale = if norm > 1e-12 { 1.0 / norm } else { 1.0 };
                // b_i - A_i x + s >= 0
                let mut e = LinExpr::constant(poly.b[i] * scale).term(s, 1.0);
                for j in 0..n {
                    e.add_term(x.start + j, -poly.a[(i, j)] * scale);
                }
                p.geq0(e);
            }
        }
        let sol = solve_conic(&p)?.require_optimal("testing polytope intersection")?;
        Ok(sol.x[s] <= FEASIBILITY_TOL)
    }

    /// Center and radius of the largest inscribed ball.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        let mut p = ConicProgram::new();
        let x = p.add_block("x", n);
        let r = p.add_var("r");
        p.objective = LinExpr::new().term(r, -1.0);
        p.geq0(LinExpr::var(r));
        for i in 0..self.num_constraints() {
            let mut e = LinExpr::constant(self.b[i]).term(r, -self.a.row(i).norm());
            for j in 0..n {
                e.add_term(x.start + j, -self.a[(i, j)]);
            }
            p.geq0(e);
        }
        let sol = solve_conic(&p)?;
        match sol.status {
            ConicStatus::Optimal => {}
            ConicStatus::Infeasible => return Err(Error::InfeasiblePolytope),
            ConicStatus::Unbounded => {
                return Err(Error::UnboundedRegion("inscribed ball is unbounded".into()))
            }
            ConicStatus::NumericalFailure => {
                sol.require_optimal("computing Chebyshev center")?;
                unreachable!()
            }
        }
        let center = DVector::from_iterator(n, x.map(|i| sol.x[i]));
        Ok((center, sol.x[r].max(0.0)))
    }

    /// Whether the polytope is bounded. Empty polytopes count as bounded.
    pub fn is_bounded(&self) -> Result<bool> {
        let n = self.dim();
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut p = ConicProgram::new();
                let x = p.add_block("x", n);
                p.objective = LinExpr::new().term(x.start + j, sign);
                for i in 0..self.num_constraints() {
                    let mut e = LinExpr::constant(self.b[i]);
                    for k in 0..n {
                        e.add_term(x.start + k, -self.a[(i, k)]);
                    }
                    p.geq0(e);
                }
                match solve_conic(&p)?.status {
                    ConicStatus::Unbounded => return Ok(false),
                    ConicStatus::Infeasible => return Ok(true),
                    ConicStatus::Optimal => {}
                    ConicStatus::NumericalFailure => {
                        solve_conic(&p)?.require_optimal("checking boundedness")?;
                    }
                }
            }
        }
        Ok(true)
    }

    /// Vertices of a bounded planar polytope in counterclockwise order.
    pub fn vertices_2d(&self) -> Result<Vec<[f64; 2]>> {
        self.check_dim(2)?;
        let m = self.num_constraints();
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let (a1, b1, c1) = (self.a[(i, 0)], self.a[(i, 1)], self.b[i]);
                let (a2, b2, c2) = (self.a[(j, 0)], self.a[(j, 1)], self.b[j]);
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = [(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det];
                if self.contains(&p, 1e-9)?
                    && !pts.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-9)
                {
                    pts.push(p);
                }
            }
        }
        if pts.is_empty() {
            return Ok(pts);
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| {
            let ap = (p[1] - cy).atan2(p[0] - cx);
            let aq = (q[1] - cy).atan2(q[0] - cx);
            ap.total_cmp(&aq)
        });
        Ok(pts)
    }
}

/// A region of the workspace and the atomic propositions true inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRegion {
    pub name: String,
    pub label: LabelSet,
    pub polytope: HPolytope,
}

impl LabeledRegion {
    pub fn new(name: impl Into<String>, label: LabelSet, polytope: HPolytope) -> Self {
        LabeledRegion {
            name: name.into(),
            label,
            polytope,
        }
    }
}

/// Serialized form of a polytope, either explicit rows or box sugar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolytopeSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    HRep { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl PolytopeSpec {
    pub fn build(&self) -> Result<HPolytope> {
        match self {
            PolytopeSpec::Box { lo, hi } => HPolytope::from_box(lo, hi),
            PolytopeSpec::HRep { a, b } => HPolytope::from_rows(a, b),
        }
    }

    pub fn from_polytope(p: &HPolytope) -> Self {
        PolytopeSpec::HRep {
            a: (0..p.num_constraints()).map(|i| p.row(i)).collect(),
            b: p.b.iter().copied().collect(),
        }
    }
}
