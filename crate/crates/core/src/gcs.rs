//! Graphs of convex sets built from a transition system and an automaton.
//!
//! Each region vertex carries the `k + 1` control points of one Bezier
//! segment, constrained to lie in the vertex's region. Edges carry the
//! continuity conditions between consecutive segments and the cost of the
//! tail segment. The virtual source and target carry no variables.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::automata::{format_letter, Automaton, AutomatonKind};
use crate::error::{Error, Result};
use crate::geometry::LabeledRegion;
use crate::ltl::LabelSet;
use crate::ts::TransitionSystem;

/// Tolerance for constant edge constraints between two pinned vertices.
pub const PIN_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativePenalty {
    pub order: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub derivative_penalties: Vec<DerivativePenalty>,
}

/// `weight * ||M x||` where row `j` of `M` is `rows[j]`, a sparse linear
/// form over the flattened control points of one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct NormTerm {
    pub weight: f64,
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Cost of one segment as a weighted sum of norms of linear maps.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTemplate {
    pub norm: Norm,
    pub terms: Vec<NormTerm>,
}

impl CostTemplate {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let vals = t
                    .rows
                    .iter()
                    .map(|row| row.iter().map(|&(i, c)| c * x[i]).sum::<f64>());
                let norm = match self.norm {
                    Norm::L2 => vals.map(|v| v * v).sum::<f64>().sqrt(),
                    Norm::L1 => vals.map(f64::abs).sum::<f64>(),
                };
                t.weight * norm
            })
            .sum()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of the `i`-th control point of the `r`-th derivative in
/// terms of the original control points: `(point index, coefficient)`.
pub fn derivative_point(k: usize, r: usize, i: usize) -> Vec<(usize, f64)> {
    let falling: f64 = (0..r).map(|j| (k - j) as f64).product();
    (0..=r)
        .map(|j| {
            let sign = if (r - j) % 2 == 0 { 1.0 } else { -1.0 };
            (i + j, falling * sign * binomial(r, j))
        })
        .collect()
}

/// Per-segment cost: the length of the control polygon under `cost.norm`,
/// plus for each derivative penalty the weighted length of the control
/// polygon of that derivative.
pub fn edge_cost(cost: &CostSpec, k: usize, n: usize, d: usize) -> Result<CostTemplate> {
    let mut terms = Vec::new();
    let mut polygon = |r: usize, weight: f64| {
        if r > k {
            return;
        }
        for i in 0..k - r {
            let lo = derivative_point(k, r, i);
            let hi = derivative_point(k, r, i + 1);
            let rows = (0..n)
                .map(|j| {
                    let mut row: Vec<(usize, f64)> =
                        hi.iter().map(|&(p, c)| (p * n + j, c)).collect();
                    row.extend(lo.iter().map(|&(p, c)| (p * n + j, -c)));
                    merge(row)
                })
                .collect();
            terms.push(NormTerm { weight, rows });
        }
    };
    polygon(0, 1.0);
    for p in &cost.derivative_penalties {
        if p.order > d {
            return Err(Error::InvalidRequest(format!(
                "derivative penalty of order {} exceeds smoothness {d}",
                p.order
            )));
        }
        if p.order == 0 || !(p.weight >= 0.0) || !p.weight.is_finite() {
            return Err(Error::InvalidRequest(format!(
                "derivative penalty needs order >= 1 and a finite nonnegative weight, got order {} weight {}",
                p.order, p.weight
            )));
        }
        polygon(p.order, p.weight);
    }
    Ok(CostTemplate {
        norm: cost.norm,
        terms,
    })
}

fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (i, c) in row {
        match out.last_mut() {
            Some((j, d)) if *j == i => *d += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Source,
    Target,
    Product,
    /// Copy of an accepting vertex that starts a loop.
    LoopSource,
    /// Copy of the same vertex that closes the loop.
    LoopSink,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    /// Stable product vertex id; copies share the id of their original.
    pub id: usize,
    pub kind: VertexKind,
    pub region: Option<usize>,
    pub state: Option<usize>,
    /// Fixed values of all control points, flattened point-major.
    pub pin: Option<Vec<f64>>,
}

impl Vertex {
    pub fn has_variables(&self) -> bool {
        self.region.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Force every control point of the tail segment to coincide.
    pub stationary_tail: bool,
}

/// `sum tail[i] * x_u[i] + sum head[i] * x_v[i] = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConstraint {
    pub tail: Vec<(usize, f64)>,
    pub head: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProductOptions {
    pub order: usize,
    pub smoothness: usize,
    pub cost: CostSpec,
    /// Target edges leave vertices whose own state is accepting, instead of
    /// vertices whose successor state is accepting.
    pub strict_def5: bool,
}

#[derive(Clone, Debug)]
pub struct Gcs {
    pub dim: usize,
    pub order: usize,
    pub smoothness: usize,
    pub q0: Vec<f64>,
    pub regions: Arc<Vec<LabeledRegion>>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub source: usize,
    pub target: usize,
    pub cost: CostTemplate,
    /// Whether the product relation has `v -> v`. Such pairs are not GCS
    /// edges but matter when closing loops.
    pub self_loop: Vec<bool>,
    pub kind: AutomatonKind,
}

impl Gcs {
    pub fn num_points(&self) -> usize {
        self.order + 1
    }

    /// Number of scalar variables of a region vertex.
    pub fn block_len(&self) -> usize {
        self.dim * (self.order + 1)
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.from == v)
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.to == v)
    }

    /// Adjacency lists of edge indices.
    pub fn out_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        out
    }

    pub fn label(&self, v: usize) -> Option<&LabelSet> {
        self.vertices[v].region.map(|r| &self.regions[r].label)
    }

    pub fn region_name(&self, v: usize) -> Option<&str> {
        self.vertices[v]
            .region
            .map(|r| self.regions[r].name.as_str())
    }

    /// Linear equalities attached to an edge.
    pub fn edge_constraints(&self, e: &Edge) -> Vec<EdgeConstraint> {
        let (u, v) = (&self.vertices[e.from], &self.vertices[e.to]);
        let n = self.dim;
        let k = self.order;
        let mut rows = Vec::new();
        if u.kind == VertexKind::Source {
            if v.has_variables() {
                for j in 0..n {
                    rows.push(EdgeConstraint {
                        tail: Vec::new(),
                        head: vec![(j, 1.0)],
                        rhs: self.q0[j],
                    });
                }
            }
            return rows;
        }
        if e.stationary_tail && u.has_variables() {
            for p in 1..=k {
                for j in 0..n {
                    rows.push(EdgeConstraint {
                        tail: vec![(p * n + j, 1.0), (j, -1.0)],
                        head: Vec::new(),
                        rhs: 0.0,
                    });
                }
            }
        }
        if !(u.has_variables() && v.has_variables()) {
            return rows;
        }
        // Derivative r at the end of u equals derivative r at the start of v.
        for r in 0..=self.smoothness.min(k) {
            let end = derivative_point(k, r, k - r);
            let start = derivative_point(k, r, 0);
            for j in 0..n {
                rows.push(EdgeConstraint {
                    tail: end.iter().map(|&(p, c)| (p * n + j, c)).collect(),
                    head: start.iter().map(|&(p, c)| (p * n + j, -c)).collect(),
                    rhs: 0.0,
                });
            }
        }
        rows
    }

    /// Whether the constraints of an edge between two pinned vertices hold.
    fn pinned_edge_ok(&self, e: &Edge) -> bool {
        let (Some(xu), Some(xv)) = (&self.vertices[e.from].pin, &self.vertices[e.to].pin) else {
            return true;
        };
        self.edge_constraints(e).iter().all(|row| {
            let lhs: f64 = row.tail.iter().map(|&(i, c)| c * xu[i]).sum::<f64>()
                + row.head.iter().map(|&(i, c)| c * xv[i]).sum::<f64>();
            (lhs - row.rhs).abs() <= PIN_TOL
        })
    }

    /// Keep only vertices on some source-target path. Fails if there is none.
    pub fn prune(&self) -> Result<Gcs> {
        let nv = self.vertices.len();
        let mut fwd = vec![Vec::new(); nv];
        let mut bwd = vec![Vec::new(); nv];
        for e in &self.edges {
            fwd[e.from].push(e.to);
            bwd[e.to].push(e.from);
        }
        let reach = |start: usize, adj: &[Vec<usize>]| {
            let mut seen = vec![false; nv];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            seen
        };
        let from_source = reach(self.source, &fwd);
        let to_target = reach(self.target, &bwd);
        if !from_source[self.target] {
            return Err(Error::UnsatisfiableInProduct(
                "no path in the product graph reaches an accepting vertex".into(),
            ));
        }
        let keep: Vec<bool> = (0..nv).map(|v| from_source[v] && to_target[v]).collect();
        let mut index = vec![usize::MAX; nv];
        let mut vertices = Vec::new();
        let mut self_loop = Vec::new();
        for v in 0..nv {
            if keep[v] {
                index[v] = vertices.len();
                vertices.push(self.vertices[v].clone());
                self_loop.push(self.self_loop[v]);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.from] && keep[e.to])
            .map(|e| Edge {
                from: index[e.from],
                to: index[e.to],
                stationary_tail: e.stationary_tail,
            })
            .collect();
        Ok(Gcs {
            vertices,
            edges,
            source: index[self.source],
            target: index[self.target],
            self_loop,
            ..self.clone_shell()
        })
    }

    fn clone_shell(&self) -> Gcs {
        Gcs {
            dim: self.dim,
            order: self.order,
            smoothness: self.smoothness,
            q0: self.q0.clone(),
            regions: Arc::clone(&self.regions),
            vertices: Vec::new(),
            edges: Vec::new(),
            source: 0,
            target: 0,
            cost: self.cost.clone(),
            self_loop: Vec::new(),
            kind: self.kind,
        }
    }

    /// The same graph without vertex `v`, pruned.
    pub fn without_vertex(&self, v: usize) -> Result<Gcs> {
        if v == self.source || v == self.target {
            return Err(Error::InvalidRequest(
                "cannot remove the source or target".into(),
            ));
        }
        let mut g = self.clone();
        g.edges.retain(|e| e.from != v && e.to != v);
        g.prune()
    }

    /// Loop problem for accepting vertex `vf` whose segment is fixed to `pin`:
    /// paths from a pinned copy of `vf` through other product vertices back
    /// into a second pinned copy. The original `vf` itself is left out.
    pub fn loop_graph(&self, vf: usize, pin: Vec<f64>) -> Result<Gcs> {
        let orig = &self.vertices[vf];
        if orig.kind != VertexKind::Product {
            return Err(Error::InvalidRequest(
                "loops start at product vertices".into(),
            ));
        }
        if pin.len() != self.block_len() {
            return Err(Error::DimensionMismatch {
                expected: self.block_len(),
                found: pin.len(),
            });
        }
        let mut g = self.clone_shell();
        let mut index = vec![usize::MAX; self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if v.kind == VertexKind::Product && i != vf {
                index[i] = g.vertices.len();
                g.vertices.push(v.clone());
                g.self_loop.push(self.self_loop[i]);
            }
        }
        let copy = |kind| Vertex {
            kind,
            pin: Some(pin.clone()),
            ..orig.clone()
        };
        g.source = g.vertices.len();
        g.vertices.push(copy(VertexKind::LoopSource));
        g.self_loop.push(false);
        g.target = g.vertices.len();
        g.vertices.push(copy(VertexKind::LoopSink));
        g.self_loop.push(false);

        let plain = |from, to| Edge {
            from,
            to,
            stationary_tail: false,
        };
        for e in &self.edges {
            let (a, b) = (e.from, e.to);
            if a == vf && index[b] != usize::MAX {
                g.edges.push(plain(g.source, index[b]));
            } else if b == vf && index[a] != usize::MAX {
                g.edges.push(plain(index[a], g.target));
            } else if index[a] != usize::MAX && index[b] != usize::MAX {
                g.edges.push(plain(index[a], index[b]));
            }
        }
        if self.self_loop[vf] {
            let direct = plain(g.source, g.target);
            if g.pinned_edge_ok(&direct) {
                g.edges.push(direct);
            }
        }
        g.prune().map_err(|_| Error::NoLoopFound)
    }

    pub fn to_dot(&self, automaton_labels: Option<&[String]>) -> String {
        let mut out = String::from("digraph gcs {\n  rankdir=LR;\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let label = match (v.kind, v.region, v.state) {
                (VertexKind::Source, ..) => "source".to_string(),
                (VertexKind::Target, ..) => "target".to_string(),
                (kind, Some(r), Some(q)) => {
                    let qname = automaton_labels
                        .and_then(|l| l.get(q))
                        .map(|s| format!(" {s}"))
                        .unwrap_or_default();
                    let tag = match kind {
                        VertexKind::LoopSource => " (loop start)",
                        VertexKind::LoopSink => " (loop end)",
                        _ => "",
                    };
                    format!(
                        "{} {}\\nq{q}{qname}{tag}",
                        self.regions[r].name,
                        format_letter(&self.regions[r].label)
                    )
                }
                _ => format!("v{i}"),
            };
            let _ = writeln!(out, "  v{i} [label=\"{}\"];", label.replace('"', "'"));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  v{} -> v{};", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

/// Product of the abstraction and the automaton as a graph of convex sets.
///
/// Vertex `(s, q)` holds the segment spent in region `s` while the
/// automaton, before reading `L(s)`, is in state `q`. Edges follow
/// `s -> s'` with `q' = delta(q, L(s))`. For a DFA the target is entered
/// once `delta(q, L(s))` accepts (or `q` accepts in strict mode); for a DBA
/// once `q` accepts, and in that case target edges out of vertices with a
/// product self-loop force a stationary final segment so that a trivial
/// loop can close on it.
pub fn product(
    ts: &TransitionSystem,
    aut: &Automaton,
    opts: &ProductOptions,
    q0: &[f64],
) -> Result<Gcs> {
    let k = opts.order;
    let d = opts.smoothness;
    if k < (d + 1).max(1) {
        return Err(Error::InvalidRequest(format!(
            "Bezier order {k} must be at least max(1, smoothness + 1) = {}",
            (d + 1).max(1)
        )));
    }
    let n = q0.len();
    let letters: Vec<usize> = ts
        .regions
        .iter()
        .map(|r| aut.letter_index(&r.label))
        .collect::<Result<_>>()?;

    let mut gcs = Gcs {
        dim: n,
        order: k,
        smoothness: d,
        q0: q0.to_vec(),
        regions: Arc::new(ts.regions.clone()),
        vertices: vec![
            Vertex {
                id: usize::MAX,
                kind: VertexKind::Source,
                region: None,
                state: None,
                pin: None,
            },
            Vertex {
                id: usize::MAX - 1,
                kind: VertexKind::Target,
                region: None,
                state: None,
                pin: None,
            },
        ],
        edges: Vec::new(),
        source: 0,
        target: 1,
        cost: edge_cost(&opts.cost, k, n, d)?,
        self_loop: vec![false, false],
        kind: aut.kind,
    };

    let mut index: std::collections::HashMap<(usize, usize), usize> = Default::default();
    let mut queue = VecDeque::new();
    let mut add = |gcs: &mut Gcs, queue: &mut VecDeque<usize>, s: usize, q: usize| -> usize {
        *index.entry((s, q)).or_insert_with(|| {
            let v = gcs.vertices.len();
            gcs.vertices.push(Vertex {
                id: v - 2,
                kind: VertexKind::Product,
                region: Some(s),
                state: Some(q),
                pin: None,
            });
            gcs.self_loop.push(false);
            queue.push_back(v);
            v
        })
    };
    for &s0 in &ts.initial {
        let v = add(&mut gcs, &mut queue, s0, aut.initial);
        gcs.edges.push(Edge {
            from: gcs.source,
            to: v,
            stationary_tail: false,
        });
    }
    while let Some(v) = queue.pop_front() {
        let (s, q) = (
            gcs.vertices[v].region.unwrap(),
            gcs.vertices[v].state.unwrap(),
        );
        let q_next = aut.transitions[q][letters[s]];
        for &s2 in &ts.adjacency[s] {
            let w = add(&mut gcs, &mut queue, s2, q_next);
            if w == v {
                gcs.self_loop[v] = true;
            } else {
                gcs.edges.push(Edge {
                    from: v,
                    to: w,
                    stationary_tail: false,
                });
            }
        }
    }
    for v in 2..gcs.vertices.len() {
        let (s, q) = (
            gcs.vertices[v].region.unwrap(),
            gcs.vertices[v].state.unwrap(),
        );
        let accepting = match aut.kind {
            AutomatonKind::Dfa if !opts.strict_def5 => {
                aut.accepting[aut.transitions[q][letters[s]]]
            }
            _ => aut.accepting[q],
        };
        if accepting {
            gcs.edges.push(Edge {
                from: v,
                to: gcs.target,
                stationary_tail: aut.kind == AutomatonKind::Dba && gcs.self_loop[v],
            });
        }
    }
    let pruned = gcs.prune()?;
    if opts.cost.norm == Norm::L2 {
        let used: std::collections::BTreeSet<usize> =
            pruned.vertices.iter().filter_map(|v| v.region).collect();
        for r in used {
            if !pruned.regions[r].polytope.is_bounded()? {
                return Err(Error::UnboundedRegion(pruned.regions[r].name.clone()));
            }
        }
    }
    Ok(pruned)
}
