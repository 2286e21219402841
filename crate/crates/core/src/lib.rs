//! Temporal-logic motion planning on graphs of convex sets.
//!
//! A task is an LTL formula over region labels. Co-safe formulas compile to
//! a DFA, a deterministic fragment of full LTL compiles to a Buchi
//! automaton. The automaton is multiplied with the region adjacency graph,
//! the resulting graph of convex sets is solved through a perspective
//! relaxation plus randomized rounding, and the answer is a Bezier spline
//! whose trace satisfies the formula.

pub mod automata;
pub mod bezier;
pub mod conic;
pub mod error;
pub mod gcs;
pub mod geometry;
pub mod harness;
pub mod ltl;
pub mod planner;
pub mod scenario;
pub mod solver;
pub mod svg;
pub mod ts;

pub use automata::{ltl_to_dba, ltlf_to_dfa, Automaton, AutomatonKind};
pub use bezier::{BezierCurve, BezierSpline, Segment};
pub use error::{Error, Result};
pub use gcs::{product, CostSpec, Gcs, Norm, ProductOptions};
pub use geometry::{HPolytope, LabeledRegion};
pub use ltl::{check_word, parse, to_nnf, Formula, LabelSet, Word};
pub use planner::{plan, plan_cosafe, plan_full, verify, Plan, PlanRequest, Timing, Verification};
pub use scenario::{PlanFile, Scenario, ScenarioFile};
pub use solver::RoundingOptions;
pub use ts::{build_ts, TransitionSystem};
