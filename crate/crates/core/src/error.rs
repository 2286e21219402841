use thiserror::Error;

use crate::ltl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("formula is not syntactically co-safe: {0}")]
    NotCoSafe(String),

    #[error(
        "formula `{formula}` is not supported by the deterministic Buchi construction: {reason}"
    )]
    UnsupportedFormula { formula: String, reason: String },

    #[error(
        "a finite word without a lasso cannot be checked against the non co-safe formula `{0}`"
    )]
    LassoRequired(String),

    #[error("letter {0:?} is outside the automaton alphabet")]
    UnknownLetter(Vec<String>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("polytope is infeasible")]
    InfeasiblePolytope,

    #[error("region `{0}` is unbounded")]
    UnboundedRegion(String),

    #[error("conic backend failed while {context}: {status} ({diagnostics})")]
    Backend {
        context: String,
        status: String,
        diagnostics: String,
    },

    #[error("start configuration lies in no region")]
    NoInitialRegion,

    #[error("product graph has no source-to-target path: {0}")]
    UnsatisfiableInProduct(String),

    #[error("no feasible path found after {attempts} rounding attempts ({failures} failures)")]
    NoPathFound { attempts: usize, failures: usize },

    #[error("no loop found: every accepting product vertex was exhausted")]
    NoLoopFound,

    #[error("simple path enumeration exceeded the budget of {0} paths")]
    PathBudgetExceeded(usize),

    #[error("fixed-path restriction is infeasible: {0}")]
    RestrictionInfeasible(String),

    #[error("plan failed verification: {0}")]
    VerificationFailed(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("scenario error: {message}")]
    Scenario {
        message: String,
        offset: Option<usize>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::NotCoSafe(_) => "not_cosafe",
            Error::UnsupportedFormula { .. } => "unsupported_formula",
            Error::LassoRequired(_) => "lasso_required",
            Error::UnknownLetter(_) => "unknown_letter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidPolytope(_) => "invalid_polytope",
            Error::InfeasiblePolytope => "infeasible_polytope",
            Error::UnboundedRegion(_) => "unbounded_region",
            Error::Backend { .. } => "backend",
            Error::NoInitialRegion => "no_initial_region",
            Error::UnsatisfiableInProduct(_) => "unsatisfiable_in_product",
            Error::NoPathFound { .. } => "no_path_found",
            Error::NoLoopFound => "no_loop_found",
            Error::PathBudgetExceeded(_) => "path_budget_exceeded",
            Error::RestrictionInfeasible(_) => "restriction_infeasible",
            Error::VerificationFailed(_) => "verification_failed",
            Error::InvalidRequest(_) => "invalid_request",
            Error::Scenario { .. } => "scenario",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Byte offset into the formula or scenario text, when known.
    pub fn offset(&self) -> Option<usize> {
        match self {
            Error::Parse(e) => Some(e.offset),
            Error::Scenario { offset, .. } => *offset,
            _ => None,
        }
    }
}
