//! Scenario files (schema `v1`) and plan files.
//!
//! A scenario is a JSON object:
//!
//! ```json
//! {
//!   "version": "v1",
//!   "name": "reach",
//!   "dimension": 2,
//!   "atoms": ["a"],
//!   "regions": [
//!     {"name": "start", "label": [], "lo": [0, 0], "hi": [1, 1]},
//!     {"name": "goal", "label": ["a"], "a": [[-1, 0], [1, 0], [0, -1], [0, 1]], "b": [-1, 2, 0, 1]}
//!   ],
//!   "start": [0.5, 0.5],
//!   "formula": "F a",
//!   "options": {"order": 3, "smoothness": 1, "norm": "l2", "seed": 0, "max_round_paths": 10}
//! }
//! ```
//!
//! `atoms` is optional; without it the atoms are those used by region labels.
//! Every atom in the formula must be known, otherwise loading fails with the
//! byte offset of the offending atom in the formula text.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcs::{CostSpec, DerivativePenalty, Norm};
use crate::geometry::{LabeledRegion, PolytopeSpec};
use crate::ltl::{parse, Formula};
use crate::planner::{Plan, PlanRequest};
use crate::solver::RoundingOptions;

pub const SCENARIO_VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    #[serde(default)]
    pub label: Vec<String>,
    #[serde(flatten)]
    pub polytope: PolytopeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_smoothness")]
    pub smoothness: usize,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub derivative_penalties: Vec<DerivativePenalty>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_round_paths")]
    pub max_round_paths: usize,
    #[serde(default)]
    pub strict_def5: bool,
}

fn default_order() -> usize {
    4
}

fn default_smoothness() -> usize {
    2
}

fn default_round_paths() -> usize {
    10
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            order: default_order(),
            smoothness: default_smoothness(),
            norm: Norm::default(),
            derivative_penalties: Vec::new(),
            seed: 0,
            max_round_paths: default_round_paths(),
            strict_def5: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: String,
    pub name: String,
    /// Free text; shipped scenarios say where their coordinates come from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    pub regions: Vec<RegionSpec>,
    pub start: Vec<f64>,
    pub formula: String,
    #[serde(default)]
    pub options: ScenarioOptions,
}

/// A loaded and checked scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub formula: Formula,
    pub regions: Vec<LabeledRegion>,
}

fn scenario_err(message: impl Into<String>, offset: Option<usize>) -> Error {
    Error::Scenario {
        message: message.into(),
        offset,
    }
}

/// Byte offset of the first occurrence of atom `name` as a whole token.
fn atom_offset(text: &str, name: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let mut i = 0;
    while i < bytes.len() {
        if is_ident(bytes[i]) {
            let start = i;
            while i < bytes.len() && is_ident(bytes[i]) {
                i += 1;
            }
            if &text[start..i] == name {
                return Some(start);
            }
        } else {
            i += 1;
        }
    }
    None
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let offset = line_col_offset(text, e.line(), e.column());
            scenario_err(format!("malformed scenario JSON: {e}"), offset)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validate and build the planning inputs.
    pub fn build(&self) -> Result<Scenario> {
        if self.version != SCENARIO_VERSION {
            return Err(scenario_err(
                format!(
                    "unsupported scenario version `{}`, expected `{SCENARIO_VERSION}`",
                    self.version
                ),
                None,
            ));
        }
        if self.dimension == 0 {
            return Err(scenario_err("dimension must be positive", None));
        }
        if self.start.len() != self.dimension {
            return Err(scenario_err(
                format!(
                    "start has {} coordinates, dimension is {}",
                    self.start.len(),
                    self.dimension
                ),
                None,
            ));
        }
        if self.regions.is_empty() {
            return Err(scenario_err("scenario has no regions", None));
        }
        let formula = parse(&self.formula)
            .map_err(|e| scenario_err(format!("formula: {e}"), Some(e.offset)))?;

        let label_atoms: BTreeSet<&str> = self
            .regions
            .iter()
            .flat_map(|r| r.label.iter().map(String::as_str))
            .collect();
        let known: BTreeSet<&str> = match &self.atoms {
            Some(list) => {
                if let Some(a) = label_atoms.iter().find(|a| !list.iter().any(|b| b == *a)) {
                    return Err(scenario_err(
                        format!("region label uses undeclared atom `{a}`"),
                        None,
                    ));
                }
                list.iter().map(String::as_str).collect()
            }
            None => label_atoms,
        };
        for a in formula.atoms() {
            if !known.contains(a.as_str()) {
                return Err(scenario_err(
                    format!("formula uses unknown atom `{a}`"),
                    atom_offset(&self.formula, &a),
                ));
            }
        }

        let mut names = BTreeSet::new();
        let mut regions = Vec::with_capacity(self.regions.len());
        for r in &self.regions {
            if !names.insert(r.name.as_str()) {
                return Err(scenario_err(
                    format!("duplicate region name `{}`", r.name),
                    None,
                ));
            }
            let poly = r
                .polytope
                .build()
                .map_err(|e| scenario_err(format!("region `{}`: {e}", r.name), None))?;
            if poly.dim() != self.dimension {
                return Err(scenario_err(
                    format!(
                        "region `{}` has dimension {}, expected {}",
                        r.name,
                        poly.dim(),
                        self.dimension
                    ),
                    None,
                ));
            }
            regions.push(LabeledRegion::new(
                r.name.clone(),
                r.label.iter().cloned().collect(),
                poly,
            ));
        }
        Ok(Scenario {
            file: self.clone(),
            formula,
            regions,
        })
    }
}

fn line_col_offset(text: &str, line: usize, column: usize) -> Option<usize> {
    if line == 0 {
        return None;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return Some(offset + column.saturating_sub(1).min(l.len()));
        }
        offset += l.len();
    }
    Some(text.len())
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ScenarioFile::load(path)?.build()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ScenarioFile::from_json(text)?.build()
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn request(&self) -> PlanRequest {
        let o = &self.file.options;
        PlanRequest {
            formula: self.formula.clone(),
            regions: self.regions.clone(),
            q0: self.file.start.clone(),
            order: o.order,
            smoothness: o.smoothness,
            cost: CostSpec {
                norm: o.norm,
                derivative_penalties: o.derivative_penalties.clone(),
            },
            rounding: RoundingOptions {
                max_paths: o.max_round_paths,
                seed: o.seed,
                ..RoundingOptions::default()
            },
            strict_def5: o.strict_def5,
        }
    }
}

/// Plan export: the plan plus enough context to check it again later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub version: String,
    pub scenario: String,
    pub formula: String,
    #[serde(flatten)]
    pub plan: Plan,
}

impl PlanFile {
    pub fn new(scenario: &Scenario, plan: Plan) -> Self {
        PlanFile {
            version: SCENARIO_VERSION.into(),
            scenario: scenario.name().into(),
            formula: scenario.formula.to_string(),
            plan,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
