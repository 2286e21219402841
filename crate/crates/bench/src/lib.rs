//! Shared fixtures for the criterion benches.

use std::path::PathBuf;

use ltlgcs::Scenario;

/// The shipped scenario directory.
pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Load a shipped scenario by name, e.g. `"key_door_simple"`.
pub fn load(name: &str) -> Scenario {
    Scenario::load(scenario_dir().join(format!("{name}.json")))
        .unwrap_or_else(|e| panic!("scenario {name}: {e}"))
}
