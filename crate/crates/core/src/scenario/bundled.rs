//! Reproduction scenarios shipped with the library, one per experiment family.

use super::{parse_scenario, ParsedScenario, ScenarioError};

pub const NAMES: [&str; 6] = [
    "fixed_budget_discovery",
    "dynamic_budget",
    "zero_demand_pull",
    "three_ppo_isa",
    "bandit_vs_fixed_naive",
    "three_bandit_race",
];

pub fn source(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    Some(match name {
        "fixed_budget_discovery" => include_str!("../../scenarios/fixed_budget_discovery.json"),
        "dynamic_budget" => include_str!("../../scenarios/dynamic_budget.json"),
        "zero_demand_pull" => include_str!("../../scenarios/zero_demand_pull.json"),
        "three_ppo_isa" => include_str!("../../scenarios/three_ppo_isa.json"),
        "bandit_vs_fixed_naive" => include_str!("../../scenarios/bandit_vs_fixed_naive.json"),
        "three_bandit_race" => include_str!("../../scenarios/three_bandit_race.json"),
        _ => return None,
    })
}

/// Parses a bundled scenario by name (with or without `.json`).
///
/// # Panics
/// If `name` is not one of [`NAMES`].
pub fn load(name: &str) -> Result<ParsedScenario, ScenarioError> {
    parse_scenario(source(name).unwrap_or_else(|| panic!("no bundled scenario named {name}")))
}
