//! Browser bindings. Every export takes plain values and returns a JSON
//! string; [`demo`] holds the same operations as ordinary Rust functions.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_js(result: Result<String, String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e))
}

/// Draws one study from a scenario given as JSON and estimates the effect
/// with every strategy.
#[wasm_bindgen(js_name = simulateStudy)]
pub fn simulate_study(scenario_json: &str, seed: u32) -> Result<String, JsError> {
    to_js(demo::simulate_study(scenario_json, u64::from(seed)))
}

/// Summary rows of one of the simulation tables (4 to 8).
#[wasm_bindgen(js_name = runTable)]
pub fn run_table(table: u8, reps: u32, seed: u32) -> Result<String, JsError> {
    to_js(demo::run_table(table, reps as usize, u64::from(seed)))
}

/// Optimal 1:k matching of a `unit_id,treated,<covariates...>` CSV.
#[wasm_bindgen(js_name = matchCovariates)]
pub fn match_covariates(csv_text: &str, k: u32, caliper: bool) -> Result<String, JsError> {
    to_js(demo::match_covariates(csv_text, k as usize, caliper))
}
