//! WebAssembly bindings for the browser demo: the desk scenario under any controller mode,
//! the second-order lemma trace, and the desk constraint census.
//!
//! The plain functions return `Result<_, String>` so they run and test natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use vfikit::sim::{self, load_scenario, RunMode, RunOptions, Scenario, Simulator};
use vfikit::vfi::{lemma_oracle, Direction};
use wasm_bindgen::prelude::*;

pub const DESK_SCENARIO: &str = include_str!("../../core/scenarios/desk_cup.toml");

/// Longest run the page may request.
pub const MAX_STEPS: usize = 20_000;

fn desk() -> Result<Scenario, String> {
    load_scenario(DESK_SCENARIO).map_err(|e| e.to_string())
}

/// Per-step series of one run.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    t: Vec<f64>,
    task_error: Vec<f64>,
    phi: Vec<f64>,
    worst: Vec<f64>,
    collisions: usize,
    non_optimal: usize,
}

#[wasm_bindgen]
impl Series {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(js_name = taskError)]
    pub fn task_error(&self) -> Vec<f64> {
        self.task_error.clone()
    }

    /// Cup tilt angle (rad).
    pub fn phi(&self) -> Vec<f64> {
        self.phi.clone()
    }

    /// Smallest signed constraint error per step; negative means some row is breached.
    pub fn worst(&self) -> Vec<f64> {
        self.worst.clone()
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    #[wasm_bindgen(js_name = nonOptimal)]
    pub fn non_optimal(&self) -> usize {
        self.non_optimal
    }
}

/// Runs the desk scenario. `disabled` is a comma-separated list of constraint names.
pub fn simulate(mode: &str, disabled: &str, steps: usize) -> Result<Series, String> {
    let scenario = desk()?;
    let mode: RunMode = mode.parse()?;
    let options = RunOptions {
        steps: Some(steps.min(MAX_STEPS)),
        disable: disabled
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
    };
    let out = sim::run_with(&scenario, mode, &options).map_err(|e| e.to_string())?;
    let log = &out.log;
    let worst = log
        .records
        .iter()
        .map(|r| {
            r.constraints
                .iter()
                .zip(&log.directions)
                .map(|(e, d)| if *d == Direction::KeepOut { *e } else { -e })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(Series {
        t: log.records.iter().map(|r| r.t).collect(),
        task_error: log.records.iter().map(|r| r.task_error).collect(),
        phi: log
            .records
            .iter()
            .map(|r| r.phi.first().copied().unwrap_or(f64::NAN))
            .collect(),
        worst,
        collisions: out.collisions.len(),
        non_optimal: log.non_optimal_steps(),
    })
}

/// Constraint rows of the desk scenario, one tag per line.
pub fn census() -> Result<String, String> {
    let scenario = desk()?;
    let sim = Simulator::new(&scenario, "cqp-velocity".parse()?, &[]).map_err(|e| e.to_string())?;
    Ok(sim.empty_log().constraint_tags.join("\n"))
}

/// Closed-form distance under a saturated second-order row.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCurve {
    t: Vec<f64>,
    distance: Vec<f64>,
    r1: f64,
    r2: f64,
    min_distance: f64,
}

#[wasm_bindgen]
impl LemmaCurve {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    pub fn distance(&self) -> Vec<f64> {
        self.distance.clone()
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    #[wasm_bindgen(js_name = minDistance)]
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }
}

/// Errors carry the violated hypothesis.
pub fn lemma(eta1: f64, eta2: f64, d0: f64, ddot0: f64, horizon: f64) -> Result<LemmaCurve, String> {
    let dt = (horizon / 500.0).max(1e-3);
    let trace = lemma_oracle(eta1, eta2, d0, ddot0, horizon, dt).map_err(|e| e.to_string())?;
    Ok(LemmaCurve {
        t: trace.times.clone(),
        distance: trace.times.iter().map(|&t| trace.distance_at(t)).collect(),
        r1: trace.r1,
        r2: trace.r2,
        min_distance: trace.min_distance,
    })
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(mode: &str, disabled: &str, steps: usize) -> Result<Series, JsError> {
    simulate(mode, disabled, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = census)]
pub fn census_js() -> Result<String, JsError> {
    census().map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = lemma)]
pub fn lemma_js(eta1: f64, eta2: f64, d0: f64, ddot0: f64, horizon: f64) -> Result<LemmaCurve, JsError> {
    lemma(eta1, eta2, d0, ddot0, horizon).map_err(|e| JsError::new(&e))
}
