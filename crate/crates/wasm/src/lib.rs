//! Browser entry points. Every call takes plain values and returns a JSON
//! string; the page parses it.

use formation_core::instance::parse_instance;
use formation_core::sim::{run_simulation, theoretical_capacity, Method, Scenario};
use formation_core::tappa_solve;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct LogRow {
    assignment: Vec<usize>,
    assignment_cost: f64,
    path_cost: Option<usize>,
}

#[derive(Serialize)]
struct PlanReport {
    lanes: u32,
    slots: u32,
    log: Vec<LogRow>,
    termination_cost: Option<f64>,
    best_cost: usize,
    best_assignment: Vec<usize>,
    /// `[vehicle][time] = [x, y]`
    paths: Vec<Vec<[i32; 2]>>,
    preferences: Vec<u32>,
    nodes_generated: usize,
}

#[derive(Serialize)]
struct SimReport {
    method: &'static str,
    generated: usize,
    exited: usize,
    on_road: usize,
    collisions: usize,
    mean_travel_s: Option<f64>,
    wrong_lane_exits: usize,
    space_bins: usize,
    time_bins: usize,
    bin_length_m: f64,
    bin_duration_s: f64,
    /// `[space][time]` mean speed, m/s; `null` where no vehicle was seen
    heatmap: Vec<Vec<Option<f64>>>,
}

/// Solves an instance file (same text format as the command line tool).
pub fn plan_json(text: &str) -> Result<String, String> {
    let pf = parse_instance(text).map_err(|e| e.to_string())?;
    let res = tappa_solve(&pf.instance, &pf.planner).map_err(|e| e.to_string())?;
    let report = PlanReport {
        lanes: pf.instance.grid.lane_count,
        slots: pf.instance.grid.slot_count,
        log: res
            .log
            .iter()
            .map(|e| LogRow {
                assignment: e.assignment.clone(),
                assignment_cost: e.assignment_cost,
                path_cost: e.path_cost,
            })
            .collect(),
        termination_cost: res.termination_cost,
        best_cost: res.best_cost,
        best_assignment: res.best_assignment.one_based(),
        paths: res
            .best_path_set
            .map()
            .rows()
            .iter()
            .map(|row| row.iter().map(|p| [p.x, p.y]).collect())
            .collect(),
        preferences: pf.instance.vehicle_pref_lanes.clone(),
        nodes_generated: res.best_solution.nodes_generated,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// One run on the default road.
pub fn simulate_json(
    method: &str,
    volume: f64,
    seed: u64,
    duration: f64,
) -> Result<String, String> {
    let method = Method::parse(method).ok_or_else(|| format!("unknown method '{method}'"))?;
    let s = Scenario {
        method,
        volume,
        seed,
        sim_duration: duration,
        ..Default::default()
    };
    let r = run_simulation(&s).map_err(|e| e.to_string())?;
    let h = &r.metrics.heatmap;
    let space_bins = (s.road_length() / h.bin_length).ceil() as usize;
    let time_bins = (s.sim_duration / h.bin_duration).ceil() as usize;
    let report = SimReport {
        method: method.short_name(),
        generated: r.generated(),
        exited: r.exited(),
        on_road: r.log.on_road,
        collisions: r.collision_count,
        mean_travel_s: r.mean_travel_time(),
        wrong_lane_exits: r
            .metrics
            .travel_times
            .iter()
            .filter(|t| t.exit_lane != t.preferred_lane)
            .count(),
        space_bins,
        time_bins,
        bin_length_m: h.bin_length,
        bin_duration_s: h.bin_duration,
        heatmap: (0..space_bins)
            .map(|i| (0..time_bins).map(|j| h.get(i, j)).collect())
            .collect(),
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn plan(text: &str) -> Result<String, JsError> {
    plan_json(text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(method: &str, volume: f64, seed: u32, duration: f64) -> Result<String, JsError> {
    simulate_json(method, volume, u64::from(seed), duration).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn capacity(vf: f64, df: f64) -> f64 {
    theoretical_capacity(vf, df)
}
