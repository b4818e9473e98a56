//! Run logs and the tables derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scenario::Method;
use crate::error::{domain, Result};

/// One vehicle at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub lane: u32,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: usize,
    pub preferred_lane: u32,
    pub entry_lane: u32,
    pub entry_time: Option<f64>,
    pub exit_time: Option<f64>,
    pub exit_lane: Option<u32>,
    pub formation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Generated {
        t: f64,
        id: usize,
        lane: u32,
        preferred_lane: u32,
    },
    LaneChange {
        t: f64,
        id: usize,
        x: f64,
        from: u32,
        to: u32,
    },
    FormationClosed {
        t: f64,
        formation: usize,
        members: Vec<usize>,
        rows: usize,
    },
    PlanStarted {
        t: f64,
        formation: usize,
        phase: String,
        steps: usize,
        path_cost: usize,
        assignments_examined: usize,
    },
    Exited {
        t: f64,
        id: usize,
        lane: u32,
        travel_time: f64,
    },
    Collision {
        t: f64,
        a: usize,
        b: usize,
        lane: u32,
    },
}

/// Everything a run records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub samples: Vec<Sample>,
    pub vehicles: Vec<VehicleRecord>,
    pub events: Vec<Event>,
    pub collisions: usize,
    /// Vehicles still on the road (or waiting to enter it) at the end.
    pub on_road: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelTime {
    pub id: usize,
    pub entry: f64,
    pub exit: f64,
    pub travel: f64,
    pub preferred_lane: u32,
    pub exit_lane: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub space_bin: usize,
    pub time_bin: usize,
    pub mean_speed: f64,
    pub samples: usize,
}

/// Mean speed per space × time bin. Bins without samples are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub bin_length: f64,
    pub bin_duration: f64,
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    pub fn get(&self, space_bin: usize, time_bin: usize) -> Option<f64> {
        self.cells
            .binary_search_by(|c| (c.space_bin, c.time_bin).cmp(&(space_bin, time_bin)))
            .ok()
            .map(|i| self.cells[i].mean_speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub travel_times: Vec<TravelTime>,
    pub heatmap: Heatmap,
}

pub fn compute_metrics(log: &SimLog, bin_length: f64, bin_duration: f64) -> Result<Metrics> {
    if log.samples.is_empty() && log.vehicles.is_empty() {
        return Err(domain("empty simulation log"));
    }
    if !(bin_length > 0.0 && bin_duration > 0.0) {
        return Err(domain("heatmap bins must be positive"));
    }
    let travel_times = log
        .vehicles
        .iter()
        .filter_map(|v| {
            let (entry, exit) = (v.entry_time?, v.exit_time?);
            Some(TravelTime {
                id: v.id,
                entry,
                exit,
                travel: exit - entry,
                preferred_lane: v.preferred_lane,
                exit_lane: v.exit_lane?,
            })
        })
        .collect();

    let mut bins: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for s in &log.samples {
        if s.x < 0.0 || s.t < 0.0 {
            continue;
        }
        let key = ((s.x / bin_length) as usize, (s.t / bin_duration) as usize);
        let e = bins.entry(key).or_insert((0.0, 0));
        e.0 += s.speed;
        e.1 += 1;
    }
    let cells = bins
        .into_iter()
        .map(|((space_bin, time_bin), (sum, n))| HeatCell {
            space_bin,
            time_bin,
            mean_speed: sum / n as f64,
            samples: n,
        })
        .collect();
    Ok(Metrics {
        travel_times,
        heatmap: Heatmap {
            bin_length,
            bin_duration,
            cells,
        },
    })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Nearest-rank percentile of unsorted data, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn travel_times_csv(rows: &[TravelTime], method: Method) -> String {
    let mut out =
        String::from("vehicle_id,entry_s,exit_s,travel_s,preferred_lane,exit_lane,method\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{},{},{}",
            r.id,
            r.entry,
            r.exit,
            r.travel,
            r.preferred_lane,
            r.exit_lane,
            method.short_name()
        );
    }
    out
}

pub fn heatmap_csv(h: &Heatmap) -> String {
    let mut out =
        String::from("space_bin,space_start_m,time_bin,time_start_s,mean_speed_mps,sample_count\n");
    for c in &h.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{}",
            c.space_bin,
            c.space_bin as f64 * h.bin_length,
            c.time_bin,
            c.time_bin as f64 * h.bin_duration,
            c.mean_speed,
            c.samples
        );
    }
    out
}

pub fn events_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}
