//! Relative coordinate system (RCS).
//!
//! The RCS moves with the formation at its cruise speed. Positions are
//! discretized by lane laterally and by the safe following gap `d_F`
//! longitudinally, and time is discretized by the switching cycle `T_F`. A
//! vehicle occupies exactly one cell at every time point.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A cell of the relative grid: `x` is the longitudinal slot, `y` the lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelativePoint {
    pub x: i32,
    pub y: i32,
}

impl RelativePoint {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Absolute longitudinal and lateral offsets to `other`.
    pub fn delta(self, other: Self) -> (u32, u32) {
        (self.x.abs_diff(other.x), self.y.abs_diff(other.y))
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for RelativePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl From<(i32, i32)> for RelativePoint {
    fn from((x, y): (i32, i32)) -> Self {
        Self::new(x, y)
    }
}

/// Grid bounds plus the physical scale of one cell and one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lane_count: u32,
    pub slot_count: u32,
    /// Longitudinal cell size in meters.
    pub d_f: f64,
    /// Switching cycle in seconds.
    pub t_f: f64,
    /// Formation cruise speed in m/s.
    pub v_f: f64,
}

impl GridSpec {
    pub fn new(lane_count: u32, slot_count: u32, d_f: f64, t_f: f64, v_f: f64) -> Result<Self> {
        if lane_count == 0 || slot_count == 0 {
            return Err(domain("grid needs at least one lane and one slot"));
        }
        if !(d_f > 0.0) || !(t_f > 0.0) || !(v_f >= 0.0) {
            return Err(domain(format!(
                "grid scale must satisfy d_F > 0, T_F > 0, v_F >= 0 (got {d_f}, {t_f}, {v_f})"
            )));
        }
        Ok(Self {
            lane_count,
            slot_count,
            d_f,
            t_f,
            v_f,
        })
    }

    /// Bounds only, with the default physical scale (15 m, 4 s, 15 m/s).
    pub fn with_bounds(lane_count: u32, slot_count: u32) -> Result<Self> {
        Self::new(lane_count, slot_count, 15.0, 4.0, 15.0)
    }

    /// Default bound for planning a formation: `vehicle_count + lane_count` slots.
    pub fn for_formation(lane_count: u32, vehicle_count: u32) -> Result<Self> {
        Self::with_bounds(lane_count, vehicle_count + lane_count)
    }

    pub fn contains(&self, p: RelativePoint) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as u32) < self.slot_count && (p.y as u32) < self.lane_count
    }

    pub fn check(&self, p: RelativePoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfGrid {
                point: p,
                lanes: self.lane_count,
                slots: self.slot_count,
            })
        }
    }

    pub fn capacity(&self) -> usize {
        self.lane_count as usize * self.slot_count as usize
    }

    pub fn cells(&self) -> impl Iterator<Item = RelativePoint> + '_ {
        (0..self.slot_count as i32)
            .flat_map(move |x| (0..self.lane_count as i32).map(move |y| RelativePoint::new(x, y)))
    }
}

/// Which relative moves are legal within one switching cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum MotionMode {
    /// 4-connected: one longitudinal or one lateral step.
    #[default]
    Mode1,
    /// 8-connected: oblique steps allowed as well.
    Mode2,
}

const MODE1_MOVES: [(i32, i32); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
const MODE2_MOVES: [(i32, i32); 9] = [
    (0, 0),
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl MotionMode {
    /// Offsets reachable in one step, holding position first.
    pub fn moves(self) -> &'static [(i32, i32)] {
        match self {
            MotionMode::Mode1 => &MODE1_MOVES,
            MotionMode::Mode2 => &MODE2_MOVES,
        }
    }

    /// Move rule without any bounds check. Holding is always legal.
    pub fn allows(self, from: RelativePoint, to: RelativePoint) -> bool {
        let (dx, dy) = from.delta(to);
        match self {
            MotionMode::Mode1 => dx + dy <= 1,
            MotionMode::Mode2 => dx <= 1 && dy <= 1,
        }
    }

    /// Lower bound on the number of steps between two cells.
    pub fn distance(self, from: RelativePoint, to: RelativePoint) -> u32 {
        let (dx, dy) = from.delta(to);
        match self {
            MotionMode::Mode1 => dx + dy,
            MotionMode::Mode2 => dx.max(dy),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "1" | "mode1" | "Mode1" => Some(MotionMode::Mode1),
            "2" | "mode2" | "Mode2" => Some(MotionMode::Mode2),
            _ => None,
        }
    }
}

/// Checks whether `to` is reachable from `from` in one step under `mode`.
pub fn validate_move(
    grid: &GridSpec,
    from: RelativePoint,
    to: RelativePoint,
    mode: MotionMode,
) -> Result<bool> {
    grid.check(from)?;
    grid.check(to)?;
    Ok(mode.allows(from, to))
}

/// One vehicle's relative positions at consecutive time points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub vehicle_id: usize,
    pub points: Vec<RelativePoint>,
}

impl Path {
    pub fn new(vehicle_id: usize, points: Vec<RelativePoint>) -> Self {
        Self { vehicle_id, points }
    }

    pub fn start(&self) -> Option<RelativePoint> {
        self.points.first().copied()
    }

    pub fn end(&self) -> Option<RelativePoint> {
        self.points.last().copied()
    }

    /// Position at 0-based time index `t`; a finished vehicle waits at its end.
    pub fn at(&self, t: usize) -> RelativePoint {
        self.points
            .get(t)
            .or_else(|| self.points.last())
            .copied()
            .expect("path has at least one point")
    }

    /// Steps until the final arrival at the end point. Waiting there afterwards is free.
    pub fn cost(&self) -> usize {
        match self.points.last() {
            None => 0,
            Some(goal) => self
                .points
                .iter()
                .rposition(|p| p != goal)
                .map_or(0, |i| i + 1),
        }
    }

    pub fn is_legal(&self, mode: MotionMode) -> bool {
        self.points.windows(2).all(|w| mode.allows(w[0], w[1]))
    }
}

/// Paths of a vehicle group, normalized to a common length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    /// Pads every path with its final point up to the longest length.
    pub fn new(mut paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(domain("path set needs at least one path"));
        }
        if paths.iter().any(|p| p.points.is_empty()) {
            return Err(domain("every path needs at least one point"));
        }
        let len = paths.iter().map(|p| p.points.len()).max().unwrap_or(0);
        for path in &mut paths {
            let last = *path.points.last().expect("checked non-empty");
            path.points.resize(len, last);
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn into_paths(self) -> Vec<Path> {
        self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.paths[0].points.len()
    }

    /// Sum of the per-vehicle costs.
    pub fn cost(&self) -> usize {
        self.paths.iter().map(Path::cost).sum()
    }

    pub fn map(&self) -> RelativePathMap {
        RelativePathMap {
            vehicle_ids: self.paths.iter().map(|p| p.vehicle_id).collect(),
            rows: self.paths.iter().map(|p| p.points.clone()).collect(),
        }
    }
}

/// Vehicles by row, time points by column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativePathMap {
    vehicle_ids: Vec<usize>,
    rows: Vec<Vec<RelativePoint>>,
}

impl RelativePathMap {
    /// Builds a map from raw rows. Rows must be non-empty and of equal length.
    pub fn from_rows(rows: Vec<Vec<RelativePoint>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(domain("path map needs at least one non-empty row"));
        }
        let len = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::SizeMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        Ok(Self {
            vehicle_ids: (0..rows.len()).collect(),
            rows,
        })
    }

    pub fn rows(&self) -> &[Vec<RelativePoint>] {
        &self.rows
    }

    pub fn vehicle_ids(&self) -> &[usize] {
        &self.vehicle_ids
    }

    pub fn vehicle_count(&self) -> usize {
        self.rows.len()
    }

    pub fn step_count(&self) -> usize {
        self.rows[0].len()
    }

    /// Cell of row `vehicle` at 0-based time index `t`.
    pub fn at(&self, vehicle: usize, t: usize) -> RelativePoint {
        self.rows[vehicle][t]
    }

    /// Text table: one row per vehicle (1-based ids), one column per step.
    pub fn render(&self) -> String {
        let mut out = String::from("vehicle");
        for s in 1..=self.step_count() {
            out.push_str(&format!("\tstep {s}"));
        }
        out.push('\n');
        for (id, row) in self.vehicle_ids.iter().zip(&self.rows) {
            out.push_str(&(id + 1).to_string());
            for p in row {
                out.push_str(&format!("\t{p}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Normalizes paths of unequal length into a rectangular map.
pub fn build_path_map(paths: &[Path]) -> Result<RelativePathMap> {
    Ok(PathSet::new(paths.to_vec())?.map())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormationStructure {
    /// Lanes aligned in rows.
    Parallel,
    /// Adjacent lanes offset by one slot.
    Interlaced,
}

impl FormationStructure {
    fn cells(self, lane_count: u32) -> impl Iterator<Item = RelativePoint> {
        let lanes = lane_count as i32;
        (0..).flat_map(move |x: i32| {
            (0..lanes).filter_map(move |y| {
                let keep = match self {
                    FormationStructure::Parallel => true,
                    FormationStructure::Interlaced => (x + y) % 2 == 0,
                };
                keep.then_some(RelativePoint::new(x, y))
            })
        })
    }
}

/// Slots for `vehicle_count` vehicles, nearest slots first, lanes ascending
/// within a slot. Interlaced puts even lanes on even slots and odd lanes on
/// odd slots.
pub fn generate_structure(
    kind: FormationStructure,
    vehicle_count: u32,
    lane_count: u32,
) -> Result<Vec<RelativePoint>> {
    if vehicle_count == 0 || lane_count == 0 {
        return Err(domain("structure needs at least one vehicle and one lane"));
    }
    Ok(kind
        .cells(lane_count)
        .take(vehicle_count as usize)
        .collect())
}

/// Like [`generate_structure`] but rejects layouts that do not fit in `grid`.
pub fn generate_structure_in(
    kind: FormationStructure,
    vehicle_count: u32,
    grid: &GridSpec,
) -> Result<Vec<RelativePoint>> {
    let points = generate_structure(kind, vehicle_count, grid.lane_count)?;
    if let Some(p) = points.iter().find(|p| !grid.contains(**p)) {
        return Err(domain(format!(
            "{vehicle_count} vehicles exceed the grid capacity ({p} falls outside)"
        )));
    }
    Ok(points)
}

/// Projects a relative cell onto the road frame: (longitudinal m, lateral m).
pub fn gcs_project(
    point: RelativePoint,
    anchor_position: f64,
    lane_width: f64,
    grid: &GridSpec,
) -> Result<(f64, f64)> {
    grid.check(point)?;
    Ok((
        anchor_position + point.x as f64 * grid.d_f,
        (point.y as f64 + 0.5) * lane_width,
    ))
}
