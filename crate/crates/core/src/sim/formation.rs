//! Formation control: arrivals snap onto a lattice of rows moving at v_F,
//! are grouped into formations, interlaced, and lane-sorted by TAPPA once the
//! formation reaches the sorting segment.

use std::f64::consts::PI;

use super::*;
use crate::conflict::Motion;
use crate::error::Error;
use crate::rcs::{
    generate_structure, FormationStructure, GridSpec, MotionMode, RelativePathMap, RelativePoint,
};
use crate::tappa::{tappa_solve, Instance};
use crate::{cbs_solve, Branching, Conflict, ConflictConfig, ConflictKind, PathSet, PlannerConfig};

/// Rows (2·T_F at one row per second) an open formation accepts members from.
const JOIN_WINDOW_ROWS: i64 = 8;
/// Constraint-tree budget for one formation plan.
const NODE_LIMIT: usize = 50_000;
/// Assignments tried before interlacing gives up.
const INTERLACE_ATTEMPTS: usize = 20;

struct Car {
    st: VehicleState,
    /// Lattice row before the formation closes.
    row: i64,
    /// Cell in the formation frame once closed.
    cell: RelativePoint,
    done: bool,
}

struct Plan {
    start: usize,
    /// Per member, cell at each step boundary.
    cells: Vec<Vec<RelativePoint>>,
    /// Per member and step, whether a lane change takes the first half of
    /// the step rather than the second.
    early: Vec<Vec<bool>>,
}

fn step_cells(paths: &PathSet) -> Vec<Vec<RelativePoint>> {
    let map = paths.map();
    (0..map.vehicle_count())
        .map(|i| (0..map.step_count()).map(|s| map.at(i, s)).collect())
        .collect()
}

/// Schedules every lane change into one half of its step: a vehicle leaving
/// a cell that another vehicle enters changes early, one entering a cell
/// that another vehicle leaves changes late.
fn lane_change_windows(cells: &[Vec<RelativePoint>]) -> Vec<Vec<bool>> {
    let steps = cells[0].len();
    let mut early = vec![vec![false; steps]; cells.len()];
    for j in 0..steps.saturating_sub(1) {
        for (i, row) in cells.iter().enumerate() {
            let p = row[j];
            if p.y != row[j + 1].y {
                early[i][j] = cells
                    .iter()
                    .enumerate()
                    .any(|(o, r)| o != i && r[j] != r[j + 1] && r[j + 1] == p);
            }
        }
    }
    early
}

/// A lane change that is followed into its old cell while itself following
/// another vehicle out of its new cell cannot be timed into either half of
/// the step. Reports the three motions of the earliest such chain.
fn unschedulable_lane_change(map: &RelativePathMap) -> Vec<Conflict> {
    let n = map.vehicle_count();
    let record = |vehicle: usize, other: usize, j: usize| Conflict {
        kind: ConflictKind::SpecialEdge1,
        vehicle,
        other,
        step: j + 1,
        motion: Motion::Edge(map.at(vehicle, j), map.at(vehicle, j + 1)),
    };
    for j in 0..map.step_count().saturating_sub(1) {
        for v in 0..n {
            let (p, q) = (map.at(v, j), map.at(v, j + 1));
            if p.y == q.y {
                continue;
            }
            let moves = |o: usize| o != v && map.at(o, j) != map.at(o, j + 1);
            let behind = (0..n).find(|&o| moves(o) && map.at(o, j + 1) == p);
            let ahead = (0..n).find(|&o| moves(o) && map.at(o, j) == q);
            if let (Some(w), Some(u)) = (behind, ahead) {
                return vec![record(w, v, j), record(v, u, j), record(u, v, j)];
            }
        }
    }
    Vec::new()
}

struct Formation {
    id: usize,
    /// Front row.
    first_row: i64,
    members: Vec<usize>,
    /// Rows spanned once closed.
    rows: Option<i64>,
    plan: Option<Plan>,
    sorted: bool,
}

impl Formation {
    fn rear_row(&self) -> i64 {
        self.first_row + self.rows.expect("closed") - 1
    }
}

fn interlaced_rows(n: usize, lanes: u32) -> Result<i64> {
    let cells = generate_structure(FormationStructure::Interlaced, n as u32, lanes)?;
    Ok(cells.iter().map(|c| c.x).max().unwrap_or(0) as i64 + 1)
}

/// Conflict-free paths for the cheapest assignment CBS can realize. Used for
/// interlacing, where every vehicle may take every slot and the exact
/// optimum is not worth walking the long run of equal-cost assignments.
fn first_solvable(instance: &Instance, cfg: &PlannerConfig) -> Result<(PathSet, usize, usize)> {
    let problem = instance.assignment_problem()?;
    let mut last = Error::PreferenceInfeasible;
    for (i, a) in problem
        .feasible_stream()
        .take(INTERLACE_ATTEMPTS)
        .enumerate()
    {
        let goals: Vec<RelativePoint> = a.targets.iter().map(|&j| instance.targets[j]).collect();
        match cbs_solve(&instance.grid, &instance.starts, &goals, cfg) {
            Ok(sol) => return Ok((sol.path_set, sol.cost, i + 1)),
            Err(e @ Error::Unsolvable(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

struct Engine<'a> {
    s: &'a Scenario,
    slot: i64,
    step: usize,
    cars: Vec<Car>,
    formations: Vec<Formation>,
    rec: Recorder,
}

impl Engine<'_> {
    /// Position of lattice row `row` at tick `k`.
    fn row_x(&self, row: i64, k: usize) -> f64 {
        self.s.v_f * (k as i64 - row * self.slot) as f64 * self.s.tick
    }

    fn close(&mut self, f: usize, k: usize) -> Result<()> {
        let lanes = self.s.lane_count;
        let fm = &self.formations[f];
        let n = fm.members.len();
        let span = fm.members.iter().map(|&m| self.cars[m].row).max().unwrap() - fm.first_row + 1;
        let mut per_lane = vec![0i64; lanes as usize];
        for &m in &fm.members {
            per_lane[self.cars[m].st.preferred_lane as usize] += 1;
        }
        let need = interlaced_rows(n, lanes)?.max(*per_lane.iter().max().unwrap());
        let rows = need.max(span);
        let rear = fm.first_row + rows - 1;
        for &m in &fm.members {
            let c = &mut self.cars[m];
            c.cell = RelativePoint::new((rear - c.row) as i32, c.st.lane as i32);
        }
        let fm = &mut self.formations[f];
        fm.rows = Some(rows);
        self.rec.log.events.push(Event::FormationClosed {
            t: k as f64 * self.s.tick,
            formation: fm.id,
            members: fm.members.iter().map(|&m| self.cars[m].st.id).collect(),
            rows: rows as usize,
        });
        let targets: Vec<RelativePoint> =
            generate_structure(FormationStructure::Interlaced, n as u32, lanes)?
                .into_iter()
                .map(|c| RelativePoint::new(rows as i32 - 1 - c.x, c.y))
                .collect();
        self.plan(f, k, targets, vec![0; n], vec![0; n], "interlace")
    }

    fn start_sort(&mut self, f: usize, k: usize) -> Result<()> {
        let fm = &self.formations[f];
        let front = fm.rows.expect("closed") as i32 - 1;
        let mut depth = vec![0i32; self.s.lane_count as usize];
        let mut targets = Vec::new();
        let mut prefs = Vec::new();
        for &m in &fm.members {
            let lane = self.cars[m].st.preferred_lane;
            targets.push(RelativePoint::new(
                front - depth[lane as usize],
                lane as i32,
            ));
            depth[lane as usize] += 1;
            prefs.push(lane);
        }
        let target_lanes = prefs.clone();
        self.formations[f].sorted = true;
        self.plan(f, k, targets, prefs, target_lanes, "sort")
    }

    fn plan(
        &mut self,
        f: usize,
        k: usize,
        targets: Vec<RelativePoint>,
        prefs: Vec<u32>,
        target_lanes: Vec<u32>,
        phase: &str,
    ) -> Result<()> {
        let fm = &self.formations[f];
        let grid = GridSpec::new(
            self.s.lane_count,
            fm.rows.expect("closed") as u32,
            self.s.d_f,
            self.s.t_f,
            self.s.v_f,
        )?;
        let instance = Instance {
            grid,
            starts: fm.members.iter().map(|&m| self.cars[m].cell).collect(),
            targets,
            vehicle_pref_lanes: prefs,
            target_lanes,
        };
        let t = k as f64 * self.s.tick;
        // Lane-change timing keeps vehicles apart that follow each other into
        // vacated cells, so that conflict type is replaced by the narrower
        // rule of what the timing cannot handle.
        let mut cfg = PlannerConfig::new(
            ConflictConfig::with_special(MotionMode::Mode1, &[]).expect("valid"),
        );
        cfg.node_limit = NODE_LIMIT;
        cfg.extra_check = Some(unschedulable_lane_change);
        cfg.branching = Branching::FirstPair;
        cfg.tappa_prune = true;
        let planned = if phase == "interlace" {
            first_solvable(&instance, &cfg)
        } else {
            tappa_solve(&instance, &cfg).map(|r| {
                let examined = r.assignments_examined();
                (r.best_path_set, r.best_cost, examined)
            })
        };
        let (paths, cost, examined) = planned.map_err(|e| {
            Error::SimulationAborted(format!(
                "formation {} {phase} planning failed at t = {t:.1} s: {e}",
                fm.id
            ))
        })?;
        let cells = step_cells(&paths);
        let early = lane_change_windows(&cells);
        let steps = cells[0].len() - 1;
        self.rec.log.events.push(Event::PlanStarted {
            t,
            formation: fm.id,
            phase: phase.to_string(),
            steps,
            path_cost: cost,
            assignments_examined: examined,
        });
        if steps > 0 {
            self.formations[f].plan = Some(Plan {
                start: k,
                cells,
                early,
            });
        }
        Ok(())
    }
    /// Moves every car of formation `f` to tick `k`.
    fn place(&mut self, f: usize, k: usize) -> Result<()> {
        let s = self.s;
        let fm = &self.formations[f];
        let Some(_) = fm.rows else {
            for &m in &fm.members {
                let x = self.row_x(self.cars[m].row, k);
                let c = &mut self.cars[m];
                c.st.x = x;
                c.st.speed = s.v_f;
            }
            return Ok(());
        };
        let base = self.row_x(fm.rear_row(), k);
        let mut finished = false;
        if let Some(plan) = &fm.plan {
            let elapsed = k - plan.start;
            let steps = plan.cells[0].len() - 1;
            let j = (elapsed / self.step).min(steps - 1);
            let tau = (elapsed - j * self.step) as f64 / self.step as f64;
            let prog = (1.0 - (PI * tau).cos()) / 2.0;
            let rate = PI / 2.0 * (PI * tau).sin() / s.t_f;
            for (i, &m) in fm.members.iter().enumerate() {
                let (p, q) = (plan.cells[i][j], plan.cells[i][j + 1]);
                let dx = (q.x - p.x) as f64;
                let c = &mut self.cars[m];
                c.st.x = base + (p.x as f64 + dx * prog) * s.d_f;
                c.st.speed = s.v_f + dx * s.d_f * rate;
                c.cell = if tau >= 1.0 { q } else { p };
                let w0 = if plan.early[i][j] { 0.0 } else { 0.5 };
                if q.y != p.y && tau < w0 {
                    c.st.lane = p.y as u32;
                    c.st.lane_from = None;
                    c.st.lateral_offset = 0.0;
                } else if q.y != p.y && tau < w0 + 0.5 {
                    let lat = (1.0 - (2.0 * PI * (tau - w0)).cos()) / 2.0;
                    c.st.lane = q.y as u32;
                    c.st.lane_from = Some(p.y as u32);
                    c.st.lateral_offset = (p.y - q.y) as f64 * LANE_WIDTH * (1.0 - lat);
                } else {
                    c.st.lane = q.y as u32;
                    c.st.lane_from = None;
                    c.st.lateral_offset = 0.0;
                }
            }
            if elapsed >= steps * self.step {
                finished = true;
            } else if elapsed.is_multiple_of(self.step) && elapsed > 0 {
                self.check_cells(f, k)?;
            }
        } else {
            for &m in &fm.members {
                let c = &mut self.cars[m];
                c.st.x = base + c.cell.x as f64 * s.d_f;
                c.st.speed = s.v_f;
                c.st.lane = c.cell.y as u32;
            }
        }
        if finished {
            for &m in &self.formations[f].members {
                let c = &mut self.cars[m];
                c.st.x = base + c.cell.x as f64 * s.d_f;
                c.st.speed = s.v_f;
            }
            self.formations[f].plan = None;
            self.check_cells(f, k)?;
        }
        Ok(())
    }

    fn check_cells(&self, f: usize, k: usize) -> Result<()> {
        let fm = &self.formations[f];
        let mut seen = HashSet::new();
        for &m in &fm.members {
            if !seen.insert(self.cars[m].cell) {
                return Err(Error::SimulationAborted(format!(
                    "formation {} maps two vehicles to {} at t = {:.1} s",
                    fm.id,
                    self.cars[m].cell,
                    k as f64 * self.s.tick
                )));
            }
        }
        Ok(())
    }
}

pub(super) fn run(s: &Scenario) -> Result<SimLog> {
    let slot = s.slot_ticks() as i64;
    let mut e = Engine {
        s,
        slot,
        step: s.step_ticks(),
        cars: Vec::new(),
        formations: Vec::new(),
        rec: Recorder::new(s),
    };
    let dt = s.tick;
    let road = s.road_length();
    let mut arrivals = Arrivals::new(s);
    let mut open: Option<usize> = None;
    // Last lattice row claimed by a closed formation.
    let mut reserved: i64 = -1;
    // Formations that still have cars on (or before) the road.
    let mut live: Vec<usize> = Vec::new();

    for k in 0..s.total_ticks() {
        let t = k as f64 * dt;
        let row = (k as i64 + slot - 1) / slot;

        for (lane, pref) in arrivals.draw() {
            if row <= reserved {
                continue;
            }
            if let Some(f) = open {
                let fm = &e.formations[f];
                let taken = fm
                    .members
                    .iter()
                    .any(|&m| e.cars[m].row == row && e.cars[m].st.lane == lane);
                if taken {
                    continue;
                }
                if row >= fm.first_row + JOIN_WINDOW_ROWS {
                    e.close(f, k)?;
                    reserved = e.formations[f].rear_row();
                    open = None;
                    if row <= reserved {
                        continue;
                    }
                }
            }
            let f = match open {
                Some(f) => f,
                None => {
                    let id = e.formations.len();
                    e.formations.push(Formation {
                        id,
                        first_row: row,
                        members: Vec::new(),
                        rows: None,
                        plan: None,
                        sorted: false,
                    });
                    live.push(id);
                    open = Some(id);
                    id
                }
            };
            let x = e.row_x(row, k);
            let st = VehicleState {
                id: e.cars.len(),
                x,
                lane,
                lane_from: None,
                lateral_offset: 0.0,
                speed: s.v_f,
                preferred_lane: pref,
                entry_time: (x >= 0.0).then_some(t),
                exit_time: None,
                formation: Some(f),
            };
            e.rec.generated(t, &st);
            e.formations[f].members.push(e.cars.len());
            e.cars.push(Car {
                st,
                row,
                cell: RelativePoint::new(0, 0),
                done: false,
            });
            if e.formations[f].members.len() >= s.max_formation_size {
                e.close(f, k)?;
                reserved = e.formations[f].rear_row();
                open = None;
            }
        }
        if let Some(f) = open {
            if k as i64 >= (e.formations[f].first_row + JOIN_WINDOW_ROWS - 1) * slot {
                e.close(f, k)?;
                reserved = e.formations[f].rear_row();
                open = None;
            }
        }

        for &f in &live {
            let fm = &e.formations[f];
            if fm.rows.is_some()
                && fm.plan.is_none()
                && !fm.sorted
                && e.row_x(fm.first_row, k) >= s.sorting_start()
            {
                e.start_sort(f, k)?;
            }
        }

        let t1 = t + dt;
        for &f in &live {
            let before: Vec<(usize, f64)> = e.formations[f]
                .members
                .iter()
                .map(|&m| (m, e.cars[m].st.x))
                .collect();
            e.place(f, k + 1)?;
            for (m, x0) in before {
                let c = &mut e.cars[m];
                if c.done {
                    continue;
                }
                if x0 < 0.0 && c.st.x >= 0.0 {
                    let te = crossing_time(t, dt, x0, c.st.x, 0.0);
                    c.st.entry_time = Some(te);
                    e.rec.entered(c.st.id, te);
                }
                if c.st.x >= road {
                    let te = crossing_time(t, dt, x0, c.st.x, road);
                    c.st.exit_time = Some(te);
                    c.done = true;
                    e.rec.exited(&c.st, te);
                }
            }
        }
        live.retain(|&f| {
            let fm = &e.formations[f];
            !fm.members.iter().all(|&m| e.cars[m].done)
        });

        let states: Vec<VehicleState> = live
            .iter()
            .flat_map(|&f| e.formations[f].members.iter())
            .filter(|&&m| !e.cars[m].done)
            .map(|&m| e.cars[m].st.clone())
            .collect();
        e.rec.check_collisions(t1, &states);
        for v in &states {
            e.rec.sample(t1, v, road);
        }
    }
    e.rec.log.on_road = e.cars.iter().filter(|c| !c.done).count();
    Ok(e.rec.log)
}
