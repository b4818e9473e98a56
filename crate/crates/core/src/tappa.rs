//! Coupled target assignment and path planning.
//!
//! Assignments are drawn lazily in non-decreasing cost order and each one is
//! handed to conflict-based search. An assignment's FRD cost is a lower bound
//! on the cost of any conflict-free path set realizing it, so the search
//! stops as soon as the next assignment cannot beat the best path set found.

use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, AssignmentProblem, EdgeWeights};
use crate::cbs::{cbs_solve, CbsSolution, PlannerConfig};
use crate::error::{Error, Result};
use crate::rcs::{GridSpec, PathSet, RelativePoint};

/// One examined assignment: its FRD cost and what CBS made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TappaLogEntry {
    /// 1-based assignment vector.
    pub assignment: Vec<usize>,
    pub assignment_cost: f64,
    /// `None` when CBS found no conflict-free path set for this assignment.
    pub path_cost: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TappaResult {
    pub best_path_set: PathSet,
    pub best_cost: usize,
    pub best_assignment: Assignment,
    pub best_solution: CbsSolution,
    pub log: Vec<TappaLogEntry>,
    /// Cost of the assignment whose lower bound ended the search, if the
    /// search ended that way rather than by running out of assignments.
    pub termination_cost: Option<f64>,
}

impl TappaResult {
    pub fn assignments_examined(&self) -> usize {
        self.log.len()
    }
}

/// Planning instance: starts and targets in the same relative grid.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: GridSpec,
    pub starts: Vec<RelativePoint>,
    pub targets: Vec<RelativePoint>,
    pub vehicle_pref_lanes: Vec<u32>,
    pub target_lanes: Vec<u32>,
}

impl Instance {
    /// Targets' own lanes serve as their preference labels.
    pub fn lane_sorting(
        grid: GridSpec,
        starts: Vec<RelativePoint>,
        targets: Vec<RelativePoint>,
        vehicle_pref_lanes: Vec<u32>,
    ) -> Self {
        let target_lanes = targets.iter().map(|t| t.y as u32).collect();
        Self {
            grid,
            starts,
            targets,
            vehicle_pref_lanes,
            target_lanes,
        }
    }

    pub fn assignment_problem(&self) -> Result<AssignmentProblem> {
        AssignmentProblem::new(
            &self.starts,
            &self.targets,
            &self.vehicle_pref_lanes,
            &self.target_lanes,
            EdgeWeights::default(),
        )
    }
}

/// Globally minimum-cost conflict-free path set over all preference-feasible
/// assignments.
///
/// Assignments for which CBS fails are logged with no path cost and
/// skipped. If every examined assignment fails, the last failure is returned.
pub fn tappa_solve(instance: &Instance, cfg: &PlannerConfig) -> Result<TappaResult> {
    let problem = instance.assignment_problem()?;
    let mut stream = problem.feasible_stream();
    let mut current = stream.next().ok_or(Error::PreferenceInfeasible)?;
    let mut best: Option<(CbsSolution, Assignment)> = None;
    let mut log = Vec::new();
    let mut last_error = None;
    let mut termination_cost = None;

    loop {
        let goals: Vec<RelativePoint> = current
            .targets
            .iter()
            .map(|&j| instance.targets[j])
            .collect();
        let outcome = match &best {
            Some((b, _)) if cfg.tappa_prune => {
                let mut bounded = *cfg;
                bounded.cost_bound = Some(b.cost);
                cbs_solve(&instance.grid, &instance.starts, &goals, &bounded)
            }
            _ => cbs_solve(&instance.grid, &instance.starts, &goals, cfg),
        };
        log.push(TappaLogEntry {
            assignment: current.one_based(),
            assignment_cost: current.cost,
            path_cost: outcome.as_ref().ok().map(|s| s.cost),
        });
        match outcome {
            Ok(sol) => {
                if best.as_ref().is_none_or(|(b, _)| sol.cost < b.cost) {
                    best = Some((sol, current.clone()));
                }
            }
            Err(e @ Error::Unsolvable(_)) => last_error = Some(e),
            Err(e) => return Err(e),
        }
        let Some(next) = stream.next() else {
            break;
        };
        if let Some((b, _)) = &best {
            if b.cost as f64 <= next.cost + 1e-9 {
                termination_cost = Some(next.cost);
                break;
            }
        }
        current = next;
    }

    let (solution, assignment) = match best {
        Some(b) => b,
        None => {
            return Err(
                last_error.unwrap_or_else(|| Error::Unsolvable("no assignment examined".into()))
            )
        }
    };
    Ok(TappaResult {
        best_path_set: solution.path_set.clone(),
        best_cost: solution.cost,
        best_assignment: assignment,
        best_solution: solution,
        log,
        termination_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rcs::MotionMode;

    fn p(x: i32, y: i32) -> RelativePoint {
        RelativePoint::new(x, y)
    }

    #[test]
    fn single_vehicle() {
        let inst = Instance::lane_sorting(
            GridSpec::with_bounds(2, 4).unwrap(),
            vec![p(0, 0)],
            vec![p(2, 0)],
            vec![0],
        );
        let res = tappa_solve(&inst, &PlannerConfig::default()).unwrap();
        assert_eq!(res.best_cost, 2);
        assert_eq!(res.assignments_examined(), 1);
        assert_eq!(res.log[0].assignment_cost, 2.0);
        assert_eq!(res.termination_cost, None);
    }

    #[test]
    fn infeasible_preferences() {
        let inst = Instance::lane_sorting(
            GridSpec::with_bounds(2, 4).unwrap(),
            vec![p(0, 0), p(0, 1)],
            vec![p(1, 0), p(1, 1)],
            vec![0, 0],
        );
        assert_eq!(
            tappa_solve(&inst, &PlannerConfig::default()).unwrap_err(),
            Error::PreferenceInfeasible
        );
    }

    #[test]
    fn order_preserving_assignment_on_one_lane() {
        // One lane, two vehicles, interchangeable targets.
        let grid = GridSpec::with_bounds(1, 4).unwrap();
        let inst = Instance {
            grid,
            starts: vec![p(1, 0), p(2, 0)],
            targets: vec![p(3, 0), p(0, 0)],
            vehicle_pref_lanes: vec![0, 0],
            target_lanes: vec![0, 0],
        };
        let res = tappa_solve(&inst, &PlannerConfig::for_mode(MotionMode::Mode1)).unwrap();
        assert_eq!(res.best_cost, 2);
        assert_eq!(res.best_assignment.targets, vec![1, 0]);
        assert_eq!(res.termination_cost, Some(4.0));
        assert!(res
            .log
            .windows(2)
            .all(|w| w[0].assignment_cost <= w[1].assignment_cost));
        for entry in &res.log {
            if let Some(c) = entry.path_cost {
                assert!(entry.assignment_cost <= c as f64);
            }
        }
    }
}
