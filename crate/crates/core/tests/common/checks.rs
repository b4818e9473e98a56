//! Oracle comparisons shared by the per-module tests and the acceptance
//! run. Each returns a one-line summary, or the first disagreement.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use formation_core::assignment::{assignment_stream, optimal_assignment, CostMatrix};
use formation_core::cbs::{cbs_solve, Branching, PlannerConfig};
use formation_core::conflict::{
    detect_all_conflicts, detect_conflicts, Conflict, ConflictConfig, ConflictKind, Motion,
};
use formation_core::error::Error;
use formation_core::rcs::{MotionMode, RelativePathMap};
use formation_core::tappa::{tappa_solve, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_mode(rng: &mut impl Rng) -> MotionMode {
    if rng.gen_bool(0.5) {
        MotionMode::Mode1
    } else {
        MotionMode::Mode2
    }
}

/// CBS against the joint-state search on `count` solvable random instances
/// (unsolvable draws are checked too but do not count).
pub fn cbs_vs_joint_search(
    count: usize,
    seed: u64,
    branching: Branching,
    budget: Duration,
) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut solvable, mut unsolvable) = (0, 0);
    while solvable < count {
        let lanes = rng.gen_range(1..=3);
        let slots = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=3usize).min((lanes * slots) as usize);
        let mode = random_mode(&mut rng);
        let starts = distinct_cells(&mut rng, lanes, slots, n);
        let goals = distinct_cells(&mut rng, lanes, slots, n);
        let opt = joint_optimum(lanes, slots, &starts, &goals, mode, &all_kinds);

        let mut cfg = PlannerConfig::new(ConflictConfig::all_kinds(mode));
        cfg.branching = branching;
        let got = cbs_solve(
            &grid(lanes, slots),
            &starts.iter().map(|c| pt(*c)).collect::<Vec<_>>(),
            &goals.iter().map(|c| pt(*c)).collect::<Vec<_>>(),
            &cfg,
        );
        let case = format!("{lanes}x{slots} {mode:?} {starts:?} -> {goals:?}");
        let Some(opt) = opt else {
            ensure!(
                matches!(got, Err(Error::Unsolvable(_))),
                "{case}: oracle says unsolvable, CBS gave {got:?}"
            );
            unsolvable += 1;
            continue;
        };
        solvable += 1;
        let sol = got.map_err(|e| format!("{case}: {e}"))?;
        ensure!(
            sol.cost == opt,
            "{case}: CBS cost {} vs optimum {opt}",
            sol.cost
        );
        ensure!(
            detect_all_conflicts(&sol.path_set.map(), &cfg.conflicts).is_empty(),
            "{case}: returned paths conflict"
        );
        for (path, (s, g)) in sol.path_set.paths().iter().zip(starts.iter().zip(&goals)) {
            ensure!(
                (path.start(), path.end()) == (Some(pt(*s)), Some(pt(*g))) && path.is_legal(mode),
                "{case}: bad path {path:?}"
            );
        }
    }
    let took = start.elapsed();
    ensure!(took < budget, "took {took:.2?}, budget {budget:?}");
    Ok(format!(
        "{solvable} optimal costs, {unsolvable} unsolvable agreed, {took:.2?}"
    ))
}

/// TAPPA against exhaustive search over feasible assignments, each solved
/// by the joint-state oracle.
pub fn tappa_vs_exhaustive(count: usize, seed: u64) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut multi) = (0, 0);
    while checked < count {
        let lanes = rng.gen_range(1..=3);
        let slots = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=3usize).min((lanes * slots) as usize);
        let mode = random_mode(&mut rng);
        let starts = distinct_cells(&mut rng, lanes, slots, n);
        let targets = distinct_cells(&mut rng, lanes, slots, n);
        // each vehicle prefers the lane of some target, so a feasible matching usually exists
        let prefs: Vec<u32> = (0..n)
            .map(|_| targets[rng.gen_range(0..n)].1 as u32)
            .collect();

        let feasible: Vec<Vec<usize>> = permutations(n)
            .into_iter()
            .filter(|p| {
                p.iter()
                    .enumerate()
                    .all(|(i, &j)| targets[j].1 as u32 == prefs[i])
            })
            .collect();
        let optimum = feasible
            .iter()
            .filter_map(|p| {
                let goals: Vec<Cell> = p.iter().map(|&j| targets[j]).collect();
                joint_optimum(lanes, slots, &starts, &goals, mode, &all_kinds)
            })
            .min();
        let instance = Instance::lane_sorting(
            grid(lanes, slots),
            starts.iter().map(|c| pt(*c)).collect(),
            targets.iter().map(|c| pt(*c)).collect(),
            prefs,
        );
        let result = tappa_solve(
            &instance,
            &PlannerConfig::new(ConflictConfig::all_kinds(mode)),
        );
        let case = format!("{starts:?} -> {targets:?} {mode:?}");
        let Some(optimum) = optimum else {
            ensure!(
                result.is_err(),
                "{case}: no realizable feasible assignment, yet TAPPA succeeded"
            );
            continue;
        };
        let result = result.map_err(|e| format!("{case}: {e}"))?;
        ensure!(
            result.best_cost == optimum,
            "{case}: TAPPA {} vs optimum {optimum}",
            result.best_cost
        );
        ensure!(
            feasible.contains(&result.best_assignment.targets),
            "{case}: infeasible assignment chosen"
        );
        ensure!(
            result
                .log
                .windows(2)
                .all(|w| w[0].assignment_cost <= w[1].assignment_cost),
            "{case}: assignment costs decrease"
        );
        for entry in &result.log {
            if let Some(c) = entry.path_cost {
                ensure!(
                    entry.assignment_cost <= c as f64,
                    "{case}: path cost below its assignment cost"
                );
            }
        }
        multi += usize::from(result.assignments_examined() >= 2);
        checked += 1;
    }
    ensure!(multi > 0, "no instance needed more than one assignment");
    Ok(format!(
        "{checked} global optima matched, {multi} needed several assignments, {:.2?}",
        start.elapsed()
    ))
}

fn random_matrix(rng: &mut impl Rng, n: usize) -> CostMatrix {
    // small integer entries make ties common
    let hi = if rng.gen_bool(0.5) { 4 } else { 50 };
    CostMatrix::from_rows(
        (0..n)
            .map(|_| (0..n).map(|_| f64::from(rng.gen_range(0..hi))).collect())
            .collect(),
    )
    .unwrap()
}

fn brute_force(cost: &CostMatrix) -> (f64, Vec<usize>) {
    permutations(cost.dim())
        .into_iter()
        .map(|p| (cost.total(&p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .unwrap()
}

/// Hungarian optimum (lexicographically first among ties) against brute force.
pub fn hungarian_vs_brute_force(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=7);
        let cost = random_matrix(&mut rng, n);
        let (best, lex_first) = brute_force(&cost);
        let got = optimal_assignment(&cost);
        ensure!(got.cost == best, "case {case}: cost {} vs {best}", got.cost);
        ensure!(
            cost.total(&got.targets) == got.cost,
            "case {case}: reported cost is not the total"
        );
        ensure!(
            got.targets == lex_first,
            "case {case}: {:?} is not the first optimum {lex_first:?}",
            got.targets
        );
    }
    Ok(format!("{cases} matrices up to 7x7"))
}

/// The ranked stream yields every permutation once, in non-decreasing cost.
pub fn stream_vs_enumeration(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=6);
        let cost = random_matrix(&mut rng, n);
        let all: Vec<_> = assignment_stream(cost.clone()).collect();
        let expected = (1..=n).product::<usize>();
        ensure!(
            all.len() == expected,
            "case {case}: {} assignments, expected {expected}",
            all.len()
        );
        let distinct: HashSet<_> = all.iter().map(|a| a.targets.clone()).collect();
        ensure!(
            distinct.len() == expected,
            "case {case}: repeated assignments"
        );
        ensure!(
            all.iter().all(|a| cost.total(&a.targets) == a.cost),
            "case {case}: wrong cost"
        );
        ensure!(
            all.windows(2).all(|w| w[0].cost <= w[1].cost),
            "case {case}: out of order"
        );
        ensure!(
            all[0].cost == brute_force(&cost).0,
            "case {case}: first is not optimal"
        );
    }
    Ok(format!("{cases} full enumerations"))
}

/// Legal random walks on a small grid; vehicles may collide freely.
fn random_rows(rng: &mut impl Rng, mode: MotionMode) -> Vec<Vec<Cell>> {
    let lanes = rng.gen_range(1..=4);
    let slots = rng.gen_range(1..=5);
    let n = rng.gen_range(1..=5);
    let steps = rng.gen_range(1..=8);
    let moves = mode.moves();
    (0..n)
        .map(|_| {
            let mut c = (rng.gen_range(0..slots), rng.gen_range(0..lanes));
            let mut row = vec![c];
            for _ in 1..steps {
                loop {
                    let (dx, dy) = moves[rng.gen_range(0..moves.len())];
                    let next = (c.0 + dx, c.1 + dy);
                    if (0..slots).contains(&next.0) && (0..lanes).contains(&next.1) {
                        c = next;
                        break;
                    }
                }
                row.push(c);
            }
            row
        })
        .collect()
}

fn random_config(rng: &mut impl Rng, mode: MotionMode) -> ConflictConfig {
    match rng.gen_range(0..3) {
        0 => ConflictConfig::for_mode(mode),
        1 => ConflictConfig::all_kinds(mode),
        _ => {
            let types: Vec<u8> = (1..=4).filter(|_| rng.gen_bool(0.5)).collect();
            ConflictConfig::with_special(mode, &types).unwrap()
        }
    }
}

/// Pairwise summary of a detector's records: (instant, i, j, kind) with i < j.
fn summarize(records: &[Conflict]) -> Vec<(usize, usize, usize, ConflictKind)> {
    let mut out: Vec<_> = records
        .iter()
        .filter(|c| c.vehicle < c.other)
        .map(|c| (c.instant(), c.vehicle, c.other, c.kind))
        .collect();
    out.sort();
    out
}

/// Conflict detection against the segment-geometry checker on random maps.
pub fn detector_vs_geometry(maps: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut records = 0;
    for case in 0..maps {
        let mode = if case % 2 == 0 {
            MotionMode::Mode1
        } else {
            MotionMode::Mode2
        };
        let rows = random_rows(&mut rng, mode);
        let cfg = random_config(&mut rng, mode);
        let map = RelativePathMap::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|c| pt(*c)).collect())
                .collect(),
        )
        .unwrap();

        let mut expected = brute_force_conflicts(&rows, &|k| cfg.is_active(k));
        expected.sort();
        let all = detect_all_conflicts(&map, &cfg);
        records += all.len();
        ensure!(
            all.len() == 2 * expected.len(),
            "case {case}: not one record per vehicle"
        );
        ensure!(summarize(&all) == expected, "case {case}: {rows:?}");

        let first = expected.first().map(|e| e.0);
        let earliest: Vec<_> = expected
            .iter()
            .filter(|e| Some(e.0) == first)
            .copied()
            .collect();
        ensure!(
            summarize(&detect_conflicts(&map, &cfg)) == earliest,
            "case {case}: earliest instant"
        );

        for c in &all {
            seen.insert(c.kind);
            let mirrored = all
                .iter()
                .filter(|o| {
                    o.vehicle == c.other
                        && o.other == c.vehicle
                        && o.instant() == c.instant()
                        && o.kind == c.kind
                })
                .count();
            ensure!(
                mirrored == 1,
                "case {case}: {c} has {mirrored} mirror records"
            );
            let at = |t| map.at(c.vehicle, t);
            match c.motion {
                Motion::Node(p) => ensure!(at(c.step - 1) == p, "case {case}: {c} wrong cell"),
                Motion::Edge(a, b) => ensure!(
                    (at(c.step - 1), at(c.step)) == (a, b),
                    "case {case}: {c} wrong edge"
                ),
            }
            if mode == MotionMode::Mode1 {
                ensure!(
                    !matches!(
                        c.kind,
                        ConflictKind::SpecialEdge2
                            | ConflictKind::SpecialEdge3
                            | ConflictKind::SpecialEdge4
                    ),
                    "case {case}: {c} impossible under mode 1"
                );
            }
        }
    }
    ensure!(seen.len() == ConflictKind::ALL.len(), "only saw {seen:?}");
    Ok(format!("{maps} maps, {records} records, every kind seen"))
}
