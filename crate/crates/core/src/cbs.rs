//! Conflict-based search for a fixed vehicle-to-target matching.
//!
//! The low level is a time-expanded A* per vehicle that honours that
//! vehicle's constraints. The high level grows a constraint tree: the open
//! node with the least sum-of-costs is expanded by adding one conflict's
//! constraint per child, until a node without conflicts is popped.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rustc_hash::{FxHashMap, FxHashSet};

use serde::{Deserialize, Serialize};

use crate::conflict::{
    constraint_from_conflict, detect_all_conflicts, detect_conflicts, pair_conflict, Conflict,
    ConflictConfig, Constraint,
};
use crate::error::{domain, Error, Result};
use crate::rcs::{GridSpec, MotionMode, Path, PathSet, RelativePathMap, RelativePoint};

/// Tree size at which a stalled search checks whether it can succeed at all.
const REACHABILITY_CHECK_AT: usize = 2_000;
const REACHABILITY_STATE_LIMIT: usize = 250_000;

/// How a constraint-tree node is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branching {
    /// One child per conflict record at the earliest conflicting step.
    #[default]
    PerConflict,
    /// Two children for the first pairwise interaction only.
    FirstPair,
    /// Two children for the interaction, anywhere on the horizon, whose split
    /// raises the cost on both sides if there is one (else on one side, else
    /// the earliest). Optimal like the others, usually a far smaller tree.
    Cardinal,
}

#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub conflicts: ConflictConfig,
    pub branching: Branching,
    /// Last time index a low-level path may use. Defaults to
    /// `2 * (slots + lanes + vehicles)`.
    pub horizon: Option<usize>,
    /// Upper bound on generated constraint-tree nodes.
    pub node_limit: usize,
    pub trace: bool,
    /// Extra rule checked on path sets free of the configured conflicts.
    /// Returned records form one group: each becomes a child forbidding its
    /// motion, so any path set valid under the rule avoids at least one.
    pub extra_check: Option<fn(&RelativePathMap) -> Vec<Conflict>>,
    /// Give up once the cheapest open node costs at least this much.
    pub cost_bound: Option<usize>,
    /// Lets TAPPA bound each CBS run by the best cost found so far. Bounded
    /// runs are logged without a path cost.
    pub tappa_prune: bool,
}

impl PlannerConfig {
    pub fn new(conflicts: ConflictConfig) -> Self {
        Self {
            conflicts,
            branching: Branching::PerConflict,
            horizon: None,
            node_limit: 500_000,
            trace: false,
            extra_check: None,
            cost_bound: None,
            tappa_prune: false,
        }
    }

    pub fn for_mode(mode: MotionMode) -> Self {
        Self::new(ConflictConfig::for_mode(mode))
    }

    pub fn mode(&self) -> MotionMode {
        self.conflicts.mode
    }

    fn horizon_for(&self, grid: &GridSpec, vehicles: usize) -> usize {
        self.horizon
            .unwrap_or(2 * (grid.slot_count as usize + grid.lane_count as usize + vehicles))
    }
}

/// Extra rules compare by presence only; function addresses are not stable.
impl PartialEq for PlannerConfig {
    fn eq(&self, other: &Self) -> bool {
        self.conflicts == other.conflicts
            && self.branching == other.branching
            && self.horizon == other.horizon
            && self.node_limit == other.node_limit
            && self.trace == other.trace
            && self.extra_check.is_some() == other.extra_check.is_some()
            && self.cost_bound == other.cost_bound
            && self.tappa_prune == other.tappa_prune
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self::new(ConflictConfig::default())
    }
}

/// The constraints of one vehicle, indexed for the time-expanded search.
#[derive(Debug, Default)]
struct ConstraintTable {
    vertex: FxHashSet<(usize, RelativePoint)>,
    edge: FxHashSet<(usize, RelativePoint, RelativePoint)>,
    /// Earliest time index from which the goal may be held forever.
    goal_release: usize,
}

impl ConstraintTable {
    fn new(goal: RelativePoint, constraints: &[Constraint]) -> Self {
        let mut table = Self::default();
        for c in constraints {
            match *c {
                Constraint::Vertex { point, step, .. } => {
                    table.vertex.insert((step - 1, point));
                    if point == goal {
                        table.goal_release = table.goal_release.max(step);
                    }
                }
                Constraint::Edge { from, to, step, .. } => {
                    table.edge.insert((step - 1, from, to));
                    if from == goal && to == goal {
                        table.goal_release = table.goal_release.max(step);
                    }
                }
            }
        }
        table
    }

    fn blocks(&self, t: usize, from: RelativePoint, to: RelativePoint) -> bool {
        self.vertex.contains(&(t + 1, to)) || self.edge.contains(&(t, from, to))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Frontier {
    f: usize,
    /// Conflicts with the other vehicles' current paths so far.
    clashes: usize,
    g: usize,
    seq: usize,
    cell: RelativePoint,
    from: RelativePoint,
    /// Settled on the goal for good.
    done: bool,
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min f, then fewest clashes, then max g, then FIFO
        other
            .f
            .cmp(&self.f)
            .then(other.clashes.cmp(&self.clashes))
            .then(self.g.cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Other vehicles' paths, used to prefer the least conflicting of several
/// equally short paths.
struct Avoid<'a> {
    others: Vec<&'a Path>,
    conflicts: &'a ConflictConfig,
    until: usize,
}

impl Avoid<'_> {
    fn count(&self, t: usize, from: RelativePoint, to: RelativePoint) -> usize {
        self.others
            .iter()
            .filter(|q| pair_conflict((from, to), (q.at(t), q.at(t + 1)), self.conflicts).is_some())
            .count()
    }

    fn count_hold(&self, t: usize, at: RelativePoint) -> usize {
        (t..self.until).map(|k| self.count(k, at, at)).sum()
    }
}

/// Minimum-cost constrained path from `start` to `goal` in the
/// time-expanded grid. Waiting is a legal action; waiting at the goal after
/// the final arrival is free.
pub fn low_level_search(
    grid: &GridSpec,
    start: RelativePoint,
    goal: RelativePoint,
    constraints: &[Constraint],
    mode: MotionMode,
    horizon: usize,
) -> Result<Path> {
    search(grid, start, goal, constraints, mode, horizon, None)
}

fn search(
    grid: &GridSpec,
    start: RelativePoint,
    goal: RelativePoint,
    constraints: &[Constraint],
    mode: MotionMode,
    horizon: usize,
    avoid: Option<&Avoid<'_>>,
) -> Result<Path> {
    grid.check(start)?;
    grid.check(goal)?;
    let table = ConstraintTable::new(goal, constraints);
    let unsolvable =
        || Error::Unsolvable(format!("no path {start} -> {goal} within {horizon} steps"));
    if table.vertex.contains(&(0, start)) {
        return Err(unsolvable());
    }

    let mut open = BinaryHeap::new();
    let mut parent: FxHashMap<(usize, RelativePoint), RelativePoint> = FxHashMap::default();
    let mut closed: FxHashSet<(usize, RelativePoint)> = FxHashSet::default();
    let mut seq = 0;
    open.push(Frontier {
        f: mode.distance(start, goal) as usize,
        clashes: 0,
        g: 0,
        seq,
        cell: start,
        from: start,
        done: false,
    });
    while let Some(node) = open.pop() {
        let Frontier {
            g: t,
            cell,
            clashes,
            ..
        } = node;
        if node.done {
            let mut points = vec![cell];
            let mut cur = (t, cell);
            while cur.0 > 0 {
                let prev = parent[&cur];
                points.push(prev);
                cur = (cur.0 - 1, prev);
            }
            points.reverse();
            return Ok(Path::new(0, points));
        }
        if !closed.insert((t, cell)) {
            continue;
        }
        if t > 0 {
            parent.insert((t, cell), node.from);
        }
        if cell == goal && t >= table.goal_release {
            seq += 1;
            open.push(Frontier {
                clashes: clashes + avoid.map_or(0, |a| a.count_hold(t, cell)),
                seq,
                done: true,
                ..node
            });
        }
        if t >= horizon {
            continue;
        }
        for &(dx, dy) in mode.moves() {
            let next = cell.offset(dx, dy);
            if !grid.contains(next)
                || table.blocks(t, cell, next)
                || closed.contains(&(t + 1, next))
            {
                continue;
            }
            seq += 1;
            open.push(Frontier {
                f: t + 1 + mode.distance(next, goal) as usize,
                clashes: clashes + avoid.map_or(0, |a| a.count(t, cell, next)),
                g: t + 1,
                seq,
                cell: next,
                from: cell,
                done: false,
            });
        }
    }
    Err(unsolvable())
}

/// Whether all vehicles can stand on their goals together within `horizon`
/// joint steps, or `None` if the joint state space exceeds `limit`.
///
/// The constraint tree cannot prove that a matching is unrealizable without
/// exhausting itself; on small grids this breadth-first check can.
fn goals_reachable(
    grid: &GridSpec,
    starts: &[RelativePoint],
    goals: &[RelativePoint],
    cfg: &ConflictConfig,
    horizon: usize,
    limit: usize,
) -> Option<bool> {
    let states = (grid.capacity() as f64).powi(starts.len() as i32);
    if states > limit as f64 {
        return None;
    }
    fn extend(
        grid: &GridSpec,
        cfg: &ConflictConfig,
        cur: &[RelativePoint],
        next: &mut Vec<RelativePoint>,
        out: &mut Vec<Vec<RelativePoint>>,
    ) {
        let i = next.len();
        if i == cur.len() {
            out.push(next.clone());
            return;
        }
        for &(dx, dy) in cfg.mode.moves() {
            let to = cur[i].offset(dx, dy);
            if !grid.contains(to) {
                continue;
            }
            if (0..i).any(|j| pair_conflict((cur[i], to), (cur[j], next[j]), cfg).is_some()) {
                continue;
            }
            next.push(to);
            extend(grid, cfg, cur, next, out);
            next.pop();
        }
    }
    let mut seen: FxHashSet<Vec<RelativePoint>> = FxHashSet::default();
    let mut layer = vec![starts.to_vec()];
    seen.insert(starts.to_vec());
    for _ in 0..=horizon {
        if layer.iter().any(|s| s == goals) {
            return Some(true);
        }
        let mut next_layer = Vec::new();
        for state in &layer {
            let mut succ = Vec::new();
            extend(
                grid,
                cfg,
                state,
                &mut Vec::with_capacity(state.len()),
                &mut succ,
            );
            next_layer.extend(succ.into_iter().filter(|s| seen.insert(s.clone())));
        }
        if next_layer.is_empty() {
            return Some(false);
        }
        layer = next_layer;
    }
    Some(false)
}

/// One constraint-tree node as recorded in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// The constraint added relative to the parent, rendered as text.
    pub added: Option<String>,
    pub constraints: usize,
    pub cost: usize,
    pub conflicts: Vec<String>,
    pub expanded: bool,
}

#[derive(Debug, Clone)]
pub struct CbsSolution {
    pub path_set: PathSet,
    pub cost: usize,
    pub nodes_generated: usize,
    pub nodes_expanded: usize,
    pub trace: Vec<TraceNode>,
}

struct CtNode {
    constraints: Vec<Constraint>,
    paths: Vec<Path>,
    conflicts: Vec<Conflict>,
    /// Conflict records over the whole horizon, not just the earliest step.
    clashes: usize,
    /// `conflicts` came from the extra rule.
    extra: bool,
    cost: usize,
}

fn path_set(paths: &[Path]) -> PathSet {
    PathSet::new(paths.to_vec()).expect("one non-empty path per vehicle")
}

fn validate_endpoints(
    grid: &GridSpec,
    starts: &[RelativePoint],
    goals: &[RelativePoint],
) -> Result<()> {
    if starts.len() != goals.len() {
        return Err(Error::SizeMismatch {
            expected: starts.len(),
            actual: goals.len(),
        });
    }
    if starts.is_empty() {
        return Err(domain("need at least one vehicle"));
    }
    for p in starts.iter().chain(goals) {
        grid.check(*p)?;
    }
    let distinct = |pts: &[RelativePoint]| pts.iter().collect::<HashSet<_>>().len() == pts.len();
    if !distinct(starts) || !distinct(goals) {
        return Err(domain(
            "start cells and goal cells must be pairwise distinct",
        ));
    }
    Ok(())
}

/// Minimum sum-of-costs conflict-free path set realizing `starts[i] -> goals[i]`.
///
/// Among equally cheap constraint-tree nodes the one with fewer conflicts is
/// expanded first, then the older one. A child that costs no more than its
/// parent but has fewer conflicts replaces the parent's paths instead of
/// being added to the tree.
pub fn cbs_solve(
    grid: &GridSpec,
    starts: &[RelativePoint],
    goals: &[RelativePoint],
    cfg: &PlannerConfig,
) -> Result<CbsSolution> {
    validate_endpoints(grid, starts, goals)?;
    let mode = cfg.mode();
    let horizon = cfg.horizon_for(grid, starts.len());
    let plan = |vehicle: usize, constraints: &[Constraint], current: &[Path]| -> Result<Path> {
        let own: Vec<Constraint> = constraints
            .iter()
            .filter(|c| c.vehicle() == vehicle)
            .copied()
            .collect();
        let avoid = Avoid {
            others: current
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != vehicle)
                .map(|(_, p)| p)
                .collect(),
            conflicts: &cfg.conflicts,
            until: current.iter().map(|p| p.points.len()).max().unwrap_or(0),
        };
        let mut path = search(
            grid,
            starts[vehicle],
            goals[vehicle],
            &own,
            mode,
            horizon,
            Some(&avoid),
        )?;
        path.vehicle_id = vehicle;
        Ok(path)
    };
    let evaluate = |constraints: Vec<Constraint>, paths: Vec<Path>| -> CtNode {
        let map = path_set(&paths).map();
        let mut conflicts = detect_conflicts(&map, &cfg.conflicts);
        let mut extra = false;
        let clashes = if conflicts.is_empty() {
            if let Some(check) = cfg.extra_check {
                conflicts = check(&map);
                extra = !conflicts.is_empty();
            }
            usize::from(extra)
        } else {
            detect_all_conflicts(&map, &cfg.conflicts).len()
        };
        CtNode {
            cost: paths.iter().map(Path::cost).sum(),
            constraints,
            paths,
            conflicts,
            clashes,
            extra,
        }
    };

    let mut root_paths: Vec<Path> = Vec::with_capacity(starts.len());
    for v in 0..starts.len() {
        let path = plan(v, &[], &root_paths)?;
        root_paths.push(path);
    }
    let mut nodes = vec![evaluate(Vec::new(), root_paths)];
    let mut trace: Vec<TraceNode> = Vec::new();
    let record = |trace: &mut Vec<TraceNode>,
                  id: usize,
                  parent: Option<usize>,
                  added: Option<&Constraint>,
                  node: &CtNode| {
        if cfg.trace {
            trace.push(TraceNode {
                id,
                parent,
                added: added.map(ToString::to_string),
                constraints: node.constraints.len(),
                cost: node.cost,
                conflicts: node.conflicts.iter().map(ToString::to_string).collect(),
                expanded: false,
            });
        }
    };
    record(&mut trace, 0, None, None, &nodes[0]);

    let mut seen: FxHashSet<Vec<Constraint>> = FxHashSet::default();
    seen.insert(Vec::new());
    // (cost, conflicts, insertion order) min-heap over node indices
    let mut open = BinaryHeap::new();
    let mut pushes = 0usize;
    open.push(Reverse((nodes[0].cost, nodes[0].clashes, pushes, 0usize)));
    let mut expanded = 0;

    'search: while let Some(Reverse((_, _, _, id))) = open.pop() {
        if cfg.cost_bound.is_some_and(|b| nodes[id].cost >= b) {
            return Err(Error::Unsolvable("cost bound reached".into()));
        }
        if cfg.trace {
            trace[id].expanded = true;
        }
        if nodes[id].conflicts.is_empty() {
            let node = &nodes[id];
            return Ok(CbsSolution {
                path_set: path_set(&node.paths),
                cost: node.cost,
                nodes_generated: nodes.len(),
                nodes_expanded: expanded,
                trace,
            });
        }
        expanded += 1;
        let branch: Vec<Conflict> = match cfg.branching {
            _ if nodes[id].extra => nodes[id].conflicts.clone(),
            Branching::PerConflict => nodes[id].conflicts.clone(),
            Branching::FirstPair => nodes[id].conflicts.iter().take(2).copied().collect(),
            Branching::Cardinal => {
                let map = path_set(&nodes[id].paths).map();
                detect_all_conflicts(&map, &cfg.conflicts)
            }
        };
        let mut children = Vec::with_capacity(branch.len());
        let mut best_rank = None;
        let group = if nodes[id].extra || cfg.branching != Branching::Cardinal {
            branch.len()
        } else {
            2
        };
        for pair in branch.chunks(group) {
            let mut side = Vec::with_capacity(2);
            for conflict in pair {
                let added = constraint_from_conflict(conflict);
                let parent = &nodes[id];
                if parent.constraints.contains(&added) {
                    side.push(None);
                    continue;
                }
                let mut constraints = parent.constraints.clone();
                constraints.push(added);
                constraints.sort();
                if seen.contains(&constraints) {
                    side.push(None);
                    continue;
                }
                let Ok(replanned) = plan(conflict.vehicle, &constraints, &parent.paths) else {
                    side.push(None);
                    continue;
                };
                let mut paths = parent.paths.clone();
                paths[conflict.vehicle] = replanned;
                let child = evaluate(constraints, paths);
                if child.cost == parent.cost && child.clashes < parent.clashes {
                    // bypass: the replanned path also satisfies the parent's constraints
                    let parent = &mut nodes[id];
                    parent.paths = child.paths;
                    parent.conflicts = child.conflicts;
                    parent.clashes = child.clashes;
                    parent.extra = child.extra;
                    if cfg.trace {
                        trace[id].conflicts =
                            parent.conflicts.iter().map(ToString::to_string).collect();
                    }
                    pushes += 1;
                    open.push(Reverse((parent.cost, parent.clashes, pushes, id)));
                    continue 'search;
                }
                side.push(Some((added, child)));
            }
            if cfg.branching != Branching::Cardinal {
                children.extend(side.into_iter().flatten());
                continue;
            }
            let parent_cost = nodes[id].cost;
            let rank = side
                .iter()
                .filter(|c| c.as_ref().is_none_or(|(_, c)| c.cost > parent_cost))
                .count();
            if best_rank.is_none_or(|r| rank > r) {
                best_rank = Some(rank);
                children = side.into_iter().flatten().collect();
                if rank == 2 {
                    break;
                }
            }
        }
        for (added, child) in children {
            if !seen.insert(child.constraints.clone()) {
                continue;
            }
            let child_id = nodes.len();
            record(&mut trace, child_id, Some(id), Some(&added), &child);
            pushes += 1;
            open.push(Reverse((child.cost, child.clashes, pushes, child_id)));
            nodes.push(child);
            if nodes.len() == REACHABILITY_CHECK_AT
                && goals_reachable(
                    grid,
                    starts,
                    goals,
                    &cfg.conflicts,
                    horizon,
                    REACHABILITY_STATE_LIMIT,
                ) == Some(false)
            {
                return Err(Error::Unsolvable(
                    "goal configuration is unreachable".into(),
                ));
            }
            if nodes.len() > cfg.node_limit {
                return Err(Error::Unsolvable(format!(
                    "constraint tree exceeded {} nodes",
                    cfg.node_limit
                )));
            }
        }
    }
    Err(Error::Unsolvable("constraint tree exhausted".into()))
}
