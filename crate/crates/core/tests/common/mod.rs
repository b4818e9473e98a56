//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the planner's conflict detection or search: the
//! conflict checker works from segment geometry and the path oracle searches
//! the joint state space of all vehicles directly.

#![allow(dead_code)]

pub mod checks;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use formation_core::conflict::ConflictKind;
use formation_core::rcs::{GridSpec, MotionMode, RelativePoint};
use rand::Rng;

pub type Cell = (i32, i32);

pub fn cell(p: RelativePoint) -> Cell {
    (p.x, p.y)
}

pub fn pt(c: Cell) -> RelativePoint {
    RelativePoint::new(c.0, c.1)
}

fn cross(o: Cell, a: Cell, b: Cell) -> i64 {
    ((a.0 - o.0) as i64) * ((b.1 - o.1) as i64) - ((a.1 - o.1) as i64) * ((b.0 - o.0) as i64)
}

/// Proper intersection of two segments (interiors cross at a single point).
fn segments_cross(a0: Cell, a1: Cell, b0: Cell, b1: Cell) -> bool {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    d1 * d2 < 0 && d3 * d4 < 0
}

fn manhattan(a: Cell, b: Cell) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

fn diagonal(a0: Cell, a1: Cell) -> bool {
    (a0.0 - a1.0).abs() == 1 && (a0.1 - a1.1).abs() == 1
}

/// Cells 4-adjacent to both ends of a diagonal move: the block's other corners.
fn is_side_corner(q: Cell, a0: Cell, a1: Cell) -> bool {
    q != a0 && q != a1 && manhattan(q, a0) == 1 && manhattan(q, a1) == 1
}

fn triangle_kind(a0: Cell, a1: Cell, b0: Cell, b1: Cell) -> Option<ConflictKind> {
    if !diagonal(a0, a1) {
        return None;
    }
    if !(is_side_corner(b0, a0, a1) || is_side_corner(b1, a0, a1)) {
        return None;
    }
    if b0 == b1 {
        Some(ConflictKind::SpecialEdge4)
    } else if b0.1 == b1.1 && (b0.0 - b1.0).abs() == 1 {
        Some(ConflictKind::SpecialEdge2)
    } else if b0.0 == b1.0 && (b0.1 - b1.1).abs() == 1 {
        Some(ConflictKind::SpecialEdge3)
    } else {
        None
    }
}

/// Every kind that applies to the interval `a0 -> a1` vs `b0 -> b1`,
/// unordered. A shared arrival cell is reported as a node conflict only.
pub fn interval_kinds(a0: Cell, a1: Cell, b0: Cell, b1: Cell) -> Vec<ConflictKind> {
    let mut out = Vec::new();
    if a1 == b1 {
        return out;
    }
    let swapped = a0 != a1 && a0 == b1 && b0 == a1;
    if swapped || segments_cross(a0, a1, b0, b1) {
        out.push(ConflictKind::Edge);
    }
    let a_follows = a1 == b0 && b0 != b1;
    let b_follows = b1 == a0 && a0 != a1;
    if !swapped && (a_follows || b_follows) {
        out.push(ConflictKind::SpecialEdge1);
    }
    out.extend(triangle_kind(a0, a1, b0, b1));
    out.extend(triangle_kind(b0, b1, a0, a1));
    out
}

/// (instant, vehicle i, vehicle j, kind) for every pair i < j, with the
/// kind being the highest-priority active one. Instants are 1-based time
/// points; interval conflicts are stamped with their arrival point.
pub fn brute_force_conflicts(
    rows: &[Vec<Cell>],
    active: &dyn Fn(ConflictKind) -> bool,
) -> Vec<(usize, usize, usize, ConflictKind)> {
    let mut out = Vec::new();
    let steps = rows[0].len();
    for t in 0..steps {
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if rows[i][t] == rows[j][t] {
                    out.push((t + 1, i, j, ConflictKind::Node));
                    continue;
                }
                if t == 0 {
                    continue;
                }
                let mut kinds =
                    interval_kinds(rows[i][t - 1], rows[i][t], rows[j][t - 1], rows[j][t]);
                kinds.sort();
                kinds.dedup();
                if let Some(k) = kinds.into_iter().find(|k| active(*k)) {
                    out.push((t + 1, i, j, k));
                }
            }
        }
    }
    out
}

/// True iff moving all vehicles from `prev` to `next` in one step is free of
/// every active conflict (node conflicts checked on `next`).
pub fn joint_step_ok(prev: &[Cell], next: &[Cell], active: &dyn Fn(ConflictKind) -> bool) -> bool {
    for i in 0..next.len() {
        for j in i + 1..next.len() {
            if next[i] == next[j] {
                return false;
            }
            if interval_kinds(prev[i], next[i], prev[j], next[j])
                .into_iter()
                .any(active)
            {
                return false;
            }
        }
    }
    true
}

fn moves(mode: MotionMode) -> Vec<(i32, i32)> {
    let mut m = vec![(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
    if mode == MotionMode::Mode2 {
        m.extend([(1, 1), (1, -1), (-1, 1), (-1, -1)]);
    }
    m
}

/// Minimum sum-of-costs over joint plans, where a vehicle pays one unit per
/// step until it settles on its goal for good. `None` if unreachable.
///
/// State: every vehicle's cell plus whether it has settled. A vehicle on its
/// goal may settle at any time; settled vehicles never move again and pay
/// nothing, but still take part in conflicts.
pub fn joint_optimum(
    lanes: i32,
    slots: i32,
    starts: &[Cell],
    goals: &[Cell],
    mode: MotionMode,
    active: &dyn Fn(ConflictKind) -> bool,
) -> Option<usize> {
    let n = starts.len();
    let inside = |c: Cell| c.0 >= 0 && c.0 < slots && c.1 >= 0 && c.1 < lanes;
    let offsets = moves(mode);
    type State = (Vec<Cell>, u32);
    let mut dist: HashMap<State, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start: State = (starts.to_vec(), 0);
    dist.insert(start.clone(), 0);
    heap.push(Reverse((0usize, start)));
    let all = (1u32 << n) - 1;
    while let Some(Reverse((d, (pos, settled)))) = heap.pop() {
        if dist
            .get(&(pos.clone(), settled))
            .is_some_and(|&best| best < d)
        {
            continue;
        }
        if settled == all {
            return Some(d);
        }
        // settle any subset of vehicles currently on their goals
        let can_settle: Vec<usize> = (0..n)
            .filter(|&i| settled & (1 << i) == 0 && pos[i] == goals[i])
            .collect();
        for mask in 0..(1u32 << can_settle.len()) {
            let mut s = settled;
            for (k, &i) in can_settle.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    s |= 1 << i;
                }
            }
            if s != settled {
                let key = (pos.clone(), s);
                if dist.get(&key).is_none_or(|&b| d < b) {
                    dist.insert(key.clone(), d);
                    heap.push(Reverse((d, key)));
                }
            }
        }
        // one joint step; settled vehicles hold
        let movers: Vec<usize> = (0..n).filter(|&i| settled & (1 << i) == 0).collect();
        let step_cost = movers.len();
        let mut choice = vec![0usize; movers.len()];
        loop {
            let mut next = pos.clone();
            let mut ok = true;
            for (k, &i) in movers.iter().enumerate() {
                let (dx, dy) = offsets[choice[k]];
                let c = (pos[i].0 + dx, pos[i].1 + dy);
                if !inside(c) {
                    ok = false;
                    break;
                }
                next[i] = c;
            }
            if ok && joint_step_ok(&pos, &next, active) {
                let key = (next, settled);
                let nd = d + step_cost;
                if dist.get(&key).is_none_or(|&b| nd < b) {
                    dist.insert(key.clone(), nd);
                    heap.push(Reverse((nd, key)));
                }
            }
            // advance the mixed-radix counter
            let mut k = 0;
            loop {
                if k == choice.len() {
                    break;
                }
                choice[k] += 1;
                if choice[k] < offsets.len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
    }
    None
}

pub fn all_kinds(_: ConflictKind) -> bool {
    true
}

/// Random distinct cells in a `lanes x slots` grid.
pub fn distinct_cells(rng: &mut impl Rng, lanes: i32, slots: i32, n: usize) -> Vec<Cell> {
    let mut cells: Vec<Cell> = (0..slots)
        .flat_map(|x| (0..lanes).map(move |y| (x, y)))
        .collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(0..cells.len());
        out.push(cells.swap_remove(k));
    }
    out
}

pub fn grid(lanes: i32, slots: i32) -> GridSpec {
    GridSpec::with_bounds(lanes as u32, slots as u32).unwrap()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
