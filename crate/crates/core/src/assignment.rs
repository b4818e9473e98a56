//! Vehicle-to-target assignment in the relative grid.
//!
//! Costs are formation relative distances (FRD): a weighted count of the
//! oblique and straight edges needed to reach a target. Lane preference
//! enters multiplicatively through a big-M preference matrix. Assignments
//! are enumerated lazily in non-decreasing cost order by partitioning the
//! solution space (Murty) and re-solving each part with the Hungarian method.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rcs::RelativePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    /// Weight of a straight (longitudinal or lateral) edge.
    pub straight: f64,
    /// Weight of an oblique edge.
    pub oblique: f64,
}

impl Default for EdgeWeights {
    fn default() -> Self {
        Self {
            straight: 1.0,
            oblique: 1.0,
        }
    }
}

/// Formation relative distance between two cells.
pub fn frd(a: RelativePoint, b: RelativePoint, w: EdgeWeights) -> f64 {
    let (dx, dy) = a.delta(b);
    let oblique = dx.min(dy);
    let straight = dx.max(dy) - oblique;
    w.oblique * oblique as f64 + w.straight * straight as f64
}

/// Dense square matrix of non-negative costs, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(domain("cost matrix must be at least 1x1"));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(domain("costs must be finite and non-negative"));
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Sum of the entries selected by `targets` (row `i` picks column `targets[i]`).
    pub fn total(&self, targets: &[usize]) -> f64 {
        targets
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }

    /// Entrywise product with a preference matrix: the objective's `c * p`.
    pub fn masked(&self, pref: &PreferenceMatrix) -> Result<Self> {
        if pref.n != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: pref.n,
            });
        }
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&pref.data)
                .map(|(c, p)| c * p)
                .collect(),
        })
    }
}

pub fn build_cost_matrix(
    vehicles: &[RelativePoint],
    targets: &[RelativePoint],
    w: EdgeWeights,
) -> Result<CostMatrix> {
    if vehicles.len() != targets.len() {
        return Err(Error::SizeMismatch {
            expected: vehicles.len(),
            actual: targets.len(),
        });
    }
    CostMatrix::from_rows(
        vehicles
            .iter()
            .map(|v| targets.iter().map(|t| frd(*v, *t, w)).collect())
            .collect(),
    )
}

/// Eligibility matrix: 1 where a vehicle may take a target, `M` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    n: usize,
    data: Vec<f64>,
    big_m: f64,
}

impl PreferenceMatrix {
    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j] == 1.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Smallest integer penalty strictly above `N * max cost`, and at least 2.
pub fn default_big_m(cost: &CostMatrix) -> f64 {
    (cost.dim() as f64 * cost.max_entry() + 1.0).max(2.0)
}

/// A vehicle may take a target iff its preferred lane equals the target's lane.
pub fn build_preference_matrix(
    vehicle_pref_lanes: &[u32],
    target_lanes: &[u32],
    big_m: f64,
) -> Result<PreferenceMatrix> {
    if vehicle_pref_lanes.len() != target_lanes.len() {
        return Err(Error::SizeMismatch {
            expected: vehicle_pref_lanes.len(),
            actual: target_lanes.len(),
        });
    }
    if vehicle_pref_lanes.is_empty() {
        return Err(domain("preference matrix must be at least 1x1"));
    }
    if !(big_m.is_finite() && big_m > 1.0) {
        return Err(domain(format!(
            "penalty M must be finite and > 1, got {big_m}"
        )));
    }
    let data = vehicle_pref_lanes
        .iter()
        .flat_map(|p| {
            target_lanes
                .iter()
                .map(move |t| if p == t { 1.0 } else { big_m })
        })
        .collect();
    Ok(PreferenceMatrix {
        n: vehicle_pref_lanes.len(),
        data,
        big_m,
    })
}

/// `targets[i]` is the 0-based target index of vehicle `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub targets: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    /// The assignment vector with 1-based target ids.
    pub fn one_based(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t + 1).collect()
    }
}

fn tolerance(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

/// Square matrix with some entries excluded from the feasible set.
#[derive(Debug, Clone)]
struct Subproblem {
    allowed: Vec<bool>,
}

impl Subproblem {
    fn full(n: usize) -> Self {
        Self {
            allowed: vec![true; n * n],
        }
    }

    fn forbid(&mut self, n: usize, i: usize, j: usize) {
        self.allowed[i * n + j] = false;
    }

    /// Forces row `i` onto column `j`.
    fn fix(&mut self, n: usize, i: usize, j: usize) {
        for k in 0..n {
            if k != j {
                self.allowed[i * n + k] = false;
            }
            if k != i {
                self.allowed[k * n + j] = false;
            }
        }
    }
}

/// Minimum-cost perfect matching over the allowed entries (Hungarian method
/// with potentials, O(n^3)). `None` if no perfect matching exists.
fn hungarian(cost: &CostMatrix, sub: &Subproblem) -> Option<Vec<usize>> {
    let n = cost.dim();
    // A forbidden entry must be worse than any complete allowed matching.
    let sentinel = 2.0 * n as f64 * (cost.max_entry() + 1.0) + 1.0;
    let at = |i: usize, j: usize| {
        if sub.allowed[i * n + j] {
            cost.get(i, j)
        } else {
            sentinel
        }
    };

    // 1-based arrays; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut targets = vec![0usize; n];
    for j in 1..=n {
        targets[row_of[j] - 1] = j - 1;
    }
    targets
        .iter()
        .enumerate()
        .all(|(i, &j)| sub.allowed[i * n + j])
        .then_some(targets)
}

/// Optimal matching in `sub` with ties broken towards the lexicographically
/// smallest assignment vector.
fn lex_min_optimal(cost: &CostMatrix, sub: &Subproblem) -> Option<Assignment> {
    let n = cost.dim();
    let best = cost.total(&hungarian(cost, sub)?);
    let eps = tolerance(best);
    let mut fixed = sub.clone();
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let mut chosen = None;
        for j in (0..n).filter(|&j| fixed.allowed[i * n + j]) {
            let mut trial = fixed.clone();
            trial.fix(n, i, j);
            if let Some(t) = hungarian(cost, &trial) {
                if cost.total(&t) <= best + eps {
                    chosen = Some((j, trial));
                    break;
                }
            }
        }
        let (j, trial) = chosen.expect("an optimal completion exists");
        targets.push(j);
        fixed = trial;
    }
    let total = cost.total(&targets);
    Some(Assignment {
        targets,
        cost: total,
    })
}

/// Minimum-cost assignment for a square cost matrix.
///
/// Among equal-cost optima the lexicographically smallest vector is returned.
pub fn optimal_assignment(cost: &CostMatrix) -> Assignment {
    lex_min_optimal(cost, &Subproblem::full(cost.dim()))
        .expect("an unrestricted square matrix always has a perfect matching")
}

struct Candidate {
    assignment: Assignment,
    sub: Subproblem,
}

impl Candidate {
    fn key(&self) -> (f64, &[usize]) {
        (self.assignment.cost, &self.assignment.targets)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        let (ca, ta) = self.key();
        let (cb, tb) = other.key();
        cb.total_cmp(&ca).then_with(|| tb.cmp(ta))
    }
}

/// Lazily yields every assignment in non-decreasing cost order, ties in
/// lexicographic order of the assignment vector.
pub struct AssignmentStream {
    cost: CostMatrix,
    queue: BinaryHeap<Candidate>,
}

impl AssignmentStream {
    pub fn new(cost: CostMatrix) -> Self {
        let sub = Subproblem::full(cost.dim());
        let mut queue = BinaryHeap::new();
        if let Some(assignment) = lex_min_optimal(&cost, &sub) {
            queue.push(Candidate { assignment, sub });
        }
        Self { cost, queue }
    }

    pub fn cost_matrix(&self) -> &CostMatrix {
        &self.cost
    }
}

impl Iterator for AssignmentStream {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let Candidate { assignment, sub } = self.queue.pop()?;
        let n = self.cost.dim();
        // Partition the rest of `sub`: child k agrees with the popped solution
        // on rows 0..k and differs from it on row k.
        let mut prefix = sub;
        for (k, &j) in assignment.targets.iter().enumerate() {
            let mut child = prefix.clone();
            child.forbid(n, k, j);
            if let Some(next) = lex_min_optimal(&self.cost, &child) {
                self.queue.push(Candidate {
                    assignment: next,
                    sub: child,
                });
            }
            prefix.fix(n, k, j);
        }
        Some(assignment)
    }
}

pub fn assignment_stream(cost: CostMatrix) -> AssignmentStream {
    AssignmentStream::new(cost)
}

/// Cost and preference matrices for one group of vehicles and targets.
#[derive(Debug, Clone)]
pub struct AssignmentProblem {
    pub cost: CostMatrix,
    pub preference: PreferenceMatrix,
}

impl AssignmentProblem {
    /// FRD costs plus lane preferences, with the default penalty `M`.
    pub fn new(
        vehicles: &[RelativePoint],
        targets: &[RelativePoint],
        vehicle_pref_lanes: &[u32],
        target_lanes: &[u32],
        weights: EdgeWeights,
    ) -> Result<Self> {
        if vehicle_pref_lanes.len() != vehicles.len() {
            return Err(Error::SizeMismatch {
                expected: vehicles.len(),
                actual: vehicle_pref_lanes.len(),
            });
        }
        let cost = build_cost_matrix(vehicles, targets, weights)?;
        let preference =
            build_preference_matrix(vehicle_pref_lanes, target_lanes, default_big_m(&cost))?;
        Ok(Self { cost, preference })
    }

    pub fn effective(&self) -> CostMatrix {
        self.cost
            .masked(&self.preference)
            .expect("dimensions checked at construction")
    }

    /// True iff every matched pair is eligible. A cost at or above `M` can
    /// only come from an ineligible pair; a zero-cost ineligible pair is not
    /// penalized by the product, so the entries are checked directly too.
    pub fn respects_preference(&self, a: &Assignment) -> bool {
        a.cost < self.preference.big_m()
            && a.targets
                .iter()
                .enumerate()
                .all(|(i, &j)| self.preference.allows(i, j))
    }

    /// Best assignment that honours every preference.
    pub fn solve(&self) -> Result<Assignment> {
        self.feasible_stream()
            .next()
            .ok_or(Error::PreferenceInfeasible)
    }

    /// Preference-respecting assignments in non-decreasing cost order. Ends
    /// as soon as the masked cost reaches `M`.
    pub fn feasible_stream(&self) -> impl Iterator<Item = Assignment> + '_ {
        let big_m = self.preference.big_m();
        AssignmentStream::new(self.effective())
            .take_while(move |a| a.cost < big_m)
            .filter(move |a| self.respects_preference(a))
    }
}
