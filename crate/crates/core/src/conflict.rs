//! Conflict taxonomy over relative path maps and the constraints derived
//! from it.
//!
//! Steps are 1-based time points. A node conflict carries the time point at
//! which two vehicles share a cell; edge-kind conflicts carry the time point
//! at which the vehicles start the offending transition. A pairwise
//! interaction between vehicles `a` and `b` yields one record per vehicle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rcs::{MotionMode, RelativePathMap, RelativePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConflictKind {
    /// Two vehicles occupy one cell at one time point.
    Node,
    /// Two transitions swap cells or cross within one interval.
    Edge,
    /// A vehicle enters the cell another vehicle is leaving.
    SpecialEdge1,
    /// An oblique step and a longitudinal step meet in one 2x2 block.
    SpecialEdge2,
    /// An oblique step and a lateral step meet in one 2x2 block.
    SpecialEdge3,
    /// An oblique step cuts the corner next to a stationary vehicle.
    SpecialEdge4,
}

impl ConflictKind {
    pub const ALL: [ConflictKind; 6] = [
        ConflictKind::Node,
        ConflictKind::Edge,
        ConflictKind::SpecialEdge1,
        ConflictKind::SpecialEdge2,
        ConflictKind::SpecialEdge3,
        ConflictKind::SpecialEdge4,
    ];

    /// 1..=4 for special edge kinds.
    pub fn special_type(self) -> Option<u8> {
        match self {
            ConflictKind::SpecialEdge1 => Some(1),
            ConflictKind::SpecialEdge2 => Some(2),
            ConflictKind::SpecialEdge3 => Some(3),
            ConflictKind::SpecialEdge4 => Some(4),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ConflictKind::Node => "N",
            ConflictKind::Edge => "E",
            ConflictKind::SpecialEdge1 => "S1",
            ConflictKind::SpecialEdge2 => "S2",
            ConflictKind::SpecialEdge3 => "S3",
            ConflictKind::SpecialEdge4 => "S4",
        }
    }
}

/// Which special edge conflicts are checked. Node and edge conflicts always are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictConfig {
    pub mode: MotionMode,
    special: [bool; 4],
}

impl ConflictConfig {
    /// Mode 1 checks type 1 only; mode 2 checks all four types.
    pub fn for_mode(mode: MotionMode) -> Self {
        let special = match mode {
            MotionMode::Mode1 => [true, false, false, false],
            MotionMode::Mode2 => [true; 4],
        };
        Self { mode, special }
    }

    /// Explicit set of special types (each in 1..=4).
    pub fn with_special(mode: MotionMode, types: &[u8]) -> Option<Self> {
        let mut special = [false; 4];
        for &t in types {
            *special.get_mut(usize::from(t).checked_sub(1)?)? = true;
        }
        Some(Self { mode, special })
    }

    pub fn all_kinds(mode: MotionMode) -> Self {
        Self {
            mode,
            special: [true; 4],
        }
    }

    pub fn is_active(&self, kind: ConflictKind) -> bool {
        kind.special_type()
            .is_none_or(|t| self.special[usize::from(t) - 1])
    }

    pub fn special_types(&self) -> Vec<u8> {
        (1..=4)
            .filter(|t| self.special[usize::from(*t) - 1])
            .collect()
    }
}

impl Default for ConflictConfig {
    fn default() -> Self {
        Self::for_mode(MotionMode::Mode1)
    }
}

/// What a vehicle was doing when it took part in a conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Motion {
    /// Being at a cell at a time point.
    Node(RelativePoint),
    /// Travelling from one cell to another; `from == to` is holding position.
    Edge(RelativePoint, RelativePoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    /// Row index in the path map.
    pub vehicle: usize,
    /// The other vehicle of the interaction.
    pub other: usize,
    pub step: usize,
    pub motion: Motion,
}

impl Conflict {
    /// Time point at which the conflict materializes: the node's own time
    /// point, or the arrival time point of an edge.
    pub fn instant(&self) -> usize {
        match self.motion {
            Motion::Node(_) => self.step,
            Motion::Edge(..) => self.step + 1,
        }
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.motion {
            Motion::Node(p) => write!(
                f,
                "{{{}|{p}, step {}, id {}}}",
                self.kind.short_name(),
                self.step,
                self.vehicle + 1
            ),
            Motion::Edge(a, b) => write!(
                f,
                "{{{}|{a}, {b}, step {}, id {}}}",
                self.kind.short_name(),
                self.step,
                self.vehicle + 1
            ),
        }
    }
}

/// Forbids one vehicle one motion at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    /// Not at `point` at time point `step`.
    Vertex {
        vehicle: usize,
        point: RelativePoint,
        step: usize,
    },
    /// Not travelling `from -> to` between time points `step` and `step + 1`.
    /// With `from == to` this forbids holding position at `from`.
    Edge {
        vehicle: usize,
        from: RelativePoint,
        to: RelativePoint,
        step: usize,
    },
}

impl Constraint {
    pub fn vehicle(&self) -> usize {
        match *self {
            Constraint::Vertex { vehicle, .. } | Constraint::Edge { vehicle, .. } => vehicle,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Constraint::Vertex {
                vehicle,
                point,
                step,
            } => {
                write!(f, "{{N|{point}, step {step}, id {}}}", vehicle + 1)
            }
            Constraint::Edge {
                vehicle,
                from,
                to,
                step,
            } => write!(f, "{{E|{from}, {to}, step {step}, id {}}}", vehicle + 1),
        }
    }
}

/// The constraint that forbids exactly the motion recorded in `c`.
pub fn constraint_from_conflict(c: &Conflict) -> Constraint {
    match c.motion {
        Motion::Node(point) => Constraint::Vertex {
            vehicle: c.vehicle,
            point,
            step: c.step,
        },
        Motion::Edge(from, to) => Constraint::Edge {
            vehicle: c.vehicle,
            from,
            to,
            step: c.step,
        },
    }
}

fn is_oblique(from: RelativePoint, to: RelativePoint) -> bool {
    let (dx, dy) = from.delta(to);
    dx == 1 && dy == 1
}

/// Special-edge kind for an oblique step `a0 -> a1` against the other
/// vehicle's transition `b0 -> b1`: the other vehicle starts or ends on one
/// of the two remaining corners of the oblique step's 2x2 block.
fn corner_kind(
    (a0, a1): (RelativePoint, RelativePoint),
    (b0, b1): (RelativePoint, RelativePoint),
) -> Option<ConflictKind> {
    if !is_oblique(a0, a1) {
        return None;
    }
    let corners = [
        RelativePoint::new(a1.x, a0.y),
        RelativePoint::new(a0.x, a1.y),
    ];
    if !(corners.contains(&b0) || corners.contains(&b1)) {
        return None;
    }
    match b0.delta(b1) {
        (0, 0) => Some(ConflictKind::SpecialEdge4),
        (1, 0) => Some(ConflictKind::SpecialEdge2),
        (0, 1) => Some(ConflictKind::SpecialEdge3),
        _ => None,
    }
}

/// Highest-priority active kind describing the interval interaction of two
/// transitions. Sharing the arrival cell is a node conflict and is not
/// classified here.
fn interval_kind(
    a: (RelativePoint, RelativePoint),
    b: (RelativePoint, RelativePoint),
    cfg: &ConflictConfig,
) -> Option<ConflictKind> {
    let (a0, a1) = a;
    let (b0, b1) = b;
    if a1 == b1 {
        return None;
    }
    // transitions more than one cell apart cannot touch
    let (dx, dy) = a0.delta(b0);
    if dx > 2 || dy > 2 {
        return None;
    }
    let swap = a0 != a1 && a0 == b1 && a1 == b0;
    let cross = is_oblique(a0, a1)
        && is_oblique(b0, b1)
        && a0.x + a1.x == b0.x + b1.x
        && a0.y + a1.y == b0.y + b1.y;
    if swap || cross {
        return Some(ConflictKind::Edge);
    }
    let a_moves = a0 != a1;
    let b_moves = b0 != b1;
    if ((a1 == b0 && b_moves) || (b1 == a0 && a_moves)) && cfg.is_active(ConflictKind::SpecialEdge1)
    {
        return Some(ConflictKind::SpecialEdge1);
    }
    [corner_kind(a, b), corner_kind(b, a)]
        .into_iter()
        .flatten()
        .filter(|k| cfg.is_active(*k))
        .min()
}

/// The kind of conflict, if any, between two simultaneous transitions.
pub fn pair_conflict(
    a: (RelativePoint, RelativePoint),
    b: (RelativePoint, RelativePoint),
    cfg: &ConflictConfig,
) -> Option<ConflictKind> {
    if a.1 == b.1 {
        return Some(ConflictKind::Node);
    }
    interval_kind(a, b, cfg)
}

fn interaction_records(
    kind: ConflictKind,
    (i, j): (usize, usize),
    step: usize,
    motions: (Motion, Motion),
) -> [Conflict; 2] {
    [
        Conflict {
            kind,
            vehicle: i,
            other: j,
            step,
            motion: motions.0,
        },
        Conflict {
            kind,
            vehicle: j,
            other: i,
            step,
            motion: motions.1,
        },
    ]
}

/// All conflicts that materialize at time point `instant` (1-based): node
/// conflicts at that point and interval conflicts on the transition into it.
fn conflicts_at(map: &RelativePathMap, cfg: &ConflictConfig, instant: usize) -> Vec<Conflict> {
    let n = map.vehicle_count();
    let t = instant - 1;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if map.at(i, t) == map.at(j, t) {
                let cell = Motion::Node(map.at(i, t));
                nodes.extend(interaction_records(
                    ConflictKind::Node,
                    (i, j),
                    instant,
                    (cell, cell),
                ));
                continue;
            }
            if t == 0 {
                continue;
            }
            let a = (map.at(i, t - 1), map.at(i, t));
            let b = (map.at(j, t - 1), map.at(j, t));
            if let Some(kind) = interval_kind(a, b, cfg) {
                edges.extend(interaction_records(
                    kind,
                    (i, j),
                    instant - 1,
                    (Motion::Edge(a.0, a.1), Motion::Edge(b.0, b.1)),
                ));
            }
        }
    }
    nodes.extend(edges);
    nodes
}

/// Every conflict at the earliest time point where any exists. Empty iff the
/// map is conflict-free under `cfg`.
pub fn detect_conflicts(map: &RelativePathMap, cfg: &ConflictConfig) -> Vec<Conflict> {
    (1..=map.step_count())
        .map(|instant| conflicts_at(map, cfg, instant))
        .find(|c| !c.is_empty())
        .unwrap_or_default()
}

/// Every conflict at every time point.
pub fn detect_all_conflicts(map: &RelativePathMap, cfg: &ConflictConfig) -> Vec<Conflict> {
    (1..=map.step_count())
        .flat_map(|instant| conflicts_at(map, cfg, instant))
        .collect()
}
