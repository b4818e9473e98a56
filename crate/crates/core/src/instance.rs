//! Line-oriented planning instance files.
//!
//! ```text
//! formation-instance 1
//! # lanes slots
//! grid 3 8
//! mode 2
//! special 1,2,3,4
//! # x y preference
//! vehicle 0 0 1
//! # x y [label], label defaults to the target's lane
//! target 1 0 1
//! ```
//!
//! Blank lines and `#` comments are ignored. `grid` defaults to
//! `vehicles + lanes` slots over the lanes used, `mode` to 1 and `special` to
//! the mode's default set.

use crate::cbs::{Branching, PlannerConfig};
use crate::conflict::ConflictConfig;
use crate::error::{Error, Result};
use crate::rcs::{GridSpec, MotionMode, RelativePoint};
use crate::tappa::Instance;

pub const INSTANCE_HEADER: &str = "formation-instance";
pub const INSTANCE_VERSION: u32 = 1;

/// An instance plus the planner settings it asks for.
#[derive(Debug, Clone)]
pub struct PlanFile {
    pub instance: Instance,
    pub planner: PlannerConfig,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

/// Comma- or space-separated special edge types; `none` for the empty set.
pub fn parse_special_list(s: &str) -> Option<Vec<u8>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Some(Vec::new());
    }
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok().filter(|v| (1..=4).contains(v)))
        .collect()
}

pub fn parse_instance(text: &str) -> Result<PlanFile> {
    let mut header_seen = false;
    let mut grid: Option<(u32, u32)> = None;
    let mut mode = MotionMode::Mode1;
    let mut special: Option<Vec<u8>> = None;
    let mut branching = Branching::PerConflict;
    let mut horizon = None;
    let mut vehicles: Vec<(RelativePoint, u32)> = Vec::new();
    let mut targets: Vec<(RelativePoint, Option<u32>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().expect("non-empty line");
        if !header_seen {
            if key != INSTANCE_HEADER {
                return Err(parse_err(
                    line,
                    format!("expected '{INSTANCE_HEADER} {INSTANCE_VERSION}' header"),
                ));
            }
            let version: u32 = num(line, toks.next(), "version")?;
            if version != INSTANCE_VERSION {
                return Err(parse_err(line, format!("unsupported version {version}")));
            }
            header_seen = true;
            continue;
        }
        match key {
            "grid" => {
                grid = Some((
                    num(line, toks.next(), "lane count")?,
                    num(line, toks.next(), "slot count")?,
                ))
            }
            "mode" => {
                let tok = toks.next().unwrap_or("");
                mode = MotionMode::parse(tok)
                    .ok_or_else(|| parse_err(line, format!("bad mode '{tok}'")))?;
            }
            "special" => {
                let rest: Vec<&str> = toks.by_ref().collect();
                special = Some(
                    parse_special_list(&rest.join(" "))
                        .ok_or_else(|| parse_err(line, "special types must be in 1..=4"))?,
                );
            }
            "branching" => {
                branching = match toks.next() {
                    Some("per-conflict") => Branching::PerConflict,
                    Some("first-pair") => Branching::FirstPair,
                    other => return Err(parse_err(line, format!("bad branching {other:?}"))),
                }
            }
            "horizon" => horizon = Some(num(line, toks.next(), "horizon")?),
            "vehicle" => {
                let x = num(line, toks.next(), "x")?;
                let y = num(line, toks.next(), "y")?;
                let pref = num(line, toks.next(), "preference")?;
                vehicles.push((RelativePoint::new(x, y), pref));
            }
            "target" => {
                let x = num(line, toks.next(), "x")?;
                let y = num(line, toks.next(), "y")?;
                let label = match toks.next() {
                    Some(t) => Some(num(line, Some(t), "label")?),
                    None => None,
                };
                targets.push((RelativePoint::new(x, y), label));
            }
            other => return Err(parse_err(line, format!("unknown key '{other}'"))),
        }
        if let Some(extra) = toks.next() {
            return Err(parse_err(line, format!("unexpected token '{extra}'")));
        }
    }

    let last = text.lines().count().max(1);
    if !header_seen {
        return Err(parse_err(last, "empty instance file"));
    }
    if vehicles.is_empty() {
        return Err(parse_err(last, "no vehicles"));
    }
    if vehicles.len() != targets.len() {
        return Err(parse_err(
            last,
            format!("{} vehicles but {} targets", vehicles.len(), targets.len()),
        ));
    }
    let (lanes, slots) = match grid {
        Some(g) => g,
        None => {
            let pts = vehicles
                .iter()
                .map(|v| v.0)
                .chain(targets.iter().map(|t| t.0));
            let lanes = pts.map(|p| p.y.max(0) as u32 + 1).max().unwrap_or(1);
            let slots = vehicles.len() as u32 + lanes;
            (lanes, slots)
        }
    };
    let grid = GridSpec::with_bounds(lanes, slots)?;
    let conflicts = match special {
        Some(types) => ConflictConfig::with_special(mode, &types).expect("validated while parsing"),
        None => ConflictConfig::for_mode(mode),
    };
    let mut planner = PlannerConfig::new(conflicts);
    planner.branching = branching;
    planner.horizon = horizon;

    Ok(PlanFile {
        instance: Instance {
            grid,
            starts: vehicles.iter().map(|v| v.0).collect(),
            vehicle_pref_lanes: vehicles.iter().map(|v| v.1).collect(),
            target_lanes: targets
                .iter()
                .map(|t| t.1.unwrap_or(t.0.y as u32))
                .collect(),
            targets: targets.into_iter().map(|t| t.0).collect(),
        },
        planner,
    })
}

/// Serializes an instance in the format [`parse_instance`] reads.
pub fn write_instance(file: &PlanFile) -> String {
    let inst = &file.instance;
    let mut out = format!("{INSTANCE_HEADER} {INSTANCE_VERSION}\n");
    out.push_str(&format!(
        "grid {} {}\n",
        inst.grid.lane_count, inst.grid.slot_count
    ));
    let mode = match file.planner.mode() {
        MotionMode::Mode1 => 1,
        MotionMode::Mode2 => 2,
    };
    out.push_str(&format!("mode {mode}\n"));
    let special = file.planner.conflicts.special_types();
    if special.is_empty() {
        out.push_str("special none\n");
    } else {
        let list: Vec<String> = special.iter().map(ToString::to_string).collect();
        out.push_str(&format!("special {}\n", list.join(",")));
    }
    if file.planner.branching == Branching::FirstPair {
        out.push_str("branching first-pair\n");
    }
    if let Some(h) = file.planner.horizon {
        out.push_str(&format!("horizon {h}\n"));
    }
    for (p, pref) in inst.starts.iter().zip(&inst.vehicle_pref_lanes) {
        out.push_str(&format!("vehicle {} {} {pref}\n", p.x, p.y));
    }
    for (p, label) in inst.targets.iter().zip(&inst.target_lanes) {
        out.push_str(&format!("target {} {} {label}\n", p.x, p.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two vehicles trading lanes
formation-instance 1
grid 2 4
mode 2
special 1, 3
vehicle 0 0 1
vehicle 0 1 0   # wants lane 0
target 1 0
target 1 1
";

    #[test]
    fn parses_sample() {
        let f = parse_instance(SAMPLE).unwrap();
        assert_eq!(
            f.instance.starts,
            vec![RelativePoint::new(0, 0), RelativePoint::new(0, 1)]
        );
        assert_eq!(f.instance.vehicle_pref_lanes, vec![1, 0]);
        assert_eq!(f.instance.target_lanes, vec![0, 1]);
        assert_eq!(f.planner.mode(), MotionMode::Mode2);
        assert_eq!(f.planner.conflicts.special_types(), vec![1, 3]);
        assert_eq!(f.instance.grid.slot_count, 4);
    }

    #[test]
    fn round_trips() {
        let f = parse_instance(SAMPLE).unwrap();
        let again = parse_instance(&write_instance(&f)).unwrap();
        assert_eq!(again.instance.starts, f.instance.starts);
        assert_eq!(again.instance.targets, f.instance.targets);
        assert_eq!(again.instance.target_lanes, f.instance.target_lanes);
        assert_eq!(again.planner, f.planner);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_instance("formation-instance 1\nvehicle 0 x 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                msg: "bad y 'x'".into()
            }
        );
        let err = parse_instance("nope\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_instance("formation-instance 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_instance("formation-instance 1\nspecial 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_instance("formation-instance 1\nvehicle 0 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_instance("formation-instance 1\nmode 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn default_grid() {
        let f = parse_instance("formation-instance 1\nvehicle 0 0 0\ntarget 2 2\n").unwrap();
        assert_eq!(
            (f.instance.grid.lane_count, f.instance.grid.slot_count),
            (3, 4)
        );
        assert_eq!(f.planner.conflicts.special_types(), vec![1]);
    }
}
