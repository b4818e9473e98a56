//! Scenario parameters and their text format.
//!
//! ```text
//! formation-scenario 1
//! # key = value, anything omitted keeps its default
//! volume = 1600
//! method = fc
//! seed = 3
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const SCENARIO_HEADER: &str = "formation-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    FormationControl,
    RuleBased,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fc" | "formation" | "formation-control" => Some(Method::FormationControl),
            "rule" | "rule-based" | "rb" => Some(Method::RuleBased),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Method::FormationControl => "fc",
            Method::RuleBased => "rule",
        }
    }
}

/// One straight road of three segments: initialization, multi-lane driving,
/// lane sorting. Lengths in m, speeds in m/s, accelerations in m/s², times
/// in s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub l_1: f64,
    pub l_2: f64,
    pub l_3: f64,
    pub lane_count: u32,
    /// Vehicles per lane per hour.
    pub volume: f64,
    pub v_f: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub d_f: f64,
    pub t_f: f64,
    /// Standstill gap of the headway policy.
    pub d_0: f64,
    pub tau: f64,
    /// Distance to the road end below which unsorted vehicles stop.
    pub d_stop: f64,
    pub max_formation_size: usize,
    pub sim_duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub method: Method,
    pub vehicle_length: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            l_1: 50.0,
            l_2: 350.0,
            l_3: 600.0,
            lane_count: 3,
            volume: 1000.0,
            v_f: 15.0,
            v_min: 0.0,
            v_max: 25.0,
            a_min: -10.0,
            a_max: 5.0,
            d_f: 15.0,
            t_f: 4.0,
            d_0: 5.0,
            tau: 0.66,
            d_stop: 150.0,
            max_formation_size: 6,
            sim_duration: 600.0,
            tick: 0.1,
            seed: 1,
            method: Method::FormationControl,
            vehicle_length: 5.0,
        }
    }
}

/// `n` is a whole multiple of `unit` (to within rounding) and positive.
fn whole_multiple(n: f64, unit: f64) -> Option<usize> {
    let k = (n / unit).round();
    (k >= 1.0 && (k * unit - n).abs() < 1e-9 * n.abs().max(1.0)).then_some(k as usize)
}

impl Scenario {
    pub fn road_length(&self) -> f64 {
        self.l_1 + self.l_2 + self.l_3
    }

    /// Start of the lane-sorting segment.
    pub fn sorting_start(&self) -> f64 {
        self.l_1 + self.l_2
    }

    pub fn total_ticks(&self) -> usize {
        (self.sim_duration / self.tick).round() as usize
    }

    /// Ticks per relative step.
    pub fn step_ticks(&self) -> usize {
        whole_multiple(self.t_f, self.tick).expect("validated")
    }

    /// Ticks a formation needs to fall back one slot at formation speed.
    pub fn slot_ticks(&self) -> usize {
        whole_multiple(self.d_f / self.v_f, self.tick).expect("validated")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_1", self.l_1),
            ("l_2", self.l_2),
            ("l_3", self.l_3),
            ("v_F", self.v_f),
            ("d_F", self.d_f),
            ("T_F", self.t_f),
            ("tau", self.tau),
            ("tick", self.tick),
            ("sim_duration", self.sim_duration),
            ("vehicle_length", self.vehicle_length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lane_count == 0 {
            return Err(domain("need at least one lane"));
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(domain(format!("volume must be >= 0, got {}", self.volume)));
        }
        if self.volume / 3600.0 * self.tick > 1.0 {
            return Err(domain("volume too high for one arrival per lane per tick"));
        }
        if !(self.v_min >= 0.0 && self.v_min <= self.v_f && self.v_f <= self.v_max) {
            return Err(domain("speeds must satisfy 0 <= v_min <= v_F <= v_max"));
        }
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return Err(domain("need a_min < 0 < a_max"));
        }
        if !(self.d_0 >= 0.0 && self.d_stop > 0.0 && self.d_stop < self.l_3) {
            return Err(domain("need d_0 >= 0 and 0 < d_stop < l_3"));
        }
        if self.max_formation_size == 0 {
            return Err(domain("max_formation_size must be at least 1"));
        }
        if whole_multiple(self.t_f, self.tick).is_none() {
            return Err(domain("T_F must be a whole multiple of the tick"));
        }
        if whole_multiple(self.d_f / self.v_f, self.tick).is_none() {
            return Err(domain("d_F / v_F must be a whole multiple of the tick"));
        }
        if self.d_f <= self.vehicle_length {
            return Err(domain("d_F must exceed the vehicle length"));
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a scenario file; omitted keys keep the defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut s = Scenario::default();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !header_seen {
            let mut toks = content.split_whitespace();
            if toks.next() != Some(SCENARIO_HEADER) {
                return Err(parse_err(
                    line,
                    format!("expected '{SCENARIO_HEADER} {SCENARIO_VERSION}' header"),
                ));
            }
            match toks.next().map(str::parse::<u32>) {
                Some(Ok(SCENARIO_VERSION)) => {}
                _ => return Err(parse_err(line, "unsupported scenario version")),
            }
            header_seen = true;
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad number '{value}' for {key}")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| parse_err(line, format!("bad integer '{value}' for {key}")))
        };
        match key {
            "l1" | "l_1" => s.l_1 = num()?,
            "l2" | "l_2" => s.l_2 = num()?,
            "l3" | "l_3" => s.l_3 = num()?,
            "lanes" | "lane_count" => s.lane_count = int()? as u32,
            "volume" => s.volume = num()?,
            "v_f" => s.v_f = num()?,
            "v_min" => s.v_min = num()?,
            "v_max" => s.v_max = num()?,
            "a_min" => s.a_min = num()?,
            "a_max" => s.a_max = num()?,
            "d_f" => s.d_f = num()?,
            "t_f" => s.t_f = num()?,
            "d_0" | "d_r" => s.d_0 = num()?,
            "tau" => s.tau = num()?,
            "d_stop" | "d_end" => s.d_stop = num()?,
            "max_formation_size" => s.max_formation_size = int()? as usize,
            "duration" | "sim_duration" => s.sim_duration = num()?,
            "tick" => s.tick = num()?,
            "seed" => s.seed = int()?,
            "vehicle_length" => s.vehicle_length = num()?,
            "method" => {
                s.method = Method::parse(value)
                    .ok_or_else(|| parse_err(line, format!("unknown method '{value}'")))?
            }
            other => return Err(parse_err(line, format!("unknown key '{other}'"))),
        }
    }
    if !header_seen {
        return Err(parse_err(
            text.lines().count().max(1),
            "empty scenario file",
        ));
    }
    s.validate()?;
    Ok(s)
}

pub fn write_scenario(s: &Scenario) -> String {
    let mut out = format!("{SCENARIO_HEADER} {SCENARIO_VERSION}\n");
    let fields: [(&str, String); 21] = [
        ("l1", s.l_1.to_string()),
        ("l2", s.l_2.to_string()),
        ("l3", s.l_3.to_string()),
        ("lanes", s.lane_count.to_string()),
        ("volume", s.volume.to_string()),
        ("v_f", s.v_f.to_string()),
        ("v_min", s.v_min.to_string()),
        ("v_max", s.v_max.to_string()),
        ("a_min", s.a_min.to_string()),
        ("a_max", s.a_max.to_string()),
        ("d_f", s.d_f.to_string()),
        ("t_f", s.t_f.to_string()),
        ("d_0", s.d_0.to_string()),
        ("tau", s.tau.to_string()),
        ("d_stop", s.d_stop.to_string()),
        ("max_formation_size", s.max_formation_size.to_string()),
        ("duration", s.sim_duration.to_string()),
        ("tick", s.tick.to_string()),
        ("seed", s.seed.to_string()),
        ("method", s.method.short_name().to_string()),
        ("vehicle_length", s.vehicle_length.to_string()),
    ];
    for (k, v) in fields {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(s.road_length(), 1000.0);
        assert_eq!((s.step_ticks(), s.slot_ticks()), (40, 10));
        assert_eq!(parse_scenario(&write_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn parses_overrides() {
        let s = parse_scenario(
            "formation-scenario 1\n# comment\nvolume = 1600\nmethod = rule\nd_end = 120\n",
        )
        .unwrap();
        assert_eq!(s.volume, 1600.0);
        assert_eq!(s.method, Method::RuleBased);
        assert_eq!(s.d_stop, 120.0);
        assert_eq!(s.l_3, 600.0);
    }

    #[test]
    fn reports_bad_lines() {
        let err = parse_scenario("formation-scenario 1\nvolume = fast\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_scenario("formation-scenario 1\nspeed = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_scenario("volume = 3\n").is_err());
        assert!(matches!(
            parse_scenario("formation-scenario 1\nt_f = 4.05\n"),
            Err(Error::Domain(_))
        ));
    }
}
