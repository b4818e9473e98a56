//! Rule-based baseline: keep lane and speed until the sorting segment, then
//! change lanes whenever headway gaps allow, slowing down (and finally
//! stopping) while still on the wrong lane.

use super::*;

/// Margin kept between stopping points, m.
const STOP_MARGIN: f64 = 1.0;
/// Duration of the lateral part of a lane change, s.
const LANE_CHANGE_TIME: f64 = 2.0;

struct Car {
    st: VehicleState,
    /// Ticks left in the current lane change.
    changing: usize,
}

impl Car {
    fn target_lane(&self) -> Option<u32> {
        let (lane, pref) = (self.st.lane, self.st.preferred_lane);
        match lane.cmp(&pref) {
            std::cmp::Ordering::Less => Some(lane + 1),
            std::cmp::Ordering::Greater => Some(lane - 1),
            std::cmp::Ordering::Equal => None,
        }
    }
}

struct Rules<'a> {
    s: &'a Scenario,
    b: f64,
}

impl Rules<'_> {
    /// Where a vehicle would come to rest under full braking.
    fn stop_point(&self, x: f64, v: f64) -> f64 {
        x + v * v / (2.0 * self.b)
    }

    /// Follower at (`xf`, `vf`) can still stop behind a leader at (`xl`, `vl`).
    fn stop_safe(&self, xf: f64, vf: f64, xl: f64, vl: f64) -> bool {
        self.stop_point(xf, vf) <= self.stop_point(xl, vl) - self.s.vehicle_length - STOP_MARGIN
    }

    /// Both headway gaps to `lane` are acceptable for a car at (`x`, `v`).
    fn gap_ok(&self, cars: &[Car], me: usize, lane: u32, x: f64, v: f64) -> bool {
        let len = self.s.vehicle_length;
        let mut leader: Option<&VehicleState> = None;
        let mut follower: Option<&VehicleState> = None;
        for c in cars.iter().filter(|c| c.st.id != me && c.st.occupies(lane)) {
            if c.st.x >= x {
                if leader.is_none_or(|l| c.st.x < l.x) {
                    leader = Some(&c.st);
                }
            } else if follower.is_none_or(|f| c.st.x > f.x) {
                follower = Some(&c.st);
            }
        }
        if let Some(l) = leader {
            if l.x - len - x < cth_gap(v, self.s.d_0, self.s.tau)
                || !self.stop_safe(x, v, l.x, l.speed)
            {
                return false;
            }
        }
        if let Some(f) = follower {
            if x - len - f.x < cth_gap(f.speed, self.s.d_0, self.s.tau)
                || !self.stop_safe(f.x, f.speed, x, v)
            {
                return false;
            }
        }
        true
    }

    /// Speed wanted before any following constraint.
    fn desired_speed(&self, c: &Car) -> f64 {
        let s = self.s;
        if c.st.lane != c.st.preferred_lane && c.st.x >= s.sorting_start() {
            let d_end = (s.road_length() - c.st.x).max(0.0);
            s.v_f.min(v_slow(d_end, s.d_stop, s.l_3, s.v_f))
        } else {
            s.v_f
        }
    }

    /// Largest next speed that still lets the car stop behind a leader
    /// whose stopping point is `leader_stop`.
    fn safe_speed(&self, x: f64, v: f64, leader_stop: f64) -> f64 {
        let dt = self.s.tick;
        let room = leader_stop - self.s.vehicle_length - STOP_MARGIN - x - v * dt / 2.0;
        if room <= 0.0 {
            return 0.0;
        }
        let h = self.b * dt / 2.0;
        -h + (h * h + 2.0 * self.b * room).sqrt()
    }
}

pub(super) fn run(s: &Scenario) -> Result<SimLog> {
    let rules = Rules { s, b: -s.a_min };
    let dt = s.tick;
    let len = s.vehicle_length;
    let road = s.road_length();
    let change_ticks = (LANE_CHANGE_TIME / dt).round() as usize;
    let mut arrivals = Arrivals::new(s);
    let mut rec = Recorder::new(s);
    let mut cars: Vec<Car> = Vec::new();
    let mut next_id = 0;

    for k in 0..s.total_ticks() {
        let t = k as f64 * dt;

        // Rule 1: vehicles enter at v_F when the lane entrance is clear.
        for (lane, pref) in arrivals.draw() {
            let rear = cars
                .iter()
                .filter(|c| c.st.occupies(lane))
                .min_by(|a, b| a.st.x.total_cmp(&b.st.x));
            if let Some(r) = rear {
                if r.st.x < s.d_f || !rules.stop_safe(0.0, s.v_f, r.st.x, r.st.speed) {
                    continue;
                }
            }
            let st = VehicleState {
                id: next_id,
                x: 0.0,
                lane,
                lane_from: None,
                lateral_offset: 0.0,
                speed: s.v_f,
                preferred_lane: pref,
                entry_time: Some(t),
                exit_time: None,
                formation: None,
            };
            next_id += 1;
            rec.generated(t, &st);
            cars.push(Car { st, changing: 0 });
        }

        cars.sort_by(|a, b| b.st.x.total_cmp(&a.st.x).then(a.st.id.cmp(&b.st.id)));

        // Rule 2: lane changes in the sorting segment, front vehicles first.
        for i in 0..cars.len() {
            let c = &cars[i];
            if c.changing > 0 || c.st.x < s.sorting_start() {
                continue;
            }
            let Some(to) = c.target_lane() else { continue };
            let (x, v, id) = (c.st.x, c.st.speed, c.st.id);
            // higher priority first: wait while a car ahead still has to
            // cross into or out of the lanes involved
            let from = c.st.lane;
            let waiting = cars[..i].iter().any(|h| {
                h.changing == 0
                    && h.st.x >= s.sorting_start()
                    && h.target_lane()
                        .is_some_and(|t| [from, to].contains(&t) || [from, to].contains(&h.st.lane))
            });
            if !waiting && rules.gap_ok(&cars, id, to, x, v) {
                let c = &mut cars[i];
                let from = c.st.lane;
                rec.log
                    .events
                    .push(Event::LaneChange { t, id, x, from, to });
                c.st.lane_from = Some(from);
                c.st.lane = to;
                c.st.lateral_offset = (from as f64 - to as f64) * LANE_WIDTH;
                c.changing = change_ticks;
            }
        }

        // Rule 3 yielding: an unsorted car in the sorting segment is a soft
        // leader for cars behind it on its target lane.
        // Side-by-side ties go to the earlier arrival.
        let ghosts: Vec<(u32, f64, usize)> = cars
            .iter()
            .filter(|c| c.st.x >= s.sorting_start() && c.changing == 0)
            .filter_map(|c| c.target_lane().map(|l| (l, c.st.x, c.st.id)))
            .collect();

        // Car following, front to back against already-updated leaders.
        for i in 0..cars.len() {
            let (x, v) = (cars[i].st.x, cars[i].st.speed);
            let mut target = rules.desired_speed(&cars[i]);
            let mut safe = s.v_max;
            for l in &cars[..i] {
                let shares =
                    (0..s.lane_count).any(|lane| cars[i].st.occupies(lane) && l.st.occupies(lane));
                if !shares {
                    continue;
                }
                target = target.min(((l.st.x - len - x - s.d_0) / s.tau).max(0.0));
                safe = safe.min(rules.safe_speed(x, v, rules.stop_point(l.st.x, l.st.speed)));
            }
            let id = cars[i].st.id;
            for &(lane, gx, gid) in &ghosts {
                let ahead = gx > x || (gx == x && gid < id);
                if ahead && cars[i].st.occupies(lane) {
                    // a little beyond the headway so the merge gap check passes
                    target = target.min(((gx - len - x - s.d_0 - STOP_MARGIN) / s.tau).max(0.0));
                }
                if ahead && x >= s.sorting_start() {
                    // lower priority: slow down and let it change first
                    target = target.min(v_slow((road - x).max(0.0), s.d_stop, s.l_3, s.v_f));
                }
            }
            let lo = (v + s.a_min * dt).max(s.v_min);
            let hi = (v + s.a_max * dt).min(s.v_max);
            let next = target
                .min(safe)
                .clamp(lo, hi)
                .min(safe.max(0.0))
                .max(s.v_min);
            let dx = if next <= 0.0 && v < rules.b * dt {
                v * v / (2.0 * rules.b)
            } else {
                (v + next) / 2.0 * dt
            };
            let c = &mut cars[i];
            c.st.x = x + dx;
            c.st.speed = next;
            if c.changing > 0 {
                c.changing -= 1;
                c.st.lateral_offset *= c.changing as f64 / (c.changing + 1) as f64;
                if c.changing == 0 {
                    c.st.lane_from = None;
                    c.st.lateral_offset = 0.0;
                }
            }
            if c.st.x >= road {
                let te = crossing_time(t, dt, x, c.st.x, road);
                c.st.exit_time = Some(te);
                rec.exited(&c.st, te);
            }
        }
        cars.retain(|c| c.st.exit_time.is_none());

        let t1 = t + dt;
        let states: Vec<VehicleState> = cars.iter().map(|c| c.st.clone()).collect();
        rec.check_collisions(t1, &states);
        for v in &states {
            rec.sample(t1, v, road);
        }
    }
    rec.log.on_road = cars.len();
    Ok(rec.log)
}
