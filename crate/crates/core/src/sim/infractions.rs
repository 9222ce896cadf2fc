//! Per-tick infraction detection.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{boxes_overlap, OrientedBox, Pose2D};
use crate::map::RoutePlan;
use crate::sim::events::{InfractionKind, RawInfractionEvent};
use crate::world::{EgoState, LightState, ObjectCategory, SignalKind, TrafficSignal, EGO_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfractionConfig {
    pub deviation_distance: f64,
    pub blocked_window: f64,
    pub blocked_distance: f64,
    pub min_speed_window: f64,
    pub min_speed_ratio: f64,
    /// Free distance ahead required for the min-speed rule to apply.
    pub clear_distance: f64,
    pub stop_zone: f64,
    pub stop_speed: f64,
    pub emergency_radius: f64,
    pub emergency_time: f64,
    /// Ego lateral offset above which it counts as having yielded its lane.
    pub yield_offset: f64,
    /// Half-width of the corridor around the route used for "ahead"/"behind".
    pub corridor: f64,
}

impl Default for InfractionConfig {
    fn default() -> Self {
        Self {
            deviation_distance: 30.0,
            blocked_window: 180.0,
            blocked_distance: 1.0,
            min_speed_window: 30.0,
            min_speed_ratio: 0.5,
            clear_distance: 40.0,
            stop_zone: 5.0,
            stop_speed: 0.1,
            emergency_radius: 50.0,
            emergency_time: 15.0,
            yield_offset: 1.5,
            corridor: 2.5,
        }
    }
}

pub fn collision_kind(c: ObjectCategory) -> InfractionKind {
    match c {
        ObjectCategory::Pedestrian => InfractionKind::CollisionPedestrian,
        ObjectCategory::Construction | ObjectCategory::OpenDoorCar => InfractionKind::CollisionStatic,
        _ => InfractionKind::CollisionVehicle,
    }
}

/// Arc length along the route of a signal's stop line, if it governs a
/// lane on the route.
pub fn signal_route_s(route: &RoutePlan, signal: &TrafficSignal) -> Option<f64> {
    let span = route.spans.iter().find(|sp| sp.lane == signal.lane)?;
    let pr = route
        .reference_path
        .project_window(signal.pose.x, signal.pose.y, span.s_start, span.s_end);
    Some(pr.s.clamp(span.s_start, span.s_end))
}

/// Actor ground truth for one tick, already located relative to the route.
#[derive(Debug, Clone)]
pub struct ActorFrame {
    pub id: u64,
    pub category: ObjectCategory,
    pub bbox: OrientedBox,
    pub route_s: f64,
    pub route_offset: f64,
}

#[derive(Debug, Clone)]
pub struct Frame<'a> {
    pub time: f64,
    pub dt: f64,
    pub ego: &'a EgoState,
    pub route_s: f64,
    pub route_offset: f64,
    pub actors: &'a [ActorFrame],
}

#[derive(Debug, Clone)]
struct StopLine {
    s: f64,
    kind: SignalKind,
    index: usize,
    min_speed: f64,
}

/// Stateful detector fed once per tick after the world steps.
#[derive(Debug, Clone)]
pub struct InfractionMonitor {
    pub config: InfractionConfig,
    lines: Vec<StopLine>,
    contacts: BTreeSet<u64>,
    prev_front: Option<f64>,
    speed_window: VecDeque<(f64, f64, f64)>,
    positions: VecDeque<(f64, Pose2D)>,
    emergency_timer: f64,
    deviated: bool,
    blocked: bool,
}

impl InfractionMonitor {
    pub fn new(config: InfractionConfig, route: &RoutePlan, signals: &[TrafficSignal]) -> Self {
        let lines = signals
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind != SignalKind::SpeedLimit)
            .filter_map(|(index, s)| {
                signal_route_s(route, s).map(|rs| StopLine {
                    s: rs,
                    kind: s.kind,
                    index,
                    min_speed: f64::INFINITY,
                })
            })
            .collect();
        Self {
            config,
            lines,
            contacts: BTreeSet::new(),
            prev_front: None,
            speed_window: VecDeque::new(),
            positions: VecDeque::new(),
            emergency_timer: 0.0,
            deviated: false,
            blocked: false,
        }
    }

    /// True once a run-terminating infraction has been recorded.
    pub fn terminal(&self) -> bool {
        self.deviated || self.blocked
    }

    pub fn detect(
        &mut self,
        frame: &Frame<'_>,
        route: &RoutePlan,
        signals: &[TrafficSignal],
    ) -> Vec<RawInfractionEvent> {
        let cfg = self.config;
        let mut events = Vec::new();
        let here = frame.ego.pose;
        let mut emit = |kind| {
            events.push(RawInfractionEvent {
                kind,
                time: frame.time,
                location: here,
            })
        };

        let mut touching = BTreeSet::new();
        for a in frame.actors {
            if boxes_overlap(&frame.ego.bbox, &a.bbox) {
                touching.insert(a.id);
                if !self.contacts.contains(&a.id) {
                    emit(collision_kind(a.category));
                }
            }
        }
        self.contacts = touching;

        let front = frame.route_s + 0.5 * EGO_LENGTH;
        for line in &mut self.lines {
            if front >= line.s - cfg.stop_zone && front <= line.s {
                line.min_speed = line.min_speed.min(frame.ego.speed);
            }
            let crossed = matches!(self.prev_front, Some(p) if p < line.s && front >= line.s);
            if !crossed {
                continue;
            }
            match line.kind {
                SignalKind::TrafficLight => {
                    if signals[line.index].light_state(frame.time) == Some(LightState::Red) {
                        emit(InfractionKind::RedLight);
                    }
                }
                SignalKind::StopSign => {
                    if !(line.min_speed < cfg.stop_speed) {
                        emit(InfractionKind::StopSign);
                    }
                }
                SignalKind::SpeedLimit => {}
            }
        }
        self.prev_front = Some(front);

        let clear = self.road_clear(frame, signals);
        if clear {
            let limit = route.speed_limit_at(frame.route_s);
            self.speed_window.push_back((frame.time, frame.ego.speed, limit));
            let t0 = self.speed_window.front().map_or(frame.time, |w| w.0);
            if frame.time - t0 >= cfg.min_speed_window {
                let n = self.speed_window.len() as f64;
                let mean_v: f64 = self.speed_window.iter().map(|w| w.1).sum::<f64>() / n;
                let mean_lim: f64 = self.speed_window.iter().map(|w| w.2).sum::<f64>() / n;
                if mean_v < cfg.min_speed_ratio * mean_lim {
                    emit(InfractionKind::MinSpeed);
                    self.speed_window.clear();
                } else {
                    self.speed_window.pop_front();
                }
            }
        } else {
            self.speed_window.clear();
        }

        if !self.deviated && frame.route_offset.abs() > cfg.deviation_distance {
            self.deviated = true;
            emit(InfractionKind::RouteDeviation);
        }

        self.positions.push_back((frame.time, here));
        while self
            .positions
            .get(1)
            .is_some_and(|p| frame.time - p.0 >= cfg.blocked_window)
        {
            self.positions.pop_front();
        }
        if let Some(&(t0, p0)) = self.positions.front() {
            if !self.blocked
                && frame.time - t0 >= cfg.blocked_window
                && p0.distance(&here) < cfg.blocked_distance
            {
                self.blocked = true;
                emit(InfractionKind::AgentBlocked);
            }
        }

        let chased = frame.actors.iter().any(|a| {
            a.category == ObjectCategory::Emergency
                && a.route_s < frame.route_s
                && frame.route_s - a.route_s <= cfg.emergency_radius
                && a.route_offset.abs() < cfg.corridor
        });
        if chased && frame.route_offset.abs() < cfg.yield_offset {
            self.emergency_timer += frame.dt;
            if self.emergency_timer > cfg.emergency_time {
                emit(InfractionKind::EmergencyYield);
                self.emergency_timer = 0.0;
            }
        } else {
            self.emergency_timer = 0.0;
        }

        events
    }

    fn road_clear(&self, frame: &Frame<'_>, signals: &[TrafficSignal]) -> bool {
        let cfg = &self.config;
        let horizon = frame.route_s + cfg.clear_distance;
        let blocked_by_actor = frame.actors.iter().any(|a| {
            a.route_s > frame.route_s && a.route_s <= horizon && a.route_offset.abs() < cfg.corridor
        });
        let blocked_by_signal = self.lines.iter().any(|l| {
            let near = l.s + cfg.stop_zone >= frame.route_s && l.s <= horizon;
            near && match l.kind {
                SignalKind::StopSign => true,
                _ => signals[l.index].light_state(frame.time) != Some(LightState::Green),
            }
        });
        !(blocked_by_actor || blocked_by_signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::tests::straight_lane;
    use crate::map::LaneMap;
    use crate::world::LightInterval;

    fn route() -> RoutePlan {
        let map = LaneMap::new([straight_lane(1, 0.0, 400.0, false)]).unwrap();
        RoutePlan::from_lanes(&map, &[1]).unwrap()
    }

    fn light(state: LightState) -> TrafficSignal {
        TrafficSignal {
            id: 1,
            kind: SignalKind::TrafficLight,
            pose: Pose2D::new(100.0, 0.0, 0.0),
            lane: 1,
            schedule: vec![LightInterval {
                state,
                start: 0.0,
                end: 1e6,
            }],
            speed: None,
        }
    }

    fn run(
        mon: &mut InfractionMonitor,
        route: &RoutePlan,
        signals: &[TrafficSignal],
        ticks: usize,
        mut ego_at: impl FnMut(usize) -> (f64, f64),
        actors: impl Fn(usize) -> Vec<ActorFrame>,
    ) -> Vec<RawInfractionEvent> {
        let mut out = Vec::new();
        for k in 0..ticks {
            let (x, v) = ego_at(k);
            let ego = EgoState::new(Pose2D::new(x, 0.0, 0.0), v, 0.0, 0.0);
            let acts = actors(k);
            let frame = Frame {
                time: k as f64 * 0.05,
                dt: 0.05,
                ego: &ego,
                route_s: x,
                route_offset: 0.0,
                actors: &acts,
            };
            out.extend(mon.detect(&frame, route, signals));
        }
        out
    }

    fn kinds(ev: &[RawInfractionEvent]) -> Vec<InfractionKind> {
        ev.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn stationary_at_green_is_clean() {
        let r = route();
        let sig = [light(LightState::Green)];
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &sig);
        let ev = run(&mut m, &r, &sig, 200, |_| (95.0, 0.0), |_| vec![]);
        assert!(ev.is_empty());
    }

    #[test]
    fn red_light_once() {
        let r = route();
        let sig = [light(LightState::Red)];
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &sig);
        let ev = run(&mut m, &r, &sig, 400, |k| (50.0 + 0.5 * k as f64, 10.0), |_| vec![]);
        assert_eq!(kinds(&ev), vec![InfractionKind::RedLight]);
    }

    #[test]
    fn stop_sign_requires_a_stop() {
        let r = route();
        let mut sig = light(LightState::Red);
        sig.kind = SignalKind::StopSign;
        sig.schedule.clear();
        let sig = [sig];
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &sig);
        let ev = run(&mut m, &r, &sig, 400, |k| (50.0 + 0.5 * k as f64, 10.0), |_| vec![]);
        assert_eq!(kinds(&ev), vec![InfractionKind::StopSign]);

        // stop with the bumper 2 m short of the line, then go
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &sig);
        let stop_x = 100.0 - 2.0 - 0.5 * EGO_LENGTH;
        let ev = run(
            &mut m,
            &r,
            &sig,
            400,
            |k| {
                if k < 100 {
                    (stop_x, 0.0)
                } else {
                    (stop_x + 0.5 * (k - 100) as f64, 10.0)
                }
            },
            |_| vec![],
        );
        assert!(ev.is_empty(), "{ev:?}");
    }

    #[test]
    fn one_event_per_contact_episode() {
        let r = route();
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &[]);
        let ped = |k: usize| {
            let y = if (20..40).contains(&k) || (60..70).contains(&k) { 0.0 } else { 5.0 };
            vec![ActorFrame {
                id: 9,
                category: ObjectCategory::Pedestrian,
                bbox: OrientedBox::new(Pose2D::new(10.0, y, 0.0), 0.6, 0.6),
                route_s: 10.0,
                route_offset: y,
            }]
        };
        let ev = run(&mut m, &r, &[], 100, |_| (10.0, 0.0), ped);
        assert_eq!(
            kinds(&ev),
            vec![InfractionKind::CollisionPedestrian, InfractionKind::CollisionPedestrian]
        );
    }

    #[test]
    fn crawling_on_clear_road_is_min_speed() {
        let r = route();
        let mut m = InfractionMonitor::new(InfractionConfig::default(), &r, &[]);
        // limit is 10; crawl at 2 m/s for 35 s
        let ev = run(&mut m, &r, &[], 700, |k| (0.1 * k as f64, 2.0), |_| vec![]);
        assert_eq!(kinds(&ev), vec![InfractionKind::MinSpeed]);
    }

    #[test]
    fn parked_for_three_minutes_is_blocked() {
        let r = route();
        let mut cfg = InfractionConfig::default();
        cfg.min_speed_window = 1e9;
        let mut m = InfractionMonitor::new(cfg, &r, &[]);
        let ev = run(&mut m, &r, &[], 3700, |_| (10.0, 0.0), |_| vec![]);
        assert_eq!(kinds(&ev), vec![InfractionKind::AgentBlocked]);
        assert!((ev[0].time - 180.0).abs() < 0.06);
        assert!(m.terminal());
    }

    #[test]
    fn emergency_behind_too_long() {
        let r = route();
        let mut cfg = InfractionConfig::default();
        cfg.min_speed_window = 1e9;
        let mut m = InfractionMonitor::new(cfg, &r, &[]);
        let amb = |k: usize| {
            let s = 0.5 * k as f64 - 20.0;
            vec![ActorFrame {
                id: 1,
                category: ObjectCategory::Emergency,
                bbox: OrientedBox::new(Pose2D::new(s, 0.0, 0.0), 5.0, 2.0),
                route_s: s,
                route_offset: 0.0,
            }]
        };
        let ev = run(&mut m, &r, &[], 320, |k| (0.5 * k as f64, 10.0), amb);
        assert_eq!(kinds(&ev), vec![InfractionKind::EmergencyYield]);
    }
}
