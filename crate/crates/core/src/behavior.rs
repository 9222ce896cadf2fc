//! High-level decisions: negotiation with other agents and lane choice.
//!
//! Negotiation assigns each predicted object an assumed acceleration and
//! re-integrates its prediction. The lane decision picks between following,
//! bypassing a vulnerable road user inside the lane, changing lane, and
//! waiting for a gap in an oncoming lane; the reference path handed to the
//! planner is translated to match.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D};
use crate::map::{LaneId, LaneMap, RoutePlan};
use crate::predictor::{Prediction, PredictorConfig};
use crate::world::{EgoState, ObjectCategory, EGO_LENGTH, EGO_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorConfig {
    pub a_yield: f64,
    pub a_emg: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
    pub front_range: f64,
    /// Margin added to the ego width for the reference corridor.
    pub corridor_margin: f64,
    /// Margin added to the ego width for a bypass corridor.
    pub bypass_margin: f64,
    /// How far the ego may reach past the lane edge while bypassing.
    pub bypass_encroach: f64,
    /// Lateral offset from the reference beyond which an object deviates.
    pub deviation_threshold: f64,
    pub stopped_speed: f64,
    pub stopped_time: f64,
    pub taper: f64,
    pub blend: f64,
    pub standoff: f64,
    pub gap_base: f64,
    pub gap_per_speed: f64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            a_yield: 2.0,
            a_emg: 2.0,
            comfort_min: -3.0,
            comfort_max: 2.0,
            front_range: 60.0,
            corridor_margin: 0.4,
            bypass_margin: 0.6,
            bypass_encroach: 0.5,
            deviation_threshold: 0.3,
            stopped_speed: 0.3,
            stopped_time: 3.0,
            taper: 15.0,
            blend: 30.0,
            standoff: 6.0,
            gap_base: 40.0,
            gap_per_speed: 5.0,
        }
    }
}

impl BehaviorConfig {
    fn corridor_half(&self) -> f64 {
        0.5 * (EGO_WIDTH + self.corridor_margin)
    }

    /// Largest bypass offset allowed in a lane of `lane_width`.
    pub fn max_bypass_offset(&self, lane_width: f64) -> f64 {
        0.5 * (lane_width - EGO_WIDTH) + self.bypass_encroach
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LaneDecision {
    KeepLane,
    Bypass { side: Side, offset: f64 },
    ChangeLane { target: LaneId },
    WaitForGap { target: LaneId, required_gap: f64 },
}

impl LaneDecision {
    pub fn name(&self) -> &'static str {
        match self {
            LaneDecision::KeepLane => "KeepLane",
            LaneDecision::Bypass { .. } => "Bypass",
            LaneDecision::ChangeLane { .. } => "ChangeLane",
            LaneDecision::WaitForGap { .. } => "WaitForGap",
        }
    }
}

/// The object a non-trivial decision reacts to, located on the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub track_id: u64,
    pub category: ObjectCategory,
    pub s: f64,
    pub length: f64,
    /// Lateral extent of the footprint relative to the reference.
    pub min_offset: f64,
    pub max_offset: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationOutcome {
    pub assumed_accel: BTreeMap<u64, f64>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorOutput {
    pub reference: RoutePlan,
    pub decision: LaneDecision,
    pub trigger: Option<Trigger>,
    pub predictions: Vec<Prediction>,
}

pub fn required_gap(oncoming_speed: f64, blocker_length: f64) -> f64 {
    40.0 + 5.0 * oncoming_speed + blocker_length
}

fn config_gap(cfg: &BehaviorConfig, v: f64, len: f64) -> f64 {
    cfg.gap_base + cfg.gap_per_speed * v + len
}

/// Arc length, signed offset and heading difference of a pose on the route.
fn locate(route: &RoutePlan, p: &Pose2D) -> (f64, f64, f64) {
    let pr = route.reference_path.project(p.x, p.y);
    let tangent = route.reference_path.pose_at(pr.s).yaw;
    (pr.s, pr.offset, normalize_angle(p.yaw - tangent))
}

fn footprint_extent(route: &RoutePlan, pred: &Prediction) -> (f64, f64, f64) {
    let (s, _, _) = locate(route, &pred.origin);
    let bbox = pred.samples.first().map(|smp| smp.bbox);
    let corners = bbox.map(|b| b.corners()).unwrap_or([[pred.origin.x, pred.origin.y]; 4]);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in corners {
        let pr = route.reference_path.project_window(c[0], c[1], s - 10.0, s + 10.0);
        lo = lo.min(pr.offset);
        hi = hi.max(pr.offset);
    }
    (s, lo, hi)
}

pub fn negotiate(
    ego: &EgoState,
    predictions: &[Prediction],
    route: &RoutePlan,
    cfg: &BehaviorConfig,
    pcfg: &PredictorConfig,
) -> NegotiationOutcome {
    let (ego_s, _, _) = locate(route, &ego.pose);
    let lane_half = 0.5 * route_lane_width_hint();
    let mut assumed_accel = BTreeMap::new();
    let mut out = Vec::with_capacity(predictions.len());
    for p in predictions {
        let a = assumed_accel_for(ego, ego_s, p, route, cfg, lane_half);
        assumed_accel.insert(p.track_id, a);
        out.push(if a == 0.0 { p.clone() } else { p.with_accel(a, pcfg) });
    }
    NegotiationOutcome {
        assumed_accel,
        predictions: out,
    }
}

/// Lane width assumed when judging whether an object shares the ego corridor.
fn route_lane_width_hint() -> f64 {
    3.5
}

fn assumed_accel_for(
    ego: &EgoState,
    ego_s: f64,
    p: &Prediction,
    route: &RoutePlan,
    cfg: &BehaviorConfig,
    lane_half: f64,
) -> f64 {
    if p.speed < cfg.stopped_speed {
        return 0.0;
    }
    let (s, off, hd) = locate(route, &p.origin);
    let (c, sn) = p.origin.heading();
    let closing = c * (ego.pose.x - p.origin.x) + sn * (ego.pose.y - p.origin.y) > 0.0;
    if p.category == ObjectCategory::Emergency {
        return if closing { cfg.a_emg } else { 0.0 };
    }
    let in_lane = off.abs() < lane_half;
    let aligned = hd.abs() < std::f64::consts::FRAC_PI_4;
    let opposed = hd.abs() > 3.0 * std::f64::consts::FRAC_PI_4;
    if in_lane && aligned {
        // followers yield, leaders keep going
        return if s < ego_s { -cfg.a_yield } else { 0.0 };
    }
    if in_lane && opposed && s > ego_s {
        return -cfg.a_yield;
    }
    // interception with the ego reference corridor
    let reach = cfg.corridor_half() + 0.5 * p.width;
    for smp in &p.samples {
        let pr = route.reference_path.project(smp.pose.x, smp.pose.y);
        if pr.offset.abs() >= reach || pr.s <= ego_s {
            continue;
        }
        if smp.t <= 0.0 {
            // already inside the corridor: the ego has to wait
            return 0.0;
        }
        let clear = pr.s - ego_s + 0.5 * (EGO_LENGTH + p.length.max(p.width));
        let a_req = 2.0 * (clear - ego.speed * smp.t) / (smp.t * smp.t);
        return if (cfg.comfort_min..=cfg.comfort_max).contains(&a_req) {
            -cfg.a_yield
        } else {
            0.0
        };
    }
    0.0
}

/// Nearest prediction whose footprint intersects the reference corridor
/// within the front range.
pub fn front_object(
    ego: &EgoState,
    route: &RoutePlan,
    predictions: &[Prediction],
    cfg: &BehaviorConfig,
) -> Option<Trigger> {
    let (ego_s, _, _) = locate(route, &ego.pose);
    let half = cfg.corridor_half();
    let mut best: Option<Trigger> = None;
    for p in predictions {
        let (s, lo, hi) = footprint_extent(route, p);
        if s <= ego_s || s - ego_s > cfg.front_range || hi <= -half || lo >= half {
            continue;
        }
        if best.map_or(true, |b| s < b.s) {
            best = Some(Trigger {
                track_id: p.track_id,
                category: p.category,
                s,
                length: p.length,
                min_offset: lo,
                max_offset: hi,
                speed: p.speed,
            });
        }
    }
    best
}

/// Gap rule on its own: change lane once the clear headway reaches the
/// required gap.
pub fn gap_decision(
    headway: f64,
    oncoming_speed: f64,
    blocker_length: f64,
    target: LaneId,
    cfg: &BehaviorConfig,
) -> LaneDecision {
    let need = config_gap(cfg, oncoming_speed, blocker_length);
    if headway >= need {
        LaneDecision::ChangeLane { target }
    } else {
        LaneDecision::WaitForGap {
            target,
            required_gap: need,
        }
    }
}

/// Headway and speed of the nearest oncoming object in `target`, ahead of
/// the ego. `None` when the lane is empty.
fn nearest_oncoming(
    ego_s: f64,
    route: &RoutePlan,
    predictions: &[Prediction],
    map: &LaneMap,
    target: LaneId,
    exclude: u64,
) -> Option<(f64, f64)> {
    let lane = map.get(target)?;
    let mut best: Option<(f64, f64)> = None;
    for p in predictions {
        if p.track_id == exclude {
            continue;
        }
        let pr = lane.centerline.project(p.origin.x, p.origin.y);
        let in_target = p.anchored_lane == Some(target) || pr.offset.abs() < 0.5 * lane.width;
        if !in_target {
            continue;
        }
        let (s, _, hd) = locate(route, &p.origin);
        if s <= ego_s || hd.abs() < std::f64::consts::FRAC_PI_2 {
            continue;
        }
        let headway = s - ego_s - 0.5 * (EGO_LENGTH + p.length);
        if best.map_or(true, |b| headway < b.0) {
            best = Some((headway, p.speed));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Memory {
    track_id: u64,
    decision: LaneDecision,
}

/// Decision state owned by one agent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Behavior {
    pub config: BehaviorConfig,
    memory: Option<Memory>,
    stopped_since: BTreeMap<u64, f64>,
}

impl Behavior {
    pub fn new(config: BehaviorConfig) -> Self {
        Self {
            config,
            memory: None,
            stopped_since: BTreeMap::new(),
        }
    }

    fn lane_width_at(route: &RoutePlan, map: &LaneMap, s: f64) -> f64 {
        map.get(route.lane_at(s)).map_or(route_lane_width_hint(), |l| l.width)
    }

    fn blocked_decision(
        &self,
        ego_s: f64,
        trig: &Trigger,
        route: &RoutePlan,
        predictions: &[Prediction],
        map: &LaneMap,
    ) -> LaneDecision {
        let Some(lane) = map.get(route.lane_at(trig.s)) else {
            return LaneDecision::KeepLane;
        };
        let neighbors = [lane.left, lane.right];
        if let Some(n) = neighbors.iter().flatten().find(|n| n.same_direction) {
            return LaneDecision::ChangeLane { target: n.id };
        }
        if let Some(n) = neighbors.iter().flatten().find(|n| !n.same_direction) {
            return match nearest_oncoming(ego_s, route, predictions, map, n.id, trig.track_id) {
                None => LaneDecision::ChangeLane { target: n.id },
                Some((headway, v)) => gap_decision(headway, v, trig.length, n.id, &self.config),
            };
        }
        LaneDecision::KeepLane
    }

    fn fresh_decision(
        &self,
        ego_s: f64,
        trig: &Trigger,
        route: &RoutePlan,
        predictions: &[Prediction],
        map: &LaneMap,
        time: f64,
    ) -> LaneDecision {
        let cfg = &self.config;
        let vulnerable = matches!(trig.category, ObjectCategory::Bike | ObjectCategory::Pedestrian);
        let center = 0.5 * (trig.min_offset + trig.max_offset);
        if vulnerable && center.abs() >= cfg.deviation_threshold {
            let width = Self::lane_width_at(route, map, trig.s);
            let bound = cfg.max_bypass_offset(width);
            let need = EGO_WIDTH + cfg.bypass_margin;
            let (side, room, offset) = if center < 0.0 {
                let room = 0.5 * width - trig.max_offset + cfg.bypass_encroach;
                (Side::Left, room, (trig.max_offset + 0.5 * need).min(bound))
            } else {
                let room = 0.5 * width + trig.min_offset + cfg.bypass_encroach;
                (Side::Right, room, (trig.min_offset - 0.5 * need).max(-bound))
            };
            if room >= need {
                return LaneDecision::Bypass { side, offset };
            }
        }
        let stopped = self
            .stopped_since
            .get(&trig.track_id)
            .is_some_and(|t0| time - t0 >= cfg.stopped_time);
        if stopped || trig.category == ObjectCategory::Construction {
            return self.blocked_decision(ego_s, trig, route, predictions, map);
        }
        LaneDecision::KeepLane
    }

    /// Lane decision with hysteresis on the triggering track.
    pub fn decide_lane(
        &mut self,
        ego: &EgoState,
        route: &RoutePlan,
        predictions: &[Prediction],
        map: &LaneMap,
        time: f64,
    ) -> (LaneDecision, Option<Trigger>) {
        let stopped_speed = self.config.stopped_speed;
        self.stopped_since
            .retain(|id, _| predictions.iter().any(|p| p.track_id == *id && p.speed < stopped_speed));
        for p in predictions {
            if p.speed < stopped_speed {
                self.stopped_since.entry(p.track_id).or_insert(time);
            }
        }
        let (ego_s, _, _) = locate(route, &ego.pose);

        if let Some(mem) = self.memory.clone() {
            let held = predictions.iter().find(|p| p.track_id == mem.track_id).and_then(|p| {
                let (s, lo, hi) = footprint_extent(route, p);
                let passed = s + 0.5 * p.length < ego_s - 0.5 * EGO_LENGTH - 1.0;
                (!passed).then_some(Trigger {
                    track_id: p.track_id,
                    category: p.category,
                    s,
                    length: p.length,
                    min_offset: lo,
                    max_offset: hi,
                    speed: p.speed,
                })
            });
            match held {
                Some(trig) => {
                    let decision = match mem.decision {
                        LaneDecision::WaitForGap { .. } => {
                            self.blocked_decision(ego_s, &trig, route, predictions, map)
                        }
                        d => d,
                    };
                    self.memory = Some(Memory {
                        track_id: trig.track_id,
                        decision,
                    });
                    return (decision, Some(trig));
                }
                None => self.memory = None,
            }
        }

        let Some(trig) = front_object(ego, route, predictions, &self.config) else {
            return (LaneDecision::KeepLane, None);
        };
        let decision = self.fresh_decision(ego_s, &trig, route, predictions, map, time);
        if decision != LaneDecision::KeepLane {
            self.memory = Some(Memory {
                track_id: trig.track_id,
                decision,
            });
        }
        (decision, Some(trig))
    }

    /// Negotiation, lane decision and reference translation for one tick.
    pub fn step(
        &mut self,
        ego: &EgoState,
        route: &RoutePlan,
        predictions: &[Prediction],
        map: &LaneMap,
        time: f64,
        pcfg: &PredictorConfig,
    ) -> Result<BehaviorOutput> {
        let neg = negotiate(ego, predictions, route, &self.config, pcfg);
        let (decision, trigger) = self.decide_lane(ego, route, &neg.predictions, map, time);
        let reference = translate_reference(route, &decision, trigger.as_ref(), map, &self.config)?;
        Ok(BehaviorOutput {
            reference,
            decision,
            trigger,
            predictions: neg.predictions,
        })
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

pub fn translate_reference(
    route: &RoutePlan,
    decision: &LaneDecision,
    trigger: Option<&Trigger>,
    map: &LaneMap,
    cfg: &BehaviorConfig,
) -> Result<RoutePlan> {
    let need_trigger = || {
        trigger.ok_or_else(|| Error::invalid("decision", format!("{} needs a triggering object", decision.name())))
    };
    match *decision {
        LaneDecision::KeepLane => Ok(route.clone()),
        LaneDecision::Bypass { offset, .. } => {
            let trig = need_trigger()?;
            let width = map
                .get(route.lane_at(trig.s))
                .map_or(route_lane_width_hint(), |l| l.width);
            let bound = cfg.max_bypass_offset(width);
            if offset.abs() > bound + 1e-9 {
                return Err(Error::invalid(
                    "bypass.offset",
                    format!("|{offset:.3}| exceeds {bound:.3} m"),
                ));
            }
            let rear = trig.s - 0.5 * trig.length - 0.5 * EGO_LENGTH;
            let front = trig.s + 0.5 * trig.length + 0.5 * EGO_LENGTH;
            let (a, b) = (rear - cfg.taper, front + cfg.taper);
            let path = route.reference_path.offset_by(|s| {
                let up = smoothstep((s - a) / cfg.taper);
                let down = 1.0 - smoothstep((s - front) / cfg.taper);
                if s <= a || s >= b {
                    0.0
                } else {
                    offset * up.min(down)
                }
            })?;
            Ok(route.with_path(path))
        }
        LaneDecision::ChangeLane { target } => {
            let trig = need_trigger()?;
            let lane = map.lane(target)?;
            let at = route.reference_path.pose_at(trig.s);
            let on_target = lane.centerline.pose_at(lane.centerline.project(at.x, at.y).s);
            let shift = route.reference_path.project(on_target.x, on_target.y).offset;
            let start = trig.s - 0.5 * trig.length - cfg.standoff - cfg.blend;
            // into oncoming traffic the ego only passes and then merges back
            let opposing = map.get(route.lane_at(trig.s)).is_some_and(|l| {
                [l.left, l.right]
                    .iter()
                    .flatten()
                    .any(|n| n.id == target && !n.same_direction)
            });
            let back = trig.s + 0.5 * trig.length + 0.5 * EGO_LENGTH + cfg.standoff;
            let path = route.reference_path.offset_by(|s| {
                let up = smoothstep((s - start) / cfg.blend);
                if opposing {
                    shift * up.min(1.0 - smoothstep((s - back) / cfg.blend))
                } else {
                    shift * up
                }
            })?;
            Ok(route.with_path(path))
        }
        LaneDecision::WaitForGap { .. } => {
            let trig = need_trigger()?;
            let mut out = route.clone();
            let stop = trig.s - 0.5 * trig.length - cfg.standoff - 0.5 * EGO_LENGTH;
            out.stop_s = Some(out.stop_s.map_or(stop, |s| s.min(stop)));
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::tests::straight_lane;
    use crate::map::Neighbor;
    use crate::predictor::predict_object;
    use proptest::prelude::*;

    fn pcfg() -> PredictorConfig {
        PredictorConfig::default()
    }

    /// Route lane 1 along +x at y = 0; lane 2 at y = 3.5, direction chosen.
    fn two_lane(same_direction: bool) -> (LaneMap, RoutePlan) {
        let mut a = straight_lane(1, 0.0, 300.0, false);
        let mut b = straight_lane(2, 3.5, 300.0, !same_direction);
        a.left = Some(Neighbor { id: 2, same_direction });
        b.left = None;
        if same_direction {
            b.right = Some(Neighbor { id: 1, same_direction });
        } else {
            b.left = Some(Neighbor { id: 1, same_direction });
        }
        let map = LaneMap::new([a, b]).unwrap();
        let route = RoutePlan::from_lanes(&map, &[1]).unwrap();
        (map, route)
    }

    fn single_lane() -> (LaneMap, RoutePlan) {
        let map = LaneMap::new([straight_lane(1, 0.0, 300.0, false)]).unwrap();
        let route = RoutePlan::from_lanes(&map, &[1]).unwrap();
        (map, route)
    }

    fn obj(
        id: u64,
        cat: ObjectCategory,
        pose: Pose2D,
        v: f64,
        len: f64,
        wid: f64,
        map: &LaneMap,
    ) -> Prediction {
        let anchored = crate::predictor::anchor_to_lane(&pose, map, &pcfg());
        predict_object(id, cat, pose, v, len, wid, anchored, map, &pcfg()).unwrap()
    }

    fn ego_at(x: f64, v: f64) -> EgoState {
        EgoState::new(Pose2D::new(x, 0.0, 0.0), v, 0.0, 0.0)
    }

    #[test]
    fn gap_examples() {
        assert_eq!(required_gap(0.0, 0.0), 40.0);
        assert_eq!(required_gap(10.0, 8.0), 98.0);
        assert_eq!(required_gap(5.0, 12.0), 77.0);
    }

    proptest! {
        #[test]
        fn gap_is_affine(v in 0.0..40.0f64, l in 0.0..30.0f64, dv in 0.0..5.0f64, dl in 0.0..5.0f64) {
            prop_assert_eq!(required_gap(v, l), 40.0 + 5.0 * v + l);
            let slope_v = required_gap(v + dv, l) - required_gap(v, l);
            let slope_l = required_gap(v, l + dl) - required_gap(v, l);
            prop_assert!((slope_v - 5.0 * dv).abs() < 1e-9);
            prop_assert!((slope_l - dl).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_world_negotiation() {
        let (_, route) = single_lane();
        let out = negotiate(&ego_at(10.0, 5.0), &[], &route, &BehaviorConfig::default(), &pcfg());
        assert!(out.assumed_accel.is_empty() && out.predictions.is_empty());
    }

    #[test]
    fn follower_yields_and_stops() {
        let (map, route) = single_lane();
        let f = obj(4, ObjectCategory::Car, Pose2D::new(40.0, 0.0, 0.0), 6.0, 4.5, 1.9, &map);
        let out = negotiate(&ego_at(50.0, 6.0), &[f], &route, &BehaviorConfig::default(), &pcfg());
        assert_eq!(out.assumed_accel[&4], -2.0);
        let xs: Vec<f64> = out.predictions[0].samples.iter().map(|s| s.pose.x).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        // 6 m/s at -2 m/s^2 stops after 9 m
        assert!((xs.last().unwrap() - 49.0).abs() < 1e-9);
    }

    #[test]
    fn emergency_from_behind_accelerates() {
        let (map, route) = single_lane();
        let e = obj(5, ObjectCategory::Emergency, Pose2D::new(20.0, 0.0, 0.0), 12.0, 5.5, 2.1, &map);
        let out = negotiate(&ego_at(50.0, 6.0), &[e], &route, &BehaviorConfig::default(), &pcfg());
        assert_eq!(out.assumed_accel[&5], 2.0);
    }

    #[test]
    fn crossing_pedestrian_yields_only_when_ego_can_clear() {
        let (map, route) = single_lane();
        let up = std::f64::consts::FRAC_PI_2;
        let cfg = BehaviorConfig::default();
        // the pedestrian enters the corridor at t = 1.2 s, 15 m ahead of an ego at 14 m/s:
        // clearing needs 2 (15 + 2.7 - 16.8) / 1.44 = +1.25 m/s^2
        let p = obj(6, ObjectCategory::Pedestrian, Pose2D::new(40.0, -3.0, up), 1.3, 0.6, 0.6, &map);
        let out = negotiate(&ego_at(25.0, 14.0), &[p.clone()], &route, &cfg, &pcfg());
        assert_eq!(out.assumed_accel[&6], -2.0);
        // from rest 40 m back it cannot clear comfortably
        let out = negotiate(&ego_at(0.0, 0.0), &[p], &route, &cfg, &pcfg());
        assert_eq!(out.assumed_accel[&6], 0.0);
    }

    #[test]
    fn clear_road_keeps_lane() {
        let (map, route) = single_lane();
        let mut b = Behavior::new(BehaviorConfig::default());
        let (d, t) = b.decide_lane(&ego_at(10.0, 5.0), &route, &[], &map, 0.0);
        assert_eq!((d, t), (LaneDecision::KeepLane, None));
    }

    #[test]
    fn bicycle_on_right_edge_is_bypassed_left() {
        let (map, route) = single_lane();
        // 0.7 m wide bike leaving 2.4 m free on its left in a 3.5 m lane
        let y = -1.75 + 0.35 + (3.5 - 2.4 - 0.7);
        let bike = obj(7, ObjectCategory::Bike, Pose2D::new(40.0, y, 0.0), 4.0, 1.8, 0.7, &map);
        let mut b = Behavior::new(BehaviorConfig::default());
        let (d, _) = b.decide_lane(&ego_at(10.0, 8.0), &route, &[bike], &map, 0.0);
        match d {
            LaneDecision::Bypass { side, offset } => {
                assert_eq!(side, Side::Left);
                assert!(offset > 0.0 && offset <= BehaviorConfig::default().max_bypass_offset(3.5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn moving_car_ahead_is_followed() {
        let (map, route) = two_lane(true);
        let car = obj(8, ObjectCategory::Car, Pose2D::new(40.0, 0.0, 0.0), 5.0, 4.5, 1.9, &map);
        let mut b = Behavior::new(BehaviorConfig::default());
        assert_eq!(b.decide_lane(&ego_at(10.0, 8.0), &route, &[car], &map, 0.0).0, LaneDecision::KeepLane);
    }

    #[test]
    fn stopped_car_triggers_change_after_three_seconds() {
        let (map, route) = two_lane(true);
        let car = obj(8, ObjectCategory::Car, Pose2D::new(40.0, 0.0, 0.0), 0.0, 4.5, 1.9, &map);
        let mut b = Behavior::new(BehaviorConfig::default());
        let ego = ego_at(10.0, 0.0);
        let mut first_change = None;
        for k in 0..100 {
            let t = k as f64 * 0.05;
            let (d, _) = b.decide_lane(&ego, &route, &[car.clone()], &map, t);
            if d != LaneDecision::KeepLane && first_change.is_none() {
                first_change = Some(t);
                assert_eq!(d, LaneDecision::ChangeLane { target: 2 });
            }
        }
        assert!((first_change.unwrap() - 3.0).abs() < 1e-9);
    }

    fn construction_scene(headway: f64, v: f64) -> (LaneMap, RoutePlan, Vec<Prediction>, EgoState) {
        let (map, route) = two_lane(false);
        let ego = ego_at(10.0, 0.0);
        let blocker = obj(1, ObjectCategory::Construction, Pose2D::new(40.0, 0.0, 0.0), 0.0, 8.0, 2.5, &map);
        let x = 10.0 + headway + 0.5 * (EGO_LENGTH + 4.5);
        let oncoming = obj(2, ObjectCategory::Car, Pose2D::new(x, 3.5, std::f64::consts::PI), v, 4.5, 1.9, &map);
        (map, route, vec![blocker, oncoming], ego)
    }

    #[test]
    fn construction_waits_for_gap() {
        let (map, route, preds, ego) = construction_scene(60.0, 10.0);
        let mut b = Behavior::new(BehaviorConfig::default());
        let (d, _) = b.decide_lane(&ego, &route, &preds, &map, 0.0);
        assert_eq!(d, LaneDecision::WaitForGap { target: 2, required_gap: 98.0 });
        let (map, route, preds, ego) = construction_scene(120.0, 10.0);
        let mut b = Behavior::new(BehaviorConfig::default());
        assert_eq!(b.decide_lane(&ego, &route, &preds, &map, 0.0).0, LaneDecision::ChangeLane { target: 2 });
    }

    #[test]
    fn gap_flip_is_exact() {
        for v in [0.0, 3.0, 7.5, 12.0] {
            let need = required_gap(v, 8.0);
            for (h, expect_change) in [(need - 1e-9, false), (need, true), (need + 1e-9, true)] {
                let d = gap_decision(h, v, 8.0, 2, &BehaviorConfig::default());
                assert_eq!(matches!(d, LaneDecision::ChangeLane { .. }), expect_change, "v={v} h={h}");
            }
        }
    }

    #[test]
    fn waiting_flips_once_the_oncoming_car_passes() {
        let (map, route, mut preds, ego) = construction_scene(60.0, 10.0);
        let mut b = Behavior::new(BehaviorConfig::default());
        assert!(matches!(b.decide_lane(&ego, &route, &preds, &map, 0.0).0, LaneDecision::WaitForGap { .. }));
        preds.truncate(1);
        assert_eq!(b.decide_lane(&ego, &route, &preds, &map, 0.05).0, LaneDecision::ChangeLane { target: 2 });
    }

    #[test]
    fn hysteresis_under_jitter() {
        let (map, route) = single_lane();
        let mut b = Behavior::new(BehaviorConfig::default());
        let ego = ego_at(10.0, 6.0);
        let mut decisions = Vec::new();
        for k in 0..40 {
            let jitter = if k % 2 == 0 { 0.1 } else { -0.1 };
            // lateral position alternates across the deviation threshold
            let y = -0.3 + jitter;
            let bike = obj(3, ObjectCategory::Bike, Pose2D::new(40.0, y - 0.6, 0.0), 3.0, 1.8, 0.7, &map);
            decisions.push(b.decide_lane(&ego, &route, &[bike], &map, k as f64 * 0.05).0.name());
        }
        assert!(decisions.iter().all(|d| *d == decisions[0]), "{decisions:?}");
        assert_eq!(decisions[0], "Bypass");
    }

    fn trig(s: f64, len: f64) -> Trigger {
        Trigger {
            track_id: 1,
            category: ObjectCategory::Bike,
            s,
            length: len,
            min_offset: -1.5,
            max_offset: -0.8,
            speed: 0.0,
        }
    }

    #[test]
    fn keep_lane_is_identity() {
        let (map, route) = single_lane();
        let out = translate_reference(&route, &LaneDecision::KeepLane, None, &map, &BehaviorConfig::default()).unwrap();
        assert_eq!(out, route);
    }

    #[test]
    fn bypass_taper_geometry() {
        let (map, route) = single_lane();
        let d = LaneDecision::Bypass { side: Side::Left, offset: 1.0 };
        let t = trig(100.0, 2.0);
        let out = translate_reference(&route, &d, Some(&t), &map, &BehaviorConfig::default()).unwrap();
        let p = &out.reference_path;
        let y_at = |x: f64| p.pose_at(p.project(x, 0.0).s).y;
        assert!((y_at(100.0) - 1.0).abs() < 1e-9);
        assert!(y_at(0.0).abs() < 1e-12 && y_at(298.0).abs() < 1e-12);
        assert!(y_at(70.0).abs() < 1e-12 && y_at(130.0).abs() < 1e-12);
    }

    #[test]
    fn bypass_offset_bound_is_enforced() {
        let (map, route) = single_lane();
        let d = LaneDecision::Bypass { side: Side::Left, offset: 1.4 };
        assert!(translate_reference(&route, &d, Some(&trig(100.0, 2.0)), &map, &BehaviorConfig::default()).is_err());
    }

    #[test]
    fn change_lane_ends_on_target() {
        let (map, route) = two_lane(true);
        let d = LaneDecision::ChangeLane { target: 2 };
        let out = translate_reference(&route, &d, Some(&trig(100.0, 4.0)), &map, &BehaviorConfig::default()).unwrap();
        let last = out.reference_path.last().pose;
        assert!((last.y - 3.5).abs() < 1e-9);
        assert!(out.reference_path.first().pose.y.abs() < 1e-12);
    }

    #[test]
    fn wait_sets_standoff_stop() {
        let (map, route) = two_lane(false);
        let d = LaneDecision::WaitForGap { target: 2, required_gap: 98.0 };
        let out = translate_reference(&route, &d, Some(&trig(100.0, 8.0)), &map, &BehaviorConfig::default()).unwrap();
        assert_eq!(out.reference_path, route.reference_path);
        assert!((out.stop_s.unwrap() - (96.0 - 6.0 - 0.5 * EGO_LENGTH)).abs() < 1e-12);
    }
}
