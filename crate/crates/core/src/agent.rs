//! The full agent: observation in, control command out.
//!
//! Each tick runs the module chain in a fixed order: tracking (or identity
//! tracks from simulator ids), lane-anchored prediction, negotiation and
//! lane decision, sampling planner, and the PID/feed-forward controller.
//! [`run_route`] closes the loop against a [`SimWorld`] and scores the run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, BehaviorConfig, LaneDecision, Trigger};
use crate::controller::{calibrate_default, CalibrationTable, Controller, ControllerConfig};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D};
use crate::map::{LaneMap, RoutePlan};
use crate::planner::{plan, CostWeights, PlannerConfig, TrajectoryCandidate};
use crate::predictor::{predict_all, Prediction, PredictorConfig};
use crate::scoring::{compute_score, route_completion, PenaltyTable, ScoreReport, ARRIVAL_RADIUS};
use crate::sim::infractions::signal_route_s;
use crate::sim::{
    ControlCommand, DegradationConfig, InfractionKind, Observation, Scenario, SignalObservation, SimParams,
    SimWorld, TickRecord, TickTrace, TrackSnapshot,
};
use crate::tracker::{FilterState, Track, TrackStatus, Tracker, TrackerConfig};
use crate::world::{DetectedObject, LightState, SignalKind, TrafficSignal, EGO_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    Real,
    PrivilegedIds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Sensed,
    Privileged,
}

/// Per-module bypass switches. Every combination is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModuleSwitches {
    pub tracking: TrackingMode,
    pub signals: SourceMode,
    pub ego_pos: SourceMode,
    /// Replaces the sensor range when set.
    pub detection_range: Option<f64>,
}

impl Default for ModuleSwitches {
    fn default() -> Self {
        Self {
            tracking: TrackingMode::Real,
            signals: SourceMode::Sensed,
            ego_pos: SourceMode::Sensed,
            detection_range: None,
        }
    }
}

impl ModuleSwitches {
    /// Observation model seen by an agent with these switches.
    pub fn apply(&self, base: &DegradationConfig) -> DegradationConfig {
        let mut d = base.clone();
        if self.tracking == TrackingMode::PrivilegedIds {
            d.provide_ids = true;
            d.position_noise_sigma = 0.0;
            d.yaw_noise_sigma = 0.0;
            d.dropout_prob = 0.0;
        }
        if self.signals == SourceMode::Privileged {
            d.signal_misread_prob = 0.0;
        }
        if self.ego_pos == SourceMode::Privileged {
            d.ego_pos_noise_sigma = 0.0;
        }
        if let Some(r) = self.detection_range {
            d.detection_range = Some(r);
        }
        d
    }
}

/// Stop-line handling for lights and stop signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConfig {
    /// Gap between the front bumper and the line when stopped.
    pub margin: f64,
    /// Deceleration accepted for stopping at a yellow light.
    pub yellow_decel: f64,
    /// Deceleration beyond which a red light is run rather than braked for.
    pub max_decel: f64,
    pub stopped_speed: f64,
    /// A stop sign counts as served once the ego has stopped with its front
    /// this close to the line.
    pub zone: f64,
    pub lookahead: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            yellow_decel: 3.0,
            max_decel: 6.0,
            stopped_speed: 0.05,
            zone: 4.5,
            lookahead: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub switches: ModuleSwitches,
    pub weights: CostWeights,
    pub tracker: TrackerConfig,
    pub predictor: PredictorConfig,
    pub behavior: BehaviorConfig,
    pub planner: PlannerConfig,
    pub controller: ControllerConfig,
    pub stops: StopConfig,
    /// Fallback tick length for the first observation.
    pub tick: f64,
    /// Route window handed to behavior and planner, around the ego.
    pub window_behind: f64,
    pub window_ahead: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            switches: ModuleSwitches::default(),
            weights: CostWeights::default(),
            tracker: TrackerConfig::default(),
            predictor: PredictorConfig::default(),
            behavior: BehaviorConfig::default(),
            planner: PlannerConfig::default(),
            controller: ControllerConfig::default(),
            stops: StopConfig::default(),
            tick: crate::sim::DEFAULT_TICK,
            window_behind: 20.0,
            window_ahead: 160.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.tracker.validate()?;
        self.predictor.validate()?;
        self.planner.validate()?;
        self.controller.lateral.validate()?;
        self.controller.longitudinal.validate()?;
        if let Some(r) = self.switches.detection_range {
            if !(r > 0.0) {
                return Err(Error::invalid("switches.detection_range", "must be > 0"));
            }
        }
        if !(self.tick > 0.0) {
            return Err(Error::invalid("tick", "must be > 0"));
        }
        if !(self.window_behind >= 0.0 && self.window_ahead > 0.0) {
            return Err(Error::invalid("window", "need window_behind >= 0 and window_ahead > 0"));
        }
        let s = &self.stops;
        if !(s.yellow_decel > 0.0 && s.max_decel > 0.0 && s.zone > 0.0 && s.lookahead > 0.0) {
            return Err(Error::invalid("stops", "decelerations, zone and lookahead must be > 0"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }
}

/// Static inputs shared by every tick of one run.
#[derive(Debug, Clone)]
pub struct AgentContext {
    pub config: AgentConfig,
    pub map: Arc<LaneMap>,
    pub route: Arc<RoutePlan>,
}

/// Everything an agent carries from one tick to the next.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub tracker: Tracker,
    pub behavior: Behavior,
    pub controller: Controller,
    route_s: Option<f64>,
    last_time: Option<f64>,
    /// Last pose of each id, for identity tracks.
    seen: BTreeMap<u64, Pose2D>,
    served_stops: BTreeSet<u32>,
}

impl AgentState {
    pub fn new(config: &AgentConfig, table: Arc<CalibrationTable>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            tracker: Tracker::new(config.tracker.clone())?,
            behavior: Behavior::new(config.behavior),
            controller: Controller::new(config.controller, table)?,
            route_s: None,
            last_time: None,
            seen: BTreeMap::new(),
            served_stops: BTreeSet::new(),
        })
    }

    pub fn route_s(&self) -> Option<f64> {
        self.route_s
    }
}

/// Intermediate results of one tick.
#[derive(Debug, Clone, Default)]
pub struct TickDiagnostics {
    pub route_s: f64,
    pub tracks: Vec<Track>,
    pub predictions: Vec<Prediction>,
    pub decision: Option<LaneDecision>,
    pub trigger: Option<Trigger>,
    /// Stop point in ego-center route coordinates.
    pub stop_s: Option<f64>,
    pub chosen: Option<TrajectoryCandidate>,
    pub candidates: Vec<TrajectoryCandidate>,
    pub error: Option<String>,
}

impl TickDiagnostics {
    pub fn trace(&self) -> TickTrace {
        TickTrace {
            behavior: self.decision.map_or("Error", |d| d.name()).to_string(),
            path_index: self.chosen.as_ref().map(|c| c.path_index),
            accel_index: self.chosen.as_ref().map(|c| c.accel_index),
            cost: self.chosen.as_ref().map(|c| c.total_cost).filter(|c| c.is_finite()),
            emergency: self.chosen.as_ref().map_or(true, |c| c.emergency),
            tracks: self.tracks.len(),
            stop_s: self.stop_s,
            error: self.error.clone(),
            objects: self
                .tracks
                .iter()
                .map(|t| {
                    let p = t.pose();
                    TrackSnapshot {
                        id: t.id,
                        category: t.category,
                        x: p.x,
                        y: p.y,
                        yaw: p.yaw,
                        speed: t.speed(),
                    }
                })
                .collect(),
        }
    }
}

/// Tracks read straight from simulator ids; speed and yaw rate come from
/// differencing against the previous tick.
fn identity_tracks(dets: &[DetectedObject], seen: &mut BTreeMap<u64, Pose2D>, dt: f64) -> Result<Vec<Track>> {
    let mut next = BTreeMap::new();
    let mut tracks = Vec::with_capacity(dets.len());
    for det in dets {
        let id = det
            .id
            .ok_or_else(|| Error::invalid("tracking", "privileged ids requested but a detection has none"))?;
        let p = det.bbox.center;
        let (speed, yaw_rate) = match seen.get(&id) {
            Some(q) => {
                let (c, s) = p.heading();
                let v = ((p.x - q.x) * c + (p.y - q.y) * s) / dt;
                (v.max(0.0), normalize_angle(p.yaw - q.yaw) / dt)
            }
            None => (0.0, 0.0),
        };
        next.insert(id, p);
        tracks.push(Track {
            id,
            category: det.category,
            filter: FilterState::new(
                Vector5::new(p.x, p.y, p.yaw, speed, yaw_rate),
                Matrix5::identity() * 1e-6,
            ),
            length: det.bbox.length,
            width: det.bbox.width,
            status: TrackStatus::Active,
            hits: 1,
            misses: 0,
        });
    }
    *seen = next;
    tracks.sort_by_key(|t| t.id);
    Ok(tracks)
}

fn can_stop(speed: f64, dist: f64, decel: f64) -> bool {
    speed * speed <= 2.0 * decel * dist.max(0.0) + 1e-2
}

fn line_s(route: &RoutePlan, sig: &SignalObservation) -> Option<f64> {
    let ts = TrafficSignal {
        id: sig.id,
        kind: sig.kind,
        pose: sig.pose,
        lane: sig.lane,
        schedule: Vec::new(),
        speed: sig.speed,
    };
    signal_route_s(route, &ts)
}

/// Nearest stop the ego must honor, in ego-center route coordinates.
fn stop_point(obs: &Observation, s: f64, route: &RoutePlan, cfg: &StopConfig, served: &mut BTreeSet<u32>) -> Option<f64> {
    let v = obs.ego.speed;
    let front = s + 0.5 * EGO_LENGTH;
    let mut best: Option<f64> = None;
    for sig in &obs.signals {
        if !matches!(sig.kind, SignalKind::TrafficLight | SignalKind::StopSign) {
            continue;
        }
        let Some(line) = line_s(route, sig) else {
            continue;
        };
        if line < front - 0.5 || line - front > cfg.lookahead {
            continue;
        }
        let target = line - 0.5 * EGO_LENGTH - cfg.margin;
        let dist = target - s;
        let wanted = match sig.kind {
            SignalKind::TrafficLight => match sig.light {
                Some(LightState::Red) => can_stop(v, dist, cfg.max_decel),
                Some(LightState::Yellow) => can_stop(v, dist, cfg.yellow_decel),
                _ => false,
            },
            _ => {
                if served.contains(&sig.id) {
                    false
                } else if v < cfg.stopped_speed && line - front <= cfg.zone {
                    served.insert(sig.id);
                    false
                } else {
                    can_stop(v, dist, cfg.max_decel)
                }
            }
        };
        if wanted {
            best = Some(best.map_or(target, |b: f64| b.min(target)));
        }
    }
    best
}

fn tick_inner(
    obs: &Observation,
    st: &mut AgentState,
    ctx: &AgentContext,
    diag: &mut TickDiagnostics,
) -> Result<ControlCommand> {
    let cfg = &ctx.config;
    let dt = match st.last_time {
        Some(t) if obs.time > t => obs.time - t,
        _ => cfg.tick,
    };
    st.last_time = Some(obs.time);
    let ego = obs.ego;
    let path = &ctx.route.reference_path;
    let s = match st.route_s {
        Some(prev) => path.project_window(ego.pose.x, ego.pose.y, prev - 10.0, prev + 30.0).s,
        None => path.project(ego.pose.x, ego.pose.y).s,
    };
    st.route_s = Some(s);
    diag.route_s = s;

    diag.tracks = match cfg.switches.tracking {
        TrackingMode::Real => st.tracker.step(&obs.objects, dt)?,
        TrackingMode::PrivilegedIds => identity_tracks(&obs.objects, &mut st.seen, dt)?,
    };
    let predictions = predict_all(&diag.tracks, &ctx.map, &cfg.predictor)?;
    let stop = stop_point(obs, s, &ctx.route, &cfg.stops, &mut st.served_stops);
    diag.stop_s = stop;

    let s0 = (s - cfg.window_behind).max(0.0);
    let mut local = ctx.route.window(s0, s + cfg.window_ahead)?;
    local.stop_s = stop.map(|g| g - s0);
    let out = st
        .behavior
        .step(&ego, &local, &predictions, &ctx.map, obs.time, &cfg.predictor)?;
    diag.decision = Some(out.decision);
    diag.trigger = out.trigger;
    if let Some(w) = out.reference.stop_s {
        diag.stop_s = Some(w + s0);
    }
    let result = plan(&ego, &out.reference, &out.predictions, &cfg.weights, &cfg.planner)?;
    diag.predictions = out.predictions;
    let cmd = st.controller.track_trajectory(&result.best, &ego, dt);
    diag.chosen = Some(result.best);
    diag.candidates = result.candidates;
    Ok(cmd)
}

/// One pure tick: the input state is left untouched. A module error yields
/// a full-brake command with straight steering and the cause in the
/// diagnostics.
pub fn agent_tick(obs: &Observation, state: &AgentState, ctx: &AgentContext) -> (ControlCommand, AgentState, TickDiagnostics) {
    let mut next = state.clone();
    let (cmd, diag) = step_in_place(obs, &mut next, ctx);
    (cmd, next, diag)
}

fn step_in_place(obs: &Observation, st: &mut AgentState, ctx: &AgentContext) -> (ControlCommand, TickDiagnostics) {
    let mut diag = TickDiagnostics::default();
    match tick_inner(obs, st, ctx, &mut diag) {
        Ok(cmd) => (cmd, diag),
        Err(e) => {
            log::warn!("tick {}: {e}; emergency brake", obs.tick);
            st.controller.reset();
            diag.error = Some(e.to_string());
            diag.chosen = None;
            (ControlCommand::full_brake(), diag)
        }
    }
}

/// Context plus mutable state, for callers that do not need purity.
#[derive(Debug, Clone)]
pub struct Agent {
    pub context: AgentContext,
    pub state: AgentState,
}

impl Agent {
    pub fn new(config: AgentConfig, map: Arc<LaneMap>, route: Arc<RoutePlan>, table: Arc<CalibrationTable>) -> Result<Self> {
        let state = AgentState::new(&config, table)?;
        Ok(Self {
            context: AgentContext { config, map, route },
            state,
        })
    }

    pub fn tick(&mut self, obs: &Observation) -> (ControlCommand, TickDiagnostics) {
        step_in_place(obs, &mut self.state, &self.context)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub sim: SimParams,
    pub penalties: PenaltyTable,
    /// Computed from the sim plant when absent.
    pub calibration: Option<Arc<CalibrationTable>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            penalties: PenaltyTable::default(),
            calibration: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ScoreReport,
    pub log: Vec<TickRecord>,
    pub arrived: bool,
}

pub fn run_route(scenario: Arc<Scenario>, cfg: &AgentConfig, degradation: &DegradationConfig) -> Result<RunOutput> {
    run_route_with(scenario, cfg, degradation, &RunOptions::default(), |_, _| {})
}

/// Closed loop until arrival, the scenario duration, or a terminal
/// infraction. `observe` sees every tick record with its diagnostics.
pub fn run_route_with(
    scenario: Arc<Scenario>,
    cfg: &AgentConfig,
    degradation: &DegradationConfig,
    opts: &RunOptions,
    mut observe: impl FnMut(&TickRecord, &TickDiagnostics),
) -> Result<RunOutput> {
    let sensing = cfg.switches.apply(degradation);
    sensing.validate()?;
    let table = match &opts.calibration {
        Some(t) => t.clone(),
        None => Arc::new(calibrate_default(&opts.sim.vehicle, opts.sim.tick)),
    };
    let mut agent = Agent::new(
        cfg.clone(),
        Arc::new(scenario.lanemap.clone()),
        Arc::new(scenario.route.clone()),
        table,
    )?;
    let mut world = SimWorld::new(scenario.clone(), opts.sim);
    let end = scenario.route.reference_path.last().pose;
    let mut log = Vec::new();
    let arrived = loop {
        let obs = world.sense(&sensing);
        let (cmd, diag) = agent.tick(&obs);
        let mut events = world.step(&cmd);
        let st = world.state().clone();
        let arrived = st.ego.pose.distance(&end) <= ARRIVAL_RADIUS;
        let timed_out = !arrived && st.time >= scenario.duration - 1e-9;
        if timed_out {
            events.push(world.record(InfractionKind::Timeout));
        }
        let rec = TickRecord {
            tick: st.tick,
            time: st.time,
            ego: st.ego,
            route_s: st.route_s,
            route_offset: st.route_offset,
            command: cmd,
            events,
            trace: Some(diag.trace()),
        };
        observe(&rec, &diag);
        log.push(rec);
        if arrived || timed_out || world.terminal_infraction() {
            break arrived;
        }
    };
    let rc = route_completion(&scenario.route, world.trace());
    let report = compute_score(rc, world.events(), &opts.penalties)?;
    Ok(RunOutput { report, log, arrived })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::tests::minimal_json;
    use crate::world::{EgoState, ObjectCategory};
    use crate::geometry::OrientedBox;
    use std::sync::OnceLock;

    fn table() -> Arc<CalibrationTable> {
        static T: OnceLock<Arc<CalibrationTable>> = OnceLock::new();
        T.get_or_init(|| Arc::new(calibrate_default(&SimParams::default().vehicle, 0.05)))
            .clone()
    }

    fn scenario(actor: &str) -> Arc<Scenario> {
        Arc::new(Scenario::from_json_str(&minimal_json(actor), "mini").unwrap())
    }

    fn context(sc: &Scenario, cfg: AgentConfig) -> AgentContext {
        AgentContext {
            config: cfg,
            map: Arc::new(sc.lanemap.clone()),
            route: Arc::new(sc.route.clone()),
        }
    }

    fn serial() -> AgentConfig {
        let mut cfg = AgentConfig::default();
        cfg.planner.parallel = false;
        cfg
    }

    fn first_obs(sc: &Arc<Scenario>) -> Observation {
        SimWorld::new(sc.clone(), SimParams::default()).sense(&DegradationConfig::identity())
    }

    #[test]
    fn empty_world_keeps_lane_and_accelerates() {
        let sc = scenario("");
        let ctx = context(&sc, serial());
        let st = AgentState::new(&ctx.config, table()).unwrap();
        let (cmd, _, diag) = agent_tick(&first_obs(&sc), &st, &ctx);
        assert_eq!(diag.decision, Some(LaneDecision::KeepLane));
        let chosen = diag.chosen.unwrap();
        assert_eq!(chosen.offset, 0.0);
        assert!(!chosen.emergency && chosen.accel > 0.0);
        assert!(cmd.throttle > 0.0 && cmd.brake == 0.0);
        assert_eq!(diag.candidates.len(), 132);
        assert!(diag.error.is_none());
    }

    #[test]
    fn tick_is_pure() {
        let sc = scenario(r#"{"id":2,"category":"Car","length":4.5,"width":1.9,"waypoints":[[0,40,0,0,3]]}"#);
        let ctx = context(&sc, serial());
        let st = AgentState::new(&ctx.config, table()).unwrap();
        let obs = first_obs(&sc);
        let (c1, s1, d1) = agent_tick(&obs, &st, &ctx);
        let (c2, s2, d2) = agent_tick(&obs, &st, &ctx);
        assert_eq!(c1, c2);
        assert_eq!(d1.trace(), d2.trace());
        assert_eq!(s1.tracker, s2.tracker);
        assert_eq!(st.route_s(), None);
    }

    #[test]
    fn missing_ids_brake_with_cause() {
        let sc = scenario(r#"{"id":2,"category":"Car","length":4.5,"width":1.9,"waypoints":[[0,40,0,0,3]]}"#);
        let mut cfg = serial();
        cfg.switches.tracking = TrackingMode::PrivilegedIds;
        let ctx = context(&sc, cfg);
        let st = AgentState::new(&ctx.config, table()).unwrap();
        let mut obs = first_obs(&sc);
        obs.objects[0].id = None;
        let (cmd, _, diag) = agent_tick(&obs, &st, &ctx);
        assert_eq!(cmd, ControlCommand::full_brake());
        assert!(diag.trace().emergency);
        assert!(diag.error.unwrap().contains("privileged ids"));
    }

    #[test]
    fn identity_tracks_difference_speed() {
        let det = |x: f64| DetectedObject {
            category: ObjectCategory::Car,
            bbox: OrientedBox::new(Pose2D::new(x, 1.0, 0.0), 4.5, 1.9),
            timestamp: 0.0,
            id: Some(9),
        };
        let mut seen = BTreeMap::new();
        let t0 = identity_tracks(&[det(10.0)], &mut seen, 0.05).unwrap();
        assert_eq!(t0[0].speed(), 0.0);
        let t1 = identity_tracks(&[det(10.5)], &mut seen, 0.05).unwrap();
        assert!((t1[0].speed() - 10.0).abs() < 1e-9);
        assert_eq!(t1[0].status, TrackStatus::Active);
        identity_tracks(&[], &mut seen, 0.05).unwrap();
        assert!(seen.is_empty());
    }

    fn signal_obs(kind: SignalKind, light: Option<LightState>, x: f64) -> SignalObservation {
        SignalObservation {
            id: 4,
            kind,
            pose: Pose2D::new(x, 0.0, 0.0),
            lane: 1,
            light,
            speed: None,
        }
    }

    fn obs_at(x: f64, v: f64, sig: SignalObservation) -> Observation {
        Observation {
            time: 0.0,
            tick: 0,
            ego: EgoState::new(Pose2D::new(x, 0.0, 0.0), v, 0.0, 0.0),
            objects: vec![],
            signals: vec![sig],
        }
    }

    #[test]
    fn stop_points() {
        let sc = scenario("");
        let cfg = StopConfig::default();
        let mut served = BTreeSet::new();
        let target = 100.0 - 0.5 * EGO_LENGTH - cfg.margin;
        let red = signal_obs(SignalKind::TrafficLight, Some(LightState::Red), 100.0);
        assert_eq!(stop_point(&obs_at(50.0, 10.0, red.clone()), 50.0, &sc.route, &cfg, &mut served), Some(target));
        // 10 m/s with 3 m to go cannot stop
        assert_eq!(stop_point(&obs_at(target - 3.0, 10.0, red), target - 3.0, &sc.route, &cfg, &mut served), None);
        let yellow = signal_obs(SignalKind::TrafficLight, Some(LightState::Yellow), 100.0);
        assert_eq!(stop_point(&obs_at(85.0, 10.0, yellow.clone()), 85.0, &sc.route, &cfg, &mut served), None);
        assert_eq!(stop_point(&obs_at(70.0, 10.0, yellow), 70.0, &sc.route, &cfg, &mut served), Some(target));
        let green = signal_obs(SignalKind::TrafficLight, Some(LightState::Green), 100.0);
        assert_eq!(stop_point(&obs_at(50.0, 10.0, green), 50.0, &sc.route, &cfg, &mut served), None);

        let sign = signal_obs(SignalKind::StopSign, None, 100.0);
        assert_eq!(stop_point(&obs_at(50.0, 5.0, sign.clone()), 50.0, &sc.route, &cfg, &mut served), Some(target));
        assert_eq!(stop_point(&obs_at(target, 0.0, sign.clone()), target, &sc.route, &cfg, &mut served), None);
        assert!(served.contains(&4));
        assert_eq!(stop_point(&obs_at(target, 0.0, sign), target, &sc.route, &cfg, &mut served), None);
    }

    #[test]
    fn switches_override_degradation() {
        let base = DegradationConfig {
            detection_range: None,
            position_noise_sigma: 0.3,
            yaw_noise_sigma: 0.1,
            dropout_prob: 0.2,
            provide_ids: false,
            signal_misread_prob: 0.1,
            ego_pos_noise_sigma: 0.5,
            seed: 3,
        };
        let sw = ModuleSwitches {
            tracking: TrackingMode::PrivilegedIds,
            signals: SourceMode::Privileged,
            ego_pos: SourceMode::Privileged,
            detection_range: Some(32.0),
        };
        let d = sw.apply(&base);
        assert_eq!(
            d,
            DegradationConfig {
                detection_range: Some(32.0),
                provide_ids: true,
                seed: 3,
                ..DegradationConfig::identity()
            }
        );
        assert_eq!(ModuleSwitches::default().apply(&base), base);
    }

    #[test]
    fn config_json_defaults_and_errors() {
        let cfg = AgentConfig::from_json_str(r#"{"switches":{"tracking":"privileged_ids"}}"#, "a.json").unwrap();
        assert_eq!(cfg.switches.tracking, TrackingMode::PrivilegedIds);
        assert_eq!(cfg.weights, CostWeights::default());
        let err = AgentConfig::from_json_str(r#"{"switches":{"detection_range":-1}}"#, "a.json").unwrap_err();
        assert!(err.to_string().contains("detection_range"), "{err}");
        assert!(AgentConfig::from_json_str("{", "a.json").unwrap_err().to_string().contains("a.json"));
    }

    #[test]
    fn straight_route_scores_full() {
        let sc = scenario("");
        let out = run_route(sc.clone(), &AgentConfig::default(), &DegradationConfig::identity()).unwrap();
        assert!(out.arrived);
        assert_eq!(out.report.driving_score, 100.0);
        assert!(out.report.events.is_empty());
        let again = run_route(sc, &AgentConfig::default(), &DegradationConfig::identity()).unwrap();
        assert_eq!(out.report, again.report);
        assert_eq!(out.log, again.log);
    }
}
