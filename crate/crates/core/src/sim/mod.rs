//! Deterministic fixed-step world hosting the ego and scripted actors.

pub mod events;
pub mod infractions;
pub mod log;
pub mod plant;
pub mod scenario;
pub mod sense;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::world::{DetectedObject, EgoState};

pub use events::{InfractionKind, RawInfractionEvent};
pub use infractions::{ActorFrame, InfractionConfig, InfractionMonitor};
pub use log::{TickRecord, TickTrace, TrackSnapshot};
pub use plant::{ControlCommand, VehicleParams};
pub use scenario::{load_scenario, ActorScript, Scenario};
pub use sense::{DegradationConfig, Observation, SignalObservation, TruthObject};

pub const DEFAULT_TICK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub tick: f64,
    pub vehicle: VehicleParams,
    pub infractions: InfractionConfig,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            tick: DEFAULT_TICK,
            vehicle: VehicleParams::default(),
            infractions: InfractionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub pose: Pose2D,
    pub speed: f64,
    /// Sim time at which the script started running.
    pub started_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub tick: u64,
    pub time: f64,
    pub ego: EgoState,
    pub route_s: f64,
    pub route_offset: f64,
    pub actors: Vec<ActorState>,
}

fn place_actors(scenario: &Scenario, time: f64, route_s: f64, prev: Option<&[ActorState]>) -> Vec<ActorState> {
    scenario
        .actors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut started = prev.and_then(|p| p[i].started_at);
            if started.is_none() {
                match a.trigger_s {
                    None => started = Some(0.0),
                    Some(s) if route_s >= s => started = Some(time),
                    Some(_) => {}
                }
            }
            let tau = started.map_or(f64::NEG_INFINITY, |t0| time - t0);
            let (pose, speed) = a.state_at(tau);
            ActorState {
                pose,
                speed,
                started_at: started,
            }
        })
        .collect()
}

impl SimState {
    pub fn initial(scenario: &Scenario) -> Self {
        let ego = scenario.spawn;
        let pr = scenario.route.reference_path.project(ego.pose.x, ego.pose.y);
        Self {
            tick: 0,
            time: 0.0,
            ego,
            route_s: pr.s,
            route_offset: pr.offset,
            actors: place_actors(scenario, 0.0, pr.s, None),
        }
    }
}

/// Advances the world by one tick.
pub fn step(scenario: &Scenario, state: &SimState, cmd: &ControlCommand, params: &SimParams) -> SimState {
    let dt = params.tick;
    let ego = params.vehicle.step(&state.ego, cmd, dt);
    let tick = state.tick + 1;
    let time = tick as f64 * dt;
    let path = &scenario.route.reference_path;
    let pr = path.project_window(ego.pose.x, ego.pose.y, state.route_s - 10.0, state.route_s + 20.0);
    SimState {
        tick,
        time,
        ego,
        route_s: pr.s,
        route_offset: pr.offset,
        actors: place_actors(scenario, time, pr.s, Some(&state.actors)),
    }
}

pub fn truth_objects(scenario: &Scenario, state: &SimState) -> Vec<TruthObject> {
    scenario
        .actors
        .iter()
        .zip(&state.actors)
        .map(|(a, s)| TruthObject {
            id: a.id,
            object: DetectedObject {
                category: a.category,
                bbox: a.bbox(s.pose),
                timestamp: state.time,
                id: Some(a.id),
            },
        })
        .collect()
}

/// One simulation instance: scenario, state and infraction history.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub scenario: Arc<Scenario>,
    pub params: SimParams,
    state: SimState,
    monitor: InfractionMonitor,
    events: Vec<RawInfractionEvent>,
    trace: Vec<Pose2D>,
}

impl SimWorld {
    pub fn new(scenario: Arc<Scenario>, params: SimParams) -> Self {
        let state = SimState::initial(&scenario);
        let monitor = InfractionMonitor::new(params.infractions, &scenario.route, &scenario.signals);
        let trace = vec![state.ego.pose];
        Self {
            scenario,
            params,
            state,
            monitor,
            events: Vec::new(),
            trace,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn events(&self) -> &[RawInfractionEvent] {
        &self.events
    }

    /// Ego poses after every tick, starting with the spawn.
    pub fn trace(&self) -> &[Pose2D] {
        &self.trace
    }

    pub fn terminal_infraction(&self) -> bool {
        self.monitor.terminal()
    }

    pub fn sense(&self, cfg: &DegradationConfig) -> Observation {
        let truth = truth_objects(&self.scenario, &self.state);
        sense::sense(
            self.state.time,
            self.state.tick,
            &self.state.ego,
            &truth,
            &self.scenario.signals,
            cfg,
        )
    }

    pub fn actor_frames(&self) -> Vec<ActorFrame> {
        let path = &self.scenario.route.reference_path;
        let s = self.state.route_s;
        self.scenario
            .actors
            .iter()
            .zip(&self.state.actors)
            .map(|(a, st)| {
                let pr = path.project_window(st.pose.x, st.pose.y, s - 150.0, s + 150.0);
                ActorFrame {
                    id: a.id,
                    category: a.category,
                    bbox: a.bbox(st.pose),
                    route_s: pr.s,
                    route_offset: pr.offset,
                }
            })
            .collect()
    }

    /// Steps the world and returns the infractions raised on this tick.
    pub fn step(&mut self, cmd: &ControlCommand) -> Vec<RawInfractionEvent> {
        self.state = step(&self.scenario, &self.state, cmd, &self.params);
        self.trace.push(self.state.ego.pose);
        let actors = self.actor_frames();
        let frame = infractions::Frame {
            time: self.state.time,
            dt: self.params.tick,
            ego: &self.state.ego,
            route_s: self.state.route_s,
            route_offset: self.state.route_offset,
            actors: &actors,
        };
        let ev = self
            .monitor
            .detect(&frame, &self.scenario.route, &self.scenario.signals);
        self.events.extend_from_slice(&ev);
        ev
    }

    /// Records an event raised outside the per-tick rules, e.g. a timeout.
    pub fn record(&mut self, kind: InfractionKind) -> RawInfractionEvent {
        let ev = RawInfractionEvent {
            kind,
            time: self.state.time,
            location: self.state.ego.pose,
        };
        self.events.push(ev);
        ev
    }
}
