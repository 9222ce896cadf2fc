//! `scenario-v1` files: lane map, ego route and spawn, scripted actors,
//! signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox, Pose2D};
use crate::map::{LaneId, LaneMap, RoutePlan};
use crate::world::{EgoState, ObjectCategory, TrafficSignal};

pub const SCENARIO_VERSION: &str = "scenario-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub pose: Pose2D,
    pub speed: f64,
}

/// Open-loop actor. Waypoint times are relative to the moment the script
/// starts: time zero, or when the ego first reaches `trigger_s` along its
/// route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorScript {
    pub id: u64,
    pub category: ObjectCategory,
    pub length: f64,
    pub width: f64,
    pub waypoints: Vec<Waypoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_s: Option<f64>,
}

impl ActorScript {
    /// Pose and speed at script-local time `tau`.
    pub fn state_at(&self, tau: f64) -> (Pose2D, f64) {
        let wps = &self.waypoints;
        let first = &wps[0];
        if tau <= first.t {
            return (first.pose, if wps.len() == 1 { 0.0 } else { first.speed });
        }
        for w in wps.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if tau <= b.t {
                let dt = b.t - a.t;
                let local = tau - a.t;
                let acc = (b.speed - a.speed) / dt;
                let full = a.speed * dt + 0.5 * acc * dt * dt;
                let part = a.speed * local + 0.5 * acc * local * local;
                let frac = if full > 1e-9 { part / full } else { local / dt };
                let pose = Pose2D::new(
                    a.pose.x + frac * (b.pose.x - a.pose.x),
                    a.pose.y + frac * (b.pose.y - a.pose.y),
                    a.pose.yaw + frac * normalize_angle(b.pose.yaw - a.pose.yaw),
                );
                return (pose, a.speed + acc * local);
            }
        }
        let last = wps[wps.len() - 1];
        let extra = tau - last.t;
        let (c, s) = last.pose.heading();
        let pose = Pose2D::new(
            last.pose.x + c * last.speed * extra,
            last.pose.y + s * last.speed * extra,
            last.pose.yaw,
        );
        (pose, last.speed)
    }

    pub fn bbox(&self, pose: Pose2D) -> OrientedBox {
        OrientedBox::new(pose, self.length, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub lanemap: LaneMap,
    pub route: RoutePlan,
    pub spawn: EgoState,
    pub actors: Vec<ActorScript>,
    pub signals: Vec<TrafficSignal>,
    pub duration: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RouteRecord {
    lanes: Vec<LaneId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EgoRecord {
    pose: Pose2D,
    #[serde(default)]
    speed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ActorRecord {
    id: u64,
    category: ObjectCategory,
    length: f64,
    width: f64,
    /// `[t, x, y, yaw, speed]` rows.
    waypoints: Vec<[f64; 5]>,
    #[serde(default)]
    trigger_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioRecord {
    version: String,
    #[serde(default)]
    name: String,
    lanemap: serde_json::Value,
    route: RouteRecord,
    ego: EgoRecord,
    #[serde(default)]
    actors: Vec<ActorRecord>,
    #[serde(default)]
    signals: Vec<TrafficSignal>,
    duration: f64,
    #[serde(default)]
    seed: u64,
}

impl Scenario {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let rec: ScenarioRecord = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if rec.version != SCENARIO_VERSION {
            return Err(Error::Version {
                found: rec.version,
                expected: SCENARIO_VERSION.into(),
            });
        }
        let perr = |field: String, msg: String| Error::parse(origin, format!("{field}: {msg}"));
        let lanemap = LaneMap::from_json_value(rec.lanemap, &format!("{origin}#lanemap"))?;
        let route = RoutePlan::from_lanes(&lanemap, &rec.route.lanes)
            .map_err(|e| perr("route.lanes".into(), e.to_string()))?;
        if !(rec.duration > 0.0) {
            return Err(perr("duration".into(), "must be > 0".into()));
        }
        let mut actors = Vec::with_capacity(rec.actors.len());
        for (i, a) in rec.actors.into_iter().enumerate() {
            let field = format!("actors[{i}] (id {})", a.id);
            if a.waypoints.is_empty() {
                return Err(perr(field, "needs at least one waypoint".into()));
            }
            if a.waypoints.iter().flatten().any(|v| !v.is_finite()) {
                return Err(perr(field, "non-finite waypoint value".into()));
            }
            if a.waypoints.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(perr(field, "waypoint times must be strictly increasing".into()));
            }
            if a.waypoints.iter().any(|w| w[4] < 0.0) {
                return Err(perr(field, "waypoint speed must be >= 0".into()));
            }
            if !(a.length > 0.0 && a.width > 0.0) {
                return Err(perr(field, "footprint dims must be > 0".into()));
            }
            if actors.iter().any(|b: &ActorScript| b.id == a.id) {
                return Err(perr(field, "duplicate actor id".into()));
            }
            actors.push(ActorScript {
                id: a.id,
                category: a.category,
                length: a.length,
                width: a.width,
                waypoints: a
                    .waypoints
                    .iter()
                    .map(|w| Waypoint {
                        t: w[0],
                        pose: Pose2D::new(w[1], w[2], w[3]),
                        speed: w[4],
                    })
                    .collect(),
                trigger_s: a.trigger_s,
            });
        }
        for (i, sig) in rec.signals.iter().enumerate() {
            if lanemap.get(sig.lane).is_none() {
                return Err(perr(
                    format!("signals[{i}]"),
                    format!("governs unknown lane {}", sig.lane),
                ));
            }
            sig.validate(rec.duration)
                .map_err(|e| perr(format!("signals[{i}]"), e.to_string()))?;
        }
        let first = lanemap.lane(route.lanes[0])?;
        let pr = first.centerline.project(rec.ego.pose.x, rec.ego.pose.y);
        if pr.offset.abs() > 0.5 * first.width {
            return Err(perr(
                "ego.pose".into(),
                format!("spawn is {:.2} m off the route's first lane", pr.offset.abs()),
            ));
        }
        let spawn = EgoState::new(rec.ego.pose, rec.ego.speed, 0.0, 0.0);
        Ok(Self {
            name: rec.name,
            lanemap,
            route,
            spawn,
            actors,
            signals: rec.signals,
            duration: rec.duration,
            seed: rec.seed,
        })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let rec = ScenarioRecord {
            version: SCENARIO_VERSION.into(),
            name: self.name.clone(),
            lanemap: self.lanemap.to_json_value(),
            route: RouteRecord {
                lanes: self.route.lanes.clone(),
            },
            ego: EgoRecord {
                pose: self.spawn.pose,
                speed: self.spawn.speed,
            },
            actors: self
                .actors
                .iter()
                .map(|a| ActorRecord {
                    id: a.id,
                    category: a.category,
                    length: a.length,
                    width: a.width,
                    waypoints: a
                        .waypoints
                        .iter()
                        .map(|w| [w.t, w.pose.x, w.pose.y, w.pose.yaw, w.speed])
                        .collect(),
                    trigger_s: a.trigger_s,
                })
                .collect(),
            signals: self.signals.clone(),
            duration: self.duration,
            seed: self.seed,
        };
        serde_json::to_value(rec).expect("scenario serializes")
    }
}

pub fn load_scenario(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json_str(&text, &path.display().to_string())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn minimal_json(extra_actor: &str) -> String {
        let pts: Vec<String> = (0..=40).map(|i| format!("[{},0,0]", 5 * i)).collect();
        format!(
            r#"{{"version":"scenario-v1","name":"mini",
            "lanemap":{{"version":"lanemap-v1","lanes":[{{"id":1,"centerline":[{}],"width":3.5,"speed_limit":10}}]}},
            "route":{{"lanes":[1]}},
            "ego":{{"pose":{{"x":0,"y":0,"yaw":0}},"speed":0}},
            "actors":[{extra_actor}],
            "duration":30,"seed":1}}"#,
            pts.join(",")
        )
    }

    #[test]
    fn minimal_scenario_has_no_actors() {
        let sc = Scenario::from_json_str(&minimal_json(""), "mini.json").unwrap();
        assert!(sc.actors.is_empty());
        assert!((sc.route.total_length - 200.0).abs() < 1e-9);
    }

    #[test]
    fn non_increasing_waypoints_name_the_actor() {
        let actor = r#"{"id":7,"category":"Car","length":4.5,"width":1.9,
            "waypoints":[[0,50,0,0,5],[0,60,0,0,5]]}"#;
        let err = Scenario::from_json_str(&minimal_json(actor), "bad.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bad.json") && err.contains("id 7"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let actor = r#"{"id":3,"category":"Pedestrian","length":0.6,"width":0.6,
            "waypoints":[[0,50,5,-1.57,1.2],[8,50,-5,-1.57,1.2]],"trigger_s":20}"#;
        let sc = Scenario::from_json_str(&minimal_json(actor), "x").unwrap();
        let text = serde_json::to_string(&sc.to_json_value()).unwrap();
        assert_eq!(Scenario::from_json_str(&text, "y").unwrap(), sc);
    }

    #[test]
    fn interpolation_respects_speed_profile() {
        let a = ActorScript {
            id: 1,
            category: ObjectCategory::Car,
            length: 4.5,
            width: 1.9,
            // brake from 10 m/s to rest over 2 s: 10 m
            waypoints: vec![
                Waypoint { t: 0.0, pose: Pose2D::new(0.0, 0.0, 0.0), speed: 10.0 },
                Waypoint { t: 2.0, pose: Pose2D::new(10.0, 0.0, 0.0), speed: 0.0 },
            ],
            trigger_s: None,
        };
        let (p, v) = a.state_at(1.0);
        assert!((p.x - 7.5).abs() < 1e-12 && (v - 5.0).abs() < 1e-12);
        let (p, v) = a.state_at(5.0);
        assert_eq!((p.x, v), (10.0, 0.0));
    }
}
