//! Fixed-horizon trajectory prediction with lane anchoring.
//!
//! An object is anchored when it sits close to a lane centerline and heads
//! along it; anchored objects follow the lane (and its first successors)
//! at their current speed, keeping their lateral offset. Everything else
//! keeps speed and heading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox, Path, Pose2D};
use crate::map::{LaneId, LaneMap};
use crate::tracker::Track;
use crate::world::ObjectCategory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Max lateral distance to the centerline, as a fraction of lane width.
    pub lateral_fraction: f64,
    /// Max heading difference to the lane tangent, radians.
    pub max_heading_diff: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            horizon: 6.0,
            dt: 0.2,
            lateral_fraction: 0.75,
            max_heading_diff: 30f64.to_radians(),
        }
    }
}

impl PredictorConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.dt > 0.0) {
            return Err(Error::invalid("predictor", "horizon and dt must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionSample {
    pub t: f64,
    pub pose: Pose2D,
    pub bbox: OrientedBox,
}

/// Geometry an object is assumed to move along.
#[derive(Debug, Clone, PartialEq)]
pub enum Course {
    Straight(Pose2D),
    Lane { path: Path, s0: f64, offset: f64 },
}

impl Course {
    pub fn pose_at(&self, d: f64) -> Pose2D {
        match self {
            Course::Straight(p) => {
                let (c, s) = p.heading();
                Pose2D::new(p.x + c * d, p.y + s * d, p.yaw)
            }
            Course::Lane { path, s0, offset } => path.point_at(s0 + d, *offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub track_id: u64,
    pub category: ObjectCategory,
    pub anchored_lane: Option<LaneId>,
    pub speed: f64,
    /// Assumed constant acceleration the samples were integrated with.
    pub accel: f64,
    pub length: f64,
    pub width: f64,
    pub course: Course,
    pub samples: Vec<PredictionSample>,
    /// Present pose, which the samples start from when speed is zero.
    pub origin: Pose2D,
}

/// Distance covered after `t` seconds from speed `v0` under constant `a`,
/// stopping (never reversing) at zero speed.
pub fn travel(v0: f64, a: f64, t: f64) -> f64 {
    if a < 0.0 {
        let t_stop = v0 / -a;
        if t >= t_stop {
            return v0 * v0 / (-2.0 * a);
        }
    }
    v0 * t + 0.5 * a * t * t
}

impl Prediction {
    /// Re-integrates the same course under a different assumed acceleration.
    pub fn with_accel(&self, accel: f64, cfg: &PredictorConfig) -> Prediction {
        let mut p = self.clone();
        p.accel = accel;
        p.samples = integrate(&p.course, p.origin, p.speed, accel, p.length, p.width, cfg);
        p
    }

    pub fn final_pose(&self) -> Pose2D {
        self.samples.last().map_or(self.origin, |s| s.pose)
    }
}

fn integrate(
    course: &Course,
    origin: Pose2D,
    speed: f64,
    accel: f64,
    length: f64,
    width: f64,
    cfg: &PredictorConfig,
) -> Vec<PredictionSample> {
    (0..=cfg.steps())
        .map(|k| {
            let t = k as f64 * cfg.dt;
            let d = travel(speed, accel, t);
            let pose = if speed == 0.0 && accel <= 0.0 {
                origin
            } else {
                course.pose_at(d)
            };
            PredictionSample {
                t,
                pose,
                bbox: OrientedBox::new(pose, length, width),
            }
        })
        .collect()
}

/// Lane the object moves along, if any. Smallest lateral offset wins; exact
/// ties go to the lower lane id.
pub fn anchor_to_lane(pose: &Pose2D, map: &LaneMap, cfg: &PredictorConfig) -> Option<LaneId> {
    let mut best: Option<(f64, LaneId)> = None;
    for lane in map.lanes() {
        let pr = lane.centerline.project(pose.x, pose.y);
        let lateral = pr.offset.abs();
        if lateral > cfg.lateral_fraction * lane.width {
            continue;
        }
        let tangent = lane.centerline.pose_at(pr.s).yaw;
        if normalize_angle(pose.yaw - tangent).abs() >= cfg.max_heading_diff {
            continue;
        }
        // lanes iterate in id order, so strict < keeps the lower id on ties
        if best.map_or(true, |(d, _)| lateral < d) {
            best = Some((lateral, lane.id));
        }
    }
    best.map(|(_, id)| id)
}

/// The lane centerline followed by first successors until `needed` meters
/// past `s0` are covered or the chain ends.
pub fn lane_chain(map: &LaneMap, start: LaneId, s0: f64, needed: f64) -> Result<Path> {
    let mut lane = map.lane(start)?;
    let mut poses: Vec<Pose2D> = lane.centerline.points().iter().map(|p| p.pose).collect();
    let mut covered = lane.centerline.total_length() - s0;
    let mut visited = vec![start];
    while covered < needed {
        let Some(&next) = lane.successors.first() else {
            break;
        };
        if visited.contains(&next) {
            break;
        }
        visited.push(next);
        lane = map.lane(next)?;
        poses.extend(lane.centerline.points().iter().map(|p| p.pose));
        covered += lane.centerline.total_length();
    }
    Path::from_poses(poses)
}

/// Predicts one object from its present pose and speed.
pub fn predict_object(
    track_id: u64,
    category: ObjectCategory,
    pose: Pose2D,
    speed: f64,
    length: f64,
    width: f64,
    anchored: Option<LaneId>,
    map: &LaneMap,
    cfg: &PredictorConfig,
) -> Result<Prediction> {
    cfg.validate()?;
    let speed = speed.max(0.0);
    let course = match anchored {
        Some(id) => {
            let lane = map.lane(id)?;
            let pr = lane.centerline.project(pose.x, pose.y);
            let path = lane_chain(map, id, pr.s, speed * cfg.horizon + 1.0)?;
            // the chain starts with the anchor lane, so the projection agrees
            Course::Lane {
                path,
                s0: pr.s,
                offset: pr.offset,
            }
        }
        None => Course::Straight(pose),
    };
    let samples = integrate(&course, pose, speed, 0.0, length, width, cfg);
    Ok(Prediction {
        track_id,
        category,
        anchored_lane: anchored,
        speed,
        accel: 0.0,
        length,
        width,
        course,
        samples,
        origin: pose,
    })
}

/// Anchors and predicts a track.
pub fn predict(track: &Track, map: &LaneMap, cfg: &PredictorConfig) -> Result<Prediction> {
    let pose = track.pose();
    let anchored = anchor_to_lane(&pose, map, cfg);
    predict_object(
        track.id,
        track.category,
        pose,
        track.speed(),
        track.length,
        track.width,
        anchored,
        map,
        cfg,
    )
}

pub fn predict_all(tracks: &[Track], map: &LaneMap, cfg: &PredictorConfig) -> Result<Vec<Prediction>> {
    tracks.iter().map(|t| predict(t, map, cfg)).collect()
}
