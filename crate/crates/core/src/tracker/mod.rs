//! Multi-object tracking over anonymous detections.
//!
//! Every tick each live track is predicted with its UKF, a gated rectangular
//! assignment pairs predictions with detections, and per-category lifecycle
//! counters decide activation (`time_to_init` consecutive hits) and removal
//! (`max_active_time` consecutive misses).

pub mod assignment;
pub mod ukf;

use std::collections::BTreeMap;

use nalgebra::{Matrix5, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox, Pose2D};
use crate::world::{DetectedObject, ObjectCategory};

pub use assignment::{solve_assignment, Assignment, CostMatrix};
pub use ukf::{ukf_predict, ukf_update, FilterState, MeasurementNoise, ProcessNoise, SigmaParams};

/// Meters of assignment cost per radian of yaw error.
pub const YAW_COST_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Active,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifecycle {
    /// Consecutive assigned ticks before a track becomes active.
    pub time_to_init: u32,
    /// Consecutive unassigned ticks before a track is dropped.
    pub max_active_time: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub lifecycle: BTreeMap<ObjectCategory, Lifecycle>,
    pub gate: f64,
    pub process: ProcessNoise,
    pub measurement: MeasurementNoise,
    pub sigma: SigmaParams,
    /// Initial speed variance of a new track, (m/s)^2.
    pub init_speed_var: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let lifecycle = ObjectCategory::ALL
            .into_iter()
            .map(|c| {
                let l = if c.is_vulnerable() {
                    Lifecycle {
                        time_to_init: 2,
                        max_active_time: 20,
                    }
                } else {
                    Lifecycle {
                        time_to_init: 4,
                        max_active_time: 10,
                    }
                };
                (c, l)
            })
            .collect();
        Self {
            lifecycle,
            gate: 4.0,
            process: ProcessNoise::default(),
            measurement: MeasurementNoise::default(),
            sigma: SigmaParams::default(),
            init_speed_var: 25.0,
        }
    }
}

impl TrackerConfig {
    pub fn lifecycle(&self, c: ObjectCategory) -> Lifecycle {
        self.lifecycle.get(&c).copied().unwrap_or(Lifecycle {
            time_to_init: 4,
            max_active_time: 10,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.process.accel_sigma,
            self.process.yaw_accel_sigma,
            self.measurement.pos_sigma,
            self.measurement.yaw_sigma,
        ];
        if sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("tracker", "all noise sigmas must be > 0"));
        }
        if !(self.gate > 0.0) {
            return Err(Error::invalid("tracker.gate", "gate must be > 0"));
        }
        if self.lifecycle.values().any(|l| l.time_to_init == 0 || l.max_active_time == 0) {
            return Err(Error::invalid("tracker.lifecycle", "tick counts must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub category: ObjectCategory,
    pub filter: FilterState,
    pub length: f64,
    pub width: f64,
    pub status: TrackStatus,
    pub hits: u32,
    pub misses: u32,
}

impl Track {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.filter.x(), self.filter.y(), self.filter.yaw())
    }

    pub fn speed(&self) -> f64 {
        self.filter.speed().max(0.0)
    }

    pub fn bbox(&self) -> OrientedBox {
        OrientedBox::new(self.pose(), self.length, self.width)
    }
}

/// Assignment cost between a predicted track pose and a detection.
pub fn pose_error(pred: &Pose2D, det: &Pose2D) -> f64 {
    (pred.x - det.x).hypot(pred.y - det.y) + YAW_COST_WEIGHT * normalize_angle(pred.yaw - det.yaw).abs()
}

/// Owns the live tracks of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    pub config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    /// All live (tentative and active) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn active(&self) -> Vec<Track> {
        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Active)
            .cloned()
            .collect()
    }

    fn spawn(&mut self, det: &DetectedObject) -> Track {
        let m = &self.config.measurement;
        let p = det.bbox.center;
        let cov = Matrix5::from_diagonal(&Vector5::new(
            m.pos_sigma * m.pos_sigma,
            m.pos_sigma * m.pos_sigma,
            m.yaw_sigma * m.yaw_sigma,
            self.config.init_speed_var,
            0.25,
        ));
        let id = self.next_id;
        self.next_id += 1;
        let lc = self.config.lifecycle(det.category);
        Track {
            id,
            category: det.category,
            filter: FilterState::new(Vector5::new(p.x, p.y, p.yaw, 0.0, 0.0), cov),
            length: det.bbox.length,
            width: det.bbox.width,
            status: if lc.time_to_init <= 1 {
                TrackStatus::Active
            } else {
                TrackStatus::Tentative
            },
            hits: 1,
            misses: 0,
        }
    }

    /// Advances every track by `dt` and folds in one tick of detections.
    /// Returns the active tracks.
    pub fn step(&mut self, detections: &[DetectedObject], dt: f64) -> Result<Vec<Track>> {
        let cfg = self.config.clone();
        for t in &mut self.tracks {
            t.filter = ukf_predict(&t.filter, dt, &cfg.process, &cfg.sigma)?;
        }
        // category mismatch must never pass the gate
        let blocked = 2.0 * cfg.gate + 1e3;
        let cost = CostMatrix::from_fn(self.tracks.len(), detections.len(), |i, j| {
            let t = &self.tracks[i];
            let d = &detections[j];
            if t.category != d.category {
                blocked
            } else {
                pose_error(&t.pose(), &d.bbox.center)
            }
        });
        let assignment = solve_assignment(&cost, cfg.gate);

        let mut assigned = vec![false; self.tracks.len()];
        for &(i, j) in &assignment.matches {
            assigned[i] = true;
            let det = &detections[j];
            let t = &mut self.tracks[i];
            let c = det.bbox.center;
            t.filter = ukf_update(
                &t.filter,
                &Vector3::new(c.x, c.y, c.yaw),
                &cfg.measurement,
                &cfg.sigma,
            )?;
            // smooth footprint estimate
            t.length += 0.2 * (det.bbox.length - t.length);
            t.width += 0.2 * (det.bbox.width - t.width);
            t.hits += 1;
            t.misses = 0;
            if t.status == TrackStatus::Tentative && t.hits >= cfg.lifecycle(t.category).time_to_init {
                t.status = TrackStatus::Active;
            }
        }
        for (t, hit) in self.tracks.iter_mut().zip(&assigned) {
            if !hit {
                t.misses += 1;
                t.hits = 0;
                if t.misses >= cfg.lifecycle(t.category).max_active_time {
                    t.status = TrackStatus::Dropped;
                }
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dropped);
        for &j in &assignment.unmatched_cols {
            let t = self.spawn(&detections[j]);
            self.tracks.push(t);
        }
        Ok(self.active())
    }
}
