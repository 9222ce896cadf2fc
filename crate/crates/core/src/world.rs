//! Object, ego and signal descriptions shared by the simulator and the agent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Pose2D};
use crate::map::LaneId;

pub const EGO_LENGTH: f64 = 4.8;
pub const EGO_WIDTH: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectCategory {
    Car,
    Truck,
    Bike,
    Pedestrian,
    Construction,
    OpenDoorCar,
    Emergency,
}

impl ObjectCategory {
    pub const ALL: [ObjectCategory; 7] = [
        ObjectCategory::Car,
        ObjectCategory::Truck,
        ObjectCategory::Bike,
        ObjectCategory::Pedestrian,
        ObjectCategory::Construction,
        ObjectCategory::OpenDoorCar,
        ObjectCategory::Emergency,
    ];

    pub fn is_vehicle(self) -> bool {
        matches!(
            self,
            ObjectCategory::Car
                | ObjectCategory::Truck
                | ObjectCategory::OpenDoorCar
                | ObjectCategory::Emergency
        )
    }

    pub fn is_vulnerable(self) -> bool {
        matches!(self, ObjectCategory::Bike | ObjectCategory::Pedestrian)
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectCategory::Car => "Car",
            ObjectCategory::Truck => "Truck",
            ObjectCategory::Bike => "Bike",
            ObjectCategory::Pedestrian => "Pedestrian",
            ObjectCategory::Construction => "Construction",
            ObjectCategory::OpenDoorCar => "OpenDoorCar",
            ObjectCategory::Emergency => "Emergency",
        }
    }
}

impl std::str::FromStr for ObjectCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectCategory::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("category", format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub category: ObjectCategory,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub timestamp: f64,
    /// Persistent simulator id, only present in privileged mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub pose: Pose2D,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
}

impl EgoState {
    pub fn new(pose: Pose2D, speed: f64, accel: f64, yaw_rate: f64) -> Self {
        Self {
            pose,
            speed: speed.max(0.0),
            accel,
            yaw_rate,
            bbox: OrientedBox::new(pose, EGO_LENGTH, EGO_WIDTH),
        }
    }

    pub fn at_rest(pose: Pose2D) -> Self {
        Self::new(pose, 0.0, 0.0, 0.0)
    }

    pub fn with_pose(&self, pose: Pose2D) -> Self {
        Self {
            pose,
            bbox: self.bbox.with_center(pose),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    TrafficLight,
    StopSign,
    SpeedLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LightState {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightInterval {
    pub state: LightState,
    pub start: f64,
    pub end: f64,
}

/// A traffic light, stop sign or speed-limit sign. For lights and stop signs
/// `pose` marks the stop line on the governed lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSignal {
    pub id: u32,
    pub kind: SignalKind,
    pub pose: Pose2D,
    pub lane: LaneId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<LightInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl TrafficSignal {
    pub fn light_state(&self, t: f64) -> Option<LightState> {
        if self.kind != SignalKind::TrafficLight {
            return None;
        }
        self.schedule
            .iter()
            .find(|iv| t >= iv.start && t < iv.end)
            .or(self.schedule.last())
            .map(|iv| iv.state)
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        let field = format!("signals[{}]", self.id);
        match self.kind {
            SignalKind::TrafficLight => {
                if self.schedule.is_empty() {
                    return Err(Error::invalid(field, "traffic light without schedule"));
                }
                let mut t = 0.0;
                for iv in &self.schedule {
                    if iv.end <= iv.start {
                        return Err(Error::invalid(field, "empty light interval"));
                    }
                    if (iv.start - t).abs() > 1e-9 {
                        return Err(Error::invalid(
                            field,
                            format!("light intervals must be contiguous and disjoint; gap or overlap at t={t}"),
                        ));
                    }
                    t = iv.end;
                }
                if t < duration {
                    return Err(Error::invalid(
                        field,
                        format!("light schedule ends at {t} before scenario duration {duration}"),
                    ));
                }
            }
            SignalKind::SpeedLimit => match self.speed {
                Some(v) if v > 0.0 => {}
                _ => return Err(Error::invalid(field, "speed limit sign needs a positive speed")),
            },
            SignalKind::StopSign => {}
        }
        Ok(())
    }
}
