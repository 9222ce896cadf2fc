use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;

/// Closed set of infractions the world can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InfractionKind {
    CollisionPedestrian,
    CollisionVehicle,
    CollisionStatic,
    RedLight,
    StopSign,
    MinSpeed,
    EmergencyYield,
    RouteDeviation,
    AgentBlocked,
    Timeout,
}

impl InfractionKind {
    pub const ALL: [InfractionKind; 10] = [
        InfractionKind::CollisionPedestrian,
        InfractionKind::CollisionVehicle,
        InfractionKind::CollisionStatic,
        InfractionKind::RedLight,
        InfractionKind::StopSign,
        InfractionKind::MinSpeed,
        InfractionKind::EmergencyYield,
        InfractionKind::RouteDeviation,
        InfractionKind::AgentBlocked,
        InfractionKind::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InfractionKind::CollisionPedestrian => "CollisionPedestrian",
            InfractionKind::CollisionVehicle => "CollisionVehicle",
            InfractionKind::CollisionStatic => "CollisionStatic",
            InfractionKind::RedLight => "RedLight",
            InfractionKind::StopSign => "StopSign",
            InfractionKind::MinSpeed => "MinSpeed",
            InfractionKind::EmergencyYield => "EmergencyYield",
            InfractionKind::RouteDeviation => "RouteDeviation",
            InfractionKind::AgentBlocked => "AgentBlocked",
            InfractionKind::Timeout => "Timeout",
        }
    }
}

impl std::str::FromStr for InfractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InfractionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInfractionEvent {
    pub kind: InfractionKind,
    pub time: f64,
    pub location: Pose2D,
}
