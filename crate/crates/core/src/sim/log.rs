//! JSON-lines tick log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::events::RawInfractionEvent;
use crate::sim::plant::ControlCommand;
use crate::world::{EgoState, ObjectCategory};

/// A track as the agent saw it on one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub id: u64,
    pub category: ObjectCategory,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
}

/// Decision summary written by the agent each tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickTrace {
    pub behavior: String,
    pub path_index: Option<usize>,
    pub accel_index: Option<usize>,
    pub cost: Option<f64>,
    pub emergency: bool,
    pub tracks: usize,
    pub stop_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<TrackSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub time: f64,
    pub ego: EgoState,
    pub route_s: f64,
    pub route_offset: f64,
    pub command: ControlCommand,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<RawInfractionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TickTrace>,
}

pub fn write_log<W: Write>(mut out: W, records: &[TickRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::parse("tick log", e))?;
        writeln!(out, "{line}").map_err(|e| Error::io("tick log", e))?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R, origin: &str) -> Result<Vec<TickRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::parse(origin, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;

    #[test]
    fn round_trip() {
        let rec = TickRecord {
            tick: 3,
            time: 0.15,
            ego: EgoState::new(Pose2D::new(1.0, 2.0, 0.3), 4.0, 0.5, 0.01),
            route_s: 1.0,
            route_offset: 0.0,
            command: ControlCommand::IDLE,
            events: vec![],
            trace: Some(TickTrace {
                behavior: "LaneFollow".into(),
                path_index: Some(5),
                accel_index: Some(7),
                cost: Some(1.25),
                emergency: false,
                tracks: 2,
                stop_s: None,
                error: None,
                objects: vec![TrackSnapshot {
                    id: 4,
                    category: ObjectCategory::Bike,
                    x: 10.5,
                    y: -1.25,
                    yaw: 0.1,
                    speed: 3.0,
                }],
            }),
        };
        let mut buf = Vec::new();
        write_log(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        let back = read_log(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
        assert!(read_log(&b"{\"tick\":1}\n"[..], "mem").unwrap_err().to_string().contains("line 1"));
    }
}
