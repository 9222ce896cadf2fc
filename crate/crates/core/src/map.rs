//! Simplified lane map (`lanemap-v1`) and route reference paths.
//!
//! ```json
//! { "version": "lanemap-v1",
//!   "lanes": [ { "id": 1, "centerline": [[0,0,0],[5,0,0]], "width": 3.5,
//!                "speed_limit": 13.9, "successors": [2],
//!                "left": {"id": 3, "same_direction": false}, "right": null } ] }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Path, Pose2D};

pub type LaneId = u32;

pub const LANEMAP_VERSION: &str = "lanemap-v1";
/// Largest allowed gap between consecutive centerline vertices.
pub const MAX_VERTEX_SPACING: f64 = 5.0;
/// Largest allowed discontinuity where consecutive route lanes join.
pub const MAX_ROUTE_GAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: LaneId,
    pub same_direction: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Path,
    pub width: f64,
    pub speed_limit: f64,
    pub successors: Vec<LaneId>,
    pub left: Option<Neighbor>,
    pub right: Option<Neighbor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LaneRecord {
    id: LaneId,
    centerline: Vec<[f64; 3]>,
    width: f64,
    speed_limit: f64,
    #[serde(default)]
    successors: Vec<LaneId>,
    #[serde(default)]
    left: Option<Neighbor>,
    #[serde(default)]
    right: Option<Neighbor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LaneMapRecord {
    version: String,
    lanes: Vec<LaneRecord>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneMap {
    lanes: BTreeMap<LaneId, Lane>,
}

impl LaneMap {
    pub fn new(lanes: impl IntoIterator<Item = Lane>) -> Result<Self> {
        let mut map = LaneMap::default();
        for lane in lanes {
            if map.lanes.insert(lane.id, lane).is_some() {
                return Err(Error::invalid("lanes", "duplicate lane id"));
            }
        }
        map.validate()?;
        Ok(map)
    }

    pub fn get(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.get(&id)
    }

    pub fn lane(&self, id: LaneId) -> Result<&Lane> {
        self.get(id)
            .ok_or_else(|| Error::invalid("lane", format!("unknown lane id {id}")))
    }

    pub fn lanes(&self) -> impl Iterator<Item = &Lane> {
        self.lanes.values()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    fn validate(&self) -> Result<()> {
        for lane in self.lanes.values() {
            let field = format!("lanes[id={}]", lane.id);
            if !(lane.width > 0.0) {
                return Err(Error::invalid(field, "width must be > 0"));
            }
            if !(lane.speed_limit > 0.0) {
                return Err(Error::invalid(field, "speed_limit must be > 0"));
            }
            if lane.centerline.max_spacing() > MAX_VERTEX_SPACING + 1e-9 {
                return Err(Error::invalid(
                    field,
                    format!(
                        "centerline vertices {:.2} m apart, max {MAX_VERTEX_SPACING}",
                        lane.centerline.max_spacing()
                    ),
                ));
            }
            let refs = lane
                .successors
                .iter()
                .copied()
                .chain(lane.left.map(|n| n.id))
                .chain(lane.right.map(|n| n.id));
            for r in refs {
                if !self.lanes.contains_key(&r) {
                    return Err(Error::invalid(field, format!("references unknown lane {r}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        Self::from_json_value(value, origin)
    }

    pub fn from_json_value(value: serde_json::Value, origin: &str) -> Result<Self> {
        let rec: LaneMapRecord =
            serde_json::from_value(value).map_err(|e| Error::parse(origin, e))?;
        if rec.version != LANEMAP_VERSION {
            return Err(Error::Version {
                found: rec.version,
                expected: LANEMAP_VERSION.into(),
            });
        }
        let mut lanes = Vec::with_capacity(rec.lanes.len());
        for (i, l) in rec.lanes.into_iter().enumerate() {
            let mut poses = Vec::with_capacity(l.centerline.len());
            for (k, p) in l.centerline.iter().enumerate() {
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(Error::parse(
                        origin,
                        format!("lanes[{i}].centerline[{k}] is not finite"),
                    ));
                }
                poses.push(Pose2D::new(p[0], p[1], p[2]));
            }
            // arc length must strictly increase: reject repeated vertices
            if poses.windows(2).any(|w| w[0].distance(&w[1]) <= 1e-9) {
                return Err(Error::parse(
                    origin,
                    format!("lanes[{i}].centerline has repeated vertices"),
                ));
            }
            let centerline = Path::from_poses(poses).map_err(|e| {
                Error::parse(origin, format!("lanes[{i}].centerline: {e}"))
            })?;
            lanes.push(Lane {
                id: l.id,
                centerline,
                width: l.width,
                speed_limit: l.speed_limit,
                successors: l.successors,
                left: l.left,
                right: l.right,
            });
        }
        Self::new(lanes).map_err(|e| Error::parse(origin, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let rec = LaneMapRecord {
            version: LANEMAP_VERSION.into(),
            lanes: self
                .lanes
                .values()
                .map(|l| LaneRecord {
                    id: l.id,
                    centerline: l
                        .centerline
                        .points()
                        .iter()
                        .map(|p| [p.pose.x, p.pose.y, p.pose.yaw])
                        .collect(),
                    width: l.width,
                    speed_limit: l.speed_limit,
                    successors: l.successors.clone(),
                    left: l.left,
                    right: l.right,
                })
                .collect(),
        };
        serde_json::to_value(rec).expect("lane map serializes")
    }
}

/// One lane's stretch of a route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteSpan {
    pub lane: LaneId,
    pub s_start: f64,
    pub s_end: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub reference_path: Path,
    pub total_length: f64,
    pub lanes: Vec<LaneId>,
    pub spans: Vec<RouteSpan>,
    /// Arc length the ego must not pass (e.g. waiting for a gap).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
}

impl RoutePlan {
    /// Concatenates lane centerlines in order.
    pub fn from_lanes(map: &LaneMap, lane_ids: &[LaneId]) -> Result<Self> {
        if lane_ids.is_empty() {
            return Err(Error::invalid("route.lanes", "route needs at least one lane"));
        }
        let mut poses: Vec<Pose2D> = Vec::new();
        let mut spans = Vec::with_capacity(lane_ids.len());
        let mut s_offset = 0.0;
        for (k, &id) in lane_ids.iter().enumerate() {
            let lane = map
                .get(id)
                .ok_or_else(|| Error::invalid("route.lanes", format!("unknown lane id {id}")))?;
            let pts = lane.centerline.points();
            let mut skip_first = false;
            if let Some(last) = poses.last() {
                let gap = last.distance(&pts[0].pose);
                if gap >= MAX_ROUTE_GAP {
                    return Err(Error::invalid(
                        "route.lanes",
                        format!("gap of {gap:.2} m between lane {} and lane {id}", lane_ids[k - 1]),
                    ));
                }
                s_offset += gap;
                skip_first = gap < 1e-6;
            }
            let start = if skip_first { 1 } else { 0 };
            poses.extend(pts[start..].iter().map(|p| p.pose));
            spans.push(RouteSpan {
                lane: id,
                s_start: s_offset,
                s_end: s_offset + lane.centerline.total_length(),
                speed_limit: lane.speed_limit,
            });
            s_offset += lane.centerline.total_length();
        }
        let reference_path = Path::from_poses(poses)?;
        Ok(Self::with_spans(reference_path, lane_ids.to_vec(), spans))
    }

    /// Route over a bare path with one speed limit.
    pub fn from_path(path: Path, speed_limit: f64) -> Self {
        let total = path.total_length();
        Self::with_spans(
            path,
            vec![0],
            vec![RouteSpan {
                lane: 0,
                s_start: 0.0,
                s_end: total,
                speed_limit,
            }],
        )
    }

    fn with_spans(reference_path: Path, lanes: Vec<LaneId>, spans: Vec<RouteSpan>) -> Self {
        Self {
            total_length: reference_path.total_length(),
            reference_path,
            lanes,
            spans,
            stop_s: None,
        }
    }

    pub fn span_at(&self, s: f64) -> &RouteSpan {
        self.spans
            .iter()
            .find(|sp| s < sp.s_end)
            .unwrap_or_else(|| self.spans.last().expect("route has spans"))
    }

    pub fn lane_at(&self, s: f64) -> LaneId {
        self.span_at(s).lane
    }

    pub fn speed_limit_at(&self, s: f64) -> f64 {
        self.span_at(s).speed_limit
    }

    /// Replaces the reference path, keeping lane spans (arc lengths are
    /// rescaled proportionally).
    pub fn with_path(&self, path: Path) -> Self {
        let scale = path.total_length() / self.total_length;
        let spans = self
            .spans
            .iter()
            .map(|sp| RouteSpan {
                s_start: sp.s_start * scale,
                s_end: sp.s_end * scale,
                ..*sp
            })
            .collect();
        Self {
            total_length: path.total_length(),
            reference_path: path,
            lanes: self.lanes.clone(),
            spans,
            stop_s: self.stop_s.map(|s| s * scale),
        }
    }

    /// Window of the route from `s0` to `s1`; arc lengths restart at zero.
    pub fn window(&self, s0: f64, s1: f64) -> Result<Self> {
        let s0 = s0.clamp(0.0, self.total_length);
        let path = self.reference_path.slice(s0, s1)?;
        let spans = self
            .spans
            .iter()
            .filter(|sp| sp.s_end > s0 && sp.s_start < s1)
            .map(|sp| RouteSpan {
                s_start: (sp.s_start - s0).max(0.0),
                s_end: sp.s_end - s0,
                ..*sp
            })
            .collect::<Vec<_>>();
        let lanes = spans.iter().map(|sp| sp.lane).collect();
        let mut out = Self::with_spans(path, lanes, spans);
        out.stop_s = self.stop_s.map(|s| s - s0);
        Ok(out)
    }
}
