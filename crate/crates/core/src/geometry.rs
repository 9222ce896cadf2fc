//! Planar poses, oriented boxes and arc-length parameterized polylines.
//!
//! Global frame is right-handed: x east, y north, yaw counterclockwise
//! from +x, always normalized into (-pi, pi].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn heading(&self) -> (f64, f64) {
        (self.yaw.cos(), self.yaw.sin())
    }

    /// Composes `local`, expressed in this pose's frame, into the parent frame.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        to_global(self, local)
    }
}

/// Maps a pose expressed in the ego frame into the global frame.
pub fn to_global(ego: &Pose2D, local: &Pose2D) -> Pose2D {
    let (c, s) = ego.heading();
    Pose2D::new(
        ego.x + c * local.x - s * local.y,
        ego.y + s * local.x + c * local.y,
        ego.yaw + local.yaw,
    )
}

/// Inverse of [`to_global`].
pub fn to_ego(ego: &Pose2D, global: &Pose2D) -> Pose2D {
    let (c, s) = ego.heading();
    let dx = global.x - ego.x;
    let dy = global.y - ego.y;
    Pose2D::new(c * dx + s * dy, -s * dx + c * dy, global.yaw - ego.yaw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Pose2D,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn new(center: Pose2D, length: f64, width: f64) -> Self {
        Self {
            center,
            length,
            width,
        }
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Corners in counterclockwise order starting at front-right.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (c, s) = self.center.heading();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        let local = [[hl, -hw], [hl, hw], [-hl, hw], [-hl, -hw]];
        local.map(|[lx, ly]| {
            [
                self.center.x + c * lx - s * ly,
                self.center.y + s * lx + c * ly,
            ]
        })
    }

    pub fn with_center(&self, center: Pose2D) -> Self {
        Self { center, ..*self }
    }

    /// Radius of the circumscribed circle.
    pub fn radius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

fn project_interval(corners: &[[f64; 2]; 4], axis: [f64; 2]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in corners {
        let d = p[0] * axis[0] + p[1] * axis[1];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

fn box_axes(b: &OrientedBox) -> [[f64; 2]; 2] {
    let (c, s) = b.center.heading();
    [[c, s], [-s, c]]
}

/// True when the two boxes share at least one point (touching counts).
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for axis in box_axes(a).into_iter().chain(box_axes(b)) {
        let (alo, ahi) = project_interval(&ca, axis);
        let (blo, bhi) = project_interval(&cb, axis);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let abx = b[0] - a[0];
    let aby = b[1] - a[1];
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - (a[0] + t * abx)).hypot(p[1] - (a[1] + t * aby))
}

/// Minimum distance between the footprints of two oriented boxes; zero when
/// they touch or overlap. Exactly symmetric in its arguments.
pub fn min_polygon_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if boxes_overlap(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for (verts, edges) in [(&ca, &cb), (&cb, &ca)] {
        for v in verts.iter() {
            for i in 0..4 {
                let d = point_segment_distance(*v, edges[i], edges[(i + 1) % 4]);
                best = best.min(d);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub pose: Pose2D,
    pub s: f64,
}

/// Polyline with strictly increasing arc length, at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    points: Vec<PathPoint>,
}

/// Result of projecting a point onto a [`Path`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    /// Signed lateral offset, left of the direction of travel is positive.
    pub offset: f64,
    pub segment: usize,
}

/// Projects `(x, y)` onto a raw pose polyline. Arc length is measured from
/// the first point. Equidistant candidates resolve to the smaller `s`.
pub fn project_onto_path(path: &[Pose2D], x: f64, y: f64) -> Result<(f64, f64)> {
    let p = Path::from_poses(path.to_vec())?;
    let pr = p.project(x, y);
    Ok((pr.s, pr.offset))
}

impl Path {
    /// Builds a path from poses, dropping consecutive duplicates.
    pub fn from_poses(poses: Vec<Pose2D>) -> Result<Self> {
        let mut points: Vec<PathPoint> = Vec::with_capacity(poses.len());
        for pose in poses {
            match points.last() {
                None => points.push(PathPoint { pose, s: 0.0 }),
                Some(last) => {
                    let d = last.pose.distance(&pose);
                    if d > 1e-9 {
                        points.push(PathPoint { pose, s: last.s + d });
                    }
                }
            }
        }
        if points.len() < 2 {
            return Err(Error::DegeneratePath(points.len()));
        }
        Ok(Self { points })
    }

    /// Builds a path from bare positions; yaw follows the chord directions.
    pub fn from_xy(xy: &[[f64; 2]]) -> Result<Self> {
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(xy.len());
        for p in xy {
            if pts
                .last()
                .map_or(true, |l| (l[0] - p[0]).hypot(l[1] - p[1]) > 1e-9)
            {
                pts.push(*p);
            }
        }
        if pts.len() < 2 {
            return Err(Error::DegeneratePath(pts.len()));
        }
        let n = pts.len();
        let poses = (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (pts[0], pts[1]),
                    i if i == n - 1 => (pts[n - 2], pts[n - 1]),
                    i => (pts[i - 1], pts[i + 1]),
                };
                Pose2D::new(pts[i][0], pts[i][1], (b[1] - a[1]).atan2(b[0] - a[0]))
            })
            .collect();
        Self::from_poses(poses)
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }

    pub fn first(&self) -> &PathPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &PathPoint {
        &self.points[self.points.len() - 1]
    }

    fn segment_projection(&self, i: usize, x: f64, y: f64) -> (f64, f64, f64) {
        self.segment_projection_within(i, x, y, 0.0, 1.0)
    }

    fn segment_projection_within(&self, i: usize, x: f64, y: f64, t_lo: f64, t_hi: f64) -> (f64, f64, f64) {
        let a = &self.points[i];
        let b = &self.points[i + 1];
        let dx = b.pose.x - a.pose.x;
        let dy = b.pose.y - a.pose.y;
        let len = b.s - a.s;
        let t = (((x - a.pose.x) * dx + (y - a.pose.y) * dy) / (len * len)).clamp(t_lo, t_hi);
        let fx = a.pose.x + t * dx;
        let fy = a.pose.y + t * dy;
        let dist = (x - fx).hypot(y - fy);
        let cross = dx * (y - a.pose.y) - dy * (x - a.pose.x);
        let offset = if cross < 0.0 { -dist } else { dist };
        (a.s + t * len, offset, dist)
    }

    /// Closest point over the whole path.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        self.project_range(x, y, 0, self.points.len() - 1)
    }

    /// Closest point restricted to arc lengths within `[s_lo, s_hi]` (segment
    /// granularity). Useful for tracking progress along self-approaching routes.
    pub fn project_window(&self, x: f64, y: f64, s_lo: f64, s_hi: f64) -> Projection {
        let lo = self.segment_index(s_lo);
        let hi = (self.segment_index(s_hi) + 1).min(self.points.len() - 1);
        self.project_range(x, y, lo, hi.max(lo + 1))
    }

    fn project_range(&self, x: f64, y: f64, lo: usize, hi: usize) -> Projection {
        let mut best = Projection {
            s: 0.0,
            offset: f64::INFINITY,
            segment: lo,
        };
        let mut best_d = f64::INFINITY;
        for i in lo..hi {
            let (s, offset, d) = self.segment_projection(i, x, y);
            if d < best_d {
                best_d = d;
                best = Projection {
                    s,
                    offset,
                    segment: i,
                };
            }
        }
        best
    }

    /// Like [`Path::project_window`], but past either end of the path the
    /// arc length and offset are measured along the end tangent instead of
    /// clamping to the end point.
    pub fn project_window_extended(&self, x: f64, y: f64, s_lo: f64, s_hi: f64) -> Projection {
        let best = self.project_window(x, y, s_lo, s_hi);
        let last = self.points.len() - 2;
        let i = best.segment;
        let (t_lo, t_hi) = match (i == 0, i == last) {
            (true, true) => (f64::NEG_INFINITY, f64::INFINITY),
            (true, false) => (f64::NEG_INFINITY, 1.0),
            (false, true) => (0.0, f64::INFINITY),
            (false, false) => return best,
        };
        let (s, offset, _) = self.segment_projection_within(i, x, y, t_lo, t_hi);
        Projection { s, offset, segment: i }
    }

    /// Index of the segment containing arc length `s` (clamped).
    pub fn segment_index(&self, s: f64) -> usize {
        let n = self.points.len();
        let idx = self.points.partition_point(|p| p.s <= s);
        idx.saturating_sub(1).min(n - 2)
    }

    /// Pose at arc length `s`. Beyond either end the path is extended along
    /// its end tangent.
    pub fn pose_at(&self, s: f64) -> Pose2D {
        let i = self.segment_index(s);
        let a = &self.points[i];
        let b = &self.points[i + 1];
        let len = b.s - a.s;
        let t = (s - a.s) / len;
        if !(0.0..=1.0).contains(&t) {
            let end = if t < 0.0 { a } else { b };
            let (c, sn) = end.pose.heading();
            let ds = s - end.s;
            return Pose2D::new(end.pose.x + c * ds, end.pose.y + sn * ds, end.pose.yaw);
        }
        let dyaw = normalize_angle(b.pose.yaw - a.pose.yaw);
        Pose2D::new(
            a.pose.x + t * (b.pose.x - a.pose.x),
            a.pose.y + t * (b.pose.y - a.pose.y),
            a.pose.yaw + t * dyaw,
        )
    }

    /// Reconstructs the global point at `(s, offset)`.
    pub fn point_at(&self, s: f64, offset: f64) -> Pose2D {
        let p = self.pose_at(s);
        let (c, sn) = p.heading();
        Pose2D::new(p.x - sn * offset, p.y + c * offset, p.yaw)
    }

    /// Laterally shifts every vertex by `offset(s)` along its left normal.
    pub fn offset_by(&self, offset: impl Fn(f64) -> f64) -> Result<Path> {
        let xy: Vec<[f64; 2]> = self
            .points
            .iter()
            .map(|p| {
                let o = offset(p.s);
                let (c, sn) = p.pose.heading();
                [p.pose.x - sn * o, p.pose.y + c * o]
            })
            .collect();
        Path::from_xy(&xy)
    }

    /// Sub-path covering `[s0, s1]` with interpolated endpoints; arc length
    /// restarts at zero.
    pub fn slice(&self, s0: f64, s1: f64) -> Result<Path> {
        let s0 = s0.max(0.0);
        let s1 = s1.min(self.total_length());
        let mut poses = vec![self.pose_at(s0)];
        poses.extend(
            self.points
                .iter()
                .filter(|p| p.s > s0 + 1e-6 && p.s < s1 - 1e-6)
                .map(|p| p.pose),
        );
        poses.push(self.pose_at(s1));
        Path::from_poses(poses)
    }

    /// Resamples at uniform arc-length spacing (last point always kept).
    pub fn resample(&self, ds: f64) -> Result<Path> {
        let total = self.total_length();
        let n = (total / ds).floor() as usize;
        let mut poses: Vec<Pose2D> = (0..=n).map(|k| self.pose_at(k as f64 * ds)).collect();
        if total - n as f64 * ds > 1e-6 {
            poses.push(self.last().pose);
        }
        Path::from_poses(poses)
    }

    /// Largest gap between consecutive vertices.
    pub fn max_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].s - w[0].s)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_frame() {
        let g = to_global(&Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(1.0, 2.0, 0.0));
        assert_eq!(g, Pose2D::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn quarter_turn_frame() {
        let g = to_global(&Pose2D::new(0.0, 0.0, FRAC_PI_2), &Pose2D::new(1.0, 0.0, 0.0));
        assert!(g.x.abs() < 1e-12);
        assert!((g.y - 1.0).abs() < 1e-12);
        assert!((g.yaw - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn yaw_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_squares_two_apart() {
        let a = OrientedBox::new(Pose2D::new(0.0, 0.0, 0.0), 1.0, 1.0);
        let b = OrientedBox::new(Pose2D::new(3.0, 0.0, 0.0), 1.0, 1.0);
        assert!((min_polygon_distance(&a, &b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_boxes_have_zero_distance() {
        let a = OrientedBox::new(Pose2D::new(0.0, 0.0, 0.3), 4.0, 2.0);
        let b = OrientedBox::new(Pose2D::new(1.0, 0.5, -0.7), 4.0, 2.0);
        assert_eq!(min_polygon_distance(&a, &b), 0.0);
    }

    #[test]
    fn corners_are_counterclockwise() {
        let b = OrientedBox::new(Pose2D::new(1.0, -2.0, 2.2), 4.5, 1.9);
        let c = b.corners();
        let mut area2 = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            area2 += c[i][0] * c[j][1] - c[j][0] * c[i][1];
        }
        assert!(area2 > 0.0);
        assert!((0.5 * area2 - b.area()).abs() < 1e-9);
    }

    fn straight(len: f64) -> Path {
        let xy: Vec<[f64; 2]> = (0..=(len as usize)).map(|i| [i as f64, 0.0]).collect();
        Path::from_xy(&xy).unwrap()
    }

    #[test]
    fn projection_on_straight_path() {
        let p = straight(10.0);
        let pr = p.project(3.0, 2.0);
        assert!((pr.s - 3.0).abs() < 1e-12);
        assert!((pr.offset - 2.0).abs() < 1e-12);
        let on = p.project(4.5, 0.0);
        assert_eq!(on.offset, 0.0);
        let before = p.project(-3.0, 1.0);
        assert_eq!(before.s, 0.0);
    }

    #[test]
    fn extended_projection_continues_past_the_ends() {
        let p = straight(10.0);
        let after = p.project_window_extended(13.0, 0.5, 0.0, 10.0);
        assert!((after.s - 13.0).abs() < 1e-12);
        assert!((after.offset - 0.5).abs() < 1e-12);
        let before = p.project_window_extended(-2.0, -1.0, 0.0, 10.0);
        assert!((before.s + 2.0).abs() < 1e-12);
        assert!((before.offset + 1.0).abs() < 1e-12);
        let inside = p.project_window_extended(4.0, 1.0, 0.0, 10.0);
        assert_eq!(inside, p.project(4.0, 1.0));
        assert_eq!(p.project(13.0, 0.5).s, 10.0);
    }

    #[test]
    fn projection_right_is_negative() {
        let pr = straight(10.0).project(5.0, -1.5);
        assert!((pr.offset + 1.5).abs() < 1e-12);
    }

    #[test]
    fn projection_ties_take_smaller_s() {
        // V shape: point equidistant from both arms.
        let p = Path::from_xy(&[[-1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]).unwrap();
        let pr = p.project(0.0, 1.0);
        assert!(pr.s < p.total_length() / 2.0 + 1e-12);
        assert_eq!(pr.segment, 0);
    }

    #[test]
    fn empty_path_is_error() {
        assert!(project_onto_path(&[], 0.0, 0.0).is_err());
        assert!(project_onto_path(&[Pose2D::new(0.0, 0.0, 0.0)], 0.0, 0.0).is_err());
    }

    #[test]
    fn pose_at_extends_past_ends() {
        let p = straight(10.0);
        let e = p.pose_at(12.0);
        assert!((e.x - 12.0).abs() < 1e-12);
        let b = p.pose_at(-1.0);
        assert!((b.x + 1.0).abs() < 1e-12);
    }

    #[test]
    fn slice_restarts_arc_length() {
        let p = straight(10.0);
        let s = p.slice(2.5, 7.5).unwrap();
        assert!((s.total_length() - 5.0).abs() < 1e-12);
        assert!((s.first().pose.x - 2.5).abs() < 1e-12);
    }

    /// Independent distance oracle: all 16 edge pairs via segment-segment
    /// distance, plus containment checks.
    fn seg_seg(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
        let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
            (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        };
        let o1 = orient(a0, a1, b0);
        let o2 = orient(a0, a1, b1);
        let o3 = orient(b0, b1, a0);
        let o4 = orient(b0, b1, a1);
        if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
            return 0.0;
        }
        let psd = |p: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            // minimize over a dense-then-refined parameter, no shared code
            let f = |t: f64| {
                let x = a[0] + t * (b[0] - a[0]);
                let y = a[1] + t * (b[1] - a[1]);
                (p[0] - x).hypot(p[1] - y)
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) <= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
        };
        psd(a0, b0, b1)
            .min(psd(a1, b0, b1))
            .min(psd(b0, a0, a1))
            .min(psd(b1, a0, a1))
    }

    fn inside(p: [f64; 2], poly: &[[f64; 2]; 4]) -> bool {
        (0..4).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % 4];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
        })
    }

    fn oracle_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
        let ca = a.corners();
        let cb = b.corners();
        if ca.iter().any(|p| inside(*p, &cb)) || cb.iter().any(|p| inside(*p, &ca)) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for i in 0..4 {
            for j in 0..4 {
                best = best.min(seg_seg(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]));
            }
        }
        best
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox> {
        (-10.0..10.0f64, -10.0..10.0f64, -PI..PI, 0.3..6.0f64, 0.3..3.0f64)
            .prop_map(|(x, y, yaw, l, w)| OrientedBox::new(Pose2D::new(x, y, yaw), l, w))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn frame_round_trip(ex in -1e3..1e3f64, ey in -1e3..1e3f64, eyaw in -PI..PI,
                            lx in -1e3..1e3f64, ly in -1e3..1e3f64, lyaw in -PI..PI) {
            let ego = Pose2D::new(ex, ey, eyaw);
            let p = Pose2D::new(lx, ly, lyaw);
            let r = to_ego(&ego, &to_global(&ego, &p));
            prop_assert!((r.x - p.x).abs() < 1e-9);
            prop_assert!((r.y - p.y).abs() < 1e-9);
            prop_assert!(normalize_angle(r.yaw - p.yaw).abs() < 1e-9);
        }

        #[test]
        fn frame_composition_is_associative(a in (-50.0..50.0f64, -50.0..50.0f64, -PI..PI),
                                            b in (-50.0..50.0f64, -50.0..50.0f64, -PI..PI),
                                            c in (-50.0..50.0f64, -50.0..50.0f64, -PI..PI)) {
            let a = Pose2D::new(a.0, a.1, a.2);
            let b = Pose2D::new(b.0, b.1, b.2);
            let c = Pose2D::new(c.0, c.1, c.2);
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.x - r.x).abs() < 1e-9 && (l.y - r.y).abs() < 1e-9);
            prop_assert!(normalize_angle(l.yaw - r.yaw).abs() < 1e-9);
        }

        #[test]
        fn polygon_distance_matches_oracle(a in arb_box(), b in arb_box()) {
            let d = min_polygon_distance(&a, &b);
            let o = oracle_distance(&a, &b);
            prop_assert!((d - o).abs() < 1e-6, "d={} oracle={}", d, o);
            prop_assert_eq!(d, min_polygon_distance(&b, &a));
            prop_assert!(d >= 0.0);
        }

        #[test]
        fn projection_reconstructs_point(x in -5.0..40.0f64, y in -8.0..8.0f64) {
            let p = Path::from_xy(&(0..=30).map(|i| {
                let t = i as f64;
                [t, 3.0 * (t / 10.0).sin()]
            }).collect::<Vec<_>>()).unwrap();
            let pr = p.project(x, y);
            prop_assert!(pr.s >= 0.0 && pr.s <= p.total_length());
            // foot point is idempotent
            let foot = p.point_at(pr.s, 0.0);
            let again = p.project(foot.x, foot.y);
            prop_assert!((again.s - pr.s).abs() < 1e-6);
            prop_assert!(again.offset.abs() < 1e-9);
        }
    }
}
