//! Sample-based planner: 11 lateral Bézier paths × 12 constant-acceleration
//! speed profiles, scored by five weighted cost terms.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boxes_overlap, min_polygon_distance, OrientedBox, Path, Pose2D};
use crate::map::RoutePlan;
use crate::predictor::Prediction;
use crate::world::{EgoState, EGO_LENGTH, EGO_WIDTH};

pub const NUM_PATHS: usize = 11;
pub const NUM_PROFILES: usize = 12;
pub const NUM_CANDIDATES: usize = NUM_PATHS * NUM_PROFILES;
/// Acceleration the swiftness term pulls toward, m/s^2.
pub const SWIFT_TARGET: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_swift: f64,
    pub w_ljerk: f64,
    pub w_latjerk: f64,
    pub w_ref: f64,
    pub w_safety: f64,
    pub gamma: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_swift: 1.0,
            w_ljerk: 0.2,
            w_latjerk: 1.0,
            w_ref: 2.0,
            w_safety: 40.0,
            gamma: 0.5,
        }
    }
}

impl CostWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.w_swift, self.w_ljerk, self.w_latjerk, self.w_ref, self.w_safety]
    }

    pub fn from_array(w: [f64; 5], gamma: f64) -> Self {
        Self {
            w_swift: w[0],
            w_ljerk: w[1],
            w_latjerk: w[2],
            w_ref: w[3],
            w_safety: w[4],
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", "all weights must be finite and >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("weights.gamma", "gamma must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon: f64,
    pub dt: f64,
    pub offsets: Vec<f64>,
    pub accels: Vec<f64>,
    /// Fixed speed limit; `None` reads it from the route.
    pub speed_limit: Option<f64>,
    pub collision_rejection: bool,
    /// Candidates passing closer than this to any prediction are rejected
    /// along with overlapping ones.
    pub collision_margin: f64,
    pub min_lookahead: f64,
    /// Lookahead grows with speed at this many seconds.
    pub lookahead_time: f64,
    pub parallel: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 6.0,
            dt: 0.2,
            offsets: (0..NUM_PATHS).map(|i| -2.5 + 0.5 * i as f64).collect(),
            accels: vec![-6.0, -5.0, -4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0],
            speed_limit: None,
            collision_rejection: true,
            collision_margin: 0.3,
            min_lookahead: 12.0,
            lookahead_time: 2.0,
            parallel: true,
        }
    }
}

impl PlannerConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != NUM_PATHS {
            return Err(Error::invalid("planner.offsets", format!("need {NUM_PATHS} offsets, got {}", self.offsets.len())));
        }
        if self.accels.len() != NUM_PROFILES {
            return Err(Error::invalid("planner.accels", format!("need {NUM_PROFILES} accelerations, got {}", self.accels.len())));
        }
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::invalid("planner", "need 0 < dt <= horizon"));
        }
        if !(self.collision_margin >= 0.0) {
            return Err(Error::invalid("planner.collision_margin", "must be >= 0"));
        }
        if !(self.min_lookahead > 0.0) {
            return Err(Error::invalid("planner.min_lookahead", "must be > 0"));
        }
        Ok(())
    }

    pub fn lookahead(&self, speed: f64) -> f64 {
        self.min_lookahead.max(speed * self.lookahead_time)
    }
}

/// One lateral path candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub index: usize,
    pub offset: f64,
    /// Polyline for tracking and logs.
    pub path: Arc<Path>,
    /// Exact geometry the samples are drawn from.
    pub curve: Arc<PathCurve>,
}

const ARC_TABLE: usize = 64;

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Quartic Bézier parameterized by arc length, followed by a polyline tail.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCurve {
    ctrl: [[f64; 2]; 5],
    start_yaw: f64,
    /// Arc length at `u = k / ARC_TABLE`.
    arc: Vec<f64>,
    tail: Path,
}

impl PathCurve {
    fn new(ctrl: [[f64; 2]; 5], start_yaw: f64, tail: Path) -> Self {
        let mut c = Self {
            ctrl,
            start_yaw,
            arc: vec![0.0],
            tail,
        };
        let mut acc = 0.0;
        for k in 0..ARC_TABLE {
            acc += c.arc_between(k as f64 / ARC_TABLE as f64, (k + 1) as f64 / ARC_TABLE as f64);
            c.arc.push(acc);
        }
        c
    }

    fn speed(&self, u: f64) -> f64 {
        let (_, d) = bezier4(&self.ctrl, u);
        d[0].hypot(d[1])
    }

    fn arc_between(&self, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GAUSS5.iter().map(|(x, w)| w * self.speed(mid + half * x)).sum::<f64>() * half
    }

    pub fn bezier_length(&self) -> f64 {
        self.arc[ARC_TABLE]
    }

    /// Bézier parameter at arc length `s`, by Newton steps inside one table cell.
    fn param_at(&self, s: f64) -> f64 {
        let k = self.arc.partition_point(|&x| x <= s).clamp(1, ARC_TABLE) - 1;
        let (ua, ub) = (k as f64 / ARC_TABLE as f64, (k + 1) as f64 / ARC_TABLE as f64);
        let span = self.arc[k + 1] - self.arc[k];
        let mut u = if span > 0.0 {
            ua + (s - self.arc[k]) / span * (ub - ua)
        } else {
            ua
        };
        for _ in 0..10 {
            let f = self.arc[k] + self.arc_between(ua, u) - s;
            let v = self.speed(u);
            if v < 1e-12 {
                break;
            }
            let next = (u - f / v).clamp(ua, ub);
            let done = (next - u).abs() < 1e-14;
            u = next;
            if done {
                break;
            }
        }
        u
    }

    pub fn pose_at(&self, s: f64) -> Pose2D {
        let len = self.bezier_length();
        if s >= len {
            return self.tail.pose_at(s - len);
        }
        if s <= 0.0 {
            let (c, sn) = (self.start_yaw.cos(), self.start_yaw.sin());
            return Pose2D::new(self.ctrl[0][0] + c * s, self.ctrl[0][1] + sn * s, self.start_yaw);
        }
        let (pt, d) = bezier4(&self.ctrl, self.param_at(s));
        let yaw = if d[0].hypot(d[1]) > 1e-12 {
            d[1].atan2(d[0])
        } else {
            self.start_yaw
        };
        Pose2D::new(pt[0], pt[1], yaw)
    }
}

/// Constant-acceleration speed profile clamped to `[0, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub index: usize,
    pub v0: f64,
    pub accel: f64,
    pub v_max: f64,
}

impl SpeedProfile {
    /// Time at which the clamp engages, if ever.
    fn t_clamp(&self) -> f64 {
        if self.accel > 0.0 {
            ((self.v_max - self.v0) / self.accel).max(0.0)
        } else if self.accel < 0.0 {
            (self.v0 / -self.accel).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.v0;
        }
        (self.v0 + self.accel * t).clamp(0.0, self.v_max.max(self.v0))
    }

    /// Derivative of the clamped profile (right-continuous at the kink).
    pub fn accel_actual(&self, t: f64) -> f64 {
        let tc = self.t_clamp();
        if t.max(0.0) < tc {
            self.accel
        } else {
            0.0
        }
    }

    /// Distance travelled by time `t`; before zero the ego keeps `v0`.
    pub fn distance(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.v0 * t;
        }
        let tc = self.t_clamp().min(t);
        let d = self.v0 * tc + 0.5 * self.accel * tc * tc;
        d + self.speed(tc) * (t - tc)
    }
}

pub fn sample_speed_profiles(v0: f64, speed_limit: f64, cfg: &PlannerConfig) -> Vec<SpeedProfile> {
    let v0 = v0.max(0.0);
    cfg.accels
        .iter()
        .enumerate()
        .map(|(index, &accel)| SpeedProfile {
            index,
            v0,
            accel,
            v_max: speed_limit.max(v0),
        })
        .collect()
}

fn bezier4(p: &[[f64; 2]; 5], u: f64) -> ([f64; 2], [f64; 2]) {
    let v = 1.0 - u;
    let b = [v.powi(4), 4.0 * u * v.powi(3), 6.0 * u * u * v * v, 4.0 * u.powi(3) * v, u.powi(4)];
    let db = [
        -4.0 * v.powi(3),
        4.0 * v.powi(3) - 12.0 * u * v * v,
        12.0 * u * v * v - 12.0 * u * u * v,
        12.0 * u * u * v - 4.0 * u.powi(3),
        4.0 * u.powi(3),
    ];
    let mut pt = [0.0; 2];
    let mut d = [0.0; 2];
    for k in 0..5 {
        for c in 0..2 {
            pt[c] += b[k] * p[k][c];
            d[c] += db[k] * p[k][c];
        }
    }
    (pt, d)
}

const BEZIER_SAMPLES: usize = 60;

fn ego_reference_s(ego: &EgoState, reference: &RoutePlan) -> f64 {
    reference.reference_path.project(ego.pose.x, ego.pose.y).s
}

fn route_limit(ego: &EgoState, reference: &RoutePlan, cfg: &PlannerConfig) -> f64 {
    cfg.speed_limit
        .unwrap_or_else(|| reference.speed_limit_at(ego_reference_s(ego, reference)))
}

/// Quartic Bézier from the ego pose to the reference at the lookahead,
/// laterally offset, then continuing parallel to the reference.
pub fn sample_paths(ego: &EgoState, reference: &RoutePlan, cfg: &PlannerConfig) -> Result<Vec<CandidatePath>> {
    cfg.validate()?;
    let refp = &reference.reference_path;
    let s0 = ego_reference_s(ego, reference);
    let look = cfg.lookahead(ego.speed);
    let s_end = s0 + look;
    let v_top = route_limit(ego, reference, cfg).max(ego.speed);
    let extension = v_top * cfg.horizon + 10.0;
    let d = look / 4.0;
    let (c0, n0) = ego.pose.heading();
    let end_tan = refp.pose_at(s_end);
    let (c4, n4) = end_tan.heading();

    cfg.offsets
        .iter()
        .enumerate()
        .map(|(index, &offset)| {
            let p4 = refp.point_at(s_end, offset);
            let ctrl = [
                [ego.pose.x, ego.pose.y],
                [ego.pose.x + d * c0, ego.pose.y + d * n0],
                [p4.x - 2.0 * d * c4, p4.y - 2.0 * d * n4],
                [p4.x - d * c4, p4.y - d * n4],
                [p4.x, p4.y],
            ];
            let mut poses = Vec::with_capacity(BEZIER_SAMPLES + 64);
            for k in 0..=BEZIER_SAMPLES {
                // denser near the ego so the first chord follows its heading
                let u = (k as f64 / BEZIER_SAMPLES as f64).powi(2);
                let (pt, dv) = bezier4(&ctrl, u);
                let yaw = if dv[0].hypot(dv[1]) > 1e-12 {
                    dv[1].atan2(dv[0])
                } else {
                    ego.pose.yaw
                };
                poses.push(Pose2D::new(pt[0], pt[1], yaw));
            }
            let n_ext = (extension / 2.0).ceil() as usize;
            let tail: Vec<Pose2D> = (0..=n_ext).map(|k| refp.point_at(s_end + 2.0 * k as f64, offset)).collect();
            poses.extend_from_slice(&tail[1..]);
            Ok(CandidatePath {
                index,
                offset,
                path: Arc::new(Path::from_poses(poses)?),
                curve: Arc::new(PathCurve::new(ctrl, ego.pose.yaw, Path::from_poses(tail)?)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose2D,
    pub speed: f64,
    pub accel: f64,
    /// Arc length along the candidate path.
    pub s: f64,
    /// Arc length and lateral offset on the reference.
    pub ref_s: f64,
    pub ref_offset: f64,
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub swift: f64,
    pub ljerk: f64,
    pub latjerk: f64,
    pub reference: f64,
    pub safety: f64,
}

impl CostTerms {
    pub fn as_array(&self) -> [f64; 5] {
        [self.swift, self.ljerk, self.latjerk, self.reference, self.safety]
    }

    pub fn weighted(&self, w: &CostWeights) -> f64 {
        self.as_array()
            .iter()
            .zip(w.as_array())
            .map(|(c, w)| c * w)
            .fold(0.0, |acc, x| acc + x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCandidate {
    pub path_index: usize,
    pub accel_index: usize,
    pub offset: f64,
    pub accel: f64,
    pub path: Arc<Path>,
    pub curve: Arc<PathCurve>,
    pub profile: SpeedProfile,
    pub samples: Vec<TrajectorySample>,
    /// Smallest polygon distance to each prediction over the horizon.
    pub clearances: Vec<f64>,
    pub costs: CostTerms,
    pub total_cost: f64,
    pub feasible: bool,
    pub emergency: bool,
    /// Ego travels past the stop point.
    pub violates_stop: bool,
}

impl TrajectoryCandidate {
    pub fn index(&self) -> usize {
        self.path_index * NUM_PROFILES + self.accel_index
    }

    pub fn min_clearance(&self) -> f64 {
        self.clearances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum over objects of `exp(-gamma * d)`: the per-object maximum over
    /// time, since the exponential is monotone in the distance.
    pub fn safety_for(&self, gamma: f64) -> f64 {
        safety_term(&self.clearances, gamma)
    }
}

pub fn safety_term(clearances: &[f64], gamma: f64) -> f64 {
    clearances
        .iter()
        .map(|d| (-gamma * d.max(0.0)).exp())
        .fold(0.0, |acc, x| acc + x)
}

/// Linear interpolation of a prediction at time `t`.
pub fn prediction_box_at(pred: &Prediction, t: f64) -> OrientedBox {
    let s = &pred.samples;
    if s.is_empty() {
        return OrientedBox::new(pred.origin, pred.length, pred.width);
    }
    if t <= s[0].t {
        return s[0].bbox;
    }
    let i = s.partition_point(|x| x.t <= t);
    if i >= s.len() {
        return s[s.len() - 1].bbox;
    }
    let (a, b) = (&s[i - 1], &s[i]);
    let w = (t - a.t) / (b.t - a.t);
    if w <= 0.0 {
        return a.bbox;
    }
    let dyaw = crate::geometry::normalize_angle(b.pose.yaw - a.pose.yaw);
    let pose = Pose2D::new(
        a.pose.x + w * (b.pose.x - a.pose.x),
        a.pose.y + w * (b.pose.y - a.pose.y),
        a.pose.yaw + w * dyaw,
    );
    OrientedBox::new(pose, pred.length, pred.width)
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Ego pose and reference location at continuous time `t`.
fn state_at(curve: &PathCurve, profile: &SpeedProfile, reference: &Path, t: f64, s_hint: f64) -> (Pose2D, f64, f64, f64) {
    let s = profile.distance(t);
    let pose = curve.pose_at(s);
    let pr = reference.project_window_extended(pose.x, pose.y, s_hint + s - 30.0, s_hint + s + 30.0);
    (pose, s, pr.s, pr.offset)
}

/// Swiftness, longitudinal jerk, lateral jerk and reference terms of any
/// trajectory sampled uniformly at `dt`, from its speeds and reference
/// offsets alone.
///
/// Acceleration is the forward difference of speed over each interval and
/// is held past the last sample. Lateral jerk is the five-point central
/// third difference of the offset, and the four-point one-sided difference
/// at the two samples nearest either end.
pub fn sampled_cost_terms(samples: &[TrajectorySample], dt: f64) -> [f64; 4] {
    let n = samples.len();
    if n < 2 {
        return [0.0; 4];
    }
    let mut acc: Vec<f64> = samples.windows(2).map(|w| (w[1].speed - w[0].speed) / dt).collect();
    acc.push(acc[n - 2]);
    let swift: f64 = acc[..n - 1].iter().map(|a| dt * (a - SWIFT_TARGET).powi(2)).sum();
    let acc_at = |k: isize| acc[k.clamp(0, n as isize - 1) as usize];
    let lj: Vec<f64> = (0..n as isize)
        .map(|k| ((acc_at(k + 1) - acc_at(k - 1)) / (2.0 * dt)).powi(2))
        .collect();

    let off: Vec<f64> = samples.iter().map(|s| s.ref_offset).collect();
    let dt3 = dt * dt * dt;
    let lat: Vec<f64> = if n < 5 {
        vec![0.0; n]
    } else {
        (0..n)
            .map(|k| {
                let j = if k >= 2 && k + 2 < n {
                    (off[k + 2] - 2.0 * off[k + 1] + 2.0 * off[k - 1] - off[k - 2]) / (2.0 * dt3)
                } else {
                    let i = if k < 2 { k } else { k - 3 };
                    (off[i + 3] - 3.0 * off[i + 2] + 3.0 * off[i + 1] - off[i]) / dt3
                };
                j * j
            })
            .collect()
    };
    let sq: Vec<f64> = samples.iter().map(|s| s.ref_offset * s.ref_offset).collect();
    [swift, trapezoid(&lj, dt), trapezoid(&lat, dt), trapezoid(&sq, dt)]
}

/// Builds the 132 candidates with samples and geometric costs; safety and
/// totals are filled in by [`evaluate_costs`].
pub fn generate_candidates(
    paths: &[CandidatePath],
    profiles: &[SpeedProfile],
    reference: &RoutePlan,
    ego_ref_s: f64,
    cfg: &PlannerConfig,
) -> Vec<TrajectoryCandidate> {
    let build = |(p, prof): (&CandidatePath, &SpeedProfile)| build_candidate(p, prof, reference, ego_ref_s, cfg);
    let pairs: Vec<_> = paths.iter().flat_map(|p| profiles.iter().map(move |q| (p, q))).collect();
    if cfg.parallel {
        pairs.into_par_iter().map(build).collect()
    } else {
        pairs.into_iter().map(build).collect()
    }
}

fn build_candidate(
    p: &CandidatePath,
    prof: &SpeedProfile,
    reference: &RoutePlan,
    ego_ref_s: f64,
    cfg: &PlannerConfig,
) -> TrajectoryCandidate {
    let n = cfg.steps();
    let dt = cfg.dt;
    let refp = &reference.reference_path;
    let samples: Vec<TrajectorySample> = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let (pose, s, ref_s, ref_offset) = state_at(&p.curve, prof, refp, t, ego_ref_s);
            TrajectorySample {
                t,
                pose,
                speed: prof.speed(t),
                accel: prof.accel_actual(t),
                s,
                ref_s,
                ref_offset,
                bbox: OrientedBox::new(pose, EGO_LENGTH, EGO_WIDTH),
            }
        })
        .collect();

    let [swift, ljerk, latjerk, ref_cost] = sampled_cost_terms(&samples, dt);

    let violates_stop = reference.stop_s.is_some_and(|stop| {
        let limit = stop.max(samples[0].ref_s);
        samples.iter().any(|s| s.ref_s > limit + 1e-6)
    });

    TrajectoryCandidate {
        path_index: p.index,
        accel_index: prof.index,
        offset: p.offset,
        accel: prof.accel,
        path: p.path.clone(),
        curve: p.curve.clone(),
        profile: *prof,
        samples,
        clearances: Vec::new(),
        costs: CostTerms {
            swift,
            ljerk,
            latjerk,
            reference: ref_cost,
            safety: 0.0,
        },
        total_cost: f64::INFINITY,
        feasible: true,
        emergency: false,
        violates_stop,
    }
}

/// Per-object minimum distance over the samples, and whether any sample
/// overlaps a predicted box.
pub fn clearances(samples: &[TrajectorySample], predictions: &[Prediction]) -> (Vec<f64>, bool) {
    let mut overlap = false;
    let d = predictions
        .iter()
        .map(|pred| {
            let mut best = f64::INFINITY;
            for smp in samples {
                let ob = prediction_box_at(pred, smp.t);
                // cheap bound before the exact polygon distance
                let centers = (ob.center.x - smp.pose.x).hypot(ob.center.y - smp.pose.y);
                if centers - ob.radius() - smp.bbox.radius() >= best {
                    continue;
                }
                if boxes_overlap(&smp.bbox, &ob) {
                    overlap = true;
                    best = 0.0;
                    break;
                }
                best = best.min(min_polygon_distance(&smp.bbox, &ob));
            }
            best
        })
        .collect();
    (d, overlap)
}

/// Fills clearances, safety, feasibility and total cost.
pub fn evaluate_costs(
    cand: &mut TrajectoryCandidate,
    predictions: &[Prediction],
    weights: &CostWeights,
    cfg: &PlannerConfig,
) {
    let (d, overlap) = clearances(&cand.samples, predictions);
    let overlap = overlap || d.iter().any(|&x| x < cfg.collision_margin);
    cand.clearances = d;
    cand.costs.safety = cand.safety_for(weights.gamma);
    cand.feasible = !(cfg.collision_rejection && overlap) && !cand.violates_stop;
    cand.total_cost = if cand.feasible {
        cand.costs.weighted(weights)
    } else {
        f64::INFINITY
    };
}

/// Lowest total cost, ties to the lowest index; `None` if nothing is
/// feasible.
pub fn argmin(cands: &[TrajectoryCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        if !c.feasible {
            continue;
        }
        if best.map_or(true, |b| c.total_cost < cands[b].total_cost) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub best: TrajectoryCandidate,
    pub candidates: Vec<TrajectoryCandidate>,
}

/// All 132 candidates, evaluated.
pub fn evaluate_all(
    ego: &EgoState,
    reference: &RoutePlan,
    predictions: &[Prediction],
    weights: &CostWeights,
    cfg: &PlannerConfig,
) -> Result<Vec<TrajectoryCandidate>> {
    weights.validate()?;
    let paths = sample_paths(ego, reference, cfg)?;
    let limit = route_limit(ego, reference, cfg);
    let profiles = sample_speed_profiles(ego.speed, limit, cfg);
    let s0 = ego_reference_s(ego, reference);
    let mut cands = generate_candidates(&paths, &profiles, reference, s0, cfg);
    if cfg.parallel {
        cands
            .par_iter_mut()
            .for_each(|c| evaluate_costs(c, predictions, weights, cfg));
    } else {
        for c in &mut cands {
            evaluate_costs(c, predictions, weights, cfg);
        }
    }
    Ok(cands)
}

pub fn plan(
    ego: &EgoState,
    reference: &RoutePlan,
    predictions: &[Prediction],
    weights: &CostWeights,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    let candidates = evaluate_all(ego, reference, predictions, weights, cfg)?;
    let best = match argmin(&candidates) {
        Some(i) => candidates[i].clone(),
        None => {
            // hardest braking along the path closest to the reference
            let straight = cfg
                .offsets
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map_or(0, |(i, _)| i);
            let hardest = cfg
                .accels
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(i, _)| i);
            let mut c = candidates[straight * NUM_PROFILES + hardest].clone();
            c.emergency = true;
            c
        }
    };
    Ok(PlanResult { best, candidates })
}

pub const CANDIDATE_COLUMNS: [&str; 13] = [
    "tick", "path", "accel_index", "offset", "accel", "swift", "ljerk", "latjerk", "ref", "safety", "total", "feasible", "chosen",
];

/// One CSV row per candidate.
pub fn write_candidates_csv<W: Write>(
    out: &mut csv::Writer<W>,
    tick: u64,
    cands: &[TrajectoryCandidate],
    chosen: usize,
) -> Result<()> {
    for c in cands {
        let k = c.costs;
        let row = [
            tick.to_string(),
            c.path_index.to_string(),
            c.accel_index.to_string(),
            format!("{}", c.offset),
            format!("{}", c.accel),
            format!("{}", k.swift),
            format!("{}", k.ljerk),
            format!("{}", k.latjerk),
            format!("{}", k.reference),
            format!("{}", k.safety),
            format!("{}", c.total_cost),
            u8::from(c.feasible).to_string(),
            u8::from(c.index() == chosen).to_string(),
        ];
        out.write_record(&row).map_err(|e| Error::parse("candidate dump", e))?;
    }
    Ok(())
}
