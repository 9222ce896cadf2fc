//! Cost-weight learning from demonstrations with Maximum Margin Planning.
//!
//! Demonstrations come from a track table (`demos-v1`):
//!
//! ```text
//! trackId,frame,x,y,heading,speed,length,width,category
//! ```
//!
//! one row per track and frame, heading in radians, frames at a fixed rate.
//! Vehicle tracks that cover a full planner horizon become surrogate-ego
//! demos; every other track present at the segment start is predicted and
//! used as context. The inner problem of the structured hinge loss is the
//! planner's own candidate set, so it is solved exactly by enumeration.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox, Path, Pose2D};
use crate::map::{Lane, LaneId, LaneMap, Neighbor, RoutePlan};
use crate::planner::{
    self, clearances, safety_term, sampled_cost_terms, CostTerms, CostWeights, PlannerConfig, TrajectoryCandidate,
    TrajectorySample,
};
use crate::predictor::{anchor_to_lane, predict_object, Prediction, PredictorConfig};
use crate::world::{EgoState, ObjectCategory, EGO_LENGTH, EGO_WIDTH};

pub const DEMO_COLUMNS: [&str; 9] = ["trackId", "frame", "x", "y", "heading", "speed", "length", "width", "category"];
pub const WEIGHTS_VERSION: &str = "weights-v1";
/// Expert samples must stay this close to the reference path.
pub const CORRIDOR: f64 = 5.0;

pub type Features = [f64; 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub track_id: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub category: ObjectCategory,
}

impl TrackRow {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.heading)
    }
}

/// Accepts the crate's category names and the common dataset spellings.
pub fn parse_category(s: &str) -> Result<ObjectCategory> {
    match s.trim().to_ascii_lowercase().as_str() {
        "truck_bus" | "bus" => Ok(ObjectCategory::Truck),
        "bicycle" | "cyclist" => Ok(ObjectCategory::Bike),
        other => other.parse(),
    }
}

pub fn write_demo_table<W: Write>(out: W, rows: &[TrackRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::parse("demo table", e);
    w.write_record(DEMO_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record(&[
            r.track_id.to_string(),
            r.frame.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.heading.to_string(),
            r.speed.to_string(),
            r.length.to_string(),
            r.width.to_string(),
            r.category.name().to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("demo table", e))
}

/// Reads a track table; columns are matched by header name in any order.
pub fn read_demo_table<R: Read>(input: R, origin: &str) -> Result<Vec<TrackRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::parse(origin, e))?.clone();
    let mut idx = [0usize; 9];
    for (k, name) in DEMO_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::MissingColumn(format!("{origin}: {name}")))?;
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::parse(origin, format!("line {line}: {e}")))?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let bad = |k: usize| Error::parse(origin, format!("line {line}: bad {} {:?}", DEMO_COLUMNS[k], field(k)));
        let int = |k: usize| field(k).parse::<u64>().map_err(|_| bad(k));
        let num = |k: usize| {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(k))
        };
        let row = TrackRow {
            track_id: int(0)?,
            frame: int(1)?,
            x: num(2)?,
            y: num(3)?,
            heading: num(4)?,
            speed: num(5)?,
            length: num(6)?,
            width: num(7)?,
            category: parse_category(field(8)).map_err(|_| bad(8))?,
        };
        if row.length <= 0.0 || row.width <= 0.0 || row.speed < 0.0 {
            return Err(Error::parse(origin, format!("line {line}: size must be > 0 and speed >= 0")));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertSample {
    pub t: f64,
    pub pose: Pose2D,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct ExpertDemo {
    pub id: String,
    pub ego: EgoState,
    pub route: RoutePlan,
    pub predictions: Vec<Prediction>,
    pub map: Arc<LaneMap>,
    /// Uniform at the planner's dt, horizon inclusive.
    pub expert: Vec<ExpertSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub frame_rate: f64,
    pub predictor: PredictorConfig,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            frame_rate: 25.0,
            predictor: PredictorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub demos: usize,
    pub skipped_short: usize,
    pub skipped_unanchored: usize,
    pub skipped_off_corridor: usize,
}

impl IngestReport {
    fn add(&mut self, o: &IngestReport) {
        self.demos += o.demos;
        self.skipped_short += o.skipped_short;
        self.skipped_unanchored += o.skipped_unanchored;
        self.skipped_off_corridor += o.skipped_off_corridor;
    }
}

/// Lane sequence from `start`, choosing at each fork the successor that
/// passes closest to `end`.
pub fn demo_reference(map: &LaneMap, start: LaneId, from: &Pose2D, end: &Pose2D, needed: f64) -> Result<RoutePlan> {
    let mut lanes = vec![start];
    let first = map.lane(start)?;
    let mut covered = first.centerline.total_length() - first.centerline.project(from.x, from.y).s;
    let mut lane = first;
    while covered < needed {
        let next = lane
            .successors
            .iter()
            .filter(|id| !lanes.contains(id))
            .filter_map(|&id| map.get(id))
            .min_by(|a, b| {
                let da = a.centerline.project(end.x, end.y).offset.abs();
                let db = b.centerline.project(end.x, end.y).offset.abs();
                da.total_cmp(&db)
            });
        let Some(next) = next else { break };
        lanes.push(next.id);
        covered += next.centerline.total_length();
        lane = next;
    }
    RoutePlan::from_lanes(map, &lanes)
}

fn interpolate(a: &TrackRow, b: &TrackRow, w: f64) -> (Pose2D, f64) {
    if w <= 0.0 {
        return (a.pose(), a.speed);
    }
    let dyaw = normalize_angle(b.heading - a.heading);
    (
        Pose2D::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.heading + w * dyaw),
        a.speed + w * (b.speed - a.speed),
    )
}

/// Splits the table into demos. Tracks are visited in id order.
pub fn demos_from_table(
    rows: &[TrackRow],
    map: Arc<LaneMap>,
    origin: &str,
    cfg: &IngestConfig,
    planner: &PlannerConfig,
) -> Result<(Vec<ExpertDemo>, IngestReport)> {
    if !(cfg.frame_rate > 0.0) {
        return Err(Error::invalid("frame_rate", "must be > 0"));
    }
    let mut tracks: BTreeMap<u64, Vec<TrackRow>> = BTreeMap::new();
    let mut by_frame: BTreeMap<u64, Vec<TrackRow>> = BTreeMap::new();
    for r in rows {
        tracks.entry(r.track_id).or_default().push(*r);
        by_frame.entry(r.frame).or_default().push(*r);
    }
    let steps = planner.steps();
    let span = (planner.horizon * cfg.frame_rate).round() as u64;
    let mut demos = Vec::new();
    let mut report = IngestReport::default();
    for (&id, track) in tracks.iter_mut() {
        track.sort_by_key(|r| r.frame);
        track.dedup_by_key(|r| r.frame);
        if !track[0].category.is_vehicle() {
            continue;
        }
        let mut produced = 0;
        let mut run_start = 0;
        for k in 1..=track.len() {
            if k < track.len() && track[k].frame == track[k - 1].frame + 1 {
                continue;
            }
            let run = &track[run_start..k];
            run_start = k;
            let mut i0 = 0usize;
            while i0 + span as usize <= run.len() - 1 {
                let seg = &run[i0..=i0 + span as usize];
                i0 += span as usize;
                produced += 1;
                let expert: Vec<ExpertSample> = (0..=steps)
                    .map(|j| {
                        let t = j as f64 * planner.dt;
                        let f = (t * cfg.frame_rate).min(span as f64);
                        let lo = (f.floor() as usize).min(seg.len() - 1);
                        let hi = (lo + 1).min(seg.len() - 1);
                        let (pose, speed) = interpolate(&seg[lo], &seg[hi], f - lo as f64);
                        ExpertSample { t, pose, speed }
                    })
                    .collect();
                let start = seg[0];
                let Some(lane) = anchor_to_lane(&start.pose(), &map, &cfg.predictor) else {
                    report.skipped_unanchored += 1;
                    continue;
                };
                let end = expert[expert.len() - 1].pose;
                let route = demo_reference(&map, lane, &start.pose(), &end, 150.0)?;
                let refp = &route.reference_path;
                if expert.iter().any(|e| refp.project(e.pose.x, e.pose.y).offset.abs() > CORRIDOR) {
                    report.skipped_off_corridor += 1;
                    continue;
                }
                let mut predictions = Vec::new();
                for other in by_frame.get(&start.frame).into_iter().flatten() {
                    if other.track_id == id {
                        continue;
                    }
                    let pose = other.pose();
                    predictions.push(predict_object(
                        other.track_id,
                        other.category,
                        pose,
                        other.speed,
                        other.length,
                        other.width,
                        anchor_to_lane(&pose, &map, &cfg.predictor),
                        &map,
                        &cfg.predictor,
                    )?);
                }
                demos.push(ExpertDemo {
                    id: format!("{origin}:{id}:{}", start.frame),
                    ego: EgoState::new(start.pose(), start.speed, 0.0, 0.0),
                    route,
                    predictions,
                    map: map.clone(),
                    expert,
                });
                report.demos += 1;
            }
        }
        if produced == 0 {
            report.skipped_short += 1;
        }
    }
    Ok((demos, report))
}

/// Reads every table in order; files that yield no demo are not an error.
pub fn ingest_demos(
    paths: &[PathBuf],
    map: Arc<LaneMap>,
    cfg: &IngestConfig,
    planner: &PlannerConfig,
) -> Result<(Vec<ExpertDemo>, IngestReport)> {
    let mut all = Vec::new();
    let mut report = IngestReport::default();
    for p in paths {
        let f = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
        let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        let rows = read_demo_table(std::io::BufReader::new(f), &name)?;
        let (d, r) = demos_from_table(&rows, map.clone(), &name, cfg, planner)?;
        all.extend(d);
        report.add(&r);
    }
    Ok((all, report))
}

/// Features of a planner candidate: its own cost terms, safety at `gamma`.
pub fn candidate_features(cand: &TrajectoryCandidate, gamma: f64) -> Features {
    let c = &cand.costs;
    [c.swift, c.ljerk, c.latjerk, c.reference, cand.safety_for(gamma)]
}

fn expert_accels(expert: &[ExpertSample], dt: f64) -> Vec<f64> {
    let n = expert.len();
    let mut a: Vec<f64> = expert.windows(2).map(|w| (w[1].speed - w[0].speed) / dt).collect();
    a.push(a.last().copied().unwrap_or(0.0));
    debug_assert_eq!(a.len(), n);
    a
}

/// Expert samples in the planner's sample type, for the shared clearance code.
pub fn expert_trajectory(expert: &[ExpertSample], route: &RoutePlan, dt: f64) -> Vec<TrajectorySample> {
    let refp = &route.reference_path;
    let accels = expert_accels(expert, dt);
    let mut s = 0.0;
    let mut ref_s = refp.project(expert[0].pose.x, expert[0].pose.y).s;
    expert
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if k > 0 {
                s += e.pose.distance(&expert[k - 1].pose);
            }
            let pr = refp.project_window_extended(e.pose.x, e.pose.y, ref_s - 10.0, ref_s + 40.0);
            ref_s = pr.s;
            TrajectorySample {
                t: e.t,
                pose: e.pose,
                speed: e.speed,
                accel: accels[k],
                s,
                ref_s: pr.s,
                ref_offset: pr.offset,
                bbox: OrientedBox::new(e.pose, EGO_LENGTH, EGO_WIDTH),
            }
        })
        .collect()
}

/// Mean per-sample position distance.
pub fn trajectory_loss(a: &[TrajectorySample], expert: &[ExpertSample]) -> f64 {
    let n = a.len().min(expert.len());
    if n == 0 {
        return 0.0;
    }
    a.iter()
        .zip(expert)
        .map(|(s, e)| (s.pose.x - e.pose.x).hypot(s.pose.y - e.pose.y))
        .sum::<f64>()
        / n as f64
}

/// A demo with everything that does not depend on the weights precomputed.
#[derive(Debug, Clone)]
pub struct PreparedDemo {
    pub id: String,
    pub candidates: Vec<TrajectoryCandidate>,
    /// Mean distance of each candidate to the expert.
    pub losses: Vec<f64>,
    pub expert_base: [f64; 4],
    pub expert_clearances: Vec<f64>,
    /// Index of the feasible candidate nearest the expert.
    pub nearest: usize,
}

impl PreparedDemo {
    pub fn expert_features(&self, gamma: f64) -> Features {
        let b = self.expert_base;
        [b[0], b[1], b[2], b[3], safety_term(&self.expert_clearances, gamma)]
    }

    /// Index the planner would choose under `w`; `None` if nothing is feasible.
    pub fn planned(&self, w: &CostWeights) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.candidates.iter().enumerate() {
            if !c.feasible {
                continue;
            }
            let mut terms: CostTerms = c.costs;
            terms.safety = c.safety_for(w.gamma);
            let cost = terms.weighted(w);
            if best.map_or(true, |(_, b)| cost < b) {
                best = Some((i, cost));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Enumerates the candidate set of one demo. Demos whose context leaves no
/// feasible candidate yield `None`.
pub fn prepare_demo(demo: &ExpertDemo, planner_cfg: &PlannerConfig) -> Result<Option<PreparedDemo>> {
    let cfg = PlannerConfig {
        parallel: false,
        ..planner_cfg.clone()
    };
    let candidates = planner::evaluate_all(&demo.ego, &demo.route, &demo.predictions, &CostWeights::default(), &cfg)?;
    let losses: Vec<f64> = candidates.iter().map(|c| trajectory_loss(&c.samples, &demo.expert)).collect();
    let nearest = (0..candidates.len())
        .filter(|&i| candidates[i].feasible)
        .min_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let Some(nearest) = nearest else {
        return Ok(None);
    };
    let traj = expert_trajectory(&demo.expert, &demo.route, cfg.dt);
    let (expert_clearances, _) = clearances(&traj, &demo.predictions);
    Ok(Some(PreparedDemo {
        id: demo.id.clone(),
        expert_base: sampled_cost_terms(&traj, cfg.dt),
        expert_clearances,
        candidates,
        losses,
        nearest,
    }))
}

pub fn prepare_demos(demos: &[ExpertDemo], planner_cfg: &PlannerConfig) -> Result<Vec<PreparedDemo>> {
    let out: Result<Vec<Option<PreparedDemo>>> = demos.par_iter().map(|d| prepare_demo(d, planner_cfg)).collect();
    Ok(out?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub eta0: f64,
    pub epochs: usize,
    pub gamma_grid: Vec<f64>,
    pub loss_scale: f64,
    /// Cross-validation folds for choosing gamma; demo k is in fold k % folds.
    pub folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            eta0: 300.0,
            epochs: 2000,
            gamma_grid: vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
            loss_scale: 1.0,
            folds: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::invalid("gamma_grid", "must be nonempty with all values > 0"));
        }
        if !(self.lambda >= 0.0) || !(self.eta0 > 0.0) || !(self.loss_scale >= 0.0) {
            return Err(Error::invalid("train", "need lambda >= 0, eta0 > 0, loss_scale >= 0"));
        }
        if self.folds == 1 {
            return Err(Error::invalid("folds", "must be 0 (no validation) or >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImitationScore {
    pub mean_loss: f64,
    pub match_rate: f64,
}

pub fn evaluate_imitation(weights: &CostWeights, demos: &[PreparedDemo]) -> Result<ImitationScore> {
    if demos.is_empty() {
        return Err(Error::Empty("no demos to evaluate".into()));
    }
    let mut loss = 0.0;
    let mut matches = 0usize;
    for d in demos {
        let i = d.planned(weights).unwrap_or(d.nearest);
        loss += d.losses[i];
        matches += usize::from(i == d.nearest);
    }
    Ok(ImitationScore {
        mean_loss: loss / demos.len() as f64,
        match_rate: matches as f64 / demos.len() as f64,
    })
}

/// Feature matrices for one gamma, scaled to unit mean magnitude.
struct Scaled<'a> {
    demos: Vec<&'a PreparedDemo>,
    feats: Vec<Vec<Features>>,
    expert: Vec<Features>,
    scale: Features,
}

impl<'a> Scaled<'a> {
    fn new(demos: Vec<&'a PreparedDemo>, gamma: f64) -> Self {
        let raw: Vec<Vec<Features>> = demos
            .iter()
            .map(|d| d.candidates.iter().map(|c| candidate_features(c, gamma)).collect())
            .collect();
        let mut scale = [0.0; 5];
        let mut count = 0usize;
        for (d, fs) in demos.iter().zip(&raw) {
            for (c, f) in d.candidates.iter().zip(fs) {
                if c.feasible {
                    for j in 0..5 {
                        scale[j] += f[j].abs();
                    }
                    count += 1;
                }
            }
        }
        for s in &mut scale {
            *s = if count > 0 && *s / count as f64 > 1e-12 { *s / count as f64 } else { 1.0 };
        }
        let norm = |f: Features| -> Features { std::array::from_fn(|j| f[j] / scale[j]) };
        Self {
            feats: raw.into_iter().map(|fs| fs.into_iter().map(norm).collect()).collect(),
            expert: demos.iter().map(|d| norm(d.expert_features(gamma))).collect(),
            demos,
            scale,
        }
    }

    /// Loss-augmented argmin for demo `k`.
    fn augmented(&self, k: usize, w: &Features, loss_scale: f64) -> (usize, f64) {
        let d = self.demos[k];
        let mut best = (d.nearest, f64::INFINITY);
        for (i, f) in self.feats[k].iter().enumerate() {
            if !d.candidates[i].feasible {
                continue;
            }
            let v = dot(w, f) - loss_scale * d.losses[i];
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    fn objective(&self, w: &Features, cfg: &TrainConfig) -> f64 {
        let n = self.demos.len() as f64;
        let hinge: f64 = (0..self.demos.len())
            .map(|k| dot(w, &self.expert[k]) - self.augmented(k, w, cfg.loss_scale).1)
            .sum();
        0.5 * cfg.lambda * dot(w, w) + hinge / n
    }

    fn subgradient(&self, w: &Features, cfg: &TrainConfig) -> Features {
        let n = self.demos.len() as f64;
        let mut g: Features = std::array::from_fn(|j| cfg.lambda * w[j]);
        for k in 0..self.demos.len() {
            let (i, _) = self.augmented(k, w, cfg.loss_scale);
            for j in 0..5 {
                g[j] += (self.expert[k][j] - self.feats[k][i][j]) / n;
            }
        }
        g
    }

    fn to_weights(&self, w: &Features, gamma: f64) -> Option<CostWeights> {
        let raw: Features = std::array::from_fn(|j| w[j] / self.scale[j]);
        let max = raw.iter().copied().fold(0.0, f64::max);
        (max > 0.0).then(|| CostWeights::from_array(raw.map(|x| x / max), gamma))
    }
}

fn dot(a: &Features, b: &Features) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    pub gamma: f64,
    /// Weights trained on all demos at this gamma.
    pub weights: Option<CostWeights>,
    /// Cross-validated score: every demo planned with weights trained
    /// without it.
    pub validation: Option<ImitationScore>,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub weights: CostWeights,
    pub train: ImitationScore,
    pub validation: Option<ImitationScore>,
    pub per_gamma: Vec<GammaResult>,
    pub demos: usize,
}

/// Projected subgradient descent at a fixed gamma. Steps always move; the
/// best iterate seen is kept, so the reported objective never increases.
/// Returns the weights in scaled feature space and the best objective after
/// every epoch.
fn descend(s: &Scaled, cfg: &TrainConfig) -> (Features, Vec<f64>) {
    let mut w: Features = [1.0; 5];
    let mut best = (w, s.objective(&w, cfg));
    let mut history = vec![best.1];
    for k in 1..=cfg.epochs {
        let g = s.subgradient(&w, cfg);
        if g.iter().all(|x| x.abs() < 1e-12) {
            break;
        }
        let eta = cfg.eta0 / (k as f64).sqrt();
        w = std::array::from_fn(|j| (w[j] - eta * g[j]).max(0.0));
        let o = s.objective(&w, cfg);
        if o < best.1 {
            best = (w, o);
        }
        history.push(best.1);
    }
    (best.0, history)
}

fn fit(demos: Vec<&PreparedDemo>, gamma: f64, cfg: &TrainConfig) -> (Option<CostWeights>, Vec<f64>) {
    let s = Scaled::new(demos, gamma);
    let (w, objective) = descend(&s, cfg);
    (s.to_weights(&w, gamma), objective)
}

/// Cross-validated imitation score at one gamma; `None` if any fold
/// collapses to zero weights.
fn validate_gamma(demos: &[PreparedDemo], gamma: f64, cfg: &TrainConfig) -> Option<ImitationScore> {
    let folds = cfg.folds.min(demos.len());
    if folds < 2 {
        return None;
    }
    let mut loss = 0.0;
    let mut matches = 0.0;
    for f in 0..folds {
        let train: Vec<&PreparedDemo> = demos.iter().enumerate().filter(|(k, _)| k % folds != f).map(|(_, d)| d).collect();
        let held: Vec<PreparedDemo> = demos.iter().enumerate().filter(|(k, _)| k % folds == f).map(|(_, d)| d.clone()).collect();
        let w = fit(train, gamma, cfg).0?;
        let score = evaluate_imitation(&w, &held).ok()?;
        loss += score.mean_loss * held.len() as f64;
        matches += score.match_rate * held.len() as f64;
    }
    Some(ImitationScore {
        mean_loss: loss / demos.len() as f64,
        match_rate: matches / demos.len() as f64,
    })
}

/// Trains weights at every gamma in the grid and keeps the one whose
/// cross-validated plans are closest to the experts. Without validation
/// folds the training loss decides.
pub fn mmp_train(demos: &[PreparedDemo], cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::Empty("no demos to train on".into()));
    }
    let per_gamma: Vec<GammaResult> = cfg
        .gamma_grid
        .par_iter()
        .map(|&gamma| {
            let (weights, objective) = fit(demos.iter().collect(), gamma, cfg);
            let validation = validate_gamma(demos, gamma, cfg)
                .or_else(|| weights.as_ref().and_then(|w| evaluate_imitation(w, demos).ok()));
            GammaResult {
                gamma,
                weights,
                validation,
                objective,
            }
        })
        .collect();

    // earlier grid entries win exact ties
    let mut best: Option<&GammaResult> = None;
    for r in per_gamma.iter().filter(|r| r.weights.is_some() && r.validation.is_some()) {
        let v = r.validation.unwrap();
        if best.map_or(true, |b| v.mean_loss < b.validation.unwrap().mean_loss) {
            best = Some(r);
        }
    }
    let best = best.ok_or(Error::ZeroWeights(cfg.lambda))?;
    let weights = best.weights.unwrap();
    Ok(TrainResult {
        weights,
        train: evaluate_imitation(&weights, demos)?,
        validation: best.validation,
        per_gamma,
        demos: demos.len(),
    })
}

/// Trained weights as persisted on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub version: String,
    pub weights: CostWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<serde_json::Value>,
}

impl WeightsFile {
    pub fn new(weights: CostWeights, metrics: Option<serde_json::Value>) -> Self {
        Self {
            version: WEIGHTS_VERSION.into(),
            weights,
            metrics,
        }
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let f: WeightsFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if f.version != WEIGHTS_VERSION {
            return Err(Error::Version {
                found: f.version,
                expected: WEIGHTS_VERSION.into(),
            });
        }
        f.weights.validate()?;
        Ok(f)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }
}

/// Generator of demos whose experts are the planner's own choice under
/// known weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub count: usize,
    pub seed: u64,
    pub weights: CostWeights,
    pub frame_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            count: 60,
            seed: 7,
            weights: CostWeights {
                w_swift: 1.0,
                w_ljerk: 0.3,
                w_latjerk: 0.5,
                w_ref: 2.0,
                w_safety: 30.0,
                gamma: 1.0,
            },
            frame_rate: 25.0,
        }
    }
}

fn polyline_lane(id: LaneId, xy: &[[f64; 2]], successors: Vec<LaneId>) -> Result<Lane> {
    Ok(Lane {
        id,
        centerline: Path::from_xy(xy)?,
        width: 3.5,
        speed_limit: 12.0,
        successors,
        left: None,
        right: None,
    })
}

/// Two parallel straight lanes and a separate road with a left bend.
pub fn synthetic_map() -> LaneMap {
    let straight = |y: f64| -> Vec<[f64; 2]> { (0..=150).map(|i| [2.0 * i as f64, y]).collect() };
    let mut bend: Vec<[f64; 2]> = (0..=10).map(|i| [2.0 * i as f64, 60.0]).collect();
    let r = 50.0;
    for i in 1..=40 {
        let th = std::f64::consts::FRAC_PI_2 * i as f64 / 40.0;
        bend.push([20.0 + r * th.sin(), 60.0 + r * (1.0 - th.cos())]);
    }
    for i in 1..=50 {
        bend.push([70.0, 110.0 + 2.0 * i as f64]);
    }
    let mut l1 = polyline_lane(1, &straight(0.0), vec![]).expect("static lane");
    let mut l2 = polyline_lane(2, &straight(3.5), vec![]).expect("static lane");
    l1.left = Some(Neighbor { id: 2, same_direction: true });
    l2.right = Some(Neighbor { id: 1, same_direction: true });
    let l3 = polyline_lane(3, &bend, vec![]).expect("static lane");
    LaneMap::new([l1, l2, l3]).expect("static map")
}

fn random_context(rng: &mut ChaCha8Rng, map: &LaneMap) -> (EgoState, Vec<TrackRow>) {
    let lane = map.lane(rng.gen_range(1..=3)).expect("synthetic lane");
    let s = rng.gen_range(5.0..40.0);
    let base = lane.centerline.pose_at(s);
    let off = rng.gen_range(-1.0..1.0);
    let (c, sn) = base.heading();
    let pose = Pose2D::new(base.x - sn * off, base.y + c * off, base.yaw + rng.gen_range(-0.08..0.08));
    let ego = EgoState::new(pose, rng.gen_range(2.0..11.0), 0.0, 0.0);
    let mut objects = Vec::new();
    let n = rng.gen_range(0..=3);
    for k in 0..n {
        let ahead = rng.gen_range(10.0..40.0);
        let at = lane.centerline.pose_at(s + ahead);
        let (c, sn) = at.heading();
        let kind = rng.gen_range(0..4);
        let (category, len, wid, lat, yaw, speed) = match kind {
            0 => (ObjectCategory::Car, 4.5, 1.9, rng.gen_range(-2.5..2.5), at.yaw, 0.0),
            1 => (ObjectCategory::Car, 4.5, 1.9, rng.gen_range(-0.5..0.5), at.yaw, rng.gen_range(0.0..5.0)),
            2 => {
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (
                    ObjectCategory::Pedestrian,
                    0.6,
                    0.6,
                    side * rng.gen_range(2.0..4.0),
                    rng.gen_range(-3.1..3.1),
                    rng.gen_range(0.0..1.2),
                )
            }
            _ => (ObjectCategory::Construction, 1.0, 1.0, rng.gen_range(-2.0..2.0), at.yaw, 0.0),
        };
        objects.push(TrackRow {
            track_id: 2 + k as u64,
            frame: 0,
            x: at.x - sn * lat,
            y: at.y + c * lat,
            heading: yaw,
            speed,
            length: len,
            width: wid,
            category,
        });
    }
    (ego, objects)
}

/// One track table per context: the ego track over the full horizon plus
/// single-frame rows for the other objects.
pub fn generate_synthetic(
    cfg: &SyntheticConfig,
    map: &LaneMap,
    ingest: &IngestConfig,
    planner_cfg: &PlannerConfig,
) -> Result<Vec<Vec<TrackRow>>> {
    cfg.weights.validate()?;
    let mut out = Vec::with_capacity(cfg.count);
    let span = (planner_cfg.horizon * cfg.frame_rate).round() as u64;
    let mut index = 0u64;
    while out.len() < cfg.count {
        if index > 50 * cfg.count as u64 + 100 {
            return Err(Error::invalid("synthetic", "could not generate enough feasible contexts"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index));
        index += 1;
        let (ego, objects) = random_context(&mut rng, map);
        let Some(lane) = anchor_to_lane(&ego.pose, map, &ingest.predictor) else {
            continue;
        };
        let route = demo_reference(map, lane, &ego.pose, &ego.pose, 150.0)?;
        let mut predictions = Vec::new();
        for o in &objects {
            let pose = o.pose();
            predictions.push(predict_object(
                o.track_id,
                o.category,
                pose,
                o.speed,
                o.length,
                o.width,
                anchor_to_lane(&pose, map, &ingest.predictor),
                map,
                &ingest.predictor,
            )?);
        }
        let plan = planner::plan(&ego, &route, &predictions, &cfg.weights, planner_cfg)?;
        if plan.best.emergency {
            continue;
        }
        let best = plan.best;
        let mut rows: Vec<TrackRow> = (0..=span)
            .map(|f| {
                let t = f as f64 / cfg.frame_rate;
                let pose = if f == 0 {
                    ego.pose
                } else {
                    best.curve.pose_at(best.profile.distance(t))
                };
                TrackRow {
                    track_id: 1,
                    frame: f,
                    x: pose.x,
                    y: pose.y,
                    heading: pose.yaw,
                    speed: best.profile.speed(t),
                    length: EGO_LENGTH,
                    width: EGO_WIDTH,
                    category: ObjectCategory::Car,
                }
            })
            .collect();
        rows.extend(objects);
        out.push(rows);
    }
    Ok(out)
}
