//! Decoupled PID control with a calibrated longitudinal feed-forward table.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D};
use crate::planner::TrajectoryCandidate;
use crate::sim::plant::{ControlCommand, VehicleParams};
use crate::world::EgoState;

pub const CALTABLE_VERSION: &str = "caltable-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_clamp: f64,
    pub output_clamp: f64,
}

impl PidGains {
    pub fn lateral_default() -> Self {
        Self {
            kp: 1.2,
            ki: 0.05,
            kd: 0.2,
            integral_clamp: 0.5,
            output_clamp: 0.6,
        }
    }

    pub fn longitudinal_default() -> Self {
        Self {
            kp: 0.5,
            ki: 0.1,
            kd: 0.0,
            integral_clamp: 2.0,
            output_clamp: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.kp, self.ki, self.kd].iter().all(|g| *g >= 0.0 && g.is_finite())
            && self.integral_clamp > 0.0
            && self.output_clamp > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("gains", "gains must be >= 0 and clamps > 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

pub fn pid_step(error: f64, dt: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    state.integral = (state.integral + error * dt).clamp(-gains.integral_clamp, gains.integral_clamp);
    let deriv = state.prev_error.map_or(0.0, |p| (error - p) / dt);
    state.prev_error = Some(error);
    (gains.kp * error + gains.ki * state.integral + gains.kd * deriv)
        .clamp(-gains.output_clamp, gains.output_clamp)
}

/// Steering from a heading error.
pub fn lateral_control(heading_error: f64, dt: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    pid_step(normalize_angle(heading_error), dt, gains, state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub step: f64,
    pub count: usize,
}

impl Grid {
    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step * i as f64
    }

    pub fn max(&self) -> f64 {
        self.value(self.count - 1)
    }

    /// Cell index and fraction, clamped to the grid; the flag reports
    /// clamping.
    fn locate(&self, x: f64) -> (usize, f64, bool) {
        let tol = 1e-6 * self.step;
        let clamped = x < self.min - tol || x > self.max() + tol;
        let u = ((x - self.min) / self.step).clamp(0.0, (self.count - 1) as f64);
        let i = (u.floor() as usize).min(self.count.saturating_sub(2));
        (i, u - i as f64, clamped)
    }
}

/// Signed pedal per (speed, accel) cell; positive is throttle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub speed: Grid,
    pub accel: Grid,
    /// Row-major by speed.
    pub command: Vec<f64>,
    pub saturated: Vec<bool>,
}

impl CalibrationTable {
    pub fn default_grids() -> (Grid, Grid) {
        (
            Grid { min: 0.0, step: 2.0, count: 16 },
            Grid { min: -6.0, step: 0.5, count: 21 },
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.command[i * self.accel.count + j]
    }

    pub fn is_saturated(&self, i: usize, j: usize) -> bool {
        self.saturated[i * self.accel.count + j]
    }

    pub fn validate(&self) -> Result<()> {
        for g in [&self.speed, &self.accel] {
            if g.count < 2 || !(g.step > 0.0) || !g.min.is_finite() {
                return Err(Error::invalid("caltable.grid", "need >= 2 points and a positive step"));
            }
        }
        let n = self.speed.count * self.accel.count;
        if self.command.len() != n || self.saturated.len() != n {
            return Err(Error::invalid("caltable", format!("expected {n} cells")));
        }
        if self.command.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::invalid("caltable", "commands must lie in [-1, 1]"));
        }
        for i in 0..self.speed.count {
            for j in 1..self.accel.count {
                if self.get(i, j) < self.get(i, j - 1) {
                    return Err(Error::invalid(
                        "caltable",
                        format!("not monotone in accel at speed {}", self.speed.value(i)),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bilinear lookup, clamped to the grid edges.
    pub fn lookup(&self, speed: f64, accel: f64) -> f64 {
        let (i, fi, ci) = self.speed.locate(speed);
        let (j, fj, cj) = self.accel.locate(accel);
        if ci || cj {
            log::warn!("calibration lookup ({speed:.2}, {accel:.2}) outside grid, clamped");
        }
        let c00 = self.get(i, j);
        let c01 = self.get(i, j + 1);
        let c10 = self.get(i + 1, j);
        let c11 = self.get(i + 1, j + 1);
        let lo = c00 + fj * (c01 - c00);
        let hi = c10 + fj * (c11 - c10);
        lo + fi * (hi - lo)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("caltable", e);
        writeln!(out, "# {CALTABLE_VERSION}").map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["speed", "accel", "command", "saturated"])
            .map_err(|e| Error::parse("caltable", e))?;
        for i in 0..self.speed.count {
            for j in 0..self.accel.count {
                w.write_record(&[
                    format!("{}", self.speed.value(i)),
                    format!("{}", self.accel.value(j)),
                    format!("{}", self.get(i, j)),
                    u8::from(self.is_saturated(i, j)).to_string(),
                ])
                .map_err(|e| Error::parse("caltable", e))?;
            }
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R, origin: &str) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first).map_err(|e| Error::io(origin, e))?;
        let found = first.trim().trim_start_matches('#').trim();
        if found != CALTABLE_VERSION {
            return Err(Error::Version {
                found: found.to_string(),
                expected: CALTABLE_VERSION.into(),
            });
        }
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<(f64, f64, f64, bool)> = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(origin, e))?;
            if rec.len() != 4 {
                return Err(Error::parse(origin, format!("row {}: expected 4 fields", k + 1)));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(origin, format!("row {}: bad number {:?}", k + 1, &rec[i])))
            };
            let sat = match rec[3].trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(origin, format!("row {}: bad flag {other:?}", k + 1))),
            };
            rows.push((num(0)?, num(1)?, num(2)?, sat));
        }
        let mut speeds: Vec<f64> = rows.iter().map(|r| r.0).collect();
        speeds.dedup();
        let n_accel = rows.iter().take_while(|r| r.0 == rows[0].0).count();
        if rows.is_empty() || speeds.len() < 2 || n_accel < 2 || speeds.len() * n_accel != rows.len() {
            return Err(Error::parse(origin, "rows do not form a regular grid"));
        }
        let grid = |vals: &[f64]| -> Result<Grid> {
            let step = vals[1] - vals[0];
            let g = Grid { min: vals[0], step, count: vals.len() };
            if !(step > 0.0) || vals.iter().enumerate().any(|(i, v)| (v - g.value(i)).abs() > 1e-6 * step.max(1.0)) {
                return Err(Error::parse(origin, "grid is not uniformly spaced"));
            }
            Ok(g)
        };
        let accels: Vec<f64> = rows[..n_accel].iter().map(|r| r.1).collect();
        let (sg, ag) = (grid(&speeds)?, grid(&accels)?);
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / n_accel, k % n_accel);
            if (r.0 - sg.value(i)).abs() > 1e-6 || (r.1 - ag.value(j)).abs() > 1e-6 {
                return Err(Error::parse(origin, format!("row {}: out of grid order", k + 1)));
            }
        }
        let table = Self {
            speed: sg,
            accel: ag,
            command: rows.iter().map(|r| r.2).collect(),
            saturated: rows.iter().map(|r| r.3).collect(),
        };
        table.validate().map_err(|e| Error::parse(origin, e))?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), &path.display().to_string())
    }
}

/// Steady acceleration the plant settles at when `u` is held at speed `v`,
/// measured by stepping the plant with its speed pinned.
fn measured_accel(plant: &VehicleParams, v: f64, u: f64, dt: f64) -> f64 {
    let cmd = ControlCommand::from_pedal(u, 0.0, plant.max_steer);
    let mut ego = EgoState::new(Pose2D::new(0.0, 0.0, 0.0), v, 0.0, 0.0);
    for _ in 0..80 {
        let next = plant.step(&ego, &cmd, dt);
        ego = EgoState {
            speed: v,
            pose: ego.pose,
            bbox: ego.bbox,
            ..next
        };
    }
    ego.accel
}

pub fn calibrate(plant: &VehicleParams, speed: Grid, accel: Grid, dt: f64) -> CalibrationTable {
    let mut command = Vec::with_capacity(speed.count * accel.count);
    let mut saturated = Vec::with_capacity(speed.count * accel.count);
    for i in 0..speed.count {
        let v = speed.value(i);
        let lo_a = measured_accel(plant, v, -1.0, dt);
        let hi_a = measured_accel(plant, v, 1.0, dt);
        for j in 0..accel.count {
            let a = accel.value(j);
            if a >= hi_a || a <= lo_a {
                command.push(if a >= hi_a { 1.0 } else { -1.0 });
                saturated.push(true);
                continue;
            }
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if measured_accel(plant, v, mid, dt) < a {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            command.push(0.5 * (lo + hi));
            saturated.push(false);
        }
    }
    CalibrationTable {
        speed,
        accel,
        command,
        saturated,
    }
}

pub fn calibrate_default(plant: &VehicleParams, dt: f64) -> CalibrationTable {
    let (s, a) = CalibrationTable::default_grids();
    calibrate(plant, s, a, dt)
}

/// Feed-forward plus PID on the acceleration error, as a signed pedal.
pub fn longitudinal_control(
    target_accel: f64,
    ego: &EgoState,
    table: &CalibrationTable,
    gains: &PidGains,
    state: &mut PidState,
    dt: f64,
) -> f64 {
    let ff = table.lookup(ego.speed, target_accel);
    let fb = pid_step(target_accel - ego.accel, dt, gains, state);
    (ff + fb).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub lateral: PidGains,
    pub longitudinal: PidGains,
    pub lookahead_time: f64,
    pub min_lookahead: f64,
    pub max_steer: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lateral: PidGains::lateral_default(),
            longitudinal: PidGains::longitudinal_default(),
            lookahead_time: 0.5,
            min_lookahead: 3.0,
            max_steer: VehicleParams::default().max_steer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControllerConfig,
    pub table: Arc<CalibrationTable>,
    lateral: PidState,
    longitudinal: PidState,
}

impl Controller {
    pub fn new(config: ControllerConfig, table: Arc<CalibrationTable>) -> Result<Self> {
        config.lateral.validate()?;
        config.longitudinal.validate()?;
        table.validate()?;
        Ok(Self {
            config,
            table,
            lateral: PidState::default(),
            longitudinal: PidState::default(),
        })
    }

    pub fn reset(&mut self) {
        self.lateral = PidState::default();
        self.longitudinal = PidState::default();
    }

    /// Heading error toward the plan point one lookahead ahead of the ego.
    pub fn heading_error(&self, plan: &TrajectoryCandidate, ego: &EgoState) -> f64 {
        let la = (self.config.lookahead_time * ego.speed).max(self.config.min_lookahead);
        let here = plan.path.project(ego.pose.x, ego.pose.y).s;
        let target = plan.path.pose_at(here + la);
        normalize_angle((target.y - ego.pose.y).atan2(target.x - ego.pose.x) - ego.pose.yaw)
    }

    pub fn track_trajectory(&mut self, plan: &TrajectoryCandidate, ego: &EgoState, dt: f64) -> ControlCommand {
        let steer = lateral_control(self.heading_error(plan, ego), dt, &self.config.lateral, &mut self.lateral);
        let target = match plan.samples.get(1) {
            Some(s1) => (s1.speed - plan.samples[0].speed) / (s1.t - plan.samples[0].t),
            None => plan.accel,
        };
        let u = if plan.emergency {
            -1.0
        } else {
            longitudinal_control(target, ego, &self.table, &self.config.longitudinal, &mut self.longitudinal, dt)
        };
        // hold the brake at standstill when the plan does not move
        let u = if ego.speed < 0.05 && target <= 0.0 { u.min(-0.3) } else { u };
        ControlCommand::from_pedal(u, steer, self.config.max_steer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn table() -> &'static CalibrationTable {
        static T: OnceLock<CalibrationTable> = OnceLock::new();
        T.get_or_init(|| calibrate_default(&VehicleParams::default(), 0.05))
    }

    #[test]
    fn pid_basics() {
        let g = PidGains { kp: 2.0, ki: 0.0, kd: 0.0, integral_clamp: 1.0, output_clamp: 0.5 };
        let mut s = PidState::default();
        assert_eq!(lateral_control(0.0, 0.05, &g, &mut s), 0.0);
        assert_eq!(lateral_control(0.1, 0.05, &g, &mut s), 0.2);
        assert_eq!(lateral_control(1.0, 0.05, &g, &mut s), 0.5);
    }

    #[test]
    fn calibration_properties() {
        let t = table();
        t.validate().unwrap();
        let j0 = 12; // accel 0
        assert_eq!(t.accel.value(j0), 0.0);
        for i in 1..t.speed.count {
            assert!(t.get(i, j0) > 0.0 && !t.is_saturated(i, j0));
        }
        let last = t.accel.count - 1;
        assert!(t.is_saturated(t.speed.count - 1, last));
        let again = calibrate_default(&VehicleParams::default(), 0.05);
        for (a, b) in t.command.iter().zip(&again.command) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn grid_point_lookup_is_exact() {
        let t = table();
        for (i, j) in [(0, 0), (3, 7), (5, 12), (15, 20)] {
            assert_eq!(t.lookup(t.speed.value(i), t.accel.value(j)), t.get(i, j));
        }
        let mut st = PidState::default();
        let ego = EgoState::new(Pose2D::new(0.0, 0.0, 0.0), 6.0, 1.0, 0.0);
        let g = PidGains::longitudinal_default();
        let u = longitudinal_control(1.0, &ego, t, &g, &mut st, 0.05);
        assert!((u - t.get(3, 14)).abs() < 1e-12);
    }

    #[test]
    fn large_negative_target_is_full_brake() {
        let mut st = PidState::default();
        let ego = EgoState::new(Pose2D::new(0.0, 0.0, 0.0), 10.0, 0.0, 0.0);
        let u = longitudinal_control(-20.0, &ego, table(), &PidGains::longitudinal_default(), &mut st, 0.05);
        let c = ControlCommand::from_pedal(u, 0.0, 0.6);
        assert_eq!((c.throttle, c.brake), (0.0, 1.0));
    }

    #[test]
    fn csv_round_trip_and_rejects_non_monotone() {
        let mut buf = Vec::new();
        table().write_csv(&mut buf).unwrap();
        let back = CalibrationTable::read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.speed, table().speed);
        for (a, b) in back.command.iter().zip(&table().command) {
            assert!((a - b).abs() < 1e-12);
        }
        let text = "# caltable-v1\nspeed,accel,command,saturated\n0,0,0.5,0\n0,1,0.2,0\n1,0,0.1,0\n1,1,0.3,0\n";
        assert!(CalibrationTable::read_csv(text.as_bytes(), "mem").is_err());
        assert!(CalibrationTable::read_csv("# caltable-v0\n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn heading_step_settles() {
        // hold 10 m/s on the plant and steer a 10 degree heading error to zero
        let p = VehicleParams::default();
        let mut ego = EgoState::new(Pose2D::new(0.0, 0.0, 10f64.to_radians()), 10.0, 0.0, 0.0);
        let mut st = PidState::default();
        let gains = PidGains::lateral_default();
        let dt = 0.05;
        let mut settled_at = None;
        for k in 0..200 {
            let steer = lateral_control(-ego.pose.yaw, dt, &gains, &mut st);
            let u = p.rolling_drag / p.max_throttle_accel + 0.05;
            ego = p.step(&ego, &ControlCommand::from_pedal(u, steer, p.max_steer), dt);
            ego.speed = 10.0;
            if ego.pose.yaw.abs() > 1f64.to_radians() {
                settled_at = None;
            } else if settled_at.is_none() {
                settled_at = Some(k as f64 * dt);
            }
        }
        assert!(settled_at.unwrap() < 3.0, "{settled_at:?}");
    }

    #[test]
    fn speed_ramp_tracking() {
        let p = VehicleParams::default();
        let dt = 0.05;
        let mut ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let mut st = PidState::default();
        let g = PidGains::longitudinal_default();
        let mut worst: f64 = 0.0;
        for k in 0..400 {
            let t = k as f64 * dt;
            let v_ref = (2.0 * t).min(10.0);
            let slope = if t < 5.0 { 2.0 } else { 0.0 };
            let target = slope + 1.0 * (v_ref - ego.speed);
            let u = longitudinal_control(target, &ego, table(), &g, &mut st, dt);
            ego = p.step(&ego, &ControlCommand::from_pedal(u, 0.0, 0.6), dt);
            if t > 8.0 {
                worst = worst.max((ego.speed - 10.0).abs());
            }
        }
        assert!(worst <= 0.5, "{worst}");
    }

    proptest! {
        #[test]
        fn outputs_bounded_and_exclusive(e in -10.0..10.0f64, target in -50.0..50.0f64, v in -5.0..60.0f64, a in -10.0..10.0f64) {
            let mut st = PidState::default();
            let steer = lateral_control(e, 0.05, &PidGains::lateral_default(), &mut st);
            prop_assert!(steer.abs() <= 0.6);
            let ego = EgoState { speed: v, accel: a, ..EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0)) };
            let mut ls = PidState::default();
            let u = longitudinal_control(target, &ego, table(), &PidGains::longitudinal_default(), &mut ls, 0.05);
            let c = ControlCommand::from_pedal(u, steer, 0.6);
            prop_assert!(c.throttle * c.brake == 0.0);
            prop_assert!((0.0..=1.0).contains(&c.throttle) && (0.0..=1.0).contains(&c.brake));
        }
    }
}
