//! Ego plant: kinematic bicycle with a first-order lag between the pedal
//! command and the realized longitudinal acceleration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::world::EgoState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub throttle: f64,
    pub brake: f64,
    pub steering: f64,
}

impl ControlCommand {
    pub const IDLE: ControlCommand = ControlCommand {
        throttle: 0.0,
        brake: 0.0,
        steering: 0.0,
    };

    /// Maps a signed pedal value in [-1, 1] to exclusive throttle/brake.
    pub fn from_pedal(u: f64, steering: f64, max_steer: f64) -> Self {
        let u = u.clamp(-1.0, 1.0);
        Self {
            throttle: u.max(0.0),
            brake: (-u).max(0.0),
            steering: steering.clamp(-max_steer, max_steer),
        }
    }

    pub fn full_brake() -> Self {
        Self {
            throttle: 0.0,
            brake: 1.0,
            steering: 0.0,
        }
    }

    /// Signed pedal value, positive for throttle.
    pub fn pedal(&self) -> f64 {
        self.throttle - self.brake
    }

    pub fn validate(&self, max_steer: f64) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.throttle)
            && (0.0..=1.0).contains(&self.brake)
            && self.throttle * self.brake == 0.0
            && self.steering.abs() <= max_steer + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("command", format!("{self:?} out of range")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    /// Pedal-to-acceleration time constant, s.
    pub tau: f64,
    pub max_steer: f64,
    /// Full-throttle acceleration at rest, m/s^2.
    pub max_throttle_accel: f64,
    /// Speed at which full throttle yields zero tractive force, m/s.
    pub top_speed: f64,
    pub max_brake_decel: f64,
    pub rolling_drag: f64,
    pub aero_drag: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.9,
            tau: 0.3,
            max_steer: 0.6,
            max_throttle_accel: 4.0,
            top_speed: 40.0,
            max_brake_decel: 8.0,
            rolling_drag: 0.1,
            aero_drag: 0.0004,
        }
    }
}

impl VehicleParams {
    fn drag(&self, v: f64) -> f64 {
        self.rolling_drag * (v / 0.5).min(1.0) + self.aero_drag * v * v
    }

    /// Acceleration the lag converges to when holding pedal `u` at speed `v`.
    pub fn steady_accel(&self, v: f64, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        let push = if u >= 0.0 {
            u * self.max_throttle_accel * (1.0 - v / self.top_speed).max(0.0)
        } else {
            u * self.max_brake_decel
        };
        push - self.drag(v)
    }

    pub fn step(&self, ego: &EgoState, cmd: &ControlCommand, dt: f64) -> EgoState {
        let target = self.steady_accel(ego.speed, cmd.pedal());
        let mut accel = target + (ego.accel - target) * (-dt / self.tau).exp();
        let mut v = ego.speed + accel * dt;
        if v <= 0.0 {
            v = 0.0;
            accel = accel.max(0.0);
        }
        let steer = cmd.steering.clamp(-self.max_steer, self.max_steer);
        let v_mid = 0.5 * (ego.speed + v);
        let yaw_rate = v_mid * steer.tan() / self.wheelbase;
        let yaw_mid = ego.pose.yaw + 0.5 * yaw_rate * dt;
        let pose = Pose2D::new(
            ego.pose.x + v_mid * yaw_mid.cos() * dt,
            ego.pose.y + v_mid * yaw_mid.sin() * dt,
            ego.pose.yaw + yaw_rate * dt,
        );
        EgoState {
            speed: v,
            accel,
            yaw_rate,
            ..ego.with_pose(pose)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_at_rest_is_fixed_point() {
        let p = VehicleParams::default();
        let ego = EgoState::at_rest(Pose2D::new(3.0, -2.0, 0.7));
        let next = p.step(&ego, &ControlCommand::IDLE, 0.05);
        assert_eq!(next, ego);
    }

    #[test]
    fn full_throttle_speed_nondecreasing() {
        let p = VehicleParams::default();
        let mut ego = EgoState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let cmd = ControlCommand::from_pedal(1.0, 0.0, p.max_steer);
        for _ in 0..100 {
            let next = p.step(&ego, &cmd, 0.05);
            assert!(next.speed >= ego.speed);
            ego = next;
        }
        assert!(ego.speed > 5.0);
    }

    #[test]
    fn braking_never_reverses() {
        let p = VehicleParams::default();
        let mut ego = EgoState::new(Pose2D::new(0.0, 0.0, 0.0), 3.0, 0.0, 0.0);
        for _ in 0..200 {
            ego = p.step(&ego, &ControlCommand::full_brake(), 0.05);
            assert!(ego.speed >= 0.0);
        }
        assert_eq!(ego.speed, 0.0);
    }

    #[test]
    fn exclusive_pedals() {
        let c = ControlCommand::from_pedal(-0.4, 2.0, 0.6);
        assert_eq!((c.throttle, c.brake, c.steering), (0.0, 0.4, 0.6));
        assert!(c.validate(0.6).is_ok());
        let bad = ControlCommand {
            throttle: 0.2,
            brake: 0.1,
            steering: 0.0,
        };
        assert!(bad.validate(0.6).is_err());
    }

    #[test]
    fn constant_steer_traces_circle() {
        let p = VehicleParams::default();
        let steer: f64 = 0.1;
        let radius = p.wheelbase / steer.tan();
        let mut ego = EgoState::new(Pose2D::new(0.0, 0.0, 0.0), 5.0, 0.0, 0.0);
        // hold speed by feeding the drag-compensating pedal
        let u = p.drag(5.0) / (p.max_throttle_accel * (1.0 - 5.0 / p.top_speed));
        let cmd = ControlCommand::from_pedal(u, steer, p.max_steer);
        for _ in 0..400 {
            ego = p.step(&ego, &cmd, 0.05);
            let r = ego.pose.x.hypot(ego.pose.y - radius);
            assert!((r - radius).abs() < 0.05, "r={r}");
        }
    }
}
