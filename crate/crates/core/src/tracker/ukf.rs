//! Unscented Kalman filter over a constant turn rate and velocity (CTRV)
//! state `[x, y, yaw, speed, yaw_rate]` with pose measurements `[x, y, yaw]`.

use nalgebra::{Matrix3, Matrix5, Matrix5x3, SMatrix, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::normalize_angle;

pub const STATE_DIM: usize = 5;
const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

/// Sigma-point spread parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

struct Weights {
    lambda: f64,
    mean: [f64; SIGMA_COUNT],
    cov: [f64; SIGMA_COUNT],
}

impl SigmaParams {
    fn weights(&self) -> Weights {
        let n = STATE_DIM as f64;
        let lambda = self.alpha * self.alpha * (n + self.kappa) - n;
        let w = 1.0 / (2.0 * (n + lambda));
        let mut mean = [w; SIGMA_COUNT];
        let mut cov = [w; SIGMA_COUNT];
        mean[0] = lambda / (n + lambda);
        cov[0] = mean[0] + (1.0 - self.alpha * self.alpha + self.beta);
        Weights { lambda, mean, cov }
    }
}

/// Process noise as white acceleration and yaw acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    pub accel_sigma: f64,
    pub yaw_accel_sigma: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            accel_sigma: 2.0,
            yaw_accel_sigma: 0.5,
        }
    }
}

impl ProcessNoise {
    /// Discrete covariance `G diag(sa^2, sw^2) G^T` for the CTRV model at `yaw`.
    pub fn covariance(&self, yaw: f64, dt: f64) -> Matrix5<f64> {
        let h = 0.5 * dt * dt;
        let g = SMatrix::<f64, 5, 2>::new(
            h * yaw.cos(),
            0.0,
            h * yaw.sin(),
            0.0,
            0.0,
            h,
            dt,
            0.0,
            0.0,
            dt,
        );
        let q = nalgebra::Matrix2::new(
            self.accel_sigma * self.accel_sigma,
            0.0,
            0.0,
            self.yaw_accel_sigma * self.yaw_accel_sigma,
        );
        g * q * g.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoise {
    pub pos_sigma: f64,
    pub yaw_sigma: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self {
            pos_sigma: 0.3,
            yaw_sigma: 0.05,
        }
    }
}

impl MeasurementNoise {
    pub fn covariance(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            self.pos_sigma * self.pos_sigma,
            self.pos_sigma * self.pos_sigma,
            self.yaw_sigma * self.yaw_sigma,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub mean: Vector5<f64>,
    pub covariance: Matrix5<f64>,
}

impl FilterState {
    pub fn new(mean: Vector5<f64>, covariance: Matrix5<f64>) -> Self {
        Self { mean, covariance }
    }

    pub fn x(&self) -> f64 {
        self.mean[0]
    }
    pub fn y(&self) -> f64 {
        self.mean[1]
    }
    pub fn yaw(&self) -> f64 {
        self.mean[2]
    }
    pub fn speed(&self) -> f64 {
        self.mean[3]
    }
    pub fn yaw_rate(&self) -> f64 {
        self.mean[4]
    }

    fn not_pd(&self) -> Error {
        Error::NotPositiveDefinite(self.covariance.iter().copied().collect())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.covariance.cholesky().is_some()
    }

    fn sigma_points(&self, lambda: f64) -> Result<[Vector5<f64>; SIGMA_COUNT]> {
        let scaled = self.covariance * (STATE_DIM as f64 + lambda);
        let chol = scaled.cholesky().ok_or_else(|| self.not_pd())?;
        let l = chol.l();
        let mut pts = [self.mean; SIGMA_COUNT];
        for k in 0..STATE_DIM {
            let col = l.column(k).into_owned();
            pts[1 + k] = self.mean + col;
            pts[1 + STATE_DIM + k] = self.mean - col;
        }
        Ok(pts)
    }
}

/// CTRV transition; degrades to straight-line motion at zero yaw rate.
pub fn ctrv_propagate(s: &Vector5<f64>, dt: f64) -> Vector5<f64> {
    let (x, y, yaw, v, w) = (s[0], s[1], s[2], s[3], s[4]);
    let (nx, ny) = if w.abs() > 1e-6 {
        (
            x + v / w * ((yaw + w * dt).sin() - yaw.sin()),
            y + v / w * (yaw.cos() - (yaw + w * dt).cos()),
        )
    } else {
        (x + v * yaw.cos() * dt, y + v * yaw.sin() * dt)
    };
    Vector5::new(nx, ny, normalize_angle(yaw + w * dt), v, w)
}

fn symmetrize(m: &Matrix5<f64>) -> Matrix5<f64> {
    (m + m.transpose()) * 0.5
}

/// Weighted mean with the yaw component averaged as wrapped offsets from
/// the central point.
fn state_mean(points: &[Vector5<f64>; SIGMA_COUNT], w: &[f64; SIGMA_COUNT]) -> Vector5<f64> {
    let yaw0 = points[0][2];
    let mut m = Vector5::zeros();
    let mut dyaw = 0.0;
    for (p, wi) in points.iter().zip(w) {
        m += p * *wi;
        dyaw += wi * normalize_angle(p[2] - yaw0);
    }
    m[2] = normalize_angle(yaw0 + dyaw);
    m
}

fn state_diff(a: &Vector5<f64>, b: &Vector5<f64>) -> Vector5<f64> {
    let mut d = a - b;
    d[2] = normalize_angle(d[2]);
    d
}

pub fn ukf_predict(
    filter: &FilterState,
    dt: f64,
    process: &ProcessNoise,
    params: &SigmaParams,
) -> Result<FilterState> {
    let w = params.weights();
    let sigma = filter.sigma_points(w.lambda)?;
    let propagated = sigma.map(|p| ctrv_propagate(&p, dt));
    let mean = state_mean(&propagated, &w.mean);
    let mut cov = process.covariance(mean[2], dt);
    for (p, wc) in propagated.iter().zip(&w.cov) {
        let d = state_diff(p, &mean);
        cov += d * d.transpose() * *wc;
    }
    let out = FilterState::new(mean, symmetrize(&cov));
    if !out.is_positive_definite() {
        return Err(out.not_pd());
    }
    Ok(out)
}

/// Measurement update with a pose observation; the yaw innovation is
/// wrapped into (-pi, pi].
pub fn ukf_update(
    filter: &FilterState,
    measurement: &Vector3<f64>,
    noise: &MeasurementNoise,
    params: &SigmaParams,
) -> Result<FilterState> {
    let w = params.weights();
    let sigma = filter.sigma_points(w.lambda)?;
    let z_pts = sigma.map(|p| Vector3::new(p[0], p[1], p[2]));
    let yaw0 = z_pts[0][2];
    let mut z_mean = Vector3::zeros();
    let mut dyaw = 0.0;
    for (z, wm) in z_pts.iter().zip(&w.mean) {
        z_mean += z * *wm;
        dyaw += wm * normalize_angle(z[2] - yaw0);
    }
    z_mean[2] = normalize_angle(yaw0 + dyaw);

    let mut s = noise.covariance();
    let mut pxz = Matrix5x3::zeros();
    for ((x, z), wc) in sigma.iter().zip(&z_pts).zip(&w.cov) {
        let mut dz = z - z_mean;
        dz[2] = normalize_angle(dz[2]);
        let dx = state_diff(x, &filter.mean);
        s += dz * dz.transpose() * *wc;
        pxz += dx * dz.transpose() * *wc;
    }
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| filter.not_pd())?;
    let k = pxz * s_inv;
    let mut innovation = measurement - z_mean;
    innovation[2] = normalize_angle(innovation[2]);
    let mut mean = filter.mean + k * innovation;
    mean[2] = normalize_angle(mean[2]);
    let cov = symmetrize(&(filter.covariance - k * s * k.transpose()));
    let out = FilterState::new(mean, cov);
    if !out.is_positive_definite() {
        return Err(out.not_pd());
    }
    Ok(out)
}

/// Normalized estimation error squared of `truth` under the filter.
pub fn nees(filter: &FilterState, truth: &Vector5<f64>) -> Option<f64> {
    let e = state_diff(truth, &filter.mean);
    let inv = filter.covariance.try_inverse()?;
    Some((e.transpose() * inv * e)[(0, 0)])
}
