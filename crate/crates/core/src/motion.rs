//! Constant-velocity Kalman filter on the court plane.
//!
//! State is `[x, y, vx, vy]` in centimetres and centimetres per frame. Only
//! the position is observed.

use serde::{Deserialize, Serialize};

use crate::geometry::CourtPoint;
use crate::scalar::Real;

type Mat4<T> = [[T; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig<T> {
    /// Per-axis measurement standard deviation, cm.
    pub measurement_sigma: T,
    /// White-acceleration standard deviation, cm/frame^2.
    pub acceleration_sigma: T,
    /// Prior position standard deviation at initialisation, cm.
    pub init_position_sigma: T,
    /// Prior velocity standard deviation at initialisation, cm/frame.
    pub init_velocity_sigma: T,
}

impl<T: Real> Default for KalmanConfig<T> {
    fn default() -> Self {
        Self {
            measurement_sigma: T::of(15.0),
            acceleration_sigma: T::of(2.0),
            init_position_sigma: T::of(15.0),
            // Effectively uninformative; a new track's heading is unknown.
            init_velocity_sigma: T::of(100.0),
        }
    }
}

/// Position, velocity and their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState<T> {
    pub mean: [T; 4],
    pub covariance: Mat4<T>,
}

impl<T: Real> KinematicState<T> {
    pub fn position(&self) -> CourtPoint<T> {
        CourtPoint::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (T, T) {
        (self.mean[2], self.mean[3])
    }

    pub fn trace(&self) -> T {
        (0..4).map(|i| self.covariance[i][i]).sum()
    }

    /// Largest absolute asymmetry of the covariance.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.covariance[i][j] - self.covariance[j][i]).abs());
            }
        }
        worst
    }

    /// Cholesky test for positive definiteness.
    pub fn is_positive_definite(&self) -> bool {
        let a = &self.covariance;
        let mut l = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..=i {
                let s: T = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = a[i][i] - s;
                    if !(d > T::zero()) {
                        return false;
                    }
                    l[i][j] = d.sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        true
    }
}

pub fn kf_init<T: Real>(obs: CourtPoint<T>, cfg: &KalmanConfig<T>) -> KinematicState<T> {
    let p = cfg.init_position_sigma * cfg.init_position_sigma;
    let v = cfg.init_velocity_sigma * cfg.init_velocity_sigma;
    let mut covariance = [[T::zero(); 4]; 4];
    covariance[0][0] = p;
    covariance[1][1] = p;
    covariance[2][2] = v;
    covariance[3][3] = v;
    KinematicState {
        mean: [obs.x, obs.y, T::zero(), T::zero()],
        covariance,
    }
}

/// Advances the state `dt` frames (`dt >= 1`).
pub fn kf_predict<T: Real>(s: &KinematicState<T>, dt: u32, cfg: &KalmanConfig<T>) -> KinematicState<T> {
    let dt = T::from_u32(dt.max(1)).unwrap_or_else(T::one);
    let mut f = identity::<T>();
    f[0][2] = dt;
    f[1][3] = dt;

    let mean = [
        s.mean[0] + dt * s.mean[2],
        s.mean[1] + dt * s.mean[3],
        s.mean[2],
        s.mean[3],
    ];

    let q = cfg.acceleration_sigma * cfg.acceleration_sigma;
    let dt2 = dt * dt;
    let (qpp, qpv, qvv) = (q * dt2 * dt2 / T::of(4.0), q * dt2 * dt / T::of(2.0), q * dt2);
    let mut covariance = mul(&mul(&f, &s.covariance), &transpose(&f));
    for axis in 0..2 {
        covariance[axis][axis] = covariance[axis][axis] + qpp;
        covariance[axis][axis + 2] = covariance[axis][axis + 2] + qpv;
        covariance[axis + 2][axis] = covariance[axis + 2][axis] + qpv;
        covariance[axis + 2][axis + 2] = covariance[axis + 2][axis + 2] + qvv;
    }
    KinematicState {
        mean,
        covariance: symmetrize(&covariance),
    }
}

/// Linear measurement update with a position observation (Joseph form).
pub fn kf_update<T: Real>(s: &KinematicState<T>, obs: CourtPoint<T>, cfg: &KalmanConfig<T>) -> KinematicState<T> {
    let r = cfg.measurement_sigma * cfg.measurement_sigma;
    let p = &s.covariance;
    // S = H P H^T + R, 2x2.
    let s00 = p[0][0] + r;
    let s01 = p[0][1];
    let s10 = p[1][0];
    let s11 = p[1][1] + r;
    let det = s00 * s11 - s01 * s10;
    let (i00, i01, i10, i11) = (s11 / det, -s01 / det, -s10 / det, s00 / det);
    // K = P H^T S^-1, 4x2.
    let mut k = [[T::zero(); 2]; 4];
    for (i, row) in k.iter_mut().enumerate() {
        row[0] = p[i][0] * i00 + p[i][1] * i10;
        row[1] = p[i][0] * i01 + p[i][1] * i11;
    }
    let innov = [obs.x - s.mean[0], obs.y - s.mean[1]];
    let mut mean = s.mean;
    for (i, m) in mean.iter_mut().enumerate() {
        *m = *m + k[i][0] * innov[0] + k[i][1] * innov[1];
    }
    // (I - K H) P (I - K H)^T + K R K^T
    let mut ikh = identity::<T>();
    for i in 0..4 {
        ikh[i][0] = ikh[i][0] - k[i][0];
        ikh[i][1] = ikh[i][1] - k[i][1];
    }
    let mut covariance = mul(&mul(&ikh, p), &transpose(&ikh));
    for i in 0..4 {
        for j in 0..4 {
            covariance[i][j] = covariance[i][j] + r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
        }
    }
    KinematicState {
        mean,
        covariance: symmetrize(&covariance),
    }
}

fn identity<T: Real>() -> Mat4<T> {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

fn mul<T: Real>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut out = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose<T: Real>(a: &Mat4<T>) -> Mat4<T> {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn symmetrize<T: Real>(a: &Mat4<T>) -> Mat4<T> {
    let half = T::of(0.5);
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (a[i][j] + a[j][i]) * half;
        }
    }
    out
}
