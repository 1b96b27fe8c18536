//! Reduced-order balance models: the linear inverted pendulum, the wheeled
//! linear inverted pendulum and the classical wheeled inverted pendulum.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CoM acceleration of the linear inverted pendulum over a support at `x0`.
pub fn lip_acceleration(x: f64, x0: f64, z: f64, g: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Input(format!("pendulum height must be positive, got {z}")));
    }
    Ok(g / z * (x - x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WlipParams {
    /// Upper-body mass.
    pub m_c: f64,
    pub m_w: f64,
    pub r_w: f64,
    /// CoM height above the wheel centre.
    pub z: f64,
    pub g: f64,
}

impl WlipParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_c", self.m_c),
            ("m_w", self.m_w),
            ("r_w", self.r_w),
            ("z", self.z),
            ("g", self.g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Input(format!("wLIP parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `1 + m_c / m_w`.
    pub fn coupling(&self) -> f64 {
        1.0 + self.m_c / self.m_w
    }
}

/// `(ẋ_c, δ̇x, δx)` with `δx = x_c − x_w`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WlipState {
    pub com_velocity: f64,
    pub offset_rate: f64,
    pub offset: f64,
}

impl WlipState {
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.com_velocity, self.offset_rate, self.offset)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self {
            com_velocity: v[0],
            offset_rate: v[1],
            offset: v[2],
        }
    }
}

/// State-space matrices of the wLIP for the state `(ẋ_c, δ̇x, δx)` and
/// wheel torque input.
pub fn wlip_matrices(p: &WlipParams) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    p.validate()?;
    let gz = p.g / p.z;
    let a = Matrix3::new(0.0, 0.0, gz, 0.0, 0.0, p.coupling() * gz, 0.0, 1.0, 0.0);
    let b = Vector3::new(
        1.0 / (p.m_c * p.z),
        (1.0 / p.m_c + 1.0 / p.m_w) / p.z - 1.0 / (p.m_w * p.r_w),
        0.0,
    );
    Ok((a, b))
}

/// Rank of `[B, AB, A²B]` with a relative singular-value threshold.
pub fn wlip_controllability(a: &Matrix3<f64>, b: &Vector3<f64>) -> usize {
    let c = Matrix3::from_columns(&[*b, a * b, a * a * b]);
    let sv = c.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    let tol = top * 3.0 * f64::EPSILON * 16.0;
    sv.iter().filter(|&&s| s > tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WipParams {
    pub m_c: f64,
    pub m_w: f64,
    /// CoM to wheel-axle distance.
    pub l: f64,
    /// Body inertia about its CoM.
    pub i_c: f64,
    pub i_w: f64,
    pub r_w: f64,
    pub g: f64,
}

impl WipParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_c", self.m_c),
            ("m_w", self.m_w),
            ("l", self.l),
            ("i_c", self.i_c),
            ("i_w", self.i_w),
            ("r_w", self.r_w),
            ("g", self.g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Input(format!("WIP parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn mass_matrix(&self, theta: f64) -> Matrix2<f64> {
        let c = theta.cos();
        let ml = self.m_c * self.l;
        Matrix2::new(
            self.i_c + ml * self.l,
            ml * c,
            ml * self.r_w * c,
            (self.i_w + (self.m_w + self.m_c) * self.r_w * self.r_w) / self.r_w,
        )
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, s: &WipState) -> f64 {
        let ml = self.m_c * self.l;
        0.5 * (self.i_c + ml * self.l) * s.pitch_rate * s.pitch_rate
            + ml * s.pitch.cos() * s.pitch_rate * s.velocity
            + 0.5 * (self.m_w + self.m_c + self.i_w / (self.r_w * self.r_w)) * s.velocity * s.velocity
            + ml * self.g * s.pitch.cos()
    }
}

/// `(θ̇, ẋ_w, θ, x_w)`; θ is measured from the upward vertical to the
/// wheel-to-CoM link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WipState {
    pub pitch_rate: f64,
    pub velocity: f64,
    pub pitch: f64,
    pub position: f64,
}

impl WipState {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.pitch_rate, self.velocity, self.pitch, self.position)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            pitch_rate: v[0],
            velocity: v[1],
            pitch: v[2],
            position: v[3],
        }
    }
}

/// Time derivative `(θ̈, ẍ, θ̇, ẋ)` of the wheeled inverted pendulum under
/// wheel torque `tau`.
pub fn wip_dynamics(p: &WipParams, s: &WipState, tau: f64) -> Result<Vector4<f64>> {
    let m = p.mass_matrix(s.pitch);
    let ml_s = p.m_c * p.l * s.pitch.sin();
    let rhs = Vector2::new(-tau + ml_s * p.g, tau + ml_s * p.r_w * s.pitch_rate * s.pitch_rate);
    let det = m.determinant();
    let scale = m[(0, 0)].abs() * m[(1, 1)].abs() + m[(0, 1)].abs() * m[(1, 0)].abs();
    let inv = if det.abs() > 1e-12 * scale { m.try_inverse() } else { None };
    let inv = inv.ok_or_else(|| Error::Numerical {
        routine: "wip_dynamics",
        detail: format!("singular mass matrix (reciprocal condition {:.3e})", det.abs() / scale.max(f64::MIN_POSITIVE)),
        residual: det,
    })?;
    let acc = inv * rhs;
    Ok(Vector4::new(acc[0], acc[1], s.pitch_rate, s.velocity))
}

/// Pendulum angle and rate equivalent to a CoM offset `δx` at height `z`.
pub fn wip_com_equivalents(dx: f64, dx_rate: f64, z: f64) -> Result<(f64, f64)> {
    if !(z > 0.0) || dx.abs() >= z {
        return Err(Error::Input(format!(
            "CoM offset {dx} must be smaller than height {z}"
        )));
    }
    let r2 = dx * dx + z * z;
    let theta = (dx / r2.sqrt()).asin();
    let rate = z * dx_rate / r2;
    Ok((theta, rate))
}

/// Classical fourth-order Runge-Kutta step for autonomous dynamics.
pub fn rk4_step<const N: usize, F>(
    x: &nalgebra::SVector<f64, N>,
    dt: f64,
    mut f: F,
) -> Result<nalgebra::SVector<f64, N>>
where
    F: FnMut(&nalgebra::SVector<f64, N>) -> Result<nalgebra::SVector<f64, N>>,
{
    let k1 = f(x)?;
    let k2 = f(&(x + k1 * (dt / 2.0)))?;
    let k3 = f(&(x + k2 * (dt / 2.0)))?;
    let k4 = f(&(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}
