//! Constrained forward dynamics of the robot on terrain with rolling
//! contacts, plus the closed-loop scenario runner.
//!
//! Each substep solves
//! `[M, −J_cᵀ; J_c, 0]·[q̈; F_c] = [Sτ − H + τ_ext; C_r − J̇_c q̇ − stab]`
//! for the wheels in contact, with Baumgarte terms on the contact velocity
//! and on the wheel penetration, then integrates semi-implicitly.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::{contact_frames_from, ContactFrames, Robot, RollingConstraint, WheelSide, NUM_ACTUATED, NUM_DOF};

/// Ground height field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Terrain {
    #[default]
    Flat,
    /// Up-ramp then down-ramp along x, kinks rounded over `blend` metres.
    Slopes {
        #[serde(default = "default_slope_angle")]
        angle_deg: f64,
        #[serde(default = "default_slope_run")]
        run: f64,
        #[serde(default = "default_slope_start")]
        start: f64,
        #[serde(default = "default_slope_blend")]
        blend: f64,
    },
    /// `A sin(2πx/λ + φ₀) cos(2πy/λ + φ₁)`.
    Sine {
        amplitude: f64,
        wavelength: f64,
        /// Drawn from the scenario seed when absent.
        #[serde(default)]
        phase: Option<[f64; 2]>,
    },
}

fn default_slope_angle() -> f64 {
    15.0
}
fn default_slope_run() -> f64 {
    0.5
}
fn default_slope_start() -> f64 {
    1.0
}
fn default_slope_blend() -> f64 {
    0.05
}

/// Ramp `max(0, u)` with a quadratic blend over `|u| ≤ b`; value and slope.
fn soft_ramp(u: f64, b: f64) -> (f64, f64) {
    if u <= -b {
        (0.0, 0.0)
    } else if u >= b {
        (u, 1.0)
    } else {
        ((u + b) * (u + b) / (4.0 * b), (u + b) / (2.0 * b))
    }
}

impl Terrain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Terrain::Flat => Ok(()),
            Terrain::Slopes { angle_deg, run, blend, .. } => {
                if !(0.0..80.0).contains(&angle_deg) || !(run > 0.0) || !(blend > 0.0) || blend > run / 2.0 {
                    return Err(Error::Config("slope terrain needs 0 ≤ angle < 80°, run > 0, 0 < blend ≤ run/2".into()));
                }
                Ok(())
            }
            Terrain::Sine { amplitude, wavelength, .. } => {
                if !(amplitude >= 0.0) || !(wavelength > 0.0) {
                    return Err(Error::Config("sine terrain needs amplitude ≥ 0 and wavelength > 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Height and gradient `(h, ∂h/∂x, ∂h/∂y)`.
    pub fn height_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match *self {
            Terrain::Flat => (0.0, 0.0, 0.0),
            Terrain::Slopes {
                angle_deg,
                run,
                start,
                blend,
            } => {
                let k = angle_deg.to_radians().tan();
                let (a, da) = soft_ramp(x - start, blend);
                let (b, db) = soft_ramp(x - start - run, blend);
                let (c, dc) = soft_ramp(x - start - 2.0 * run, blend);
                (k * (a - 2.0 * b + c), k * (da - 2.0 * db + dc), 0.0)
            }
            Terrain::Sine {
                amplitude,
                wavelength,
                phase,
            } => {
                let [p0, p1] = phase.unwrap_or([0.0, 0.0]);
                let w = std::f64::consts::TAU / wavelength;
                let (sx, cx) = (w * x + p0).sin_cos();
                let (sy, cy) = (w * y + p1).sin_cos();
                (amplitude * sx * cy, amplitude * w * cx * cy, -amplitude * w * sx * sy)
            }
        }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.height_gradient(x, y).0
    }

    /// Unit upward surface normal.
    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let (_, gx, gy) = self.height_gradient(x, y);
        Vector3::new(-gx, -gy, 1.0).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Physics substep, s.
    pub dt: f64,
    /// Baumgarte natural frequency, rad/s.
    pub baumgarte_omega: f64,
    /// Contact directions with singular value below this fraction of the
    /// largest are treated as dependent: they are not enforced and carry
    /// no force.
    pub rank_tolerance: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            baumgarte_omega: 50.0,
            rank_tolerance: 1e-2,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::Config(format!("simulation dt must lie in (0, 1e-3], got {}", self.dt)));
        }
        if !(self.baumgarte_omega >= 0.0) {
            return Err(Error::Config("baumgarte_omega must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.rank_tolerance) {
            return Err(Error::Config("rank_tolerance must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub contact: [bool; 2],
    pub time: f64,
}

impl SimState {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Self {
        Self {
            q,
            qd,
            contact: [false; 2],
            time: 0.0,
        }
    }
}

/// World force applied at a point fixed on a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalForce {
    pub body: usize,
    /// Application point in body coordinates.
    pub point: Vector3<f64>,
    pub force: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Contact forces in each wheel's contact frame (zero when lifted).
    pub forces: [Vector3<f64>; 2],
    /// The same forces in world coordinates.
    pub world_forces: [Vector3<f64>; 2],
    pub contact: [bool; 2],
    pub normals: [Vector3<f64>; 2],
    /// Signed wheel clearance along the normal; negative is penetration.
    pub gaps: [f64; 2],
    pub qdd: DVector<f64>,
    pub touchdown: [bool; 2],
    pub released: [bool; 2],
}

/// The plant.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub robot: Robot,
    /// `None` disables ground contact entirely.
    pub terrain: Option<Terrain>,
    pub settings: SimSettings,
    pub gravity: f64,
}

struct WheelContact {
    frames: ContactFrames,
    normal: Vector3<f64>,
    gap: f64,
}

impl Simulator {
    pub fn new(robot: Robot, terrain: Option<Terrain>, settings: SimSettings) -> Result<Self> {
        settings.validate()?;
        if let Some(t) = &terrain {
            t.validate()?;
        }
        Ok(Self {
            robot,
            terrain,
            settings,
            gravity: crate::GRAVITY,
        })
    }

    fn wheel_contact(&self, kin: &crate::dynamics::Kinematics, side: WheelSide, terrain: &Terrain) -> Result<WheelContact> {
        let center = self.robot.wheel_center(kin, side)?;
        let axis = self.robot.wheel_axis(kin, side)?;
        let normal = terrain.normal(center.x, center.y);
        let frames = contact_frames_from(&axis, &center, &normal, self.robot.params.wheel_radius)?;
        let p = frames.contact_point;
        let gap = (p.z - terrain.height(p.x, p.y)) * normal.z;
        Ok(WheelContact { frames, normal, gap })
    }

    /// Terrain normal under each wheel centre, `+z` without terrain.
    pub fn normals(&self, q: &DVector<f64>) -> Result<[Vector3<f64>; 2]> {
        let Some(terrain) = &self.terrain else {
            return Ok([Vector3::z(); 2]);
        };
        let kin = self.robot.tree.kinematics(q, &DVector::zeros(NUM_DOF))?;
        let mut out = [Vector3::z(); 2];
        for side in WheelSide::BOTH {
            let c = self.robot.wheel_center(&kin, side)?;
            out[side.index()] = terrain.normal(c.x, c.y);
        }
        Ok(out)
    }

    /// Signed clearance of each wheel along the terrain normal (`+∞` without terrain).
    pub fn gaps(&self, q: &DVector<f64>) -> Result<[f64; 2]> {
        let Some(terrain) = &self.terrain else {
            return Ok([f64::INFINITY; 2]);
        };
        let kin = self.robot.tree.kinematics(q, &DVector::zeros(NUM_DOF))?;
        let mut out = [0.0; 2];
        for side in WheelSide::BOTH {
            out[side.index()] = self.wheel_contact(&kin, side, terrain)?.gap;
        }
        Ok(out)
    }

    /// Removes the contact-violating part of `state.qd` for the wheels in contact.
    pub fn project_velocity(&self, state: &mut SimState) -> Result<()> {
        let normals = self.normals(&state.q)?;
        state.qd = self.impact(&state.q, &state.qd, state.contact, &normals)?;
        Ok(())
    }

    /// Generalized force of the external loads.
    fn external_generalized(&self, kin: &crate::dynamics::Kinematics, ext: &[ExternalForce]) -> Result<DVector<f64>> {
        let mut f = DVector::zeros(NUM_DOF);
        for e in ext {
            let j = kin.point_jacobian(e.body, &e.point)?;
            f += j.rows(3, 3).transpose() * e.force;
        }
        Ok(f)
    }

    /// Projects `qd` so the contact-point velocities of `active` vanish,
    /// in the metric of `M` (a perfectly inelastic touchdown).
    fn impact(&self, q: &DVector<f64>, qd: &DVector<f64>, active: [bool; 2], normals: &[Vector3<f64>; 2]) -> Result<DVector<f64>> {
        let kin = self.robot.tree.kinematics(q, qd)?;
        let mut rows = Vec::new();
        for side in WheelSide::BOTH {
            if active[side.index()] {
                rows.push(self.robot.rolling_constraint(&kin, qd, side, &normals[side.index()])?);
            }
        }
        if rows.is_empty() {
            return Ok(qd.clone());
        }
        let stacked = RollingConstraint::stack(&rows);
        let (keep, _) = stacked.row_basis(self.settings.rank_tolerance);
        let j = keep.transpose() * &stacked.jacobian;
        let chol = self.mass_cholesky(q)?;
        let minv_jt = chol.solve(&j.transpose());
        let lambda = (&j * &minv_jt).cholesky().map(|c| c.solve(&(&j * qd))).ok_or_else(|| Error::Numerical {
            routine: "impact",
            detail: "contact Gram matrix not positive definite".into(),
            residual: 0.0,
        })?;
        Ok(qd - minv_jt * lambda)
    }

    fn mass_cholesky(&self, q: &DVector<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.robot.tree.mass_matrix(q)?.cholesky().ok_or_else(|| Error::Numerical {
            routine: "Simulator",
            detail: "mass matrix not positive definite".into(),
            residual: 0.0,
        })
    }

    /// Advances `state` by one substep under actuator torques `tau`.
    pub fn step(&self, state: &mut SimState, tau: &[f64; NUM_ACTUATED], ext: &[ExternalForce]) -> Result<StepReport> {
        let dt = self.settings.dt;
        let mut touchdown = [false; 2];
        let mut released = [false; 2];
        let mut normals = [Vector3::z(); 2];
        let mut gaps = [f64::INFINITY; 2];
        if let Some(terrain) = &self.terrain {
            let kin = self.robot.tree.kinematics(&state.q, &state.qd)?;
            for side in WheelSide::BOTH {
                let k = side.index();
                let wc = self.wheel_contact(&kin, side, terrain)?;
                normals[k] = wc.normal;
                gaps[k] = wc.gap;
                if !state.contact[k] && wc.gap <= 0.0 {
                    state.contact[k] = true;
                    touchdown[k] = true;
                }
            }
            if touchdown.iter().any(|&t| t) {
                // only approaching wheels receive an impact
                state.qd = self.impact(&state.q, &state.qd, state.contact, &normals)?;
            }
        } else {
            state.contact = [false; 2];
        }

        let kin = self.robot.tree.kinematics(&state.q, &state.qd)?;
        let dynamics = self.robot.tree.compute_jsim_and_bias(&state.q, &state.qd, self.gravity)?;
        let mut rhs_dyn = -&dynamics.bias + self.external_generalized(&kin, ext)?;
        for i in 0..NUM_ACTUATED {
            rhs_dyn[NUM_DOF - NUM_ACTUATED + i] += tau[i];
        }

        let w = self.settings.baumgarte_omega;
        let chol = dynamics.mass_matrix.clone().cholesky().ok_or_else(|| Error::Numerical {
            routine: "Simulator::step",
            detail: "mass matrix not positive definite".into(),
            residual: 0.0,
        })?;
        let qdd_free = chol.solve(&rhs_dyn);
        let (qdd, forces) = loop {
            let active: Vec<WheelSide> = WheelSide::BOTH.into_iter().filter(|s| state.contact[s.index()]).collect();
            if active.is_empty() {
                break (qdd_free.clone(), [Vector3::zeros(); 2]);
            }
            let mut rows = Vec::with_capacity(active.len());
            let mut b = DVector::zeros(3 * active.len());
            for (r, side) in active.iter().enumerate() {
                let k = side.index();
                let c = self.robot.rolling_constraint(&kin, &state.qd, *side, &normals[k])?;
                let mut stab = c.velocity * (2.0 * w);
                stab.z += w * w * gaps[k];
                b.rows_mut(3 * r, 3).copy_from(&(c.rolling_term - c.bias - stab));
                rows.push(c);
            }
            // the two lateral rows are dependent on a symmetric stance and
            // nearly so when the wheels split; only the well-conditioned
            // directions are enforced
            let stacked = RollingConstraint::stack(&rows);
            let (keep, _) = stacked.row_basis(self.settings.rank_tolerance);
            let j = keep.transpose() * &stacked.jacobian;
            // M q̈ = rhs + Jᵀ λ and J q̈ = b give (J M⁻¹ Jᵀ) λ = b − J M⁻¹ rhs
            let minv_jt = chol.solve(&j.transpose());
            let r = keep.transpose() * &b - &j * &qdd_free;
            let lambda = (&j * &minv_jt)
                .cholesky()
                .map(|c| c.solve(&r))
                .filter(|l| l.iter().all(|v| v.is_finite()));
            let Some(lambda) = lambda else {
                // loss of contact rank: drop the wheel with the larger clearance
                let drop = active
                    .iter()
                    .max_by(|a, b| gaps[a.index()].total_cmp(&gaps[b.index()]))
                    .copied()
                    .unwrap();
                state.contact[drop.index()] = false;
                released[drop.index()] = true;
                continue;
            };
            let f_all = &keep * &lambda;
            let mut forces = [Vector3::zeros(); 2];
            let mut worst: Option<(WheelSide, f64)> = None;
            for (r, side) in active.iter().enumerate() {
                let f = Vector3::new(f_all[3 * r], f_all[3 * r + 1], f_all[3 * r + 2]);
                forces[side.index()] = f;
                if f.z < 0.0 && worst.is_none_or(|(_, v)| f.z < v) {
                    worst = Some((*side, f.z));
                }
            }
            if let Some((side, _)) = worst {
                state.contact[side.index()] = false;
                released[side.index()] = true;
                continue;
            }
            break (&qdd_free + minv_jt * lambda, forces);
        };

        let mut world_forces = [Vector3::zeros(); 2];
        for side in WheelSide::BOTH {
            let k = side.index();
            if state.contact[k] {
                let frames = self.wheel_contact(&kin, side, self.terrain.as_ref().unwrap())?.frames;
                world_forces[k] = frames.contact * forces[k];
            }
        }

        state.qd += &qdd * dt;
        state.q += &state.qd * dt;
        state.time += dt;
        Ok(StepReport {
            forces,
            world_forces,
            contact: state.contact,
            normals,
            gaps,
            qdd,
            touchdown,
            released,
        })
    }

    /// `‖J_c q̇‖∞` over the wheels in contact.
    pub fn rolling_residual(&self, state: &SimState) -> Result<f64> {
        let kin = self.robot.tree.kinematics(&state.q, &state.qd)?;
        let normals = self.normals(&state.q)?;
        let mut r: f64 = 0.0;
        for side in WheelSide::BOTH {
            if state.contact[side.index()] {
                let c = self.robot.rolling_constraint(&kin, &state.qd, side, &normals[side.index()])?;
                r = r.max(c.velocity.amax());
            }
        }
        Ok(r)
    }
}
