//! The wheeled-bipedal robot: preset parameters, kinematic tree, wheel
//! contact frames and rolling constraints.
//!
//! Generalized coordinates are
//! `q = [x, y, z, yaw, pitch, roll, hip_l, knee_l, wheel_l, hip_r, knee_r, wheel_r]`.
//! The base frame sits at the midpoint of the hip axes with x forward,
//! y left and z up. The pelvis centre of mass trails the hip axis by the
//! pelvis link length. All leg joints rotate about the body y axis, so a
//! positive absolute pitch swings a link's distal end backwards.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Body, Joint, Kinematics, RigidBodyTree};
use crate::error::{Error, Result};
use crate::spatial::{SpatialInertia, SpatialTransform};

pub const NUM_DOF: usize = 12;
pub const NUM_ACTUATED: usize = 6;
pub const BASE_DOF: usize = 6;

pub const PELVIS: usize = 0;

/// Actuated-joint offsets into `q` per leg: hip, knee, wheel.
pub const LEFT_JOINTS: [usize; 3] = [6, 7, 8];
pub const RIGHT_JOINTS: [usize; 3] = [9, 10, 11];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WheelSide {
    Left,
    Right,
}

impl WheelSide {
    pub const BOTH: [WheelSide; 2] = [WheelSide::Left, WheelSide::Right];

    pub fn index(self) -> usize {
        match self {
            WheelSide::Left => 0,
            WheelSide::Right => 1,
        }
    }

    fn sign(self) -> f64 {
        match self {
            WheelSide::Left => 1.0,
            WheelSide::Right => -1.0,
        }
    }

    pub fn joints(self) -> [usize; 3] {
        match self {
            WheelSide::Left => LEFT_JOINTS,
            WheelSide::Right => RIGHT_JOINTS,
        }
    }
}

/// Diagonal rotational inertia about a body's centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagInertia {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

impl DiagInertia {
    pub const fn new(ixx: f64, iyy: f64, izz: f64) -> Self {
        Self { ixx, iyy, izz }
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.ixx, self.iyy, self.izz))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    pub pelvis_length: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub wheel_radius: f64,
    /// Lateral distance between the two wheels.
    pub track_width: f64,
    pub pelvis_mass: f64,
    /// Mass of one thigh; both thighs together form the thigh-side mass.
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub wheel_mass: f64,
    pub pelvis_inertia: DiagInertia,
    pub thigh_inertia: DiagInertia,
    pub shank_inertia: DiagInertia,
    pub wheel_inertia: DiagInertia,
    pub joint_torque_limit: f64,
    pub wheel_torque_limit: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self::preset()
    }
}

impl RobotParams {
    /// The reference robot: 3:5:4 pelvis/thigh/shank links, 5.8 kg base,
    /// 4.2 kg of thigh mass and 13.1 kg in total.
    pub fn preset() -> Self {
        Self {
            pelvis_length: 0.15,
            thigh_length: 0.25,
            shank_length: 0.20,
            wheel_radius: 0.1,
            track_width: 0.4,
            pelvis_mass: 5.8,
            thigh_mass: 2.1,
            shank_mass: 0.55,
            wheel_mass: 1.0,
            pelvis_inertia: DiagInertia::new(0.048, 0.024, 0.063),
            thigh_inertia: DiagInertia::new(0.02, 0.02, 0.002),
            shank_inertia: DiagInertia::new(0.0018, 0.0018, 0.0002),
            wheel_inertia: DiagInertia::new(0.0025, 0.005, 0.0025),
            joint_torque_limit: 35.0,
            wheel_torque_limit: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("pelvis_length", self.pelvis_length),
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("wheel_radius", self.wheel_radius),
            ("track_width", self.track_width),
            ("pelvis_mass", self.pelvis_mass),
            ("thigh_mass", self.thigh_mass),
            ("shank_mass", self.shank_mass),
            ("wheel_mass", self.wheel_mass),
            ("joint_torque_limit", self.joint_torque_limit),
            ("wheel_torque_limit", self.wheel_torque_limit),
        ];
        for (name, v) in scalars {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, i) in [
            ("pelvis_inertia", self.pelvis_inertia),
            ("thigh_inertia", self.thigh_inertia),
            ("shank_inertia", self.shank_inertia),
            ("wheel_inertia", self.wheel_inertia),
        ] {
            if !(i.ixx > 0.0 && i.iyy > 0.0 && i.izz > 0.0) {
                return Err(Error::Input(format!("{name} entries must be positive")));
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.pelvis_mass + 2.0 * (self.thigh_mass + self.shank_mass + self.wheel_mass)
    }

    /// Mass of everything except the wheels.
    pub fn upper_mass(&self) -> f64 {
        self.total_mass() - self.wheel_masses()
    }

    pub fn wheel_masses(&self) -> f64 {
        2.0 * self.wheel_mass
    }

    /// Thigh-side mass `m` of the planar design model (both thighs).
    pub fn thigh_side_mass(&self) -> f64 {
        2.0 * self.thigh_mass
    }

    /// Actuator limits in actuated-joint order.
    pub fn torque_limits(&self) -> [f64; NUM_ACTUATED] {
        let j = self.joint_torque_limit;
        let w = self.wheel_torque_limit;
        [j, j, w, j, j, w]
    }
}

#[derive(Debug, Clone)]
pub struct Robot {
    pub params: RobotParams,
    pub tree: RigidBodyTree,
    /// Body indices of `[thigh, shank, wheel]` per side.
    legs: [[usize; 3]; 2],
}

impl Robot {
    pub fn new(params: RobotParams) -> Result<Self> {
        let tree = build_robot(&params)?;
        let legs = [[1, 2, 3], [4, 5, 6]];
        Ok(Self { params, tree, legs })
    }

    pub fn preset() -> Self {
        Self::new(RobotParams::preset()).expect("preset parameters are valid")
    }

    pub fn wheel_body(&self, side: WheelSide) -> usize {
        self.legs[side.index()][2]
    }

    pub fn leg_bodies(&self, side: WheelSide) -> [usize; 3] {
        self.legs[side.index()]
    }

    /// Every body except the wheels.
    pub fn upper_bodies(&self) -> Vec<usize> {
        vec![PELVIS, self.legs[0][0], self.legs[0][1], self.legs[1][0], self.legs[1][1]]
    }

    pub fn all_bodies(&self) -> Vec<usize> {
        (0..self.tree.num_bodies()).collect()
    }

    pub fn subset(&self, s: BodySubset) -> Vec<usize> {
        match s {
            BodySubset::Whole => self.all_bodies(),
            BodySubset::Upper => self.upper_bodies(),
        }
    }

    /// Planar stance with the given absolute link pitches for both legs.
    ///
    /// The base is placed so that both wheels touch flat ground at z = 0
    /// and the wheel midpoint sits at the world origin.
    pub fn stance(&self, pelvis_pitch: f64, thigh_pitch: f64, shank_pitch: f64) -> DVector<f64> {
        let p = &self.params;
        let mut q = DVector::zeros(NUM_DOF);
        let hip_height = p.thigh_length * thigh_pitch.cos() + p.shank_length * shank_pitch.cos();
        let wheel_ahead = -p.thigh_length * thigh_pitch.sin() - p.shank_length * shank_pitch.sin();
        q[0] = -wheel_ahead;
        q[2] = p.wheel_radius + hip_height;
        q[4] = pelvis_pitch;
        for side in WheelSide::BOTH {
            let [h, k, _] = side.joints();
            q[h] = thigh_pitch - pelvis_pitch;
            q[k] = shank_pitch - thigh_pitch;
        }
        q
    }

    /// Stance at hip height `hip_height` above the wheel centres whose
    /// upper-body CoM sits directly above the wheel axle, found by Newton
    /// iteration on the two leg pitches starting from `guess`.
    pub fn balanced_stance(
        &self,
        hip_height: f64,
        pelvis_pitch: f64,
        guess: (f64, f64),
    ) -> Result<DVector<f64>> {
        self.offset_stance(hip_height, pelvis_pitch, 0.0, guess)
    }

    /// Like [`Robot::balanced_stance`] with the upper-body CoM `offset`
    /// ahead of the wheel axle.
    pub fn offset_stance(
        &self,
        hip_height: f64,
        pelvis_pitch: f64,
        offset: f64,
        guess: (f64, f64),
    ) -> Result<DVector<f64>> {
        let (lh, lk) = (self.params.thigh_length, self.params.shank_length);
        let upper = self.upper_bodies();
        let residual = |th: f64, tk: f64| -> Result<nalgebra::Vector2<f64>> {
            let q = self.stance(pelvis_pitch, th, tk);
            let kin = self.tree.kinematics(&q, &DVector::zeros(NUM_DOF))?;
            let com = kin.com_state(&upper)?.position;
            Ok(nalgebra::Vector2::new(lh * th.cos() + lk * tk.cos() - hip_height, com.x - offset))
        };
        let (mut th, mut tk) = guess;
        let mut r = residual(th, tk)?;
        for _ in 0..50 {
            if r.amax() < 1e-12 {
                return Ok(self.stance(pelvis_pitch, th, tk));
            }
            let h = 1e-7;
            let c0 = (residual(th + h, tk)? - residual(th - h, tk)?) / (2.0 * h);
            let c1 = (residual(th, tk + h)? - residual(th, tk - h)?) / (2.0 * h);
            let j = nalgebra::Matrix2::from_columns(&[c0, c1]);
            let step = j.lu().solve(&(-r)).ok_or_else(|| Error::Numerical {
                routine: "balanced_stance",
                detail: "singular leg Jacobian".into(),
                residual: r.amax(),
            })?;
            th += step[0];
            tk += step[1];
            r = residual(th, tk)?;
        }
        if r.amax() < 1e-9 {
            return Ok(self.stance(pelvis_pitch, th, tk));
        }
        Err(Error::InfeasibleHeight {
            z_d: hip_height,
            reason: format!("no balanced stance found (residual {:.3e})", r.amax()),
        })
    }

    /// Wheel centre position in world coordinates.
    pub fn wheel_center(&self, kin: &Kinematics, side: WheelSide) -> Result<Vector3<f64>> {
        kin.point_position(self.wheel_body(side), &Vector3::zeros())
    }

    pub fn wheel_axis(&self, kin: &Kinematics, side: WheelSide) -> Result<Vector3<f64>> {
        Ok(kin.body_pose(self.wheel_body(side))?.orientation() * Vector3::y())
    }

    /// Wheel and contact frames for a ground plane with unit normal `normal`.
    pub fn contact_frames(
        &self,
        kin: &Kinematics,
        side: WheelSide,
        normal: &Vector3<f64>,
    ) -> Result<ContactFrames> {
        let axis = self.wheel_axis(kin, side)?;
        let center = self.wheel_center(kin, side)?;
        contact_frames_from(&axis, &center, normal, self.params.wheel_radius)
    }

    /// Rolling constraint rows of one wheel, expressed in its contact frame.
    pub fn rolling_constraint(
        &self,
        kin: &Kinematics,
        qd: &DVector<f64>,
        side: WheelSide,
        normal: &Vector3<f64>,
    ) -> Result<WheelConstraint> {
        let frames = self.contact_frames(kin, side, normal)?;
        let b = self.wheel_body(side);
        let pose = kin.body_pose(b)?;
        let local = pose.transform_point(&frames.contact_point);
        let jac = kin.point_jacobian(b, &local)?;
        let rc = frames.contact.transpose();
        let lin = rc * jac.rows(3, 3);
        let jacobian = DMatrix::from_iterator(3, lin.ncols(), lin.iter().copied());
        let velocity = &lin * qd;
        let (_, mat_bias) = kin.point_bias_acceleration(b, &local)?;
        let (omega, _) = kin.point_velocity(b, &local)?;

        // motion of the contact location relative to the wheel material
        let r_w = self.params.wheel_radius;
        let axis = frames.wheel.column(1).into_owned();
        let x_w = frames.wheel.column(0).into_owned();
        let z_w = frames.wheel.column(2).into_owned();
        let axis_rate = omega.cross(&axis);
        let cross = axis.cross(normal);
        let norm = cross.norm();
        let xw_rate = {
            let d = axis_rate.cross(normal);
            (d - x_w * x_w.dot(&d)) / norm
        };
        let zw_rate = xw_rate.cross(&axis) + x_w.cross(&axis_rate);
        let r_c = -z_w * r_w;
        let rc_rate = -zw_rate * r_w;
        let u_rel = rc_rate - omega.cross(&r_c);
        let rolling_term = rc * (-omega.cross(&u_rel));
        Ok(WheelConstraint {
            side,
            frames,
            jacobian,
            bias: rc * mat_bias,
            rolling_term,
            velocity,
        })
    }

    /// CoM position and velocity of a body subset.
    pub fn com_position_velocity(
        &self,
        kin: &Kinematics,
        subset: BodySubset,
    ) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let c = kin.com_state(&self.subset(subset))?;
        Ok((c.position, c.velocity))
    }

    /// Row Jacobian of the subset CoM height together with its `J̇q̇` term.
    pub fn com_height_jacobian(
        &self,
        kin: &Kinematics,
        subset: BodySubset,
    ) -> Result<(DVector<f64>, f64)> {
        let bodies = self.subset(subset);
        let (_, j) = kin.com_jacobian(&bodies)?;
        let st = kin.com_state(&bodies)?;
        Ok((j.row(2).transpose(), st.bias_acceleration.z))
    }

    /// Mirrors a configuration about the sagittal plane.
    pub fn mirror(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut m = q.clone();
        m[1] = -q[1];
        m[3] = -q[3];
        m[5] = -q[5];
        for k in 0..3 {
            m[LEFT_JOINTS[k]] = q[RIGHT_JOINTS[k]];
            m[RIGHT_JOINTS[k]] = q[LEFT_JOINTS[k]];
        }
        m
    }

    /// Selection matrix mapping actuator torques into generalized forces.
    pub fn selection(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(NUM_DOF, NUM_ACTUATED);
        for i in 0..NUM_ACTUATED {
            s[(BASE_DOF + i, i)] = 1.0;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodySubset {
    Whole,
    Upper,
}

/// Builds the twelve-DoF kinematic tree.
pub fn build_robot(p: &RobotParams) -> Result<RigidBodyTree> {
    p.validate()?;
    let y = Vector3::y();
    let mut bodies = vec![Body {
        name: "pelvis".into(),
        parent: None,
        joint: Joint::Floating,
        placement: SpatialTransform::identity(),
        inertia: SpatialInertia::new(
            p.pelvis_mass,
            Vector3::new(-p.pelvis_length, 0.0, 0.0),
            p.pelvis_inertia.matrix(),
        ),
    }];
    for (label, side) in [("l", WheelSide::Left), ("r", WheelSide::Right)] {
        let base = bodies.len();
        bodies.push(Body {
            name: format!("thigh_{label}"),
            parent: Some(PELVIS),
            joint: Joint::Revolute { axis: y },
            placement: SpatialTransform::translation(Vector3::new(0.0, side.sign() * p.track_width / 2.0, 0.0)),
            inertia: SpatialInertia::new(
                p.thigh_mass,
                Vector3::new(0.0, 0.0, -p.thigh_length / 2.0),
                p.thigh_inertia.matrix(),
            ),
        });
        bodies.push(Body {
            name: format!("shank_{label}"),
            parent: Some(base),
            joint: Joint::Revolute { axis: y },
            placement: SpatialTransform::translation(Vector3::new(0.0, 0.0, -p.thigh_length)),
            inertia: SpatialInertia::new(
                p.shank_mass,
                Vector3::new(0.0, 0.0, -p.shank_length / 2.0),
                p.shank_inertia.matrix(),
            ),
        });
        bodies.push(Body {
            name: format!("wheel_{label}"),
            parent: Some(base + 1),
            joint: Joint::Revolute { axis: y },
            placement: SpatialTransform::translation(Vector3::new(0.0, 0.0, -p.shank_length)),
            inertia: SpatialInertia::new(p.wheel_mass, Vector3::zeros(), p.wheel_inertia.matrix()),
        });
    }
    RigidBodyTree::new(bodies)
}

/// Wheel frame `{W}` and contact frame `{C}` of one wheel. Both are stored
/// as rotation matrices whose columns are the frame axes in world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactFrames {
    pub wheel_origin: Vector3<f64>,
    pub wheel: Matrix3<f64>,
    pub contact_point: Vector3<f64>,
    pub contact: Matrix3<f64>,
}

pub fn contact_frames_from(
    axis: &Vector3<f64>,
    center: &Vector3<f64>,
    normal: &Vector3<f64>,
    radius: f64,
) -> Result<ContactFrames> {
    let fwd = axis.cross(normal);
    let n = fwd.norm();
    if n < 1e-9 {
        return Err(Error::Numerical {
            routine: "contact_frames",
            detail: "wheel axis parallel to the ground normal".into(),
            residual: n,
        });
    }
    let x_w = fwd / n;
    let z_w = x_w.cross(axis);
    let wheel = Matrix3::from_columns(&[x_w, *axis, z_w]);
    let contact_point = center - z_w * radius;
    let y_c = normal.cross(&x_w);
    let contact = Matrix3::from_columns(&[x_w, y_c, *normal]);
    Ok(ContactFrames {
        wheel_origin: *center,
        wheel,
        contact_point,
        contact,
    })
}

/// Three rolling rows of one wheel in its contact frame:
/// `jacobian · q̈ + bias = rolling_term`.
#[derive(Debug, Clone)]
pub struct WheelConstraint {
    pub side: WheelSide,
    pub frames: ContactFrames,
    /// 3×n Jacobian of the wheel material point at the contact location.
    pub jacobian: DMatrix<f64>,
    /// `J̇ q̇` of that material point.
    pub bias: Vector3<f64>,
    /// Acceleration of the material point implied by rolling without slip.
    pub rolling_term: Vector3<f64>,
    /// Current contact-point velocity `J q̇`.
    pub velocity: Vector3<f64>,
}

/// Stacked constraint `J_c q̈ + J̇_c q̇ = C_r` for a set of wheels.
#[derive(Debug, Clone)]
pub struct RollingConstraint {
    pub jacobian: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub rolling_term: DVector<f64>,
}

impl RollingConstraint {
    pub fn stack(rows: &[WheelConstraint]) -> Self {
        let n = rows.first().map(|r| r.jacobian.ncols()).unwrap_or(NUM_DOF);
        let mut jacobian = DMatrix::zeros(3 * rows.len(), n);
        let mut bias = DVector::zeros(3 * rows.len());
        let mut rolling_term = DVector::zeros(3 * rows.len());
        for (k, r) in rows.iter().enumerate() {
            jacobian.rows_mut(3 * k, 3).copy_from(&r.jacobian);
            bias.rows_mut(3 * k, 3).copy_from(&r.bias);
            rolling_term.rows_mut(3 * k, 3).copy_from(&r.rolling_term);
        }
        Self {
            jacobian,
            bias,
            rolling_term,
        }
    }

    pub fn rows(&self) -> usize {
        self.jacobian.nrows()
    }

    /// Splits the row space into an orthonormal basis of the directions
    /// whose singular value is at least `rel_tol·σ_max` and a basis of the
    /// remaining, numerically dependent ones. With two wheels on a
    /// symmetric stance the lateral rows coincide and the second basis
    /// holds their difference.
    pub fn row_basis(&self, rel_tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.rows();
        if m == 0 {
            return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
        }
        let svd = self.jacobian.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.max();
        let mut keep = Vec::new();
        let mut drop = Vec::new();
        for i in 0..m {
            let sv = if i < svd.singular_values.len() { svd.singular_values[i] } else { 0.0 };
            if sv > rel_tol * smax && sv > 0.0 {
                keep.push(u.column(i).into_owned());
            } else {
                drop.push(u.column(i).into_owned());
            }
        }
        let stack = |cols: &[DVector<f64>]| {
            if cols.is_empty() {
                DMatrix::zeros(m, 0)
            } else {
                DMatrix::from_columns(cols)
            }
        };
        (stack(&keep), stack(&drop))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_mass_and_ratios() {
        let p = RobotParams::preset();
        assert!((p.total_mass() - 13.1).abs() < 1e-12);
        let r = Robot::preset();
        assert!((r.tree.total_mass() - 13.1).abs() < 1e-12);
        assert_eq!(r.tree.dof(), NUM_DOF);
        assert!((p.pelvis_length / p.thigh_length - 3.0 / 5.0).abs() < 1e-9);
        assert!((p.shank_length / p.thigh_length - 4.0 / 5.0).abs() < 1e-9);
        assert!((p.thigh_side_mass() - 4.2).abs() < 1e-12);
        assert!((p.upper_mass() - 11.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_params() {
        let mut p = RobotParams::preset();
        p.wheel_radius = 0.0;
        assert!(build_robot(&p).is_err());
        let mut p = RobotParams::preset();
        p.shank_mass = -1.0;
        assert!(Robot::new(p).is_err());
    }

    #[test]
    fn zero_angles_put_wheels_level() {
        let r = Robot::preset();
        let q = DVector::zeros(NUM_DOF);
        let kin = r.tree.kinematics(&q, &DVector::zeros(NUM_DOF)).unwrap();
        let l = r.wheel_center(&kin, WheelSide::Left).unwrap();
        let rr = r.wheel_center(&kin, WheelSide::Right).unwrap();
        assert!((l.z - rr.z).abs() < 1e-15);
        assert!((l.z + 0.45).abs() < 1e-12);
        assert!((l.y - 0.2).abs() < 1e-15 && (rr.y + 0.2).abs() < 1e-15);
    }

    #[test]
    fn stance_touches_ground() {
        let r = Robot::preset();
        let q = r.stance(0.4, 0.6, -0.5);
        let kin = r.tree.kinematics(&q, &DVector::zeros(NUM_DOF)).unwrap();
        for side in WheelSide::BOTH {
            let c = r.wheel_center(&kin, side).unwrap();
            assert!((c.z - 0.1).abs() < 1e-12);
            assert!(c.x.abs() < 1e-12);
        }
    }

    #[test]
    fn flat_frames() {
        let f = contact_frames_from(&Vector3::y(), &Vector3::new(1.0, 2.0, 0.1), &Vector3::z(), 0.1).unwrap();
        assert!((f.wheel - Matrix3::identity()).norm() < 1e-15);
        assert!((f.contact - Matrix3::identity()).norm() < 1e-15);
        assert!((f.contact_point - Vector3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn at_rest_rolling_term_vanishes() {
        let r = Robot::preset();
        let q = r.stance(0.3, 0.5, -0.4);
        let qd = DVector::zeros(NUM_DOF);
        let kin = r.tree.kinematics(&q, &qd).unwrap();
        for side in WheelSide::BOTH {
            let c = r.rolling_constraint(&kin, &qd, side, &Vector3::z()).unwrap();
            assert!(c.rolling_term.norm() < 1e-15);
            assert!(c.bias.norm() < 1e-15);
        }
    }

    #[test]
    fn selection_maps_actuators() {
        let s = Robot::preset().selection();
        assert_eq!(s[(6, 0)], 1.0);
        assert_eq!(s[(11, 5)], 1.0);
        assert_eq!(s.column(0).sum(), 1.0);
    }
}
