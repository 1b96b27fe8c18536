//! 6D spatial algebra in Featherstone's convention.
//!
//! Spatial vectors are stored as `[angular; linear]`. A motion vector is a
//! twist `[ω; v]`, a force vector is a wrench `[n; f]`. Plücker transforms
//! map motion vectors contravariantly and force vectors covariantly.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialVector {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

impl SpatialVector {
    pub const fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector6(v: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_vector6(&self) -> Vector6<f64> {
        Vector6::new(
            self.angular.x,
            self.angular.y,
            self.angular.z,
            self.linear.x,
            self.linear.y,
            self.linear.z,
        )
    }

    /// Motion cross product `self ×ₘ m`.
    pub fn cross_motion(&self, m: &SpatialVector) -> SpatialVector {
        SpatialVector::new(
            self.angular.cross(&m.angular),
            self.angular.cross(&m.linear) + self.linear.cross(&m.angular),
        )
    }

    /// Force cross product `self ×* f`.
    pub fn cross_force(&self, f: &SpatialVector) -> SpatialVector {
        SpatialVector::new(
            self.angular.cross(&f.angular) + self.linear.cross(&f.linear),
            self.angular.cross(&f.linear),
        )
    }

    /// Pairing of a motion vector with a force vector (power).
    pub fn dot(&self, f: &SpatialVector) -> f64 {
        self.angular.dot(&f.angular) + self.linear.dot(&f.linear)
    }
}

impl Add for SpatialVector {
    type Output = SpatialVector;
    fn add(self, o: SpatialVector) -> SpatialVector {
        SpatialVector::new(self.angular + o.angular, self.linear + o.linear)
    }
}

impl AddAssign for SpatialVector {
    fn add_assign(&mut self, o: SpatialVector) {
        self.angular += o.angular;
        self.linear += o.linear;
    }
}

impl Sub for SpatialVector {
    type Output = SpatialVector;
    fn sub(self, o: SpatialVector) -> SpatialVector {
        SpatialVector::new(self.angular - o.angular, self.linear - o.linear)
    }
}

impl Neg for SpatialVector {
    type Output = SpatialVector;
    fn neg(self) -> SpatialVector {
        SpatialVector::new(-self.angular, -self.linear)
    }
}

impl Mul<f64> for SpatialVector {
    type Output = SpatialVector;
    fn mul(self, s: f64) -> SpatialVector {
        SpatialVector::new(self.angular * s, self.linear * s)
    }
}

/// Plücker transform from frame A to frame B.
///
/// `rotation` maps A coordinates into B coordinates and `translation` is the
/// position of B's origin expressed in A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SpatialTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SpatialTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn translation(r: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), r)
    }

    /// Coordinate transform for a frame rotated by `angle` about `axis`
    /// relative to the source frame.
    pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::new(axis_angle(axis, angle).transpose(), Vector3::zeros())
    }

    /// Transform from a parent frame to a child frame whose origin sits at
    /// `position` and whose axes are the parent axes rotated by `orientation`.
    pub fn from_pose(orientation: &Matrix3<f64>, position: &Vector3<f64>) -> Self {
        Self::new(orientation.transpose(), *position)
    }

    /// Child-frame axes expressed in the parent frame (inverse of `rotation`).
    pub fn orientation(&self) -> Matrix3<f64> {
        self.rotation.transpose()
    }

    pub fn apply_motion(&self, v: &SpatialVector) -> SpatialVector {
        let w = self.rotation * v.angular;
        let lin = self.rotation * (v.linear - self.translation.cross(&v.angular));
        SpatialVector::new(w, lin)
    }

    pub fn apply_force(&self, f: &SpatialVector) -> SpatialVector {
        let n = self.rotation * (f.angular - self.translation.cross(&f.linear));
        let lin = self.rotation * f.linear;
        SpatialVector::new(n, lin)
    }

    /// Maps a motion vector from B back to A.
    pub fn inverse_apply_motion(&self, v: &SpatialVector) -> SpatialVector {
        let w = self.rotation.transpose() * v.angular;
        let lin = self.rotation.transpose() * v.linear + self.translation.cross(&w);
        SpatialVector::new(w, lin)
    }

    /// Applies the transpose `Xᵀ` to a force expressed in B, giving the same
    /// force in A.
    pub fn transpose_apply_force(&self, f: &SpatialVector) -> SpatialVector {
        let lin = self.rotation.transpose() * f.linear;
        let n = self.rotation.transpose() * f.angular + self.translation.cross(&lin);
        SpatialVector::new(n, lin)
    }

    /// `self ∘ first`: applies `first` (A→B) then `self` (B→C).
    pub fn compose(&self, first: &SpatialTransform) -> SpatialTransform {
        SpatialTransform::new(
            self.rotation * first.rotation,
            first.translation + first.rotation.transpose() * self.translation,
        )
    }

    pub fn inverse(&self) -> SpatialTransform {
        SpatialTransform::new(
            self.rotation.transpose(),
            -(self.rotation * self.translation),
        )
    }

    /// Maps a point given in A coordinates into B coordinates.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (p - self.translation)
    }

    /// Maps a point given in B coordinates into A coordinates.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * p + self.translation
    }

    /// 6×6 matrix acting on motion vectors.
    pub fn motion_matrix(&self) -> Matrix6<f64> {
        let e = self.rotation;
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(-e * skew(&self.translation)));
        x
    }
}

/// Rotation matrix for a right-handed rotation of `angle` about unit `axis`.
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let k = skew(axis);
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Rigid-body inertia: mass, centre of mass and rotational inertia about the
/// centre of mass, all in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialInertia {
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia: Matrix3<f64>,
}

impl SpatialInertia {
    pub fn new(mass: f64, com: Vector3<f64>, inertia: Matrix3<f64>) -> Self {
        Self { mass, com, inertia }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vector3::zeros(), Matrix3::zeros())
    }

    /// Momentum `I v` of the body moving with twist `v`.
    pub fn apply(&self, v: &SpatialVector) -> SpatialVector {
        let lin = (v.linear - self.com.cross(&v.angular)) * self.mass;
        let ang = self.inertia * v.angular + self.com.cross(&lin);
        SpatialVector::new(ang, lin)
    }

    pub fn to_matrix(&self) -> Matrix6<f64> {
        let cx = skew(&self.com);
        let m = self.mass;
        let mut out = Matrix6::zeros();
        out.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.inertia + cx * cx.transpose() * m));
        out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(cx * m));
        out.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(cx.transpose() * m));
        out.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * m));
        out
    }
}
