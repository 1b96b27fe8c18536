//! Floating-base kinematic trees: forward kinematics, composite-rigid-body
//! inertia, recursive Newton-Euler bias forces and point Jacobians.
//!
//! A floating joint is expanded into six internal single-DoF links: three
//! prismatic links along the world axes followed by revolute links about z,
//! y and x. The base orientation is therefore `Rz(yaw)·Ry(pitch)·Rx(roll)`
//! and the generalized velocity of the base is the world-frame translation
//! rate together with the Euler angle rates. The parameterization is singular
//! at pitch = ±π/2.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::spatial::{SpatialInertia, SpatialTransform, SpatialVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Joint {
    Floating,
    Revolute { axis: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Joint,
    /// Joint frame relative to the parent body frame at zero joint angle.
    pub placement: SpatialTransform,
    pub inertia: SpatialInertia,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    Revolute(Vector3<f64>),
    Prismatic(Vector3<f64>),
}

impl Axis {
    fn subspace(&self) -> SpatialVector {
        match *self {
            Axis::Revolute(a) => SpatialVector::new(a, Vector3::zeros()),
            Axis::Prismatic(a) => SpatialVector::new(Vector3::zeros(), a),
        }
    }

    fn joint_transform(&self, q: f64) -> SpatialTransform {
        match *self {
            Axis::Revolute(a) => SpatialTransform::rotation_about(&a, q),
            Axis::Prismatic(a) => SpatialTransform::translation(a * q),
        }
    }
}

#[derive(Debug, Clone)]
struct Link {
    parent: Option<usize>,
    axis: Axis,
    placement: SpatialTransform,
    inertia: SpatialInertia,
}

/// Joint-space inertia matrix and bias forces at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsResult {
    pub mass_matrix: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct RigidBodyTree {
    bodies: Vec<Body>,
    links: Vec<Link>,
    /// Index of the last internal link of each body (the body frame).
    body_link: Vec<usize>,
    /// First DoF index of each body and its DoF count.
    body_dofs: Vec<(usize, usize)>,
}

impl RigidBodyTree {
    /// Builds a tree from bodies listed parents-first.
    pub fn new(bodies: Vec<Body>) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::Input("tree needs at least one body".into()));
        }
        let mut links = Vec::new();
        let mut body_link = Vec::with_capacity(bodies.len());
        let mut body_dofs = Vec::with_capacity(bodies.len());
        for (i, b) in bodies.iter().enumerate() {
            validate_body(i, b)?;
            match b.parent {
                None if i != 0 => {
                    return Err(Error::Input(format!(
                        "body '{}' has no parent; only the first body may be the root",
                        b.name
                    )))
                }
                Some(p) if p >= i => {
                    return Err(Error::Input(format!(
                        "body '{}' lists parent {p}, which does not precede it",
                        b.name
                    )))
                }
                _ => {}
            }
            let parent_link = b.parent.map(|p| body_link[p]);
            let first = links.len();
            match b.joint {
                Joint::Floating => {
                    if b.parent.is_some() {
                        return Err(Error::Input(format!(
                            "floating joint on non-root body '{}'",
                            b.name
                        )));
                    }
                    let axes = [
                        Axis::Prismatic(Vector3::x()),
                        Axis::Prismatic(Vector3::y()),
                        Axis::Prismatic(Vector3::z()),
                        Axis::Revolute(Vector3::z()),
                        Axis::Revolute(Vector3::y()),
                        Axis::Revolute(Vector3::x()),
                    ];
                    for (k, axis) in axes.into_iter().enumerate() {
                        links.push(Link {
                            parent: if k == 0 { parent_link } else { Some(links.len() - 1) },
                            axis,
                            placement: if k == 0 { b.placement } else { SpatialTransform::identity() },
                            inertia: if k == 5 { b.inertia } else { SpatialInertia::zero() },
                        });
                    }
                }
                Joint::Revolute { axis } => {
                    let n = axis.norm();
                    if !(n > 1e-12) {
                        return Err(Error::Input(format!("body '{}' has a zero joint axis", b.name)));
                    }
                    links.push(Link {
                        parent: parent_link,
                        axis: Axis::Revolute(axis / n),
                        placement: b.placement,
                        inertia: b.inertia,
                    });
                }
            }
            body_dofs.push((first, links.len() - first));
            body_link.push(links.len() - 1);
        }
        Ok(Self {
            bodies,
            links,
            body_link,
            body_dofs,
        })
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn num_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    /// DoF range `(first, count)` driven by body `b`'s joint.
    pub fn body_dofs(&self, b: usize) -> Result<(usize, usize)> {
        self.check_body(b)?;
        Ok(self.body_dofs[b])
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.inertia.mass).sum()
    }

    /// DoFs on the path from body `b` to the root.
    pub fn support_dofs(&self, b: usize) -> Result<Vec<usize>> {
        self.check_body(b)?;
        let mut out = Vec::new();
        let mut l = Some(self.body_link[b]);
        while let Some(i) = l {
            out.push(i);
            l = self.links[i].parent;
        }
        out.reverse();
        Ok(out)
    }

    fn check_body(&self, b: usize) -> Result<()> {
        if b >= self.bodies.len() {
            return Err(Error::InvalidBody {
                index: b,
                len: self.bodies.len(),
            });
        }
        Ok(())
    }

    fn link_transforms(&self, q: &DVector<f64>) -> Vec<SpatialTransform> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| l.axis.joint_transform(q[i]).compose(&l.placement))
            .collect()
    }

    /// World-to-body transform of every body.
    ///
    /// The translation of each transform is the body origin in world
    /// coordinates and `orientation()` gives the body axes in world.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Vec<SpatialTransform>> {
        ensure_dim("q", self.dof(), q.len())?;
        let up = self.link_transforms(q);
        let world = self.accumulate(&up);
        Ok(self.body_link.iter().map(|&i| world[i]).collect())
    }

    fn accumulate(&self, up: &[SpatialTransform]) -> Vec<SpatialTransform> {
        let mut world: Vec<SpatialTransform> = Vec::with_capacity(up.len());
        for (i, l) in self.links.iter().enumerate() {
            let x = match l.parent {
                Some(p) => up[i].compose(&world[p]),
                None => up[i],
            };
            world.push(x);
        }
        world
    }

    /// Inverse dynamics `τ = M q̈ + H` by the recursive Newton-Euler method,
    /// with gravity `g` acting along −z.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        gravity: f64,
    ) -> Result<DVector<f64>> {
        let n = self.dof();
        ensure_dim("q", n, q.len())?;
        ensure_dim("qd", n, qd.len())?;
        ensure_dim("qdd", n, qdd.len())?;
        let up = self.link_transforms(q);
        let base_acc = SpatialVector::new(Vector3::zeros(), Vector3::new(0.0, 0.0, gravity));
        let mut v = vec![SpatialVector::zero(); n];
        let mut a = vec![SpatialVector::zero(); n];
        let mut f = vec![SpatialVector::zero(); n];
        for (i, l) in self.links.iter().enumerate() {
            let s = l.axis.subspace();
            let vj = s * qd[i];
            let (vp, ap) = match l.parent {
                Some(p) => (v[p], a[p]),
                None => (SpatialVector::zero(), base_acc),
            };
            v[i] = up[i].apply_motion(&vp) + vj;
            a[i] = up[i].apply_motion(&ap) + s * qdd[i] + v[i].cross_motion(&vj);
            let iv = l.inertia.apply(&v[i]);
            f[i] = l.inertia.apply(&a[i]) + v[i].cross_force(&iv);
        }
        let mut tau = DVector::zeros(n);
        for i in (0..n).rev() {
            let l = &self.links[i];
            tau[i] = l.axis.subspace().dot(&f[i]);
            if let Some(p) = l.parent {
                let fp = up[i].transpose_apply_force(&f[i]);
                f[p] += fp;
            }
        }
        Ok(tau)
    }

    /// Joint-space inertia matrix by the composite-rigid-body method.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dof();
        ensure_dim("q", n, q.len())?;
        let up = self.link_transforms(q);
        let xm: Vec<Matrix6<f64>> = up.iter().map(|x| x.motion_matrix()).collect();
        let mut ic: Vec<Matrix6<f64>> = self.links.iter().map(|l| l.inertia.to_matrix()).collect();
        for i in (0..n).rev() {
            if let Some(p) = self.links[i].parent {
                let add = xm[i].transpose() * ic[i] * xm[i];
                ic[p] += add;
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let si = self.links[i].axis.subspace().to_vector6();
            let mut force: Vector6<f64> = ic[i] * si;
            m[(i, i)] = si.dot(&force);
            let mut j = i;
            while let Some(p) = self.links[j].parent {
                force = xm[j].transpose() * force;
                j = p;
                let sj = self.links[j].axis.subspace().to_vector6();
                let val = sj.dot(&force);
                m[(i, j)] = val;
                m[(j, i)] = val;
            }
        }
        Ok(m)
    }

    /// `M(q)` and `H(q, q̇)` (Coriolis, centrifugal and gravity terms).
    pub fn compute_jsim_and_bias(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        gravity: f64,
    ) -> Result<DynamicsResult> {
        let bias = self.inverse_dynamics(q, qd, &DVector::zeros(self.dof()), gravity)?;
        let mass_matrix = self.mass_matrix(q)?;
        Ok(DynamicsResult { mass_matrix, bias })
    }

    pub fn kinematics(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<Kinematics<'_>> {
        Kinematics::new(self, q, qd)
    }

    /// 6×n Jacobian of a point fixed on body `b` (given in body coordinates),
    /// mapping q̇ to `[ω; ṗ]` in world coordinates.
    pub fn body_jacobian(
        &self,
        q: &DVector<f64>,
        b: usize,
        point: &Vector3<f64>,
    ) -> Result<DMatrix<f64>> {
        let kin = Kinematics::new(self, q, &DVector::zeros(self.dof()))?;
        kin.point_jacobian(b, point)
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>, gravity: f64) -> Result<f64> {
        let m = self.mass_matrix(q)?;
        let kinetic = 0.5 * qd.dot(&(&m * qd));
        let poses = self.forward_kinematics(q)?;
        let potential: f64 = self
            .bodies
            .iter()
            .zip(&poses)
            .map(|(b, x)| b.inertia.mass * gravity * x.inverse_transform_point(&b.inertia.com).z)
            .sum();
        Ok(kinetic + potential)
    }
}

fn validate_body(i: usize, b: &Body) -> Result<()> {
    let inr = &b.inertia;
    if !(inr.mass > 0.0) || !inr.mass.is_finite() {
        return Err(Error::Input(format!("body {i} '{}' has nonpositive mass", b.name)));
    }
    let sym = (inr.inertia - inr.inertia.transpose()).norm();
    if sym > 1e-10 * inr.inertia.norm().max(1.0) {
        return Err(Error::Input(format!("body '{}' inertia is not symmetric", b.name)));
    }
    if inr.inertia.cholesky().is_none() {
        return Err(Error::Input(format!(
            "body '{}' inertia is not positive definite",
            b.name
        )));
    }
    let r = b.placement.rotation;
    if (r.transpose() * r - Matrix3::identity()).norm() > 1e-10 {
        return Err(Error::Input(format!(
            "body '{}' placement rotation is not orthonormal",
            b.name
        )));
    }
    Ok(())
}

/// Link poses, velocities and velocity-product accelerations at one state.
#[derive(Debug, Clone)]
pub struct Kinematics<'a> {
    tree: &'a RigidBodyTree,
    world: Vec<SpatialTransform>,
    vel: Vec<SpatialVector>,
    acc_bias: Vec<SpatialVector>,
}

impl<'a> Kinematics<'a> {
    pub fn new(tree: &'a RigidBodyTree, q: &DVector<f64>, qd: &DVector<f64>) -> Result<Self> {
        let n = tree.dof();
        ensure_dim("q", n, q.len())?;
        ensure_dim("qd", n, qd.len())?;
        let up = tree.link_transforms(q);
        let world = tree.accumulate(&up);
        let mut vel = vec![SpatialVector::zero(); n];
        let mut acc_bias = vec![SpatialVector::zero(); n];
        for (i, l) in tree.links.iter().enumerate() {
            let vj = l.axis.subspace() * qd[i];
            let (vp, ap) = match l.parent {
                Some(p) => (vel[p], acc_bias[p]),
                None => (SpatialVector::zero(), SpatialVector::zero()),
            };
            vel[i] = up[i].apply_motion(&vp) + vj;
            acc_bias[i] = up[i].apply_motion(&ap) + vel[i].cross_motion(&vj);
        }
        Ok(Self {
            tree,
            world,
            vel,
            acc_bias,
        })
    }

    pub fn tree(&self) -> &RigidBodyTree {
        self.tree
    }

    /// World-to-body transform of body `b`.
    pub fn body_pose(&self, b: usize) -> Result<SpatialTransform> {
        self.tree.check_body(b)?;
        Ok(self.world[self.tree.body_link[b]])
    }

    pub fn point_position(&self, b: usize, point: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.body_pose(b)?.inverse_transform_point(point))
    }

    /// Angular velocity of body `b` in world coordinates.
    pub fn angular_velocity(&self, b: usize) -> Result<Vector3<f64>> {
        let x = self.body_pose(b)?;
        Ok(x.orientation() * self.vel[self.tree.body_link[b]].angular)
    }

    /// World velocity `[ω; ṗ]` of a point fixed on body `b`.
    pub fn point_velocity(&self, b: usize, point: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let x = self.body_pose(b)?;
        let v = self.vel[self.tree.body_link[b]];
        let lin = v.linear + v.angular.cross(point);
        let r = x.orientation();
        Ok((r * v.angular, r * lin))
    }

    /// `J̇ q̇` for a point fixed on body `b`, as `[ω̇; p̈]` in world.
    pub fn point_bias_acceleration(
        &self,
        b: usize,
        point: &Vector3<f64>,
    ) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let x = self.body_pose(b)?;
        let l = self.tree.body_link[b];
        let v = self.vel[l];
        let a = self.acc_bias[l];
        let vp = v.linear + v.angular.cross(point);
        let lin = a.linear + a.angular.cross(point) + v.angular.cross(&vp);
        let r = x.orientation();
        Ok((r * a.angular, r * lin))
    }

    /// 6×n point Jacobian, rows `[ω; ṗ]` in world coordinates.
    pub fn point_jacobian(&self, b: usize, point: &Vector3<f64>) -> Result<DMatrix<f64>> {
        let p = self.point_position(b, point)?;
        let mut jac = DMatrix::zeros(6, self.tree.dof());
        for j in self.tree.support_dofs(b)? {
            let x = &self.world[j];
            let r = x.orientation();
            match self.tree.links[j].axis {
                Axis::Revolute(a) => {
                    let aw = r * a;
                    let lin = aw.cross(&(p - x.translation));
                    jac.fixed_view_mut::<3, 1>(0, j).copy_from(&aw);
                    jac.fixed_view_mut::<3, 1>(3, j).copy_from(&lin);
                }
                Axis::Prismatic(a) => {
                    jac.fixed_view_mut::<3, 1>(3, j).copy_from(&(r * a));
                }
            }
        }
        Ok(jac)
    }

    /// 3×n linear Jacobian of the mass-weighted centre of a subset of bodies.
    pub fn com_jacobian(&self, subset: &[usize]) -> Result<(Vector3<f64>, DMatrix<f64>)> {
        let mut total = 0.0;
        let mut c = Vector3::zeros();
        let mut jac = DMatrix::zeros(3, self.tree.dof());
        for &b in subset {
            let inr = self.tree.bodies.get(b).ok_or(Error::InvalidBody {
                index: b,
                len: self.tree.num_bodies(),
            })?;
            let m = inr.inertia.mass;
            total += m;
            c += self.point_position(b, &inr.inertia.com)? * m;
            let jb = self.point_jacobian(b, &inr.inertia.com)?;
            jac += jb.rows(3, 3) * m;
        }
        if total <= 0.0 {
            return Err(Error::Input("empty body subset".into()));
        }
        Ok((c / total, jac / total))
    }

    /// CoM position, velocity and `J̇q̇` for a body subset.
    pub fn com_state(&self, subset: &[usize]) -> Result<ComState> {
        let mut total = 0.0;
        let mut pos = Vector3::zeros();
        let mut vel = Vector3::zeros();
        let mut bias = Vector3::zeros();
        for &b in subset {
            self.tree.check_body(b)?;
            let inr = self.tree.bodies[b].inertia;
            let m = inr.mass;
            total += m;
            pos += self.point_position(b, &inr.com)? * m;
            vel += self.point_velocity(b, &inr.com)?.1 * m;
            bias += self.point_bias_acceleration(b, &inr.com)?.1 * m;
        }
        if total <= 0.0 {
            return Err(Error::Input("empty body subset".into()));
        }
        Ok(ComState {
            mass: total,
            position: pos / total,
            velocity: vel / total,
            bias_acceleration: bias / total,
        })
    }

    /// Linear and angular momentum about the world origin, in world coordinates.
    pub fn momentum(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lin = Vector3::zeros();
        let mut ang = Vector3::zeros();
        for (i, l) in self.tree.links.iter().enumerate() {
            if l.inertia.mass == 0.0 {
                continue;
            }
            let h = l.inertia.apply(&self.vel[i]);
            let hw = self.world[i].transpose_apply_force(&h);
            lin += hw.linear;
            ang += hw.angular;
        }
        (lin, ang)
    }

    /// Angular momentum about point `c` (world coordinates).
    pub fn angular_momentum_about(&self, c: &Vector3<f64>) -> Vector3<f64> {
        let (lin, ang) = self.momentum();
        ang - c.cross(&lin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComState {
    pub mass: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub bias_acceleration: Vector3<f64>,
}
