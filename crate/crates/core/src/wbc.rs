//! Weighted-QP whole-body controller.
//!
//! Decision vector `x = [q̈ (12), τ (6), F_c (6), s]`: generalized
//! accelerations, actuator torques ordered as the actuated DoFs, one
//! contact force per wheel in its contact frame, and the CLF slack.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::clf::{realized_input, wlip_balance_target, ClfData, ClfWeights, ClosedLoopErrorSystem};
use crate::dynamics::{DynamicsResult, Kinematics};
use crate::error::{Error, Result};
use crate::qp::{QpProblem, QpSettings, QpSolver, QpStatus};
use crate::robot::{Robot, RollingConstraint, WheelSide, NUM_ACTUATED, NUM_DOF};

pub const QDD: usize = 0;
pub const TAU: usize = NUM_DOF;
pub const FORCE: usize = NUM_DOF + NUM_ACTUATED;
pub const SLACK: usize = FORCE + 6;
pub const NUM_VARS: usize = SLACK + 1;

/// Positions of the hip and knee torques within `τ`.
pub const LEG_JOINTS: [usize; 4] = [0, 1, 3, 4];
/// Positions of the wheel torques within `τ`.
pub const WHEELS: [usize; 2] = [2, 5];

const PITCH: usize = 4;
const YAW: usize = 3;
const ROLL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGains {
    pub kp: f64,
    pub kd: f64,
    pub weight: f64,
}

impl TaskGains {
    pub const fn new(kp: f64, kd: f64, weight: f64) -> Self {
        Self { kp, kd, weight }
    }

    fn pd(&self, err: f64, err_rate: f64) -> f64 {
        self.kp * err + self.kd * err_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WbcConfig {
    pub pelvis_pitch: TaskGains,
    pub pelvis_yaw: TaskGains,
    pub pelvis_roll: TaskGains,
    pub com_height: TaskGains,
    pub wheel_distance: TaskGains,
    pub balance_weight: f64,
    pub slack_weight: f64,
    pub friction: f64,
    /// Embedded joint damping gain, N·m·s/rad.
    pub joint_damping: f64,
    /// Bound on the integrated joint velocity target, rad/s.
    pub velocity_clip: f64,
    /// Control period, s.
    pub dt: f64,
    pub regularization: f64,
    /// Rolling-constraint directions with singular value below this
    /// fraction of the largest are treated as dependent and carry no force.
    pub contact_rank_tolerance: f64,
    pub qp: QpSettings,
}

impl Default for WbcConfig {
    fn default() -> Self {
        Self {
            pelvis_pitch: TaskGains::new(100.0, 10.0, 1.0),
            pelvis_yaw: TaskGains::new(100.0, 10.0, 10.0),
            pelvis_roll: TaskGains::new(100.0, 10.0, 10.0),
            com_height: TaskGains::new(100.0, 10.0, 100.0),
            wheel_distance: TaskGains::new(1e3, 30.0, 10.0),
            balance_weight: 10.0,
            slack_weight: 1e3,
            friction: 0.5,
            joint_damping: 0.5,
            velocity_clip: 0.5,
            dt: 0.002,
            regularization: 1e-8,
            contact_rank_tolerance: 1e-2,
            qp: QpSettings::default(),
        }
    }
}

impl WbcConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("pelvis_pitch", self.pelvis_pitch),
            ("pelvis_yaw", self.pelvis_yaw),
            ("pelvis_roll", self.pelvis_roll),
            ("com_height", self.com_height),
            ("wheel_distance", self.wheel_distance),
        ] {
            if !(g.kp >= 0.0 && g.kd >= 0.0 && g.weight >= 0.0) {
                return Err(Error::Config(format!("{name} gains must be non-negative")));
            }
        }
        let nonneg = [
            ("balance_weight", self.balance_weight),
            ("slack_weight", self.slack_weight),
            ("joint_damping", self.joint_damping),
            ("regularization", self.regularization),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.friction > 0.0) {
            return Err(Error::Config(format!("friction must be positive, got {}", self.friction)));
        }
        if !(0.0..1.0).contains(&self.contact_rank_tolerance) {
            return Err(Error::Config("contact_rank_tolerance must lie in [0, 1)".into()));
        }
        if !(self.velocity_clip > 0.0) || !(self.dt > 0.0) {
            return Err(Error::Config("velocity_clip and dt must be positive".into()));
        }
        Ok(())
    }
}

/// Elementwise clamp to `[−bound, bound]`.
pub fn clip(v: &[f64], bound: f64) -> Vec<f64> {
    v.iter().map(|x| x.clamp(-bound, bound)).collect()
}

/// A weighted least-squares task `‖J x − b‖²_W` over the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: &'static str,
    pub jacobian: DMatrix<f64>,
    pub target: DVector<f64>,
    pub weight: DMatrix<f64>,
}

impl TaskSpec {
    fn scalar(name: &'static str, row: DVector<f64>, target: f64, weight: f64) -> Self {
        let mut jacobian = DMatrix::zeros(1, NUM_VARS);
        jacobian.view_mut((0, QDD), (1, row.len())).copy_from(&row.transpose());
        Self {
            name,
            jacobian,
            target: DVector::from_element(1, target),
            weight: DMatrix::from_element(1, 1, weight),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.target.len();
        if self.jacobian.nrows() != r || self.jacobian.ncols() != NUM_VARS || self.weight.shape() != (r, r) {
            return Err(Error::Input(format!("task {} has inconsistent dimensions", self.name)));
        }
        let w = &self.weight;
        if (w - w.transpose()).amax() > 1e-12 * w.amax().max(1.0) {
            return Err(Error::Input(format!("task {} weight is not symmetric", self.name)));
        }
        if w.clone().symmetric_eigenvalues().min() < -1e-12 * w.amax().max(1.0) {
            return Err(Error::Input(format!("task {} weight is not PSD", self.name)));
        }
        Ok(())
    }

    /// `‖J x − b‖`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.jacobian * x - &self.target).norm()
    }
}

/// Task-space references of one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct References {
    /// Forward CoM velocity in the heading frame.
    pub velocity: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    /// World height of the upper-body CoM.
    pub com_height: f64,
    pub com_height_rate: f64,
    pub pelvis_pitch: f64,
}

/// Measured robot state with the contact situation of each wheel.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub contact: [bool; 2],
    /// Terrain normal under each wheel.
    pub normal: [Vector3<f64>; 2],
}

impl RobotState {
    pub fn on_flat_ground(q: DVector<f64>, qd: DVector<f64>) -> Self {
        Self {
            q,
            qd,
            contact: [true; 2],
            normal: [Vector3::z(); 2],
        }
    }
}

/// Reduced-model quantities measured on the full robot.
#[derive(Debug, Clone, PartialEq)]
pub struct WlipReadout {
    /// Upper-body CoM velocity along the heading.
    pub com_velocity: f64,
    /// `δx`: upper-body CoM ahead of the wheel-centre midpoint.
    pub offset: f64,
    pub offset_rate: f64,
    /// CoM height above the wheel-centre midpoint.
    pub height: f64,
    pub com_height: f64,
    pub com_height_rate: f64,
    pub error: Vector3<f64>,
    pub lyapunov: f64,
    /// Sagittal centroidal angular momentum.
    pub cam: f64,
    /// Row Jacobian of `δx` over q̈ with its bias.
    pub offset_jacobian: DVector<f64>,
    pub offset_bias: f64,
}

/// CLF decrease condition as a QP row `a·x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClfQpRow {
    pub row: DVector<f64>,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub tasks: Vec<TaskSpec>,
    pub clf: Option<ClfQpRow>,
    pub readout: WlipReadout,
    /// Set when a wheel is out of contact and wheel tasks were dropped.
    pub degraded: bool,
}

/// Scalar `e_x·d` along the heading with rate, Jacobian row and bias.
struct Projection {
    value: f64,
    rate: f64,
    row: DVector<f64>,
    bias: f64,
}

fn heading_projection(
    d: &Vector3<f64>,
    d_rate: &Vector3<f64>,
    d_jac: &DMatrix<f64>,
    d_bias: &Vector3<f64>,
    yaw: f64,
    yaw_rate: f64,
) -> Projection {
    let ex = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let ey = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
    let mut row = d_jac.transpose() * ex;
    row[YAW] += ey.dot(d);
    Projection {
        value: ex.dot(d),
        rate: yaw_rate * ey.dot(d) + ex.dot(d_rate),
        row,
        bias: ex.dot(d_bias) - yaw_rate * yaw_rate * ex.dot(d) + 2.0 * yaw_rate * ey.dot(d_rate),
    }
}

struct PointMotion {
    position: Vector3<f64>,
    velocity: Vector3<f64>,
    jacobian: DMatrix<f64>,
    bias: Vector3<f64>,
}

fn wheel_motion(robot: &Robot, kin: &Kinematics, side: WheelSide) -> Result<PointMotion> {
    let b = robot.wheel_body(side);
    let o = Vector3::zeros();
    let jac = kin.point_jacobian(b, &o)?;
    let (_, velocity) = kin.point_velocity(b, &o)?;
    let (_, bias) = kin.point_bias_acceleration(b, &o)?;
    Ok(PointMotion {
        position: kin.point_position(b, &o)?,
        velocity,
        jacobian: jac.rows(3, 3).into_owned(),
        bias,
    })
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + t
    } else {
        w
    }
}

/// Measures the wLIP quantities of the full robot.
pub fn wlip_readout(robot: &Robot, kin: &Kinematics, state: &RobotState, clf: &ClfData, velocity_ref: f64) -> Result<WlipReadout> {
    let q = &state.q;
    let qd = &state.qd;
    let (yaw, yaw_rate) = (q[YAW], qd[YAW]);
    let upper = robot.upper_bodies();
    let (_, com_jac) = kin.com_jacobian(&upper)?;
    let com = kin.com_state(&upper)?;
    let wl = wheel_motion(robot, kin, WheelSide::Left)?;
    let wr = wheel_motion(robot, kin, WheelSide::Right)?;
    let mid = (wl.position + wr.position) / 2.0;
    let mid_rate = (wl.velocity + wr.velocity) / 2.0;
    let d = com.position - mid;
    let d_rate = com.velocity - mid_rate;
    let d_jac = &com_jac - (&wl.jacobian + &wr.jacobian) / 2.0;
    let d_bias = com.bias_acceleration - (wl.bias + wr.bias) / 2.0;
    let off = heading_projection(&d, &d_rate, &d_jac, &d_bias, yaw, yaw_rate);
    let zero = DMatrix::zeros(3, NUM_DOF);
    let vel = heading_projection(&com.position, &com.velocity, &zero, &Vector3::zeros(), yaw, yaw_rate);
    let height = d.z;
    if !(height > 1e-3) {
        return Err(Error::Input(format!("CoM height above wheels {height:.4} m is not positive")));
    }
    let error = crate::clf::error_state(velocity_ref, vel.rate, off.rate, off.value, height);
    let whole = kin.com_state(&robot.all_bodies())?;
    let l = kin.angular_momentum_about(&whole.position);
    let ey = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
    Ok(WlipReadout {
        com_velocity: vel.rate,
        offset: off.value,
        offset_rate: off.rate,
        height,
        com_height: com.position.z,
        com_height_rate: com.velocity.z,
        error,
        lyapunov: clf.lyapunov(&error),
        cam: ey.dot(&l),
        offset_jacobian: off.row,
        offset_bias: off.bias,
    })
}

/// Builds the task set and the CLF row for the current state.
pub fn build_tasks(
    robot: &Robot,
    kin: &Kinematics,
    state: &RobotState,
    refs: &References,
    config: &WbcConfig,
    clf: &ClfData,
) -> Result<TaskSet> {
    let q = &state.q;
    let qd = &state.qd;
    let unit = |i: usize| {
        let mut r = DVector::zeros(NUM_DOF);
        r[i] = 1.0;
        r
    };
    let mut tasks = Vec::new();
    let c = &config.pelvis_pitch;
    tasks.push(TaskSpec::scalar(
        "pelvis_pitch",
        unit(PITCH),
        c.pd(refs.pelvis_pitch - q[PITCH], -qd[PITCH]),
        c.weight,
    ));

    let mut jac = DMatrix::zeros(2, NUM_VARS);
    jac[(0, QDD + YAW)] = 1.0;
    jac[(1, QDD + ROLL)] = 1.0;
    tasks.push(TaskSpec {
        name: "pelvis_yaw_roll",
        jacobian: jac,
        target: DVector::from_row_slice(&[
            config.pelvis_yaw.pd(wrap_angle(refs.yaw - q[YAW]), refs.yaw_rate - qd[YAW]),
            config.pelvis_roll.pd(refs.roll - q[ROLL], -qd[ROLL]),
        ]),
        weight: DMatrix::from_diagonal(&DVector::from_row_slice(&[
            config.pelvis_yaw.weight,
            config.pelvis_roll.weight,
        ])),
    });

    let readout = wlip_readout(robot, kin, state, clf, refs.velocity)?;
    let (row, bias) = robot.com_height_jacobian(kin, crate::robot::BodySubset::Upper)?;
    let c = &config.com_height;
    tasks.push(TaskSpec::scalar(
        "com_height",
        row,
        c.pd(refs.com_height - readout.com_height, refs.com_height_rate - readout.com_height_rate) - bias,
        c.weight,
    ));

    let degraded = !(state.contact[0] && state.contact[1]);
    let mut clf_row = None;
    if !degraded {
        let wl = wheel_motion(robot, kin, WheelSide::Left)?;
        let wr = wheel_motion(robot, kin, WheelSide::Right)?;
        let split = heading_projection(
            &(wr.position - wl.position),
            &(wr.velocity - wl.velocity),
            &(&wr.jacobian - &wl.jacobian),
            &(wr.bias - wl.bias),
            q[YAW],
            qd[YAW],
        );
        let c = &config.wheel_distance;
        tasks.push(TaskSpec::scalar(
            "wheel_distance",
            split.row,
            c.pd(-split.value, -split.rate) - split.bias,
            c.weight,
        ));

        let z = readout.height;
        let target = wlip_balance_target(clf, &readout.error, z)?;
        tasks.push(TaskSpec::scalar(
            "wlip_balance",
            readout.offset_jacobian.clone(),
            target - readout.offset_bias,
            config.balance_weight,
        ));

        // ū = (J_δ q̈ + b_δ − c g δx) / z enters the decrease condition
        let cr = clf.constraint_row(&readout.error);
        let mut row = DVector::zeros(NUM_VARS);
        let scale = cr.input_coeff / z;
        row.rows_mut(QDD, NUM_DOF).copy_from(&(&readout.offset_jacobian * scale));
        row[SLACK] = -1.0;
        let sys = &clf.system;
        let constant = cr.input_coeff * realized_input(sys, readout.offset, z, readout.offset_bias);
        clf_row = Some(ClfQpRow {
            row,
            upper: cr.bound - cr.drift - constant,
        });
    }
    Ok(TaskSet {
        tasks,
        clf: clf_row,
        readout,
        degraded,
    })
}

/// Primal result of the whole-body QP.
#[derive(Debug, Clone, PartialEq)]
pub struct WbcSolution {
    pub x: DVector<f64>,
    pub qdd: DVector<f64>,
    pub tau: [f64; NUM_ACTUATED],
    /// Contact force of each wheel in its contact frame.
    pub forces: [Vector3<f64>; 2],
    pub slack: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    /// `‖M q̈ + H − Sτ − J_cᵀF_c‖∞`.
    pub eom_residual: f64,
}

/// Assembles and solves the whole-body QP. `rolling` holds the rows of the
/// wheels flagged in `contact`, left before right.
#[allow(clippy::too_many_arguments)]
pub fn solve_wbc(
    tasks: &[TaskSpec],
    dynamics: &DynamicsResult,
    rolling: &RollingConstraint,
    contact: [bool; 2],
    clf: Option<&ClfQpRow>,
    config: &WbcConfig,
    torque_limits: &[f64; NUM_ACTUATED],
    solver: &mut QpSolver,
) -> Result<WbcSolution> {
    let n = NUM_VARS;
    let active: Vec<usize> = (0..2).filter(|&k| contact[k]).collect();
    if rolling.rows() != 3 * active.len() {
        return Err(Error::Dimension {
            what: "rolling constraint rows",
            expected: 3 * active.len(),
            got: rolling.rows(),
        });
    }
    let mut h = DMatrix::identity(n, n) * (2.0 * config.regularization);
    let mut g = DVector::zeros(n);
    for t in tasks {
        t.validate()?;
        let jw = t.jacobian.transpose() * &t.weight;
        h += &jw * &t.jacobian * 2.0;
        g -= &jw * &t.target * 2.0;
    }
    h[(SLACK, SLACK)] += 2.0 * config.slack_weight;
    let h = (&h + h.transpose()) * 0.5;

    // equalities: dynamics, rolling, zero force on lifted wheels
    let lifted = 2 - active.len();
    let meq = NUM_DOF + rolling.rows() + 3 * lifted;
    let mut a_eq = DMatrix::zeros(meq, n);
    let mut b_eq = DVector::zeros(meq);
    a_eq.view_mut((0, QDD), (NUM_DOF, NUM_DOF)).copy_from(&dynamics.mass_matrix);
    for i in 0..NUM_ACTUATED {
        a_eq[(NUM_DOF - NUM_ACTUATED + i, TAU + i)] = -1.0;
    }
    // rolling rows projected on their well-conditioned directions; the
    // dependent directions get zero force instead
    let (keep, dependent) = rolling.row_basis(config.contact_rank_tolerance);
    let rhs = &rolling.rolling_term - &rolling.bias;
    let projected_j = keep.transpose() * &rolling.jacobian;
    let projected_b = keep.transpose() * &rhs;
    let nk = keep.ncols();
    a_eq.view_mut((NUM_DOF, QDD), (nk, NUM_DOF)).copy_from(&projected_j);
    b_eq.rows_mut(NUM_DOF, nk).copy_from(&projected_b);
    for (r, &k) in active.iter().enumerate() {
        let jk = rolling.jacobian.rows(3 * r, 3);
        a_eq.view_mut((0, FORCE + 3 * k), (NUM_DOF, 3)).copy_from(&(-jk.transpose()));
        for d in 0..dependent.ncols() {
            for j in 0..3 {
                a_eq[(NUM_DOF + nk + d, FORCE + 3 * k + j)] = dependent[(3 * r + j, d)];
            }
        }
    }
    b_eq.rows_mut(0, NUM_DOF).copy_from(&(-&dynamics.bias));
    let mut row = NUM_DOF + rolling.rows();
    for k in (0..2).filter(|&k| !contact[k]) {
        for j in 0..3 {
            a_eq[(row, FORCE + 3 * k + j)] = 1.0;
            row += 1;
        }
    }

    let inf = f64::INFINITY;
    let mu = config.friction;
    let m_in = NUM_ACTUATED + 5 * active.len() + usize::from(clf.is_some());
    let mut a_in = DMatrix::zeros(m_in, n);
    let mut lb = DVector::zeros(m_in);
    let mut ub = DVector::zeros(m_in);
    for i in 0..NUM_ACTUATED {
        a_in[(i, TAU + i)] = 1.0;
        lb[i] = -torque_limits[i];
        ub[i] = torque_limits[i];
    }
    let mut r = NUM_ACTUATED;
    for &k in &active {
        let f = FORCE + 3 * k;
        let rows: [([f64; 3], f64, f64); 5] = [
            ([1.0, 0.0, -mu], -inf, 0.0),
            ([1.0, 0.0, mu], 0.0, inf),
            ([0.0, 1.0, -mu], -inf, 0.0),
            ([0.0, 1.0, mu], 0.0, inf),
            ([0.0, 0.0, 1.0], 0.0, inf),
        ];
        for (coef, l, u) in rows {
            for j in 0..3 {
                a_in[(r, f + j)] = coef[j];
            }
            lb[r] = l;
            ub[r] = u;
            r += 1;
        }
    }
    if let Some(c) = clf {
        a_in.row_mut(r).copy_from(&c.row.transpose());
        lb[r] = -inf;
        ub[r] = c.upper;
    }

    let problem = QpProblem::new(h, g)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_in, lb, ub);
    let sol = solver.solve(&problem)?;
    let x = sol.x.clone();
    let qdd = x.rows(QDD, NUM_DOF).into_owned();
    let mut tau = [0.0; NUM_ACTUATED];
    for (i, t) in tau.iter_mut().enumerate() {
        *t = x[TAU + i];
    }
    let forces = [
        Vector3::new(x[FORCE], x[FORCE + 1], x[FORCE + 2]),
        Vector3::new(x[FORCE + 3], x[FORCE + 4], x[FORCE + 5]),
    ];
    let eom = (problem.a_eq.rows(0, NUM_DOF) * &x - problem.b_eq.rows(0, NUM_DOF)).amax();
    Ok(WbcSolution {
        slack: x[SLACK],
        x,
        qdd,
        tau,
        forces,
        status: sol.status,
        iterations: sol.iterations,
        polished: sol.polished,
        eom_residual: eom,
    })
}

/// Torques sent to the actuators for one control period.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCommand {
    /// Hip and knee torques `[hip_l, knee_l, hip_r, knee_r]` at the tick.
    pub joint: [f64; 4],
    /// Wheel torques `[left, right]`.
    pub wheel: [f64; 2],
    /// QP torques before the damping overlay, in actuated-DoF order.
    pub feedforward: [f64; NUM_ACTUATED],
    /// Clipped integrated joint velocity target of the damping overlay.
    pub velocity_target: [f64; 4],
    pub damping_gain: f64,
    pub limits: [f64; NUM_ACTUATED],
    pub slack: f64,
    pub status: Option<QpStatus>,
    pub iterations: usize,
    pub eom_residual: f64,
    pub forces: [Vector3<f64>; 2],
    pub degraded: bool,
    /// Set when the QP failed and only damping torques are applied.
    pub emergency: Option<String>,
}

impl TorqueCommand {
    /// Actuator torques in actuated-DoF order with the joint damping overlay
    /// evaluated at velocities `qd`, saturated at the limits.
    pub fn actuator_torques(&self, qd: &DVector<f64>) -> [f64; NUM_ACTUATED] {
        let mut tau = self.feedforward;
        for (k, &i) in LEG_JOINTS.iter().enumerate() {
            let v = qd[NUM_DOF - NUM_ACTUATED + i];
            tau[i] += self.damping_gain * (self.velocity_target[k] - v);
        }
        for i in 0..NUM_ACTUATED {
            tau[i] = tau[i].clamp(-self.limits[i], self.limits[i]);
        }
        tau
    }
}

/// Output of one controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub command: TorqueCommand,
    pub readout: Option<WlipReadout>,
    pub solution: Option<WbcSolution>,
}

/// Stateful whole-body controller for one robot.
#[derive(Debug, Clone)]
pub struct WholeBodyController {
    robot: Robot,
    config: WbcConfig,
    clf: ClfData,
    solver: QpSolver,
    velocity_integral: [f64; 4],
    limits: [f64; NUM_ACTUATED],
}

impl WholeBodyController {
    pub fn new(robot: Robot, config: WbcConfig, weights: &ClfWeights) -> Result<Self> {
        config.validate()?;
        let p = &robot.params;
        let system = ClosedLoopErrorSystem::new(p.upper_mass(), p.wheel_masses(), crate::GRAVITY)?;
        let clf = ClfData::from_weights(system, weights)?;
        let limits = p.torque_limits();
        Ok(Self {
            solver: QpSolver::new(config.qp),
            robot,
            config,
            clf,
            velocity_integral: [0.0; 4],
            limits,
        })
    }

    pub fn robot(&self) -> &Robot {
        &self.robot
    }

    pub fn config(&self) -> &WbcConfig {
        &self.config
    }

    pub fn clf(&self) -> &ClfData {
        &self.clf
    }

    /// Runs one control period.
    pub fn tick(&mut self, state: &RobotState, refs: &References) -> Result<ControlOutput> {
        let result = self.solve(state, refs);
        match result {
            Ok((set, sol)) if sol.status == QpStatus::Solved || sol.eom_residual <= 1e-4 => {
                let mut target = [0.0; 4];
                for (k, &i) in LEG_JOINTS.iter().enumerate() {
                    self.velocity_integral[k] += sol.qdd[NUM_DOF - NUM_ACTUATED + i] * self.config.dt;
                    target[k] = self.velocity_integral[k];
                }
                let target = clip(&target, self.config.velocity_clip);
                let mut command = TorqueCommand {
                    joint: [0.0; 4],
                    wheel: [0.0; 2],
                    feedforward: sol.tau,
                    velocity_target: [target[0], target[1], target[2], target[3]],
                    damping_gain: self.config.joint_damping,
                    limits: self.limits,
                    slack: sol.slack,
                    status: Some(sol.status),
                    iterations: sol.iterations,
                    eom_residual: sol.eom_residual,
                    forces: sol.forces,
                    degraded: set.degraded,
                    emergency: None,
                };
                fill_split(&mut command, &state.qd);
                Ok(ControlOutput {
                    command,
                    readout: Some(set.readout),
                    solution: Some(sol),
                })
            }
            Ok((set, sol)) => Ok(self.emergency(state, Some(set.readout), format!("QP status {:?}", sol.status))),
            Err(e) => Ok(self.emergency(state, None, e.to_string())),
        }
    }

    fn solve(&mut self, state: &RobotState, refs: &References) -> Result<(TaskSet, WbcSolution)> {
        let kin = self.robot.tree.kinematics(&state.q, &state.qd)?;
        let kin = &kin;
        let set = build_tasks(&self.robot, kin, state, refs, &self.config, &self.clf)?;
        let dynamics = self
            .robot
            .tree
            .compute_jsim_and_bias(&state.q, &state.qd, crate::GRAVITY)?;
        let mut rows = Vec::new();
        for side in WheelSide::BOTH {
            if state.contact[side.index()] {
                rows.push(self.robot.rolling_constraint(kin, &state.qd, side, &state.normal[side.index()])?);
            }
        }
        let rolling = RollingConstraint::stack(&rows);
        let sol = solve_wbc(
            &set.tasks,
            &dynamics,
            &rolling,
            state.contact,
            set.clf.as_ref(),
            &self.config,
            &self.limits,
            &mut self.solver,
        )?;
        Ok((set, sol))
    }

    fn emergency(&mut self, state: &RobotState, readout: Option<WlipReadout>, reason: String) -> ControlOutput {
        self.velocity_integral = [0.0; 4];
        self.solver.clear_warm_start();
        let mut command = TorqueCommand {
            joint: [0.0; 4],
            wheel: [0.0; 2],
            feedforward: [0.0; NUM_ACTUATED],
            velocity_target: [0.0; 4],
            damping_gain: self.config.joint_damping,
            limits: self.limits,
            slack: 0.0,
            status: None,
            iterations: 0,
            eom_residual: f64::NAN,
            forces: [Vector3::zeros(); 2],
            degraded: true,
            emergency: Some(reason),
        };
        fill_split(&mut command, &state.qd);
        ControlOutput {
            command,
            readout,
            solution: None,
        }
    }
}

fn fill_split(c: &mut TorqueCommand, qd: &DVector<f64>) {
    let tau = c.actuator_torques(qd);
    for (k, &i) in LEG_JOINTS.iter().enumerate() {
        c.joint[k] = tau[i];
    }
    for (k, &i) in WHEELS.iter().enumerate() {
        c.wheel[k] = tau[i];
    }
}
