//! Closed-loop scenario runner: the whole-body controller at its control
//! rate driving the simulator at its substep rate.

use std::io::Write;
use std::path::Path;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Disturbance, ScenarioConfig};
use crate::error::{Error, Result};
use crate::reference::{HeightMode, PostureMap};
use crate::robot::{Robot, WheelSide, BASE_DOF, LEFT_JOINTS, NUM_ACTUATED, NUM_DOF, RIGHT_JOINTS};
use crate::simulator::{ExternalForce, SimState, Simulator, Terrain};
use crate::wbc::{References, RobotState, WholeBodyController, LEG_JOINTS, WHEELS};

/// Schema tag written as the first line of every log file.
pub const LOG_SCHEMA: &str = "# wlip sim log v1; SI units; time first; forces in each wheel's contact frame; com_* is the upper-body CoM";

const POSTURE_SAMPLES: usize = 64;
const PITCH_FALL: f64 = 1.0;
const ROLL_FALL: f64 = 0.7;
const HEIGHT_FALL: f64 = 0.1;

/// Column names of [`SimLog`] rows.
pub fn log_columns() -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend((0..NUM_DOF).map(|i| format!("q{i}")));
    c.extend((0..NUM_DOF).map(|i| format!("qd{i}")));
    for n in ["hip_l", "knee_l", "wheel_l", "hip_r", "knee_r", "wheel_r"] {
        c.push(format!("tau_{n}"));
    }
    for s in ["l", "r"] {
        for a in ["x", "y", "z"] {
            c.push(format!("f{a}_{s}"));
        }
    }
    for n in [
        "contact_l",
        "contact_r",
        "com_x",
        "com_y",
        "com_z",
        "com_vx",
        "com_vy",
        "com_vz",
        "cam",
        "xbar0",
        "xbar1",
        "xbar2",
        "lyapunov",
        "slack",
        "offset",
        "height",
        "ref_velocity",
        "ref_com_height",
        "ref_pitch",
        "ref_hip_height",
        "qp_iterations",
    ] {
        c.push(n.into());
    }
    c
}

/// Time series at the control rate; `rows[k][0]` is the time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SimLog {
    fn new() -> Self {
        Self {
            columns: log_columns(),
            rows: Vec::new(),
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "{LOG_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    /// Tangential force outside the friction pyramid of one wheel.
    FrictionViolation { t: f64, wheel: usize, ratio: f64 },
    Touchdown { t: f64, wheel: usize },
    Release { t: f64, wheel: usize },
    Fall { t: f64, reason: String },
    ControllerFailure { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub simulated: f64,
    pub final_error_norm: f64,
    pub peak_joint_torque: f64,
    pub peak_wheel_torque: f64,
    pub max_slack: f64,
    pub friction_violations: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub log: SimLog,
    pub events: Vec<Event>,
    pub summary: Summary,
}

impl ScenarioOutcome {
    pub fn failed(&self) -> bool {
        self.summary.failure.is_some()
    }
}

struct ResolvedDisturbance {
    body: usize,
    point: Vector3<f64>,
    source: Disturbance,
}

fn resolve_disturbances(robot: &Robot, list: &[Disturbance]) -> Result<Vec<ResolvedDisturbance>> {
    list.iter()
        .map(|d| {
            let body = robot
                .tree
                .body_index(d.body())
                .ok_or_else(|| Error::Config(format!("unknown disturbance body '{}'", d.body())))?;
            Ok(ResolvedDisturbance {
                body,
                point: robot.tree.bodies()[body].inertia.com,
                source: d.clone(),
            })
        })
        .collect()
}

fn wheel_centres(robot: &Robot, q: &DVector<f64>, qd: &DVector<f64>) -> Result<(f64, f64)> {
    let kin = robot.tree.kinematics(q, qd)?;
    let mut z = 0.0;
    let mut zd = 0.0;
    for side in WheelSide::BOTH {
        let b = robot.wheel_body(side);
        let (_, v) = kin.point_velocity(b, &Vector3::zeros())?;
        z += 0.5 * robot.wheel_center(&kin, side)?.z;
        zd += 0.5 * v.z;
    }
    Ok((z, zd))
}

/// Initial balanced state on the terrain, wheels touching and rolling.
fn initial_state(
    cfg: &ScenarioConfig,
    sim: &Simulator,
    map: &PostureMap,
    rng: &mut ChaCha8Rng,
) -> Result<SimState> {
    let robot = &sim.robot;
    let mut q = map.stance(robot, cfg.hip_height(), cfg.initial.offset)?;
    for _ in 0..4 {
        let gaps = sim.gaps(&q)?;
        let g = gaps[0].min(gaps[1]);
        if !g.is_finite() || g.abs() < 1e-12 {
            break;
        }
        q[2] -= g;
    }
    let mut qd = DVector::zeros(NUM_DOF);
    let v = cfg.initial.velocity;
    qd[0] = v;
    for j in [LEFT_JOINTS[2], RIGHT_JOINTS[2]] {
        qd[j] = v / robot.params.wheel_radius;
    }
    let noise = cfg.initial.joint_velocity_noise;
    if noise > 0.0 {
        for i in BASE_DOF..NUM_DOF {
            qd[i] += rng.random_range(-noise..=noise);
        }
    }
    let mut state = SimState::new(q, qd);
    let gaps = sim.gaps(&state.q)?;
    state.contact = [gaps[0] <= 1e-9, gaps[1] <= 1e-9];
    sim.project_velocity(&mut state)?;
    Ok(state)
}

/// Runs the configured scenario. Configuration problems are errors; a
/// controller failure or fall ends the run early and is reported in the
/// outcome.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let robot = Robot::new(cfg.robot.clone())?;
    let mut terrain = cfg.terrain();
    if let Terrain::Sine { phase: phase @ None, .. } = &mut terrain {
        let tau = std::f64::consts::TAU;
        *phase = Some([rng.random_range(0.0..tau), rng.random_range(0.0..tau)]);
    }
    let sim = Simulator::new(robot.clone(), Some(terrain), cfg.simulation)?;
    let map = PostureMap::new(&robot, POSTURE_SAMPLES)?;
    let mut ctl = WholeBodyController::new(robot.clone(), cfg.controller, &cfg.clf)?;
    let timeline = cfg.references();
    let disturbances = resolve_disturbances(&robot, &cfg.disturbances())?;
    let mu = cfg.controller.friction;

    let mut state = initial_state(cfg, &sim, &map, &mut rng)?;
    let hip0 = cfg.hip_height();
    let upper = robot.upper_bodies();
    let com0 = robot
        .tree
        .kinematics(&state.q, &state.qd)?
        .com_state(&upper)?
        .position
        .z;

    let substeps = (cfg.controller.dt / cfg.simulation.dt).round() as usize;
    let ticks = (cfg.duration() / cfg.controller.dt).round() as usize;
    let mut log = SimLog::new();
    let mut events = Vec::new();
    let mut failure: Option<String> = None;
    let mut peak_joint: f64 = 0.0;
    let mut peak_wheel: f64 = 0.0;
    let mut max_slack: f64 = 0.0;
    let mut violations = 0;
    let mut final_error = f64::NAN;

    for _ in 0..ticks {
        let t = state.time;
        let normals = sim.normals(&state.q)?;
        let (wz, wzd) = wheel_centres(&robot, &state.q, &state.qd)?;
        let (hip, com_ref, com_rate) = match timeline.height_mode {
            HeightMode::Hip => {
                let h = timeline.hip_height(t, hip0);
                let (z, slope) = map.com_height(h.value);
                (h.value, wz + z, wzd + slope * h.rate)
            }
            HeightMode::WorldCom => {
                let target = timeline.com_height(t, com0);
                let h = map.hip_for_com_height(target.value - wz);
                let (z, _) = map.com_height(h);
                (h, wz + z, target.rate)
            }
        };
        let v = timeline.velocity(t);
        let yaw = timeline.yaw(t);
        let refs = References {
            velocity: v.value,
            yaw: yaw.value,
            yaw_rate: yaw.rate,
            roll: timeline.roll(t).value,
            com_height: com_ref,
            com_height_rate: com_rate,
            pelvis_pitch: map.pelvis_pitch(hip),
        };
        let rs = RobotState {
            q: state.q.clone(),
            qd: state.qd.clone(),
            contact: state.contact,
            normal: normals,
        };
        let out = ctl.tick(&rs, &refs)?;
        let cmd = &out.command;
        let q0 = state.q.clone();
        let qd0 = state.qd.clone();

        let mut first_tau = [0.0; NUM_ACTUATED];
        let mut first_forces = [Vector3::zeros(); 2];
        let mut step_error = None;
        if let Some(reason) = &cmd.emergency {
            events.push(Event::ControllerFailure {
                t,
                reason: reason.clone(),
            });
            failure = Some(format!("controller failure at t = {t:.4} s: {reason}"));
        } else {
            for s in 0..substeps {
                let tau = cmd.actuator_torques(&state.qd);
                let ext: Vec<ExternalForce> = disturbances
                    .iter()
                    .map(|d| ExternalForce {
                        body: d.body,
                        point: d.point,
                        force: d.source.force(state.time),
                    })
                    .filter(|e| e.force != Vector3::zeros())
                    .collect();
                let now = state.time;
                let rep = match sim.step(&mut state, &tau, &ext) {
                    Ok(r) => r,
                    Err(e) => {
                        step_error = Some(e.to_string());
                        break;
                    }
                };
                for k in 0..2 {
                    if rep.touchdown[k] {
                        events.push(Event::Touchdown { t: now, wheel: k });
                    }
                    if rep.released[k] {
                        events.push(Event::Release { t: now, wheel: k });
                    }
                    let f = rep.forces[k];
                    if rep.contact[k] {
                        let bound = mu * f.z + 1e-6;
                        if f.x.abs() > bound || f.y.abs() > bound {
                            violations += 1;
                            events.push(Event::FrictionViolation {
                                t: now,
                                wheel: k,
                                ratio: f.x.abs().max(f.y.abs()) / f.z.max(1e-12),
                            });
                        }
                    }
                }
                if s == 0 {
                    first_tau = tau;
                    first_forces = rep.forces;
                }
            }
        }
        for &i in &LEG_JOINTS {
            peak_joint = peak_joint.max(first_tau[i].abs());
        }
        for &i in &WHEELS {
            peak_wheel = peak_wheel.max(first_tau[i].abs());
        }
        max_slack = max_slack.max(cmd.slack);

        let kin = robot.tree.kinematics(&q0, &qd0)?;
        let com = kin.com_state(&upper)?;
        let mut row = Vec::with_capacity(log.columns.len());
        row.push(t);
        row.extend(q0.iter());
        row.extend(qd0.iter());
        row.extend(first_tau);
        for f in first_forces {
            row.extend([f.x, f.y, f.z]);
        }
        row.extend(rs.contact.map(|c| c as u8 as f64));
        row.extend(com.position.iter());
        row.extend(com.velocity.iter());
        match &out.readout {
            Some(r) => {
                final_error = r.error.norm();
                row.push(r.cam);
                row.extend(r.error.iter());
                row.extend([r.lyapunov, cmd.slack, r.offset, r.height]);
            }
            None => row.extend([f64::NAN; 8]),
        }
        row.extend([refs.velocity, refs.com_height, refs.pelvis_pitch, hip, cmd.iterations as f64]);
        log.rows.push(row);

        if failure.is_some() {
            break;
        }
        if let Some(e) = step_error {
            events.push(Event::ControllerFailure { t, reason: e.clone() });
            failure = Some(format!("simulation failure at t = {t:.4} s: {e}"));
            break;
        }
        let fall = if (state.q[4] - refs.pelvis_pitch).abs() > PITCH_FALL {
            Some("pelvis pitch left the recoverable range")
        } else if state.q[5].abs() > ROLL_FALL {
            Some("pelvis roll left the recoverable range")
        } else if com.position.z - wz < HEIGHT_FALL {
            Some("CoM dropped to the wheels")
        } else if !state.q.iter().chain(state.qd.iter()).all(|v| v.is_finite()) {
            Some("state diverged")
        } else {
            None
        };
        if let Some(reason) = fall {
            events.push(Event::Fall {
                t: state.time,
                reason: reason.into(),
            });
            failure = Some(format!("fall at t = {:.4} s: {reason}", state.time));
            break;
        }
    }

    let summary = Summary {
        scenario: cfg.scenario.name().into(),
        seed: cfg.seed,
        simulated: state.time,
        final_error_norm: final_error,
        peak_joint_torque: peak_joint,
        peak_wheel_torque: peak_wheel,
        max_slack,
        friction_violations: violations,
        failure,
    };
    Ok(ScenarioOutcome { log, events, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioKind;

    #[test]
    fn columns_match_rows() {
        let mut cfg = ScenarioConfig::preset(ScenarioKind::Stand);
        cfg.duration = Some(0.02);
        let out = run_scenario(&cfg).unwrap();
        assert!(!out.failed(), "{:?}", out.summary);
        assert_eq!(out.log.rows.len(), 10);
        assert!(out.log.rows.iter().all(|r| r.len() == out.log.columns.len()));
        let mut buf = Vec::new();
        out.log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# wlip sim log v1"));
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn unknown_body_rejected() {
        let mut cfg = ScenarioConfig::preset(ScenarioKind::Impulse);
        cfg.disturbances = Some(vec![Disturbance::Impulse {
            body: "tail".into(),
            start: 0.0,
            duration: 0.01,
            impulse: [1.0, 0.0, 0.0],
        }]);
        assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    }
}
