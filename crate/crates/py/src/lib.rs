//! Python bindings. Vectors and matrices cross the boundary as lists and
//! lists of rows.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wlip_core::clf::{ClfData, ClosedLoopErrorSystem};
use wlip_core::config::ScenarioConfig;
use wlip_core::design::{self, DesignParams, LinkLengths};
use wlip_core::qp::{solve_qp as core_solve_qp, QpProblem};
use wlip_core::reduced::{wlip_controllability, wlip_matrices as core_wlip_matrices, WlipParams};
use wlip_core::robot::{Robot as CoreRobot, RobotParams};
use wlip_core::trajopt::{solve_ocp, ModelParams, OcpModel, OcpSpec, SATURATION_TOL};

fn err(e: wlip_core::Error) -> PyErr {
    match e {
        wlip_core::Error::Config(_) | wlip_core::Error::Input(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> PyResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("every row needs {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn vector(v: &[f64], n: usize, name: &str) -> PyResult<DVector<f64>> {
    if v.len() != n {
        return Err(PyValueError::new_err(format!("{name} needs {n} entries, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

/// `(L1/LH, L2/LH)` for thigh-side mass `m` and base mass `big_m`.
#[pyfunction]
fn solve_moment_arms(m: f64, big_m: f64) -> PyResult<(f64, f64)> {
    design::solve_moment_arms(m, big_m).map_err(err)
}

/// Pelvis inverse kinematics of the preset robot at hip height `z_d`.
#[pyfunction]
fn pelvis_ik<'py>(py: Python<'py>, z_d: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = RobotParams::preset();
    let s = design::pelvis_ik(z_d, &LinkLengths::of(&p), &DesignParams::of(&p).map_err(err)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("hip_height", s.hip_height)?;
    d.set_item("thigh_pitch", s.thigh_pitch)?;
    d.set_item("shank_pitch", s.shank_pitch)?;
    d.set_item("pelvis_pitch", s.pelvis_pitch)?;
    d.set_item("pelvis_saturated", s.pelvis_saturated)?;
    d.set_item("com_violation", s.com_violation)?;
    Ok(d)
}

/// `(A, B)` of the wLIP in state order `(ẋ_c, δ̇x, δx)`.
#[pyfunction]
#[pyo3(signature = (m_c, m_w, r_w, z, g = 9.81))]
fn wlip_matrices(m_c: f64, m_w: f64, r_w: f64, z: f64, g: f64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let (a, b) = core_wlip_matrices(&WlipParams { m_c, m_w, r_w, z, g }).map_err(err)?;
    let a = DMatrix::from_column_slice(3, 3, a.as_slice());
    Ok((rows(&a), b.iter().copied().collect()))
}

#[pyfunction]
#[pyo3(signature = (m_c, m_w, r_w, z, g = 9.81))]
fn controllability_rank(m_c: f64, m_w: f64, r_w: f64, z: f64, g: f64) -> PyResult<usize> {
    let (a, b) = core_wlip_matrices(&WlipParams { m_c, m_w, r_w, z, g }).map_err(err)?;
    Ok(wlip_controllability(&a, &b))
}

/// Riccati-based CLF of the wLIP error system.
#[pyclass(frozen)]
struct Clf {
    inner: ClfData,
}

#[pymethods]
impl Clf {
    #[new]
    #[pyo3(signature = (m_c, m_w, q = [10.0, 1.0, 1.0], r = 1e-3, g = 9.81))]
    fn new(m_c: f64, m_w: f64, q: [f64; 3], r: f64, g: f64) -> PyResult<Self> {
        let system = ClosedLoopErrorSystem::new(m_c, m_w, g).map_err(err)?;
        let inner = ClfData::new(system, Matrix3::from_diagonal(&Vector3::from(q)), r).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn p(&self) -> Vec<Vec<f64>> {
        rows(&DMatrix::from_column_slice(3, 3, self.inner.p.as_slice()))
    }

    #[getter]
    fn gain(&self) -> Vec<f64> {
        self.inner.gain.iter().copied().collect()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    fn lyapunov(&self, x: [f64; 3]) -> f64 {
        self.inner.lyapunov(&Vector3::from(x))
    }

    fn lqr_input(&self, x: [f64; 3]) -> f64 {
        self.inner.lqr_input(&Vector3::from(x))
    }
}

/// `min ½xᵀHx + gᵀx` s.t. `A_eq x = b_eq`, `lb ≤ A_in x ≤ ub`.
#[pyfunction]
#[pyo3(signature = (h, g, a_eq = None, b_eq = None, a_in = None, lb = None, ub = None, tol = 1e-6, max_iter = 4000))]
#[allow(clippy::too_many_arguments)]
fn solve_qp<'py>(
    py: Python<'py>,
    h: Vec<Vec<f64>>,
    g: Vec<f64>,
    a_eq: Option<Vec<Vec<f64>>>,
    b_eq: Option<Vec<f64>>,
    a_in: Option<Vec<Vec<f64>>>,
    lb: Option<Vec<f64>>,
    ub: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = g.len();
    let mut p = QpProblem::new(matrix(&h, n)?, DVector::from_vec(g));
    if let Some(a) = a_eq {
        let b = b_eq.ok_or_else(|| PyValueError::new_err("a_eq needs b_eq"))?;
        p = p.with_equalities(matrix(&a, n)?, vector(&b, a.len(), "b_eq")?);
    }
    if let Some(a) = a_in {
        let m = a.len();
        let lb = lb.unwrap_or_else(|| vec![f64::NEG_INFINITY; m]);
        let ub = ub.unwrap_or_else(|| vec![f64::INFINITY; m]);
        p = p.with_inequalities(matrix(&a, n)?, vector(&lb, m, "lb")?, vector(&ub, m, "ub")?);
    }
    let s = core_solve_qp(&p, tol, tol, max_iter).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", s.x.iter().copied().collect::<Vec<_>>())?;
    d.set_item("status", format!("{:?}", s.status))?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("stationarity", s.stationarity(&p))?;
    Ok(d)
}

/// Preset robot model.
#[pyclass(frozen)]
struct Robot {
    inner: CoreRobot,
}

#[pymethods]
impl Robot {
    #[new]
    fn new() -> Self {
        Self {
            inner: CoreRobot::preset(),
        }
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.params.total_mass()
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.tree.dof()
    }

    fn mass_matrix(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let q = vector(&q, self.dof(), "q")?;
        Ok(rows(&self.inner.tree.mass_matrix(&q).map_err(err)?))
    }

    #[pyo3(signature = (q, qd, qdd, gravity = 9.81))]
    fn inverse_dynamics(&self, q: Vec<f64>, qd: Vec<f64>, qdd: Vec<f64>, gravity: f64) -> PyResult<Vec<f64>> {
        let n = self.dof();
        let tau = self
            .inner
            .tree
            .inverse_dynamics(&vector(&q, n, "q")?, &vector(&qd, n, "qd")?, &vector(&qdd, n, "qdd")?, gravity)
            .map_err(err)?;
        Ok(tau.iter().copied().collect())
    }
}

/// Result of a closed-loop scenario run.
#[pyclass(frozen)]
struct Outcome {
    #[pyo3(get)]
    columns: Vec<String>,
    #[pyo3(get)]
    rows: Vec<Vec<f64>>,
    #[pyo3(get)]
    failure: Option<String>,
    #[pyo3(get)]
    final_error_norm: f64,
    #[pyo3(get)]
    max_slack: f64,
    #[pyo3(get)]
    friction_violations: usize,
}

#[pymethods]
impl Outcome {
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PyValueError::new_err(format!("no column {name}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Runs a scenario given as TOML text.
#[pyfunction]
#[pyo3(signature = (config, duration = None, seed = None))]
fn run_scenario(py: Python<'_>, config: &str, duration: Option<f64>, seed: Option<u64>) -> PyResult<Outcome> {
    let mut cfg = ScenarioConfig::from_toml_str(config).map_err(err)?;
    if duration.is_some() {
        cfg.duration = duration;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = py.detach(|| wlip_core::scenario::run_scenario(&cfg)).map_err(err)?;
    Ok(Outcome {
        columns: out.log.columns,
        rows: out.log.rows,
        failure: out.summary.failure,
        final_error_norm: out.summary.final_error_norm,
        max_slack: out.summary.max_slack,
        friction_violations: out.summary.friction_violations,
    })
}

/// Deceleration optimum of `"wlip"` or `"wip"` at the default parameters.
#[pyfunction]
fn to_study<'py>(py: Python<'py>, model: &str) -> PyResult<Bound<'py, PyDict>> {
    let m = match model {
        "wlip" => OcpModel::Wlip,
        "wip" => OcpModel::Wip,
        other => return Err(PyValueError::new_err(format!("model must be 'wlip' or 'wip', got '{other}'"))),
    };
    let params = ModelParams::default();
    let spec = OcpSpec::study(m, params);
    let sol = py.detach(|| solve_ocp(&spec)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("converged", sol.converged)?;
    d.set_item("cost", sol.cost)?;
    d.set_item("stopping_distance", sol.stopping_distance)?;
    d.set_item("terminal_com_velocity", sol.terminal_com_velocity(&params))?;
    d.set_item("saturation_window", sol.saturation_window(spec.input_limit, SATURATION_TOL))?;
    d.set_item("times", sol.times.clone())?;
    d.set_item("inputs", sol.inputs.clone())?;
    Ok(d)
}

#[pymodule]
fn wlip(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve_moment_arms, m)?)?;
    m.add_function(wrap_pyfunction!(pelvis_ik, m)?)?;
    m.add_function(wrap_pyfunction!(wlip_matrices, m)?)?;
    m.add_function(wrap_pyfunction!(controllability_rank, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(to_study, m)?)?;
    m.add_class::<Clf>()?;
    m.add_class::<Robot>()?;
    m.add_class::<Outcome>()?;
    Ok(())
}
