//! Direct transcription of the wheel-deceleration optimal control problem
//! for the wLIP and the WIP, solved as one QP and by SQP respectively.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{solve_bounded, ActiveSetSettings, QpProblem, QpStatus};
use crate::reduced::{wip_dynamics, wlip_matrices, WipParams, WipState, WlipParams};

pub const NX: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcpModel {
    /// State `[θ̇, ẋ_w, θ, x_w]`.
    Wip,
    /// State `[δ̇x, ẋ_c, δx, x_c]`.
    Wlip,
}

impl OcpModel {
    pub fn name(self) -> &'static str {
        match self {
            OcpModel::Wip => "wip",
            OcpModel::Wlip => "wlip",
        }
    }
}

/// Physical parameters shared by both models. The wLIP height and the WIP
/// link length are the same `l`; `I_c = m_c l²/3` and `I_w = m_w r²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub m_c: f64,
    pub m_w: f64,
    pub r_w: f64,
    pub l: f64,
    pub g: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m_c: 10.0,
            m_w: 2.0,
            r_w: 0.1,
            l: 0.35,
            g: crate::GRAVITY,
        }
    }
}

impl ModelParams {
    pub fn wlip(&self) -> WlipParams {
        WlipParams {
            m_c: self.m_c,
            m_w: self.m_w,
            r_w: self.r_w,
            z: self.l,
            g: self.g,
        }
    }

    pub fn wip(&self) -> WipParams {
        WipParams {
            m_c: self.m_c,
            m_w: self.m_w,
            l: self.l,
            i_c: self.m_c * self.l * self.l / 3.0,
            i_w: 0.5 * self.m_w * self.r_w * self.r_w,
            r_w: self.r_w,
            g: self.g,
        }
    }

    /// `(m_c, m_w, l)` scaled by the given factors.
    pub fn scaled(&self, f: [f64; 3]) -> Self {
        Self {
            m_c: self.m_c * f[0],
            m_w: self.m_w * f[1],
            l: self.l * f[2],
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub model: OcpModel,
    pub params: ModelParams,
    pub horizon: f64,
    pub steps: usize,
    pub q: Matrix4<f64>,
    pub r: f64,
    pub q_terminal: Matrix4<f64>,
    pub input_limit: f64,
    pub initial: Vector4<f64>,
}

impl OcpSpec {
    /// The deceleration study: 1.5 s from −2 m/s with a 5 N·m wheel limit.
    pub fn study(model: OcpModel, params: ModelParams) -> Self {
        Self {
            model,
            params,
            horizon: 1.5,
            steps: 150,
            q: Matrix4::from_diagonal(&Vector4::new(1e-2, 5.0, 0.0, 0.0)),
            r: match model {
                OcpModel::Wlip => 0.5,
                OcpModel::Wip => 0.23,
            },
            q_terminal: Matrix4::from_diagonal(&Vector4::new(10.0, 1.0, 10.0, 0.0)),
            input_limit: 5.0,
            initial: Vector4::new(0.0, -2.0, 0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Input(format!("need at least 2 steps, got {}", self.steps)));
        }
        if !(self.horizon > 0.0) || !(self.input_limit > 0.0) || !(self.r >= 0.0) {
            return Err(Error::Input("horizon and input limit must be positive, R non-negative".into()));
        }
        for (name, m) in [("Q", &self.q), ("Q_e", &self.q_terminal)] {
            if (m - m.transpose()).amax() > 1e-12 {
                return Err(Error::Input(format!("{name} is not symmetric")));
            }
            let min = m.symmetric_eigenvalues().min();
            if min < -1e-12 * m.amax().max(1.0) {
                return Err(Error::Input(format!("{name} is not positive semidefinite (λ_min = {min:e})")));
            }
        }
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("initial state must be finite".into()));
        }
        match self.model {
            OcpModel::Wlip => self.params.wlip().validate(),
            OcpModel::Wip => self.params.wip().validate(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn num_vars(&self) -> usize {
        (NX + 1) * (self.steps + 1)
    }

    fn xi(&self, k: usize) -> usize {
        NX * k
    }

    fn ui(&self, k: usize) -> usize {
        NX * (self.steps + 1) + k
    }
}

/// Continuous dynamics `f(x, u)` with its Jacobians.
pub fn model_dynamics(spec: &OcpSpec, x: &Vector4<f64>, u: f64) -> Result<(Vector4<f64>, Matrix4<f64>, Vector4<f64>)> {
    match spec.model {
        OcpModel::Wlip => {
            let (a3, b3) = wlip_matrices(&spec.params.wlip())?;
            // reorder (ẋ_c, δ̇x, δx) into [δ̇x, ẋ_c, δx, x_c]
            let map = [1usize, 0, 2];
            let mut a = Matrix4::zeros();
            let mut b = Vector4::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    a[(map[i], map[j])] = a3[(i, j)];
                }
                b[map[i]] = b3[i];
            }
            a[(3, 1)] = 1.0;
            Ok((a * x + b * u, a, b))
        }
        OcpModel::Wip => {
            let p = spec.params.wip();
            let f = |x: &Vector4<f64>, u: f64| wip_dynamics(&p, &WipState::from_vector(x), u);
            let f0 = f(x, u)?;
            let mut a = Matrix4::zeros();
            for j in 0..NX {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut xp = *x;
                let mut xm = *x;
                xp[j] += h;
                xm[j] -= h;
                a.set_column(j, &((f(&xp, u)? - f(&xm, u)?) / (2.0 * h)));
            }
            let hu = 1e-6 * (1.0 + u.abs());
            let b = (f(x, u + hu)? - f(x, u - hu)?) / (2.0 * hu);
            Ok((f0, a, b))
        }
    }
}

/// The transcribed program: quadratic cost, trapezoidal defects and input
/// bounds over `z = [x_0 … x_N, u_0 … u_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcription {
    pub hessian: DMatrix<f64>,
    /// Quadrature weight of each node.
    pub weights: Vec<f64>,
}

pub fn transcribe(spec: &OcpSpec) -> Result<Transcription> {
    spec.validate()?;
    let n = spec.num_vars();
    let h = spec.dt();
    let mut weights = vec![h; spec.steps + 1];
    weights[0] = h / 2.0;
    weights[spec.steps] = h / 2.0;
    let mut hess = DMatrix::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        let xi = spec.xi(k);
        let mut block = spec.q * (2.0 * w);
        if k == spec.steps {
            block += spec.q_terminal * 2.0;
        }
        hess.view_mut((xi, xi), (NX, NX)).copy_from(&block);
        let ui = spec.ui(k);
        hess[(ui, ui)] = 2.0 * w * spec.r;
    }
    Ok(Transcription { hessian: hess, weights })
}

impl Transcription {
    pub fn cost(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z))
    }
}

fn state(spec: &OcpSpec, z: &DVector<f64>, k: usize) -> Vector4<f64> {
    Vector4::from_iterator(z.rows(spec.xi(k), NX).iter().copied())
}

/// Initial-state rows followed by the trapezoidal defects, with their
/// Jacobian over `z`.
pub fn constraints(spec: &OcpSpec, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = spec.num_vars();
    let m = NX * (spec.steps + 1);
    let h = spec.dt();
    let mut c = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    let x0 = state(spec, z, 0);
    c.rows_mut(0, NX).copy_from(&(x0 - spec.initial));
    jac.view_mut((0, 0), (NX, NX)).copy_from(&Matrix4::identity());
    let mut f = Vec::with_capacity(spec.steps + 1);
    for k in 0..=spec.steps {
        f.push(model_dynamics(spec, &state(spec, z, k), z[spec.ui(k)])?);
    }
    let eye = Matrix4::<f64>::identity();
    for k in 0..spec.steps {
        let row = NX * (k + 1);
        let (fk, ak, bk) = &f[k];
        let (fk1, ak1, bk1) = &f[k + 1];
        let d = state(spec, z, k + 1) - state(spec, z, k) - (fk + fk1) * (h / 2.0);
        c.rows_mut(row, NX).copy_from(&d);
        jac.view_mut((row, spec.xi(k)), (NX, NX)).copy_from(&(-eye - ak * (h / 2.0)));
        jac.view_mut((row, spec.xi(k + 1)), (NX, NX)).copy_from(&(eye - ak1 * (h / 2.0)));
        jac.view_mut((row, spec.ui(k)), (NX, 1)).copy_from(&(-bk * (h / 2.0)));
        jac.view_mut((row, spec.ui(k + 1)), (NX, 1)).copy_from(&(-bk1 * (h / 2.0)));
    }
    Ok((c, jac))
}

fn input_rows(spec: &OcpSpec) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = spec.num_vars();
    let m = spec.steps + 1;
    let mut a = DMatrix::zeros(m, n);
    for k in 0..m {
        a[(k, spec.ui(k))] = 1.0;
    }
    let lim = spec.input_limit;
    (a, DVector::from_element(m, -lim), DVector::from_element(m, lim))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcpSolution {
    pub model: OcpModel,
    pub times: Vec<f64>,
    pub states: Vec<[f64; NX]>,
    pub inputs: Vec<f64>,
    pub cost: f64,
    pub stopping_distance: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub max_defect: f64,
    pub converged: bool,
    pub warning: Option<String>,
}

impl OcpSolution {
    /// Horizontal CoM position at node `k`.
    pub fn com_position(&self, k: usize, params: &ModelParams) -> f64 {
        let x = &self.states[k];
        match self.model {
            OcpModel::Wlip => x[3],
            OcpModel::Wip => x[3] + params.l * x[2].sin(),
        }
    }

    /// Horizontal CoM velocity at node `k`.
    pub fn com_velocity(&self, k: usize, params: &ModelParams) -> f64 {
        let x = &self.states[k];
        match self.model {
            OcpModel::Wlip => x[1],
            OcpModel::Wip => x[1] + params.l * x[2].cos() * x[0],
        }
    }

    pub fn terminal_com_velocity(&self, params: &ModelParams) -> f64 {
        self.com_velocity(self.states.len() - 1, params)
    }

    /// First and last time of the initial run of nodes with `|u|` at the
    /// limit, or `None` when the first node is not saturated.
    pub fn saturation_window(&self, limit: f64, tol: f64) -> Option<(f64, f64)> {
        let sat = |u: f64| u.abs() >= limit - tol;
        if !sat(self.inputs[0]) {
            return None;
        }
        let last = self.inputs.iter().take_while(|&&u| sat(u)).count() - 1;
        Some((self.times[0], self.times[last]))
    }

    /// Whether any node with `t ∈ [t0, t1]` has `|u|` at the limit.
    pub fn saturates_within(&self, t0: f64, t1: f64, limit: f64, tol: f64) -> bool {
        self.times
            .iter()
            .zip(&self.inputs)
            .any(|(&t, &u)| t >= t0 - 1e-12 && t <= t1 + 1e-12 && u.abs() >= limit - tol)
    }

    pub fn write_csv<W: Write>(&self, out: W, params: &ModelParams) -> Result<()> {
        let mut out = out;
        writeln!(out, "# wlip trajectory v1; model {}; SI units", self.model.name())?;
        let names: [&str; NX] = match self.model {
            OcpModel::Wip => ["theta_rate", "wheel_velocity", "theta", "wheel_position"],
            OcpModel::Wlip => ["offset_rate", "com_velocity", "offset", "com_position"],
        };
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["t"];
        header.extend(names);
        header.extend(["u", "com_x", "com_vx"]);
        w.write_record(&header).map_err(io)?;
        for k in 0..self.times.len() {
            let mut rec = vec![self.times[k]];
            rec.extend(self.states[k]);
            rec.extend([self.inputs[k], self.com_position(k, params), self.com_velocity(k, params)]);
            w.write_record(rec.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|x_c(T) − x_c(0)|` of the CoM for either model.
pub fn stopping_distance(sol: &OcpSolution, params: &ModelParams) -> f64 {
    let n = sol.states.len() - 1;
    (sol.com_position(n, params) - sol.com_position(0, params)).abs()
}

/// Solver knobs of [`solve_ocp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcpSettings {
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub defect_tol: f64,
    pub qp: ActiveSetSettings,
}

impl Default for OcpSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            kkt_tol: 1e-6,
            defect_tol: 1e-9,
            qp: ActiveSetSettings::default(),
        }
    }
}

/// Linear interpolation of the initial velocity to rest; inputs zero.
pub fn default_guess(spec: &OcpSpec) -> DVector<f64> {
    let mut z = DVector::zeros(spec.num_vars());
    let n = spec.steps;
    let mut pos = spec.initial[3];
    for k in 0..=n {
        let s = 1.0 - k as f64 / n as f64;
        let v = spec.initial[1] * s;
        if k > 0 {
            pos += 0.5 * (v + spec.initial[1] * (1.0 - (k - 1) as f64 / n as f64)) * spec.dt();
        }
        let x = Vector4::new(spec.initial[0] * s, v, spec.initial[2] * s, pos);
        z.rows_mut(spec.xi(k), NX).copy_from(&x);
    }
    z
}

pub fn solve_ocp(spec: &OcpSpec) -> Result<OcpSolution> {
    solve_ocp_from(spec, &default_guess(spec), &OcpSettings::default())
}

struct Kkt {
    stationarity: f64,
    defect: f64,
    bound: f64,
}

impl Kkt {
    fn residual(&self) -> f64 {
        self.stationarity.max(self.defect).max(self.bound)
    }
}

fn kkt(
    spec: &OcpSpec,
    tr: &Transcription,
    z: &DVector<f64>,
    c: &DVector<f64>,
    jac: &DMatrix<f64>,
    y_eq: &DVector<f64>,
    y_in: &DVector<f64>,
) -> Kkt {
    let (a_in, _, _) = input_rows(spec);
    let grad = &tr.hessian * z + jac.transpose() * y_eq + a_in.transpose() * y_in;
    let lim = spec.input_limit;
    let mut bound: f64 = 0.0;
    for k in 0..=spec.steps {
        let u = z[spec.ui(k)];
        bound = bound.max((u.abs() - lim).max(0.0));
        // multiplier sign must match the active side; off the bound it must vanish
        let y = y_in[k];
        let slack = if y >= 0.0 { lim - u } else { u + lim };
        bound = bound.max((y.abs() * slack).abs());
    }
    Kkt {
        stationarity: grad.amax(),
        defect: c.amax(),
        bound,
    }
}

/// Solves from the initial guess `z0`. The wLIP program is a single QP; the
/// WIP program runs SQP with an ℓ1 merit line search and returns the best
/// iterate with a warning when it runs out of iterations.
pub fn solve_ocp_from(spec: &OcpSpec, z0: &DVector<f64>, settings: &OcpSettings) -> Result<OcpSolution> {
    let tr = transcribe(spec)?;
    let n = spec.num_vars();
    if z0.len() != n {
        return Err(Error::Dimension {
            what: "initial guess",
            expected: n,
            got: z0.len(),
        });
    }
    let (a_in, lb, ub) = input_rows(spec);
    let mut z = z0.clone();
    for k in 0..=spec.steps {
        let i = spec.ui(k);
        z[i] = z[i].clamp(-spec.input_limit, spec.input_limit);
    }

    let mut y_in = DVector::zeros(spec.steps + 1);
    let mut iterations = 0;
    let mut converged = false;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut penalty: f64 = 1.0;

    for it in 0..settings.max_iter.max(1) {
        iterations = it + 1;
        let (c, jac) = constraints(spec, &z)?;
        // QP in the step: min ½ΔᵀHΔ + (Hz)ᵀΔ s.t. c + JΔ = 0, bounds on u + Δu
        let g = &tr.hessian * &z;
        let u_now = &a_in * &z;
        let problem = QpProblem::new(tr.hessian.clone(), g)
            .with_equalities(jac.clone(), -&c)
            .with_inequalities(a_in.clone(), &lb - &u_now, &ub - &u_now);
        let sol = solve_bounded(&problem, Some((&DVector::zeros(n), &y_in)), &settings.qp)?;
        if sol.status != QpStatus::Solved && sol.primal_residual > 1e-6 {
            return Err(Error::Numerical {
                routine: "solve_ocp",
                detail: format!("QP subproblem ended with {:?}", sol.status),
                residual: sol.primal_residual,
            });
        }
        let step = sol.x.clone();
        let y_eq = sol.y_eq.clone();
        let y_in_new = sol.y_in.clone();

        let accepted = match spec.model {
            OcpModel::Wlip => {
                // linear constraints: the QP step is the global optimum
                let mut z_new = &z + &step;
                for k in 0..=spec.steps {
                    let i = spec.ui(k);
                    z_new[i] = z_new[i].clamp(-spec.input_limit, spec.input_limit);
                }
                z_new
            }
            OcpModel::Wip => {
                penalty = penalty.max(1.1 * y_eq.amax() + 1e-3);
                let merit = |zz: &DVector<f64>| -> Result<f64> {
                    let (cc, _) = constraints(spec, zz)?;
                    Ok(tr.cost(zz) + penalty * cc.abs().sum())
                };
                let phi0 = tr.cost(&z) + penalty * c.abs().sum();
                let slope = (&tr.hessian * &z).dot(&step) - penalty * c.abs().sum();
                let mut alpha = 1.0;
                let mut z_new = &z + &step;
                for _ in 0..30 {
                    z_new = &z + &step * alpha;
                    if merit(&z_new)? <= phi0 + 1e-4 * alpha * slope.min(0.0) {
                        break;
                    }
                    alpha *= 0.5;
                }
                z_new
            }
        };
        z = accepted;
        y_in = y_in_new;
        let (c_new, jac_new) = constraints(spec, &z)?;
        let k = kkt(spec, &tr, &z, &c_new, &jac_new, &y_eq, &y_in);
        let res = k.residual();
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, z.clone()));
        }
        if k.stationarity <= settings.kkt_tol && k.defect <= settings.defect_tol && k.bound <= settings.kkt_tol {
            converged = true;
            break;
        }
    }

    let (kkt_residual, z) = best.expect("at least one iteration");
    let (c, _) = constraints(spec, &z)?;
    let max_defect = c.rows(NX, NX * spec.steps).amax();
    let warning = (!converged).then(|| {
        format!("{} did not reach the KKT tolerance in {iterations} iterations (residual {kkt_residual:.3e})", spec.model.name())
    });
    let times: Vec<f64> = (0..=spec.steps).map(|k| k as f64 * spec.dt()).collect();
    let states: Vec<[f64; NX]> = (0..=spec.steps)
        .map(|k| {
            let x = state(spec, &z, k);
            [x[0], x[1], x[2], x[3]]
        })
        .collect();
    let inputs: Vec<f64> = (0..=spec.steps).map(|k| z[spec.ui(k)]).collect();
    let mut out = OcpSolution {
        model: spec.model,
        times,
        states,
        inputs,
        cost: tr.cost(&z),
        stopping_distance: 0.0,
        iterations,
        kkt_residual,
        max_defect,
        converged,
        warning,
    };
    out.stopping_distance = stopping_distance(&out, &spec.params);
    Ok(out)
}

/// Checks of the deceleration comparison at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyVerdict {
    pub factors: [f64; 3],
    pub params: ModelParams,
    pub wlip_distance: f64,
    pub wip_distance: f64,
    pub wlip_terminal_velocity: f64,
    pub wip_terminal_velocity: f64,
    pub wlip_saturation: Option<(f64, f64)>,
    pub wip_saturation: Option<(f64, f64)>,
    /// Both inputs reach the limit within the first 0.1 s.
    pub saturates: bool,
    /// Both CoM speeds below 0.05 m/s at the horizon.
    pub stops: bool,
    /// The wLIP stops in a shorter distance.
    pub shorter: bool,
}

impl StudyVerdict {
    pub fn passed(&self) -> bool {
        self.saturates && self.stops && self.shorter
    }
}

pub const SATURATION_TOL: f64 = 1e-6;
pub const STOP_SPEED: f64 = 0.05;
pub const SATURATION_WINDOW: f64 = 0.1;

pub fn study_point(params: ModelParams, factors: [f64; 3]) -> Result<(StudyVerdict, OcpSolution, OcpSolution)> {
    let p = params.scaled(factors);
    let wlip_spec = OcpSpec::study(OcpModel::Wlip, p);
    let wip_spec = OcpSpec::study(OcpModel::Wip, p);
    let wlip = solve_ocp(&wlip_spec)?;
    let wip = solve_ocp(&wip_spec)?;
    let lim = wlip_spec.input_limit;
    let verdict = StudyVerdict {
        factors,
        params: p,
        wlip_distance: wlip.stopping_distance,
        wip_distance: wip.stopping_distance,
        wlip_terminal_velocity: wlip.terminal_com_velocity(&p),
        wip_terminal_velocity: wip.terminal_com_velocity(&p),
        wlip_saturation: wlip.saturation_window(lim, SATURATION_TOL),
        wip_saturation: wip.saturation_window(lim, SATURATION_TOL),
        saturates: wlip.saturates_within(0.0, SATURATION_WINDOW, lim, SATURATION_TOL)
            && wip.saturates_within(0.0, SATURATION_WINDOW, lim, SATURATION_TOL),
        stops: wlip.terminal_com_velocity(&p).abs() < STOP_SPEED && wip.terminal_com_velocity(&p).abs() < STOP_SPEED,
        shorter: wlip.stopping_distance < wip.stopping_distance,
    };
    Ok((verdict, wlip, wip))
}

/// The 27 combinations of `(m_c, m_w, l)` at 50 %, 100 % and 150 %.
pub fn sweep_factors() -> Vec<[f64; 3]> {
    let f = [0.5, 1.0, 1.5];
    let mut out = Vec::with_capacity(27);
    for a in f {
        for b in f {
            for c in f {
                out.push([a, b, c]);
            }
        }
    }
    out
}
