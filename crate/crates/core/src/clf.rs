//! Riccati-based control Lyapunov function for the wLIP error dynamics.
//!
//! The error state is `x̄ = (ẋ_c^d − ẋ_c, −δ̇x/z, −δx/z)`; dividing the
//! offset terms by the height removes `z` from the system matrix.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ẋ̄ = Ā x̄ + B̄ ū` with `ū` the virtual input on `δ̈x / z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopErrorSystem {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    /// `1 + m_c / m_w`.
    pub coupling: f64,
    pub g: f64,
}

impl ClosedLoopErrorSystem {
    pub fn new(m_c: f64, m_w: f64, g: f64) -> Result<Self> {
        if !(m_c > 0.0 && m_w > 0.0 && g > 0.0) {
            return Err(Error::Input("error system needs positive masses and gravity".into()));
        }
        let c = 1.0 + m_c / m_w;
        Ok(Self {
            a: Matrix3::new(0.0, 0.0, g, 0.0, 0.0, c * g, 0.0, 1.0, 0.0),
            b: Vector3::new(0.0, -1.0, 0.0),
            coupling: c,
            g,
        })
    }
}

/// Error state from the measured wLIP quantities.
pub fn error_state(
    com_velocity_ref: f64,
    com_velocity: f64,
    offset_rate: f64,
    offset: f64,
    z: f64,
) -> Vector3<f64> {
    Vector3::new(com_velocity_ref - com_velocity, -offset_rate / z, -offset / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClfWeights {
    /// Diagonal of the state weight Q.
    pub q: [f64; 3],
    pub r: f64,
}

impl Default for ClfWeights {
    fn default() -> Self {
        Self {
            q: [10.0, 1.0, 1.0],
            r: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClfData {
    pub system: ClosedLoopErrorSystem,
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub r: f64,
    /// LQR gain, `ū = −K x̄`.
    pub gain: Vector3<f64>,
    pub lambda_min_q: f64,
    pub lambda_max_p: f64,
    /// Exponential decay rate `λ_min(Q) / λ_max(P)` of `V`.
    pub gamma: f64,
    pub residual: f64,
}

impl ClfData {
    pub fn new(system: ClosedLoopErrorSystem, q: Matrix3<f64>, r: f64) -> Result<Self> {
        let a = DMatrix::from_column_slice(3, 3, system.a.as_slice());
        let b = DMatrix::from_column_slice(3, 1, system.b.as_slice());
        let qd = DMatrix::from_column_slice(3, 3, q.as_slice());
        let sol = solve_care(&a, &b, &qd, &DMatrix::from_element(1, 1, r))?;
        let p = Matrix3::from_column_slice(sol.p.as_slice());
        let gain = p * system.b / r;
        let lambda_min_q = q.symmetric_eigenvalues().min();
        let lambda_max_p = p.symmetric_eigenvalues().max();
        Ok(Self {
            system,
            p,
            q,
            r,
            gain,
            lambda_min_q,
            lambda_max_p,
            gamma: lambda_min_q / lambda_max_p,
            residual: sol.residual,
        })
    }

    pub fn from_weights(system: ClosedLoopErrorSystem, w: &ClfWeights) -> Result<Self> {
        Self::new(system, Matrix3::from_diagonal(&Vector3::from(w.q)), w.r)
    }

    pub fn lyapunov(&self, x: &Vector3<f64>) -> f64 {
        x.dot(&(self.p * x))
    }

    /// LQR virtual input `−R⁻¹ B̄ᵀ P x̄`.
    pub fn lqr_input(&self, x: &Vector3<f64>) -> f64 {
        -self.gain.dot(x)
    }

    /// Both sides of the decrease condition
    /// `x̄ᵀ(P + Pᵀ)(Āx̄ + B̄ū) ≤ −λ_min(Q)‖x̄‖² + s`.
    pub fn clf_constraint(&self, x: &Vector3<f64>, u: f64, s: f64) -> (f64, f64) {
        let row = self.constraint_row(x);
        (row.input_coeff * u + row.drift, row.bound + s)
    }

    /// The condition as an affine row `input_coeff·ū + drift ≤ bound + s`.
    pub fn constraint_row(&self, x: &Vector3<f64>) -> ClfRow {
        let pp = self.p + self.p.transpose();
        let w = pp * x;
        ClfRow {
            input_coeff: w.dot(&self.system.b),
            drift: w.dot(&(self.system.a * x)),
            bound: -self.lambda_min_q * x.norm_squared(),
        }
    }

    /// Slack required by input `u`, zero when the decrease condition holds.
    pub fn required_slack(&self, x: &Vector3<f64>, u: f64) -> f64 {
        let (lhs, rhs) = self.clf_constraint(x, u, 0.0);
        (lhs - rhs).max(0.0)
    }

    /// Closed-loop matrix `Ā − B̄K`.
    pub fn closed_loop(&self) -> Matrix3<f64> {
        self.system.a - self.system.b * self.gain.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClfRow {
    pub input_coeff: f64,
    pub drift: f64,
    pub bound: f64,
}

/// Desired `δ̈x` that realizes virtual input `ū` on the error dynamics,
/// `δ̈x^d = (1 + m_c/m_w) g δx + z ū` with `δx = −z x̄₃`.
pub fn wlip_balance_target(clf: &ClfData, x: &Vector3<f64>, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Input(format!("balance height must be positive, got {z}")));
    }
    let u = clf.lqr_input(x);
    let dx = -z * x[2];
    Ok(offset_acceleration(&clf.system, dx, z, u))
}

/// `δ̈x` corresponding to virtual input `u` at offset `dx`.
pub fn offset_acceleration(sys: &ClosedLoopErrorSystem, dx: f64, z: f64, u: f64) -> f64 {
    sys.coupling * sys.g * dx + z * u
}

/// Virtual input realized by an offset acceleration `ddx`.
pub fn realized_input(sys: &ClosedLoopErrorSystem, dx: f64, z: f64, ddx: f64) -> f64 {
    (ddx - sys.coupling * sys.g * dx) / z
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub residual: f64,
    pub sign_iterations: usize,
    pub newton_steps: usize,
}

fn care_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a - p * g * p + q).norm()
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
///
/// The stable invariant subspace of the Hamiltonian is extracted with the
/// scaled matrix-sign iteration and polished with Newton (Kleinman) steps.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CareSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.nrows() != b.ncols() || !r.is_square() {
        return Err(Error::Input("inconsistent CARE dimensions".into()));
    }
    if (q - q.transpose()).norm() > 1e-10 * q.norm().max(1.0) {
        return Err(Error::Input("CARE weight Q must be symmetric".into()));
    }
    let r_inv = r.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| {
        Error::Input("CARE weight R must be positive definite".into())
    })?;
    let g = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut z = h;
    let mut iterations = 0;
    let mut converged = false;
    for k in 0..100 {
        iterations = k + 1;
        let inv = z.clone().try_inverse().ok_or_else(|| Error::Numerical {
            routine: "solve_care",
            detail: "Hamiltonian has eigenvalues on the imaginary axis".into(),
            residual: f64::NAN,
        })?;
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() && k < 20 {
            det.powf(-1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let delta = (&next - &z).norm() / next.norm();
        z = next;
        if delta < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical {
            routine: "solve_care",
            detail: format!("sign iteration did not converge in {iterations} steps"),
            residual: f64::NAN,
        });
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Numerical {
            routine: "solve_care",
            detail: format!("subspace solve failed: {e}"),
            residual: f64::NAN,
        })?;
    let mut p = (&p + p.transpose()) * 0.5;
    let mut residual = care_residual(a, &g, q, &p);

    let mut newton_steps = 0;
    for _ in 0..6 {
        if residual < 1e-13 * q.norm().max(1.0) {
            break;
        }
        let k = &r_inv * b.transpose() * &p;
        let ak = a - b * &k;
        let rhs = -(q + k.transpose() * r * &k);
        let Some(next) = solve_lyapunov(&ak, &rhs) else { break };
        let next = (&next + next.transpose()) * 0.5;
        let res = care_residual(a, &g, q, &next);
        if !(res < residual) {
            break;
        }
        p = next;
        residual = res;
        newton_steps += 1;
    }

    let k = &r_inv * b.transpose() * &p;
    let closed = a - b * &k;
    let worst = closed
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(Error::Numerical {
            routine: "solve_care",
            detail: format!("solution is not stabilizing (max real part {worst:.3e}); pair may not be stabilizable"),
            residual,
        });
    }
    if !(residual <= 1e-8) {
        return Err(Error::Numerical {
            routine: "solve_care",
            detail: "residual above tolerance".into(),
            residual,
        });
    }
    Ok(CareSolution {
        p,
        residual,
        sign_iterations: iterations,
        newton_steps,
    })
}

/// Solves `AᵀX + XA = C` through its Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = k.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, q: f64, r: f64) -> Result<CareSolution> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        solve_care(&m(a), &m(b), &m(q), &m(r))
    }

    #[test]
    fn scalar_integrator() {
        let s = scalar(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_unstable_tiny_weight() {
        let s = scalar(1.0, 1.0, 1e-12, 1.0).unwrap();
        // stabilizing root of 2P − P² + q = 0
        let expect = 1.0 + (1.0f64 + 1e-12).sqrt();
        assert!((s.p[(0, 0)] - expect).abs() < 1e-9);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(solve_care(&a, &b, &q, &r), Err(Error::Numerical { .. })));
    }

    #[test]
    fn default_weights_give_stable_loop() {
        let sys = ClosedLoopErrorSystem::new(11.1, 2.0, 9.81).unwrap();
        let clf = ClfData::from_weights(sys, &ClfWeights::default()).unwrap();
        assert!(clf.residual <= 1e-8);
        for e in clf.closed_loop().complex_eigenvalues().iter() {
            assert!(e.re < 0.0);
        }
        assert!(clf.p.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn lyapunov_solve_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let x = solve_lyapunov(&a, &c).unwrap();
        assert!((a.transpose() * &x + &x * &a - c).norm() < 1e-12);
    }

    #[test]
    fn constraint_at_origin() {
        let sys = ClosedLoopErrorSystem::new(11.1, 2.0, 9.81).unwrap();
        let clf = ClfData::from_weights(sys, &ClfWeights::default()).unwrap();
        let (lhs, rhs) = clf.clf_constraint(&Vector3::zeros(), 3.0, 0.0);
        assert_eq!((lhs, rhs), (0.0, 0.0));
    }

    #[test]
    fn balance_target_signs() {
        let sys = ClosedLoopErrorSystem::new(11.1, 2.0, 9.81).unwrap();
        let clf = ClfData::from_weights(sys, &ClfWeights::default()).unwrap();
        assert_eq!(wlip_balance_target(&clf, &Vector3::zeros(), 0.3).unwrap(), 0.0);
        assert!(offset_acceleration(&sys, 0.01, 0.3, 0.0) > 0.0);
        assert!(wlip_balance_target(&clf, &Vector3::zeros(), 0.0).is_err());
        let u = 1.7;
        let ddx = offset_acceleration(&sys, 0.02, 0.3, u);
        assert!((realized_input(&sys, 0.02, 0.3, ddx) - u).abs() < 1e-12);
    }
}
