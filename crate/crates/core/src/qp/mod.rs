//! Dense convex QP solver based on the alternating direction method of
//! multipliers, in the operator-splitting form
//!
//! ```text
//! minimize   ½ xᵀHx + gᵀx
//! subject to A_eq x = b_eq,  lb ≤ A_in x ≤ ub
//! ```
//!
//! with Ruiz equilibration, per-row step sizes (stiffer on equality rows),
//! step-size adaptation, infeasibility detection and an active-set polish.
//! Large sparse problems with simple bounds go to [`solve_bounded`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod active_set;
mod envelope;

pub use active_set::{solve_bounded, ActiveSetSettings};

const INF: f64 = 1e20;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem with `n` variables.
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            lb: DVector::zeros(0),
            ub: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.a_in = a;
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.g.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        let n = self.g.len();
        let scale = self.h.amax().max(1.0);
        let check = &self.h + DMatrix::identity(n, n) * (1e-9 * scale);
        if check.cholesky().is_none() {
            return Err(Error::Input("QP Hessian is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Shapes, symmetry and bound ordering, without the definiteness test.
    pub fn check_shapes(&self) -> Result<()> {
        let n = self.g.len();
        let shape_err = |what: &str| Err(Error::Input(format!("QP {what} has inconsistent shape")));
        if self.h.shape() != (n, n) {
            return shape_err("Hessian");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return shape_err("equality block");
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.lb.len() || self.lb.len() != self.ub.len() {
            return shape_err("inequality block");
        }
        let scale = self.h.amax().max(1.0);
        if (&self.h - self.h.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Input("QP Hessian is not symmetric".into()));
        }
        for i in 0..self.lb.len() {
            if self.lb[i] > self.ub[i] {
                return Err(Error::Input(format!("QP row {i} has lb > ub")));
            }
        }
        Ok(())
    }

    /// Largest violation of the equality and inequality rows at `x`.
    pub fn constraint_violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_eq.nrows() > 0 {
            v = v.max((&self.a_eq * x - &self.b_eq).amax());
        }
        if self.a_in.nrows() > 0 {
            let ax = &self.a_in * x;
            for i in 0..ax.len() {
                v = v.max(self.lb[i] - ax[i]).max(ax[i] - self.ub[i]);
            }
        }
        v
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    /// Multipliers of the inequality rows; positive at an active upper bound.
    pub y_in: DVector<f64>,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

impl QpSolution {
    /// `‖Hx + g + A_eqᵀλ + A_inᵀμ‖∞`.
    pub fn stationarity(&self, p: &QpProblem) -> f64 {
        let r = &p.h * &self.x + &p.g + p.a_eq.transpose() * &self.y_eq + p.a_in.transpose() * &self.y_in;
        r.amax()
    }

    /// Largest `|μ_i|·slack_i` over inequality rows.
    pub fn complementarity(&self, p: &QpProblem) -> f64 {
        let ax = &p.a_in * &self.x;
        (0..ax.len())
            .map(|i| {
                let mu = self.y_in[i];
                let slack = if mu > 0.0 { p.ub[i] - ax[i] } else { ax[i] - p.lb[i] };
                (mu * slack).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Diagonal regularization added to H.
    pub regularization: f64,
    pub scaling_iters: usize,
    pub adapt_interval: usize,
    pub polish: bool,
    pub eps_infeasible: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            regularization: 1e-9,
            scaling_iters: 10,
            adapt_interval: 25,
            polish: true,
            eps_infeasible: 1e-7,
        }
    }
}

/// Solves a QP with default settings.
pub fn solve_qp(p: &QpProblem, tol_abs: f64, tol_rel: f64, max_iter: usize) -> Result<QpSolution> {
    let settings = QpSettings {
        eps_abs: tol_abs,
        eps_rel: tol_rel,
        max_iter,
        ..QpSettings::default()
    };
    QpSolver::new(settings).solve(p)
}

/// Solver instance holding settings and the warm-start iterate.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
    warm: Option<(DVector<f64>, DVector<f64>)>,
}

struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings, warm: None }
    }

    /// Seeds the next solve with primal `x` and stacked multipliers `y`
    /// (equality rows first).
    pub fn warm_start(&mut self, x: DVector<f64>, y: DVector<f64>) {
        self.warm = Some((x, y));
    }

    pub fn clear_warm_start(&mut self) {
        self.warm = None;
    }

    /// Solves `p`; the result seeds the next call.
    pub fn solve(&mut self, p: &QpProblem) -> Result<QpSolution> {
        p.validate()?;
        let sol = self.solve_inner(p);
        let mut y = DVector::zeros(sol.y_eq.len() + sol.y_in.len());
        y.rows_mut(0, sol.y_eq.len()).copy_from(&sol.y_eq);
        y.rows_mut(sol.y_eq.len(), sol.y_in.len()).copy_from(&sol.y_in);
        self.warm = Some((sol.x.clone(), y));
        Ok(sol)
    }

    fn solve_inner(&self, prob: &QpProblem) -> QpSolution {
        let s = &self.settings;
        let n = prob.num_vars();
        let meq = prob.a_eq.nrows();
        let m = meq + prob.a_in.nrows();
        let mut a = DMatrix::zeros(m, n);
        a.rows_mut(0, meq).copy_from(&prob.a_eq);
        a.rows_mut(meq, m - meq).copy_from(&prob.a_in);
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        for i in 0..meq {
            l[i] = prob.b_eq[i];
            u[i] = prob.b_eq[i];
        }
        for i in 0..prob.lb.len() {
            l[meq + i] = prob.lb[i].max(-INF);
            u[meq + i] = prob.ub[i].min(INF);
        }
        let mut h = prob.h.clone();
        for i in 0..n {
            h[(i, i)] += s.regularization;
        }
        let sc = ruiz_scale(&h, &prob.g, &a, &l, &u, s.scaling_iters);

        let row_kind: Vec<RowKind> = (0..m)
            .map(|i| {
                if l[i] <= -INF && u[i] >= INF {
                    RowKind::Free
                } else if (u[i] - l[i]).abs() < 1e-12 {
                    RowKind::Equality
                } else {
                    RowKind::Inequality
                }
            })
            .collect();
        let mut rho = s.rho;
        let rho_vec = |rho: f64| -> DVector<f64> {
            DVector::from_iterator(
                m,
                row_kind.iter().map(|k| match k {
                    RowKind::Free => 1e-6,
                    RowKind::Equality => (1e3 * rho).min(1e6),
                    RowKind::Inequality => rho,
                }),
            )
        };
        let mut rv = rho_vec(rho);
        let mut chol = factor(&sc, &rv, s.sigma);

        // iterates in scaled space
        let (mut x, mut y) = match &self.warm {
            Some((wx, wy)) if wx.len() == n && wy.len() == m => (
                wx.component_div(&sc.d),
                wy.component_div(&sc.e) * sc.c,
            ),
            _ => (DVector::zeros(n), DVector::zeros(m)),
        };
        let mut z = project(&(&sc.a * &x), &sc.l, &sc.u);

        let mut status = QpStatus::MaxIter;
        let mut iterations = s.max_iter;
        let mut prim = f64::INFINITY;
        let mut dual = f64::INFINITY;
        for k in 1..=s.max_iter {
            let x_prev = x.clone();
            let y_prev = y.clone();
            let rhs = &x * s.sigma - &sc.q + sc.a.transpose() * (rv.component_mul(&z) - &y);
            let xt = match &chol {
                Some(f) => f.solve(&rhs),
                None => break,
            };
            let zt = &sc.a * &xt;
            x = &xt * s.alpha + &x_prev * (1.0 - s.alpha);
            let zr = &zt * s.alpha + &z * (1.0 - s.alpha);
            let z_new = project(&(&zr + y.component_div(&rv)), &sc.l, &sc.u);
            y = &y + rv.component_mul(&(&zr - &z_new));
            z = z_new;

            let (pr, du, pn, dn) = residuals(prob, &sc, &x, &y, &z);
            prim = pr;
            dual = du;
            let eps_p = s.eps_abs + s.eps_rel * pn;
            let eps_d = s.eps_abs + s.eps_rel * dn;
            if pr <= eps_p && du <= eps_d {
                status = QpStatus::Solved;
                iterations = k;
                break;
            }
            if m > 0 && primal_infeasible(&sc, &(&y - &y_prev), s.eps_infeasible) {
                status = QpStatus::PrimalInfeasible;
                iterations = k;
                break;
            }
            if k % s.adapt_interval == 0 {
                let (pr_s, du_s, pn_s, dn_s) = scaled_residuals(&sc, &x, &y, &z);
                let ratio = ((pr_s / pn_s.max(1e-30)) / (du_s / dn_s.max(1e-30)).max(1e-30)).sqrt();
                let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                    rho = new_rho;
                    rv = rho_vec(rho);
                    chol = factor(&sc, &rv, s.sigma);
                }
            }
        }

        let x_out = x.component_mul(&sc.d);
        let y_out = y.component_mul(&sc.e) / sc.c;
        let mut sol = QpSolution {
            x: x_out,
            y_eq: y_out.rows(0, meq).into_owned(),
            y_in: y_out.rows(meq, m - meq).into_owned(),
            status,
            primal_residual: prim,
            dual_residual: dual,
            iterations,
            polished: false,
        };
        if s.polish && status != QpStatus::PrimalInfeasible {
            if let Some(p) = polish(prob, &a, &l, &u, &sol, s) {
                sol = p;
            }
        }
        sol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Free,
    Equality,
    Inequality,
}

fn ruiz_scale(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    iters: usize,
) -> Scaled {
    let n = p.nrows();
    let m = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut ps = p.clone();
    let mut as_ = a.clone();
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..iters {
        let mut dk = DVector::zeros(n);
        for j in 0..n {
            let mut v: f64 = ps.column(j).amax();
            if m > 0 {
                v = v.max(as_.column(j).amax());
            }
            dk[j] = 1.0 / clamp(v).sqrt();
        }
        let mut ek = DVector::zeros(m);
        for i in 0..m {
            ek[i] = 1.0 / clamp(as_.row(i).amax()).sqrt();
        }
        for j in 0..n {
            for i in 0..n {
                ps[(i, j)] *= dk[i] * dk[j];
            }
            for i in 0..m {
                as_[(i, j)] *= ek[i] * dk[j];
            }
        }
        d.component_mul_assign(&dk);
        e.component_mul_assign(&ek);
    }
    let qs = q.component_mul(&d);
    let mean_col = if n > 0 {
        (0..n).map(|j| ps.column(j).amax()).sum::<f64>() / n as f64
    } else {
        1.0
    };
    let c = 1.0 / clamp(mean_col.max(qs.amax()));
    let scale_bound = |v: f64, ei: f64| if v.abs() >= INF { v } else { v * ei };
    Scaled {
        p: ps * c,
        q: qs * c,
        a: as_,
        l: DVector::from_iterator(m, (0..m).map(|i| scale_bound(l[i], e[i]))),
        u: DVector::from_iterator(m, (0..m).map(|i| scale_bound(u[i], e[i]))),
        d,
        e,
        c,
    }
}

fn factor(sc: &Scaled, rho: &DVector<f64>, sigma: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = sc.p.nrows();
    let mut k = sc.p.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    let ra = DMatrix::from_fn(sc.a.nrows(), n, |i, j| sc.a[(i, j)] * rho[i]);
    k += sc.a.transpose() * ra;
    k.cholesky()
}

fn project(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), (0..v.len()).map(|i| v[i].max(l[i]).min(u[i])))
}

/// Unscaled residuals and their normalization terms.
fn residuals(
    prob: &QpProblem,
    sc: &Scaled,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> (f64, f64, f64, f64) {
    let xu = x.component_mul(&sc.d);
    let yu = y.component_mul(&sc.e) / sc.c;
    let zu = z.component_div(&sc.e);
    let meq = prob.a_eq.nrows();
    let m = y.len();
    let mut ax = DVector::zeros(m);
    if meq > 0 {
        ax.rows_mut(0, meq).copy_from(&(&prob.a_eq * &xu));
    }
    if m > meq {
        ax.rows_mut(meq, m - meq).copy_from(&(&prob.a_in * &xu));
    }
    let prim = if m > 0 { (&ax - &zu).amax() } else { 0.0 };
    let px = &prob.h * &xu;
    let mut aty = DVector::zeros(xu.len());
    if meq > 0 {
        aty += prob.a_eq.transpose() * yu.rows(0, meq);
    }
    if m > meq {
        aty += prob.a_in.transpose() * yu.rows(meq, m - meq);
    }
    let dual = (&px + &prob.g + &aty).amax();
    let pn = if m > 0 { ax.amax().max(zu.amax()) } else { 0.0 };
    let dn = px.amax().max(aty.amax()).max(prob.g.amax());
    (prim, dual, pn, dn)
}

fn scaled_residuals(sc: &Scaled, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> (f64, f64, f64, f64) {
    let ax = &sc.a * x;
    let prim = if ax.is_empty() { 0.0 } else { (&ax - z).amax() };
    let px = &sc.p * x;
    let aty = sc.a.transpose() * y;
    let dual = (&px + &sc.q + &aty).amax();
    let pn = if ax.is_empty() { 1.0 } else { ax.amax().max(z.amax()) };
    let dn = px.amax().max(aty.amax()).max(sc.q.amax());
    (prim, dual, pn.max(1e-12), dn.max(1e-12))
}

fn primal_infeasible(sc: &Scaled, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.amax();
    if norm < 1e-12 {
        return false;
    }
    let aty = (sc.a.transpose() * dy).amax();
    let mut support = 0.0;
    for i in 0..dy.len() {
        if dy[i] > 0.0 {
            if sc.u[i] >= INF {
                return false;
            }
            support += sc.u[i] * dy[i];
        } else if dy[i] < 0.0 {
            if sc.l[i] <= -INF {
                return false;
            }
            support += sc.l[i] * dy[i];
        }
    }
    aty <= eps * norm && support <= -eps * norm
}

/// Solves the equality-constrained problem on the guessed active set and
/// keeps it when it is feasible and sign-consistent.
fn polish(
    prob: &QpProblem,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    sol: &QpSolution,
    s: &QpSettings,
) -> Option<QpSolution> {
    let n = prob.num_vars();
    let m = a.nrows();
    let meq = prob.a_eq.nrows();
    let mut y = DVector::zeros(m);
    y.rows_mut(0, meq).copy_from(&sol.y_eq);
    y.rows_mut(meq, m - meq).copy_from(&sol.y_in);
    let ax = a * &sol.x;
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        if (u[i] - l[i]).abs() < 1e-12 || (u[i] < INF && u[i] - ax[i] < y[i]) {
            active.push((i, u[i]));
        } else if l[i] > -INF && (ax[i] - l[i] < -y[i]) {
            active.push((i, l[i]));
        }
    }
    let na = active.len();
    let delta = 1e-9;
    let mut k0 = DMatrix::zeros(n + na, n + na);
    k0.view_mut((0, 0), (n, n)).copy_from(&prob.h);
    for (r, &(i, _)) in active.iter().enumerate() {
        for j in 0..n {
            k0[(n + r, j)] = a[(i, j)];
            k0[(j, n + r)] = a[(i, j)];
        }
    }
    let mut kreg = k0.clone();
    for i in 0..n {
        kreg[(i, i)] += delta;
    }
    for r in 0..na {
        kreg[(n + r, n + r)] -= delta;
    }
    let lu = kreg.lu();
    let mut rhs = DVector::zeros(n + na);
    rhs.rows_mut(0, n).copy_from(&(-&prob.g));
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let mut sol_vec = lu.solve(&rhs)?;
    for _ in 0..5 {
        let res = &rhs - &k0 * &sol_vec;
        if res.amax() < 1e-14 {
            break;
        }
        sol_vec += lu.solve(&res)?;
    }
    let x = sol_vec.rows(0, n).into_owned();
    let mut yp = DVector::zeros(m);
    for (r, &(i, _)) in active.iter().enumerate() {
        yp[i] = sol_vec[n + r];
    }
    // sign consistency of inequality multipliers
    let ax = a * &x;
    let tol = 1e-7 * (1.0 + yp.amax());
    for &(i, b) in &active {
        if (u[i] - l[i]).abs() < 1e-12 {
            continue;
        }
        let upper = b == u[i] && b < INF && (ax[i] - u[i]).abs() <= (ax[i] - l[i]).abs();
        if upper && yp[i] < -tol {
            return None;
        }
        if !upper && yp[i] > tol {
            return None;
        }
    }
    let viol = (0..m)
        .map(|i| (l[i] - ax[i]).max(ax[i] - u[i]).max(0.0))
        .fold(0.0, f64::max);
    let stationarity = (&prob.h * &x + &prob.g + a.transpose() * &yp).amax();
    let scale = 1.0 + prob.g.amax();
    if viol > s.eps_abs.max(1e-9) || stationarity > 1e-9 * scale.max(prob.h.amax()) {
        return None;
    }
    if sol.status == QpStatus::Solved && viol > sol.primal_residual.max(1e-10) * 10.0 && stationarity > sol.dual_residual {
        return None;
    }
    Some(QpSolution {
        x,
        y_eq: yp.rows(0, meq).into_owned(),
        y_in: yp.rows(meq, m - meq).into_owned(),
        status: QpStatus::Solved,
        primal_residual: viol,
        dual_residual: stationarity,
        iterations: sol.iterations,
        polished: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum_at_origin() {
        let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
        let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert!(s.x.amax() < 1e-9);
    }

    #[test]
    fn projection_onto_halfline() {
        // ½(x−1)² with x ≤ 0
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::from_element(1, -1.0)).with_inequalities(
            DMatrix::identity(1, 1),
            DVector::from_element(1, -INF),
            DVector::zeros(1),
        );
        let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert!(s.x[0].abs() < 1e-8);
        assert!((s.y_in[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equality_constrained() {
        // min x² + y² s.t. x + y = 1
        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0));
        let s = solve_qp(&p, 1e-8, 1e-8, 4000).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-8 && (s.x[1] - 0.5).abs() < 1e-8);
        assert!(s.stationarity(&p) < 1e-8);
    }

    #[test]
    fn infeasible_equalities() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0]);
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_equalities(a, b);
        let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
        assert_eq!(s.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QpProblem::new(h, DVector::zeros(2));
        assert!(solve_qp(&p, 1e-6, 1e-6, 100).is_err());
    }

    #[test]
    fn semidefinite_with_bounds() {
        // linear objective on a box: minimize −x0 + x1 over [−1, 2]²
        let p = QpProblem::new(DMatrix::zeros(2, 2), DVector::from_row_slice(&[-1.0, 1.0])).with_inequalities(
            DMatrix::identity(2, 2),
            DVector::from_element(2, -1.0),
            DVector::from_element(2, 2.0),
        );
        let s = solve_qp(&p, 1e-7, 1e-7, 4000).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert!((s.x[0] - 2.0).abs() < 1e-6 && (s.x[1] + 1.0).abs() < 1e-6);
    }
}
