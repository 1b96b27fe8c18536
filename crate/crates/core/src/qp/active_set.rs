//! Primal-dual active-set solver for sparse QPs whose inequality rows are
//! simple variable bounds. Each iteration solves the equality-constrained
//! KKT system of the current active set with a regularized envelope LDLᵀ
//! and iterative refinement against the exact matrix.
//!
//! Variables are ordered by reverse Cuthill-McKee on the coupling graph of
//! `H` and `A_eq`; each constraint row is placed right after the last
//! variable it touches, which keeps staged problems (collocation, MPC)
//! narrowly banded.

use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::envelope::{reverse_cuthill_mckee, Envelope};
use super::{QpProblem, QpSolution, QpStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveSetSettings {
    pub max_iter: usize,
    /// Diagonal shift of the factored matrix; removed again by refinement.
    pub regularization: f64,
    pub refine_iters: usize,
    /// Feasibility and multiplier-sign tolerance.
    pub tol: f64,
}

impl Default for ActiveSetSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            regularization: 1e-8,
            refine_iters: 25,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Side {
    Free,
    Lower,
    Upper,
}

struct Bound {
    var: usize,
    coef: f64,
    lb: f64,
    ub: f64,
}

impl Bound {
    fn fixed(&self) -> bool {
        self.ub - self.lb <= 0.0
    }
}

/// Sparse view of the problem in KKT order.
struct Structure {
    n: usize,
    meq: usize,
    pos: Vec<usize>,
    first: Vec<usize>,
    h: Vec<(usize, usize, f64)>,
    a: Vec<(usize, usize, f64)>,
    bounds: Vec<Bound>,
}

impl Structure {
    fn build(p: &QpProblem) -> Result<Self> {
        let n = p.num_vars();
        let meq = p.a_eq.nrows();
        let mut bounds = Vec::with_capacity(p.a_in.nrows());
        for j in 0..p.a_in.nrows() {
            let nz: Vec<usize> = (0..n).filter(|&i| p.a_in[(j, i)] != 0.0).collect();
            if nz.len() != 1 {
                return Err(Error::Input(format!(
                    "active-set solver needs simple bounds; inequality row {j} has {} nonzeros",
                    nz.len()
                )));
            }
            bounds.push(Bound {
                var: nz[0],
                coef: p.a_in[(j, nz[0])],
                lb: p.lb[j],
                ub: p.ub[j],
            });
        }
        let mut h = Vec::new();
        let mut adj = vec![Vec::new(); n];
        for j in 0..n {
            for i in j..n {
                let v = p.h[(i, j)];
                if v != 0.0 || i == j {
                    h.push((i, j, v));
                    if i != j {
                        adj[i].push(j);
                        adj[j].push(i);
                    }
                }
            }
        }
        let mut a = Vec::new();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); meq];
        for r in 0..meq {
            for c in 0..n {
                let v = p.a_eq[(r, c)];
                if v != 0.0 {
                    a.push((r, c, v));
                    rows[r].push(c);
                }
            }
            for (k, &u) in rows[r].iter().enumerate() {
                for &w in &rows[r][k + 1..] {
                    adj[u].push(w);
                    adj[w].push(u);
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }

        let primal = reverse_cuthill_mckee(&adj);
        let mut rank = vec![0; n];
        for (k, &v) in primal.iter().enumerate() {
            rank[v] = k;
        }
        let total = n + meq + bounds.len();
        let mut after: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for (r, cols) in rows.iter().enumerate() {
            let key = cols.iter().map(|&c| rank[c]).max().unwrap_or(n);
            after[key].push(n + r);
        }
        for (j, b) in bounds.iter().enumerate() {
            after[rank[b.var]].push(n + meq + j);
        }
        let mut order = Vec::with_capacity(total);
        for k in 0..n {
            order.push(primal[k]);
            order.extend_from_slice(&after[k]);
        }
        order.extend_from_slice(&after[n]);
        let mut pos = vec![0; total];
        for (k, &node) in order.iter().enumerate() {
            pos[node] = k;
        }

        let mut first: Vec<usize> = (0..total).collect();
        let mut touch = |i: usize, j: usize| {
            let (r, c) = if pos[i] >= pos[j] { (pos[i], pos[j]) } else { (pos[j], pos[i]) };
            first[r] = first[r].min(c);
        };
        for &(i, j, _) in &h {
            touch(i, j);
        }
        for &(r, c, _) in &a {
            touch(n + r, c);
        }
        for (j, b) in bounds.iter().enumerate() {
            touch(n + meq + j, b.var);
        }
        Ok(Self {
            n,
            meq,
            pos,
            first,
            h,
            a,
            bounds,
        })
    }

    /// KKT matrix of the active set `sides`, without regularization.
    fn assemble(&self, sides: &[Side]) -> Envelope {
        let mut k = Envelope::new(self.first.clone());
        let p = &self.pos;
        for &(i, j, v) in &self.h {
            k.add(p[i], p[j], v);
        }
        for &(r, c, v) in &self.a {
            k.add(p[self.n + r], p[c], v);
        }
        for (j, b) in self.bounds.iter().enumerate() {
            let row = p[self.n + self.meq + j];
            match sides[j] {
                Side::Free => k.add(row, row, -1.0),
                _ => k.add(row, p[b.var], b.coef),
            }
        }
        k
    }

    fn regularize(&self, k: &Envelope, sides: &[Side], delta: f64) -> Envelope {
        let mut reg = k.clone();
        let p = &self.pos;
        for i in 0..self.n {
            reg.add(p[i], p[i], delta);
        }
        for r in 0..self.meq {
            reg.add(p[self.n + r], p[self.n + r], -delta);
        }
        for (j, s) in sides.iter().enumerate() {
            if *s != Side::Free {
                let row = p[self.n + self.meq + j];
                reg.add(row, row, -delta);
            }
        }
        reg
    }
}

/// Solves a QP whose inequality rows each bound a single variable. `hint`
/// seeds the active set from a primal point and bound multipliers (for
/// example the previous solution of a nearby problem).
///
/// The Hessian must be positive semidefinite; this is not checked here.
pub fn solve_bounded(
    p: &QpProblem,
    hint: Option<(&DVector<f64>, &DVector<f64>)>,
    settings: &ActiveSetSettings,
) -> Result<QpSolution> {
    p.check_shapes()?;
    let st = Structure::build(p)?;
    let n = st.n;
    let meq = st.meq;
    let m_in = st.bounds.len();
    let dim = n + meq + m_in;
    let tol = settings.tol;

    let classify = |x: &DVector<f64>, y: &DVector<f64>| -> Vec<Side> {
        st.bounds
            .iter()
            .enumerate()
            .map(|(j, b)| {
                if b.fixed() {
                    return Side::Upper;
                }
                let w = b.coef * x[b.var];
                if y[j] + (w - b.ub) > tol {
                    Side::Upper
                } else if y[j] + (w - b.lb) < -tol {
                    Side::Lower
                } else {
                    Side::Free
                }
            })
            .collect()
    };
    let mut sides = match hint {
        Some((x, y)) if x.len() == n && y.len() == m_in => classify(x, y),
        Some(_) => {
            return Err(Error::Input("active-set hint has inconsistent shape".into()));
        }
        None => classify(&DVector::zeros(n), &DVector::zeros(m_in)),
    };

    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[st.pos[i]] = -p.g[i];
    }
    for r in 0..meq {
        rhs[st.pos[n + r]] = p.b_eq[r];
    }
    let finite = |v: f64| if v.abs() < 1e19 { v.abs() } else { 0.0 };
    let bound_scale = st.bounds.iter().fold(0.0f64, |a, b| a.max(finite(b.lb)).max(finite(b.ub)));
    let rhs_scale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs())) + bound_scale;

    let mut seen: HashSet<Vec<Side>> = HashSet::new();
    let mut careful = false;
    let mut status = QpStatus::MaxIter;
    let mut iterations = 0;
    let mut x = DVector::zeros(n);
    let mut y_eq = DVector::zeros(meq);
    let mut y_in = DVector::zeros(m_in);
    for it in 1..=settings.max_iter.max(1) {
        iterations = it;
        for (j, b) in st.bounds.iter().enumerate() {
            let row = st.pos[n + meq + j];
            rhs[row] = match sides[j] {
                Side::Free => 0.0,
                Side::Lower => b.lb,
                Side::Upper => b.ub,
            };
        }
        let k = st.assemble(&sides);
        let reg = st.regularize(&k, &sides, settings.regularization);
        let Some(ldl) = reg.factor() else {
            return Err(Error::Numerical {
                routine: "solve_bounded",
                detail: "KKT factorization broke down".into(),
                residual: f64::NAN,
            });
        };
        let mut sol = rhs.clone();
        ldl.solve_in_place(&mut sol);
        let mut res = vec![0.0; dim];
        let mut r_norm = f64::INFINITY;
        for _ in 0..settings.refine_iters {
            k.matvec(&sol, &mut res);
            for i in 0..dim {
                res[i] = rhs[i] - res[i];
            }
            r_norm = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if r_norm <= 1e-14 * rhs_scale {
                break;
            }
            ldl.solve_in_place(&mut res);
            for i in 0..dim {
                sol[i] += res[i];
            }
        }
        if !r_norm.is_finite() {
            return Err(Error::Numerical {
                routine: "solve_bounded",
                detail: "KKT solve produced non-finite values".into(),
                residual: r_norm,
            });
        }
        for i in 0..n {
            x[i] = sol[st.pos[i]];
        }
        for r in 0..meq {
            y_eq[r] = sol[st.pos[n + r]];
        }
        for j in 0..m_in {
            y_in[j] = if sides[j] == Side::Free { 0.0 } else { sol[st.pos[n + meq + j]] };
        }

        // largest violation of primal feasibility or multiplier sign
        let mut worst = (0.0, usize::MAX);
        for (j, b) in st.bounds.iter().enumerate() {
            let w = b.coef * x[b.var];
            let v = match sides[j] {
                Side::Free => (w - b.ub).max(b.lb - w),
                Side::Upper if !b.fixed() => -y_in[j],
                Side::Lower => y_in[j],
                _ => 0.0,
            };
            if v > worst.0 {
                worst = (v, j);
            }
        }
        if worst.0 <= tol * rhs_scale {
            status = QpStatus::Solved;
            break;
        }
        let next = if careful {
            let mut s = sides.clone();
            let j = worst.1;
            let b = &st.bounds[j];
            s[j] = match sides[j] {
                Side::Free if b.coef * x[b.var] > b.ub => Side::Upper,
                Side::Free => Side::Lower,
                _ => Side::Free,
            };
            s
        } else {
            classify(&x, &y_in)
        };
        if next == sides {
            status = QpStatus::Solved;
            break;
        }
        if !seen.insert(next.clone()) {
            careful = true;
        }
        sides = next;
    }

    let mut out = QpSolution {
        x,
        y_eq,
        y_in,
        status,
        primal_residual: 0.0,
        dual_residual: 0.0,
        iterations,
        polished: false,
    };
    out.primal_residual = p.constraint_violation(&out.x);
    out.dual_residual = out.stationarity(p);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn box_projection() {
        // ½‖x − c‖² over [−1, 1]³
        let c = DVector::from_row_slice(&[2.0, -0.3, -5.0]);
        let p = QpProblem::new(DMatrix::identity(3, 3), -&c).with_inequalities(
            DMatrix::identity(3, 3),
            DVector::from_element(3, -1.0),
            DVector::from_element(3, 1.0),
        );
        let s = solve_bounded(&p, None, &ActiveSetSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert!((s.x - DVector::from_row_slice(&[1.0, -0.3, -1.0])).amax() < 1e-12);
        assert!((s.y_in - DVector::from_row_slice(&[1.0, 0.0, -4.0])).amax() < 1e-12);
    }

    #[test]
    fn equality_and_bound() {
        // min x² + y² s.t. x + y = 1, x ≤ 0.2
        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0))
            .with_inequalities(
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DVector::from_element(1, -1e20),
                DVector::from_element(1, 0.2),
            );
        let s = solve_bounded(&p, None, &ActiveSetSettings::default()).unwrap();
        assert!((s.x[0] - 0.2).abs() < 1e-12 && (s.x[1] - 0.8).abs() < 1e-12);
        assert!(s.stationarity(&p) < 1e-10);
        assert!(s.y_in[0] > 0.0);
    }

    #[test]
    fn rejects_general_rows() {
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_inequalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
        );
        assert!(solve_bounded(&p, None, &ActiveSetSettings::default()).is_err());
    }
}
