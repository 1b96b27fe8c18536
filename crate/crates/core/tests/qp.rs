use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlip_core::qp::{solve_bounded, solve_qp, ActiveSetSettings, QpProblem, QpSettings, QpSolver, QpStatus};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn strictly_convex(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.5
}

/// `n = 20`, two equalities and ten one-sided rows `a x ≤ ub`, with the
/// bounds placed so that about half the rows bind at the optimum.
fn random_problem(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20;
    let h = strictly_convex(&mut rng, n);
    let g = random_vector(&mut rng, n) * 3.0;
    let a_eq = random_matrix(&mut rng, 2, n);
    let b_eq = random_vector(&mut rng, 2);
    let a_in = random_matrix(&mut rng, 10, n);
    let free = unconstrained(&h, &g, &a_eq, &b_eq);
    let ax = &a_in * &free;
    let ub = DVector::from_fn(10, |i, _| ax[i] + rng.random_range(-1.0..0.6));
    let lb = DVector::from_element(10, f64::NEG_INFINITY);
    QpProblem::new(h, g).with_equalities(a_eq, b_eq).with_inequalities(a_in, lb, ub)
}

fn kkt_solve(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = h.nrows();
    let m = a.nrows();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-g));
    rhs.rows_mut(n, m).copy_from(b);
    let s = k.lu().solve(&rhs).expect("nonsingular KKT");
    (s.rows(0, n).into_owned(), s.rows(n, m).into_owned())
}

fn unconstrained(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    kkt_solve(h, g, a, b).0
}

/// Brute-force oracle: every subset of the inequality rows is tried as the
/// active set and the unique KKT point is kept.
fn enumerate_active_sets(p: &QpProblem) -> DVector<f64> {
    let m = p.a_in.nrows();
    let meq = p.a_eq.nrows();
    let n = p.num_vars();
    let mut found = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let mut a = DMatrix::zeros(meq + rows.len(), n);
        let mut b = DVector::zeros(meq + rows.len());
        a.rows_mut(0, meq).copy_from(&p.a_eq);
        b.rows_mut(0, meq).copy_from(&p.b_eq);
        for (k, &i) in rows.iter().enumerate() {
            a.row_mut(meq + k).copy_from(&p.a_in.row(i));
            b[meq + k] = p.ub[i];
        }
        let (x, y) = kkt_solve(&p.h, &p.g, &a, &b);
        let dual_ok = (0..rows.len()).all(|k| y[meq + k] >= -1e-9);
        let primal_ok = (&p.a_in * &x - &p.ub).iter().all(|&v| v <= 1e-9);
        if dual_ok && primal_ok {
            assert!(found.is_none(), "KKT point must be unique");
            found = Some(x);
        }
    }
    found.expect("feasible instance")
}

#[test]
fn unconstrained_minimum_is_origin() {
    let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
    let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
    assert!(s.x.amax() < 1e-9);
}

#[test]
fn projection_onto_halfline() {
    let p = QpProblem::new(DMatrix::identity(1, 1), DVector::from_element(1, -1.0)).with_inequalities(
        DMatrix::identity(1, 1),
        DVector::from_element(1, f64::NEG_INFINITY),
        DVector::zeros(1),
    );
    let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
    assert!(s.x[0].abs() < 1e-6);
    assert!((s.y_in[0] - 1.0).abs() < 1e-5);
}

#[test]
fn matches_active_set_enumeration() {
    for seed in 0..20 {
        let p = random_problem(seed);
        let oracle = enumerate_active_sets(&p);
        let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        let err = (&s.x - &oracle).amax();
        assert!(err < 1e-5, "seed {seed}: error {err:.3e}");
        assert!(s.stationarity(&p) <= 1e-5);
        assert!(s.complementarity(&p) <= 1e-5);
    }
}

#[test]
fn same_input_same_output() {
    let p = random_problem(11);
    let a = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
    let b = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn warm_start_lowers_median_iterations() {
    // a slowly drifting family, as between control ticks
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 16;
    let h = strictly_convex(&mut rng, n);
    let g0 = random_vector(&mut rng, n);
    let g1 = random_vector(&mut rng, n);
    let a_in = random_matrix(&mut rng, 12, n);
    let lb = DVector::from_element(12, -0.3);
    let ub = DVector::from_element(12, 0.3);
    let a_eq = random_matrix(&mut rng, 3, n);
    let b_eq = random_vector(&mut rng, 3) * 0.1;
    let settings = QpSettings { polish: false, ..QpSettings::default() };
    let mut warm = QpSolver::new(settings);
    let mut warm_iters = Vec::new();
    let mut cold_iters = Vec::new();
    for k in 0..200 {
        let t = k as f64 * 2e-3;
        let g = (&g0 * (3.0 * t).cos() + &g1 * (2.0 * t).sin()) * 4.0;
        let p = QpProblem::new(h.clone(), g)
            .with_equalities(a_eq.clone(), b_eq.clone())
            .with_inequalities(a_in.clone(), lb.clone(), ub.clone());
        warm_iters.push(warm.solve(&p).unwrap().iterations);
        cold_iters.push(QpSolver::new(settings).solve(&p).unwrap().iterations);
    }
    let median = |v: &mut Vec<usize>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let (w, c) = (median(&mut warm_iters), median(&mut cold_iters));
    assert!(w < c, "warm median {w} vs cold median {c}");
}

#[test]
fn infeasible_equalities_are_reported() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let b = DVector::from_row_slice(&[0.0, 1.0]);
    let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_equalities(a, b);
    let s = solve_qp(&p, 1e-6, 1e-6, 4000).unwrap();
    assert_ne!(s.status, QpStatus::Solved);
}

fn bounded_problem(seed: u64) -> impl Strategy<Value = QpProblem> {
    (0u64..10_000, 4usize..14, 0usize..4).prop_map(move |(s, n, meq)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ s);
        let h = strictly_convex(&mut rng, n);
        let g = random_vector(&mut rng, n) * 2.0;
        let a_eq = random_matrix(&mut rng, meq, n);
        let b_eq = random_vector(&mut rng, meq) * 0.2;
        let lb = DVector::from_fn(n, |_, _| rng.random_range(-0.6..-0.1));
        let ub = DVector::from_fn(n, |i, _| if i % 3 == 0 { f64::INFINITY } else { rng.random_range(0.1..0.6) });
        QpProblem::new(h, g)
            .with_equalities(a_eq, b_eq)
            .with_inequalities(DMatrix::identity(n, n), lb, ub)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_active_set_agrees_with_splitting(p in bounded_problem(7)) {
        let admm = solve_qp(&p, 1e-9, 1e-9, 20_000).unwrap();
        prop_assume!(admm.status == QpStatus::Solved);
        let act = solve_bounded(&p, None, &ActiveSetSettings::default()).unwrap();
        prop_assert_eq!(act.status, QpStatus::Solved);
        prop_assert!((&act.x - &admm.x).amax() < 1e-6, "{:.3e}", (&act.x - &admm.x).amax());
        prop_assert!(act.stationarity(&p) <= 1e-8);
        prop_assert!(act.complementarity(&p) <= 1e-8);
        prop_assert!(p.constraint_violation(&act.x) <= 1e-9);
    }
}
