use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;
use wlip_core::clf::{solve_care, wlip_balance_target, ClfData, ClfWeights, ClosedLoopErrorSystem};
use wlip_core::reduced::rk4_step;

fn system() -> ClosedLoopErrorSystem {
    ClosedLoopErrorSystem::new(10.2, 1.4, 9.81).unwrap()
}

fn default_clf() -> ClfData {
    ClfData::from_weights(system(), &ClfWeights::default()).unwrap()
}

fn residual(clf: &ClfData) -> f64 {
    let s = &clf.system;
    let g = s.b * s.b.transpose() / clf.r;
    (s.a.transpose() * clf.p + clf.p * s.a - clf.p * g * clf.p + clf.q).norm()
}

fn pd_weight() -> impl Strategy<Value = Matrix3<f64>> {
    (prop::array::uniform9(-1.0f64..1.0), 0.05f64..5.0).prop_map(|(v, shift)| {
        let m = Matrix3::from_row_slice(&v);
        m * m.transpose() + Matrix3::identity() * shift
    })
}

/// Closed-loop wLIP from an initial offset, with `δ̈x` set to the balance
/// target and the CoM obeying `ẍ_c = g δx / z`. Returns the error states.
fn closed_loop_run(clf: &ClfData, x0: [f64; 3], z: f64, t_end: f64, dt: f64) -> Vec<Vector3<f64>> {
    let g = clf.system.g;
    let error = |s: &Vector3<f64>| Vector3::new(-s[0], -s[1] / z, -s[2] / z);
    let mut s = Vector3::from(x0);
    let mut out = vec![error(&s)];
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        s = rk4_step(&s, dt, |s| {
            let target = wlip_balance_target(clf, &error(s), z)?;
            Ok(Vector3::new(g * s[2] / z, target, s[1]))
        })
        .unwrap();
        out.push(error(&s));
    }
    out
}

#[test]
fn default_weights_solve_with_small_residual() {
    let clf = default_clf();
    assert!(residual(&clf) <= 1e-8);
    assert!(clf.p.symmetric_eigenvalues().min() > 0.0);
    assert!(clf.closed_loop().complex_eigenvalues().iter().all(|e| e.re < 0.0));
    assert!((clf.gamma - clf.lambda_min_q / clf.lambda_max_p).abs() < 1e-15);
}

#[test]
fn scalar_unstable_root() {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let s = solve_care(&m(1.0), &m(1.0), &m(1e-12), &m(1.0)).unwrap();
    // positive root of P² − 2P − q = 0
    let exact = 1.0 + (1.0f64 + 1e-12).sqrt();
    assert!((s.p[(0, 0)] - exact).abs() < 1e-9);
}

#[test]
fn balance_target_settles_from_an_offset() {
    let clf = default_clf();
    let traj = closed_loop_run(&clf, [0.0, 0.0, 0.05], 0.35, 2.0, 1e-4);
    let last = traj.last().unwrap();
    assert!(last.norm() < 1e-3, "‖x̄(2 s)‖ = {:.3e}", last.norm());
}

#[test]
fn lqr_input_needs_no_slack() {
    let clf = default_clf();
    let mut rng = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for _ in 0..1000 {
        let x = Vector3::new(next(), next(), next());
        let u = clf.lqr_input(&x);
        let (lhs, rhs) = clf.clf_constraint(&x, u, 0.0);
        assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()), "{lhs} > {rhs}");
        // V̇ under LQR is −x̄ᵀ(Q + KᵀRK)x̄
        let exact = -(x.dot(&(clf.q * x)) + clf.r * clf.gain.dot(&x).powi(2));
        assert!((lhs - exact).abs() < 1e-9 * (1.0 + exact.abs()));
        assert!(clf.required_slack(&x, u) <= 1e-9 * (1.0 + rhs.abs()));
    }
}

#[test]
fn suboptimal_input_reports_its_slack() {
    let clf = default_clf();
    let x = Vector3::new(0.2, -0.1, 0.3);
    let row = clf.constraint_row(&x);
    let u0 = clf.lqr_input(&x);
    let margin = row.bound - (row.input_coeff * u0 + row.drift);
    let u = u0 + 2.0 * margin / row.input_coeff;
    let (lhs, rhs) = clf.clf_constraint(&x, u, 0.0);
    assert!(lhs > rhs);
    assert!((clf.required_slack(&x, u) - (lhs - rhs)).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
}

#[test]
fn origin_constraint_is_slack_only() {
    let clf = default_clf();
    let (lhs, rhs) = clf.clf_constraint(&Vector3::zeros(), 3.0, 0.0);
    assert_eq!((lhs, rhs), (0.0, 0.0));
    assert_eq!(clf.lyapunov(&Vector3::zeros()), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_weights_solve(q in pd_weight(), log_r in -4.0f64..1.0, m_c in 1.0f64..20.0, m_w in 0.5f64..5.0) {
        let sys = ClosedLoopErrorSystem::new(m_c, m_w, 9.81).unwrap();
        let clf = ClfData::new(sys, q, 10f64.powf(log_r)).unwrap();
        prop_assert!(residual(&clf) <= 1e-8, "residual {}", residual(&clf));
        prop_assert!(clf.p.symmetric_eigenvalues().min() > 0.0);
        prop_assert!(clf.closed_loop().complex_eigenvalues().iter().all(|e| e.re < 0.0));
    }

    #[test]
    fn scaling_weights_scales_p(q in pd_weight(), alpha in 0.1f64..10.0) {
        let a = ClfData::new(system(), q, 0.01).unwrap();
        let b = ClfData::new(system(), q * alpha, 0.01 * alpha).unwrap();
        prop_assert!((b.p - a.p * alpha).norm() < 1e-7 * b.p.norm());
        prop_assert!((b.gain - a.gain).norm() < 1e-7 * a.gain.norm());
    }

    #[test]
    fn lyapunov_positive_away_from_origin(x in prop::array::uniform3(-1.0f64..1.0)) {
        let clf = default_clf();
        let x = Vector3::from(x);
        prop_assume!(x.norm() > 1e-6);
        prop_assert!(clf.lyapunov(&x) > 0.0);
    }

    #[test]
    fn exponential_certificate_holds(x0 in prop::array::uniform3(-0.05f64..0.05), z in 0.2f64..0.6) {
        let clf = default_clf();
        let dt = 1e-3;
        let traj = closed_loop_run(&clf, x0, z, 1.0, dt);
        let v0 = clf.lyapunov(&traj[0]);
        for (k, x) in traj.iter().enumerate() {
            let bound = 1.05 * v0 * (-clf.gamma * k as f64 * dt).exp();
            prop_assert!(clf.lyapunov(x) <= bound + 1e-15, "step {}: {} > {}", k, clf.lyapunov(x), bound);
        }
    }
}
