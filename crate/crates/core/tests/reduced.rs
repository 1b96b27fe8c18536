use nalgebra::{Matrix4, Vector3, Vector4};
use proptest::prelude::*;
use wlip_core::reduced::{
    lip_acceleration, rk4_step, wip_com_equivalents, wip_dynamics, wlip_controllability, wlip_matrices, WipParams,
    WipState, WlipParams,
};

fn wlip_params() -> impl Strategy<Value = WlipParams> {
    (0.5f64..30.0, 0.2f64..10.0, 0.02f64..0.3, 0.1f64..1.5).prop_map(|(m_c, m_w, r_w, z)| WlipParams {
        m_c,
        m_w,
        r_w,
        z,
        g: 9.81,
    })
}

fn wip_params() -> WipParams {
    WipParams {
        m_c: 10.0,
        m_w: 2.0,
        l: 0.35,
        i_c: 0.4,
        i_w: 0.01,
        r_w: 0.1,
        g: 9.81,
    }
}

#[test]
fn lip_substitution() {
    assert!((lip_acceleration(1.5, 0.5, 9.81, 9.81).unwrap() - 1.0).abs() < 1e-15);
    assert!(lip_acceleration(0.0, 0.0, 0.0, 9.81).is_err());
}

#[test]
fn degenerate_torque_row_loses_rank() {
    // r_w chosen so the wheel-torque effect on δ̈x cancels exactly; the
    // first column of A is zero, so only B itself survives
    for (m_c, m_w, z) in [(1.0, 1.0, 1.0), (10.0, 2.0, 0.4), (3.0, 7.0, 0.25)] {
        let r_w = z * m_c / (m_c + m_w);
        let (a, b) = wlip_matrices(&WlipParams { m_c, m_w, r_w, z, g: 9.81 }).unwrap();
        assert!(b[1].abs() < 1e-12 && b[0] > 0.0);
        let exact = Vector3::new(b[0], 0.0, 0.0);
        assert_eq!(wlip_controllability(&a, &exact), 1);
    }
    let (a, _) = wlip_matrices(&WlipParams { m_c: 1.0, m_w: 1.0, r_w: 0.1, z: 1.0, g: 9.81 }).unwrap();
    assert_eq!(wlip_controllability(&a, &Vector3::zeros()), 0);
}

#[test]
fn wip_energy_is_conserved_without_torque() {
    let p = wip_params();
    let mut x = WipState { pitch_rate: 0.5, velocity: -0.3, pitch: 0.4, position: 0.0 }.to_vector();
    let e0 = p.energy(&WipState::from_vector(&x));
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        x = rk4_step(&x, dt, |s| wip_dynamics(&p, &WipState::from_vector(s), 0.0)).unwrap();
        let e = p.energy(&WipState::from_vector(&x));
        worst = worst.max((e - e0).abs() / e0.abs());
    }
    assert!(worst < 1e-6, "relative energy drift {worst:.3e}");
}

#[test]
fn wip_linearization_matches_cart_pendulum() {
    let p = wip_params();
    // analytic small-angle model: M₀ [θ̈, ẍ] = [m_c l g θ − τ, τ]
    let ml = p.m_c * p.l;
    let m0 = nalgebra::Matrix2::new(
        p.i_c + ml * p.l,
        ml,
        ml * p.r_w,
        (p.i_w + (p.m_w + p.m_c) * p.r_w * p.r_w) / p.r_w,
    );
    let inv = m0.try_inverse().unwrap();
    let theta_col = inv * nalgebra::Vector2::new(ml * p.g, 0.0);
    let tau_col = inv * nalgebra::Vector2::new(-1.0, 1.0);
    let mut a = Matrix4::zeros();
    a[(0, 2)] = theta_col[0];
    a[(1, 2)] = theta_col[1];
    a[(2, 0)] = 1.0;
    a[(3, 1)] = 1.0;
    let b = Vector4::new(tau_col[0], tau_col[1], 0.0, 0.0);

    let f = |x: &Vector4<f64>, u: f64| wip_dynamics(&p, &WipState::from_vector(x), u).unwrap();
    let h = 1e-6;
    for k in 0..4 {
        let mut e = Vector4::zeros();
        e[k] = h;
        let col = (f(&e, 0.0) - f(&-e, 0.0)) / (2.0 * h);
        assert!((col - a.column(k)).amax() < 1e-6, "column {k}: {col} vs {}", a.column(k));
    }
    let bu = (f(&Vector4::zeros(), h) - f(&Vector4::zeros(), -h)) / (2.0 * h);
    assert!((bu - b).amax() < 1e-6);
    // open-loop unstable, as the wLIP
    let unstable = a.complex_eigenvalues().iter().any(|e| e.re > 1e-6 && e.im.abs() < 1e-9);
    assert!(unstable);
}

#[test]
fn com_equivalent_rate_matches_finite_difference() {
    let z = 0.4;
    let dx = |t: f64| 0.05 * (3.0 * t).sin() + 0.01 * t;
    let rate = |t: f64| 0.15 * (3.0 * t).cos() + 0.01;
    let h = 1e-6;
    for k in 0..20 {
        let t = k as f64 * 0.1;
        let (_, w) = wip_com_equivalents(dx(t), rate(t), z).unwrap();
        let fd = (wip_com_equivalents(dx(t + h), 0.0, z).unwrap().0 - wip_com_equivalents(dx(t - h), 0.0, z).unwrap().0)
            / (2.0 * h);
        assert!((w - fd).abs() < 1e-5);
    }
    let (th, _) = wip_com_equivalents(1e-3, 0.0, z).unwrap();
    assert!((th - 1e-3 / z).abs() < 1e-6);
    assert!(wip_com_equivalents(0.5, 0.0, z).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wlip_is_controllable(p in wlip_params()) {
        let (a, b) = wlip_matrices(&p).unwrap();
        prop_assert_eq!(wlip_controllability(&a, &b), 3);
        prop_assert_eq!(a[(2, 1)], 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heavier_body_strengthens_coupling(p in wlip_params()) {
        let (a, _) = wlip_matrices(&p).unwrap();
        let (a2, _) = wlip_matrices(&WlipParams { m_c: 2.0 * p.m_c, ..p }).unwrap();
        prop_assert!(a2[(1, 2)].abs() > a[(1, 2)].abs());
        // affine in 1/z
        let (ah, bh) = wlip_matrices(&WlipParams { z: 2.0 * p.z, ..p }).unwrap();
        prop_assert!((ah * 2.0 - a).fixed_view::<2, 3>(0, 0).amax() < 1e-12);
        let (_, b) = wlip_matrices(&p).unwrap();
        prop_assert!((bh[0] * 2.0 - b[0]).abs() < 1e-12);
    }

    #[test]
    fn wlip_superposition(p in wlip_params(), x1 in prop::array::uniform3(-0.1f64..0.1), x2 in prop::array::uniform3(-0.1f64..0.1), w in 0.5f64..5.0) {
        let (a, b) = wlip_matrices(&p).unwrap();
        let u1 = |t: f64| (w * t).sin();
        let u2 = |t: f64| 0.5 - t;
        let run = |x0: Vector3<f64>, u: &dyn Fn(f64) -> f64| {
            // input held on each step to keep the map exactly linear
            let dt = 1e-3;
            let mut x = x0;
            for k in 0..500 {
                let uk = u(k as f64 * dt);
                x = rk4_step(&x, dt, |s| Ok(a * s + b * uk)).unwrap();
            }
            x
        };
        let ya = run(Vector3::from(x1), &u1);
        let yb = run(Vector3::from(x2), &u2);
        let sum = run(Vector3::from(x1) + Vector3::from(x2), &|t| u1(t) + u2(t));
        let scale = 1.0 + sum.amax();
        prop_assert!((ya + yb - sum).amax() < 1e-9 * scale);
        // open loop has a positive real eigenvalue
        prop_assert!(a.complex_eigenvalues().iter().any(|e| e.re > 1e-6));
    }
}
