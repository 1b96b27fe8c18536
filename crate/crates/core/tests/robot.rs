use nalgebra::{DVector, Vector3};
use proptest::prelude::*;
use wlip_core::robot::{BodySubset, Robot, RobotParams, WheelSide, NUM_DOF};

fn rest() -> DVector<f64> {
    DVector::zeros(NUM_DOF)
}

fn leg_config() -> impl Strategy<Value = DVector<f64>> {
    (
        prop::array::uniform6(-0.6f64..0.6),
        prop::array::uniform6(-1.5f64..1.5),
    )
        .prop_map(|(base, joints)| {
            let mut q = DVector::zeros(NUM_DOF);
            for i in 0..6 {
                q[i] = base[i];
                q[6 + i] = joints[i];
            }
            q
        })
}

fn rates() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0f64..2.0, NUM_DOF).prop_map(DVector::from_vec)
}

#[test]
fn preset_mass_and_link_ratio() {
    let robot = Robot::preset();
    assert_eq!(robot.tree.dof(), 12);
    assert!((robot.tree.total_mass() - 13.1).abs() < 1e-12);
    let p = RobotParams::preset();
    let unit = p.pelvis_length / 3.0;
    assert!((p.thigh_length - 5.0 * unit).abs() < 1e-9);
    assert!((p.shank_length - 4.0 * unit).abs() < 1e-9);
    assert!((p.thigh_side_mass() - 4.2).abs() < 1e-12);
    assert!((p.pelvis_mass - 5.8).abs() < 1e-12);
}

#[test]
fn rejects_nonpositive_parameters() {
    let mut p = RobotParams::preset();
    p.shank_mass = 0.0;
    assert!(Robot::new(p).is_err());
    let mut p = RobotParams::preset();
    p.wheel_radius = -0.1;
    assert!(Robot::new(p).is_err());
}

#[test]
fn zero_joint_angles_give_level_wheels() {
    let robot = Robot::preset();
    let mut q = rest();
    q[2] = 0.6;
    let kin = robot.tree.kinematics(&q, &rest()).unwrap();
    let l = robot.wheel_center(&kin, WheelSide::Left).unwrap();
    let r = robot.wheel_center(&kin, WheelSide::Right).unwrap();
    assert!((l.z - r.z).abs() < 1e-15);
    assert!((l.y + r.y).abs() < 1e-15);
}

#[test]
fn balanced_stance_com_over_support() {
    let robot = Robot::preset();
    let q = robot.balanced_stance(0.35, 0.0, (0.5, -0.5)).unwrap();
    let kin = robot.tree.kinematics(&q, &rest()).unwrap();
    let (com, _) = robot.com_position_velocity(&kin, BodySubset::Whole).unwrap();
    let l = robot.wheel_center(&kin, WheelSide::Left).unwrap();
    let r = robot.wheel_center(&kin, WheelSide::Right).unwrap();
    // coaxial wheels: the support interval is the segment between contacts
    assert!((com.x - l.x).abs() < 1e-9 && (com.x - r.x).abs() < 1e-9);
    assert!(com.y.abs() < 1e-12 && com.y < l.y && com.y > r.y);
}

#[test]
fn upper_com_excludes_exactly_the_wheels() {
    let robot = Robot::preset();
    let q = robot.stance(0.1, 0.6, -0.4);
    let kin = robot.tree.kinematics(&q, &rest()).unwrap();
    let (whole, _) = robot.com_position_velocity(&kin, BodySubset::Whole).unwrap();
    let (upper, _) = robot.com_position_velocity(&kin, BodySubset::Upper).unwrap();
    let p = &robot.params;
    let wheels =
        (robot.wheel_center(&kin, WheelSide::Left).unwrap() + robot.wheel_center(&kin, WheelSide::Right).unwrap()) / 2.0;
    let blended = (upper * p.upper_mass() + wheels * p.wheel_masses()) / p.total_mass();
    assert!((whole - blended).amax() < 1e-12);
    assert!((whole - upper).norm() > 1e-3);
}

#[test]
fn pure_rolling_moves_the_centre_along_x() {
    let robot = Robot::preset();
    let q = robot.stance(0.0, 0.4, -0.3);
    let omega = 3.0;
    let r_w = robot.params.wheel_radius;
    let mut qd = rest();
    qd[0] = r_w * omega;
    qd[8] = omega;
    qd[11] = omega;
    let kin = robot.tree.kinematics(&q, &qd).unwrap();
    for side in WheelSide::BOTH {
        let c = robot.rolling_constraint(&kin, &qd, side, &Vector3::z()).unwrap();
        assert!(c.velocity.amax() < 1e-12, "{}", c.velocity);
        let (_, v) = kin.point_velocity(robot.wheel_body(side), &Vector3::zeros()).unwrap();
        let in_w = c.frames.wheel.transpose() * v;
        assert!((in_w - Vector3::new(r_w * omega, 0.0, 0.0)).amax() < 1e-12);
    }
}

#[test]
fn rolling_bias_vanishes_at_rest() {
    let robot = Robot::preset();
    let q = robot.stance(0.2, 0.5, -0.2);
    let kin = robot.tree.kinematics(&q, &rest()).unwrap();
    for side in WheelSide::BOTH {
        let c = robot.rolling_constraint(&kin, &rest(), side, &Vector3::z()).unwrap();
        assert_eq!(c.bias.amax(), 0.0);
        assert_eq!(c.rolling_term.amax(), 0.0);
    }
}

#[test]
fn spinning_in_place_matches_differential_drive() {
    let robot = Robot::preset();
    let q = robot.stance(0.1, 0.4, -0.3);
    let yaw_rate = 0.8;
    let p = &robot.params;
    let spin = p.track_width / 2.0 * yaw_rate / p.wheel_radius;
    let kin0 = robot.tree.kinematics(&q, &rest()).unwrap();
    let mid = (robot.wheel_center(&kin0, WheelSide::Left).unwrap() + robot.wheel_center(&kin0, WheelSide::Right).unwrap()) / 2.0;
    let base = kin0.point_position(0, &Vector3::zeros()).unwrap();
    // keep the wheel midpoint still while yawing about it
    let v_base = -(Vector3::z() * yaw_rate).cross(&(mid - base));
    let mut qd = rest();
    qd[0] = v_base.x;
    qd[1] = v_base.y;
    qd[3] = yaw_rate;
    qd[8] = -spin;
    qd[11] = spin;
    let kin = robot.tree.kinematics(&q, &qd).unwrap();
    for side in WheelSide::BOTH {
        let c = robot.rolling_constraint(&kin, &qd, side, &Vector3::z()).unwrap();
        assert!(c.velocity.amax() < 1e-12, "{side:?}: {}", c.velocity);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn com_velocity_matches_finite_differences(q in leg_config(), qd in rates()) {
        let robot = Robot::preset();
        let h = 1e-6;
        let com = |t: f64| {
            let qt = &q + &qd * t;
            let kin = robot.tree.kinematics(&qt, &qd).unwrap();
            robot.com_position_velocity(&kin, BodySubset::Upper).unwrap()
        };
        let (_, v) = com(0.0);
        let fd = (com(h).0 - com(-h).0) / (2.0 * h);
        prop_assert!((fd - v).amax() < 1e-6);
        let kin = robot.tree.kinematics(&q, &qd).unwrap();
        let (row, _) = robot.com_height_jacobian(&kin, BodySubset::Upper).unwrap();
        prop_assert!((row.dot(&qd) - v.z).abs() < 1e-12);
    }

    #[test]
    fn mirrored_configuration_mirrors_kinematics(q in leg_config()) {
        let robot = Robot::preset();
        let a = robot.tree.forward_kinematics(&q).unwrap();
        let b = robot.tree.forward_kinematics(&robot.mirror(&q)).unwrap();
        let partner = [0usize, 4, 5, 6, 1, 2, 3];
        for (i, &j) in partner.iter().enumerate() {
            let pa = a[i].translation;
            let pb = b[j].translation;
            prop_assert!((pa - Vector3::new(pb.x, -pb.y, pb.z)).amax() < 1e-12);
        }
    }

    #[test]
    fn contact_velocity_two_ways(q in leg_config(), qd in rates()) {
        let robot = Robot::preset();
        let kin = robot.tree.kinematics(&q, &qd).unwrap();
        for side in WheelSide::BOTH {
            let c = robot.rolling_constraint(&kin, &qd, side, &Vector3::z()).unwrap();
            let b = robot.wheel_body(side);
            let (omega, v_centre) = kin.point_velocity(b, &Vector3::zeros()).unwrap();
            let r_c = c.frames.contact_point - c.frames.wheel_origin;
            let cross = c.frames.contact.transpose() * (v_centre + omega.cross(&r_c));
            prop_assert!((cross - c.velocity).amax() < 1e-10);
        }
    }

    #[test]
    fn contact_frame_geometry(q in leg_config()) {
        let robot = Robot::preset();
        let kin = robot.tree.kinematics(&q, &rest()).unwrap();
        for side in WheelSide::BOTH {
            if let Ok(f) = robot.contact_frames(&kin, side, &Vector3::z()) {
                let expected = f.wheel_origin + f.wheel * Vector3::new(0.0, 0.0, -robot.params.wheel_radius);
                prop_assert!((f.contact_point - expected).amax() < 1e-12);
                prop_assert!((f.contact.column(0) - f.wheel.column(0)).amax() < 1e-12);
                prop_assert!((f.contact.column(2) - Vector3::z()).amax() < 1e-12);
            }
        }
    }
}
