//! Leg design calculations on the planar three-link model (pelvis, thigh,
//! shank) and the closed-form pelvis inverse kinematics.
//!
//! Angles here are absolute pitches with respect to the world. A thigh
//! pitch `θ_H > 0` puts the knee behind the hip and a shank pitch `θ_K < 0`
//! puts the wheel ahead of the knee.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::RobotParams;

/// Hip-height band (hip above wheel centre) swept by the reference robot.
pub const HIP_HEIGHT_BAND: (f64, f64) = (0.2, 0.43);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLengths {
    pub pelvis: f64,
    pub thigh: f64,
    pub shank: f64,
}

impl LinkLengths {
    pub fn of(p: &RobotParams) -> Self {
        Self {
            pelvis: p.pelvis_length,
            thigh: p.thigh_length,
            shank: p.shank_length,
        }
    }
}

/// Mass layout and moment-arm split of the planar design model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Thigh-side mass `m` (both thighs).
    pub thigh_mass: f64,
    /// Base mass `M`.
    pub base_mass: f64,
    /// `L_1 / L_H`.
    pub alpha: f64,
    /// `L_2 / L_H`.
    pub upper_ratio: f64,
}

impl DesignParams {
    pub fn new(thigh_mass: f64, base_mass: f64) -> Result<Self> {
        let (alpha, upper_ratio) = solve_moment_arms(thigh_mass, base_mass)?;
        Ok(Self {
            thigh_mass,
            base_mass,
            alpha,
            upper_ratio,
        })
    }

    pub fn of(p: &RobotParams) -> Result<Self> {
        Self::new(p.thigh_side_mass(), p.pelvis_mass)
    }

    pub fn beta(&self) -> f64 {
        (self.alpha * self.base_mass + self.thigh_mass) / (self.base_mass + self.thigh_mass)
    }
}

/// Moment-arm split `(L_1/L_H, L_2/L_H)` from `(L_2 − L_1)/L_H = m/M` and
/// `L_1 + L_2 = 2 L_H`.
///
/// The mass ratio is rounded to two decimals before solving, the same
/// precision at which the design procedure fixes it (4.2/5.8 → 0.72).
/// [`solve_moment_arms_exact`] skips the rounding.
pub fn solve_moment_arms(m: f64, big_m: f64) -> Result<(f64, f64)> {
    let ratio = mass_ratio(m, big_m)?;
    Ok(split((ratio * 100.0).round() / 100.0))
}

pub fn solve_moment_arms_exact(m: f64, big_m: f64) -> Result<(f64, f64)> {
    Ok(split(mass_ratio(m, big_m)?))
}

fn mass_ratio(m: f64, big_m: f64) -> Result<f64> {
    if !(m >= 0.0) || !(big_m > 0.0) {
        return Err(Error::Input(format!(
            "moment arms need m >= 0 and M > 0, got m = {m}, M = {big_m}"
        )));
    }
    Ok(m / big_m)
}

fn split(ratio: f64) -> (f64, f64) {
    // [-1 1; 1 1] [a; b] = [ratio; 2]
    let a = 1.0 - ratio / 2.0;
    (a, 2.0 - a)
}

/// Static hip and knee torques carrying a vertical load `load` through the
/// wheel, for absolute pitches `[θ_P, θ_H, θ_K]`.
///
/// Equivalent to `−Jᵀ [0; G]` with `J` the planar wheel Jacobian with
/// respect to the relative hip and knee angles.
pub fn static_joint_torques(angles: [f64; 3], lengths: &LinkLengths, load: f64) -> (f64, f64) {
    static_joint_torques_with_force(angles, lengths, 0.0, load)
}

/// As [`static_joint_torques`] with a horizontal ground force as well.
pub fn static_joint_torques_with_force(
    angles: [f64; 3],
    lengths: &LinkLengths,
    fx: f64,
    fz: f64,
) -> (f64, f64) {
    let j = planar_leg_jacobian(angles, lengths);
    let tau_h = -(j[0][0] * fx + j[1][0] * fz);
    let tau_k = -(j[0][1] * fx + j[1][1] * fz);
    (tau_h, tau_k)
}

/// Rows `(x, z)`, columns `(hip, knee)` of the planar wheel Jacobian.
pub fn planar_leg_jacobian(angles: [f64; 3], l: &LinkLengths) -> [[f64; 2]; 2] {
    let [_, th, tk] = angles;
    let (sh, ch) = th.sin_cos();
    let (sk, ck) = tk.sin_cos();
    [
        [-l.thigh * ch - l.shank * ck, -l.shank * ck],
        [l.thigh * sh + l.shank * sk, l.shank * sk],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub hip_height: f64,
    pub thigh_pitch: f64,
    pub shank_pitch: f64,
    pub pelvis_pitch: f64,
    /// Vertical knee-to-hip distance.
    pub knee_hip_height: f64,
    pub beta: f64,
    /// True when the pelvis link is too short for the requested offset and
    /// the pelvis pitch was clamped to zero.
    pub pelvis_saturated: bool,
    /// Horizontal distance between the wheel and the planar-model CoM.
    pub com_violation: f64,
}

impl IkSolution {
    /// Residuals of the two defining constraints.
    pub fn residuals(&self, lengths: &LinkLengths) -> (f64, f64) {
        let r1 = 2.0 * lengths.shank * self.shank_pitch.sin()
            + self.beta * lengths.thigh * self.thigh_pitch.sin();
        let r2 = lengths.shank * self.shank_pitch.cos() + lengths.thigh * self.thigh_pitch.cos()
            - self.hip_height;
        (r1, r2)
    }

    /// Relative `(hip, knee)` joint angles for the tree.
    pub fn joint_angles(&self) -> (f64, f64) {
        (
            self.thigh_pitch - self.pelvis_pitch,
            self.shank_pitch - self.thigh_pitch,
        )
    }
}

/// Posture that places the wheel under the planar-model CoM at hip height
/// `z_d` above the wheel centre.
pub fn pelvis_ik(z_d: f64, lengths: &LinkLengths, design: &DesignParams) -> Result<IkSolution> {
    let beta = design.beta();
    let (lp, lh, lk) = (lengths.pelvis, lengths.thigh, lengths.shank);
    if !(z_d > 0.0) || !z_d.is_finite() {
        return Err(Error::InfeasibleHeight {
            z_d,
            reason: "hip height must be positive".into(),
        });
    }
    let b2 = beta * beta - 4.0;
    let disc = (4.0 * z_d).powi(2) - b2 * (4.0 * lk * lk - 4.0 * z_d * z_d - beta * beta * lh * lh);
    if disc < 0.0 {
        return Err(Error::InfeasibleHeight {
            z_d,
            reason: format!("negative discriminant {disc:.3e} in the knee-height root"),
        });
    }
    let z_kh = (disc.sqrt() - 4.0 * z_d) / b2;
    let c = z_kh / lh;
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::InfeasibleHeight {
            z_d,
            reason: format!("thigh arccos argument {c:.4} outside [-1, 1]"),
        });
    }
    let th = c.acos();
    let sh = th.sin();
    let sk = -beta * lh * sh / (2.0 * lk);
    let ck = (z_d - z_kh) / lk;
    let tk = sk.atan2(ck);
    let offset = (1.0 - design.alpha / 2.0) * lh * sh;
    let arg = offset / lp;
    let (tp, saturated) = if arg > 1.0 {
        (0.0, true)
    } else {
        (arg.max(-1.0).acos(), false)
    };
    let reached = lp * tp.cos();
    let mass = design.base_mass + design.thigh_mass;
    let com_violation = design.base_mass / mass * (offset - reached);
    Ok(IkSolution {
        hip_height: z_d,
        thigh_pitch: th,
        shank_pitch: tk,
        pelvis_pitch: tp,
        knee_hip_height: z_kh,
        beta,
        pelvis_saturated: saturated,
        com_violation,
    })
}

/// Horizontal wheel position relative to the CoM of the planar model
/// (base mass at the pelvis CoM, thigh mass mid-thigh).
pub fn planar_com_offset(angles: [f64; 3], lengths: &LinkLengths, design: &DesignParams) -> f64 {
    let [tp, th, tk] = angles;
    let base = -lengths.pelvis * tp.cos();
    let knee = -lengths.thigh * th.sin();
    let wheel = knee - lengths.shank * tk.sin();
    let thigh_mid = knee / 2.0;
    let m = design.thigh_mass;
    let big = design.base_mass;
    let com = (big * base + m * thigh_mid) / (m + big);
    wheel - com
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LinRange {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn single(v: f64) -> Self {
        Self::new(v, v, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    pub pelvis: LinRange,
    pub thigh: LinRange,
    pub shank: LinRange,
    pub h_min: f64,
    pub h_max: f64,
    pub h_steps: usize,
    /// Weight on `[0, τ_h, τ_k]`.
    pub weights: Matrix3<f64>,
    pub gravity: f64,
}

impl DesignGrid {
    /// `n`-point grid spanning ±`spread` around the reference lengths.
    pub fn around(lengths: &LinkLengths, n: usize, spread: f64) -> Self {
        let r = |v: f64| {
            if n <= 1 {
                LinRange::single(v)
            } else {
                LinRange::new(v * (1.0 - spread), v * (1.0 + spread), n)
            }
        };
        Self {
            pelvis: r(lengths.pelvis),
            thigh: r(lengths.thigh),
            shank: r(lengths.shank),
            h_min: HIP_HEIGHT_BAND.0,
            h_max: HIP_HEIGHT_BAND.1,
            h_steps: 47,
            weights: Matrix3::identity(),
            gravity: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCandidate {
    pub lengths: LinkLengths,
    /// Integrated weighted torque cost, `None` when excluded.
    pub cost: Option<f64>,
    /// Largest squared horizontal wheel reach at the lowest height.
    pub workspace: Option<f64>,
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub candidates: Vec<DesignCandidate>,
    pub best: Option<usize>,
}

impl DesignReport {
    pub fn best(&self) -> Option<&DesignCandidate> {
        self.best.map(|i| &self.candidates[i])
    }

    /// Fraction of feasible candidates with a strictly lower cost.
    pub fn rank_fraction(&self, cost: f64) -> f64 {
        let feasible: Vec<f64> = self.candidates.iter().filter_map(|c| c.cost).collect();
        if feasible.is_empty() {
            return 1.0;
        }
        feasible.iter().filter(|&&c| c < cost).count() as f64 / feasible.len() as f64
    }
}

/// Exhaustive search over link-length triples for the lowest integrated
/// static torque cost across the hip-height range.
pub fn design_nlp_grid(grid: &DesignGrid, design: &DesignParams) -> Result<DesignReport> {
    if grid.h_steps < 2 || !(grid.h_max > grid.h_min) || !(grid.h_min > 0.0) {
        return Err(Error::Input("height grid needs h_max > h_min > 0 and two steps".into()));
    }
    for r in [&grid.pelvis, &grid.thigh, &grid.shank] {
        if r.count == 0 || !(r.min > 0.0) || r.max < r.min {
            return Err(Error::Input("length ranges must be positive and non-empty".into()));
        }
    }
    let load = (design.thigh_mass + design.base_mass) * grid.gravity;
    let mut candidates = Vec::new();
    for &lp in &grid.pelvis.values() {
        for &lh in &grid.thigh.values() {
            for &lk in &grid.shank.values() {
                let lengths = LinkLengths {
                    pelvis: lp,
                    thigh: lh,
                    shank: lk,
                };
                candidates.push(evaluate_candidate(grid, design, lengths, load));
            }
        }
    }
    let best = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.cost.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(DesignReport { candidates, best })
}

fn evaluate_candidate(grid: &DesignGrid, design: &DesignParams, lengths: LinkLengths, load: f64) -> DesignCandidate {
    let excluded = |reason: String| DesignCandidate {
        lengths,
        cost: None,
        workspace: None,
        excluded: Some(reason),
    };
    let dh = (grid.h_max - grid.h_min) / (grid.h_steps - 1) as f64;
    let mut cost = 0.0;
    for k in 0..grid.h_steps {
        let h = grid.h_min + dh * k as f64;
        let sol = match pelvis_ik(h, &lengths, design) {
            Ok(s) => s,
            Err(e) => return excluded(e.to_string()),
        };
        let (th, tk) = static_joint_torques(
            [sol.pelvis_pitch, sol.thigh_pitch, sol.shank_pitch],
            &lengths,
            load,
        );
        let tau = Vector3::new(0.0, th, tk);
        let w = if k == 0 || k + 1 == grid.h_steps { 0.5 } else { 1.0 };
        cost += w * dh * tau.dot(&(grid.weights * tau));
    }
    match max_reach(&lengths, grid.h_min) {
        Some(ws) => DesignCandidate {
            lengths,
            cost: Some(cost),
            workspace: Some(ws),
            excluded: None,
        },
        None => excluded(format!("height {} unreachable", grid.h_min)),
    }
}

/// `max ‖r_w,x‖²` over leg postures with the hip `h` above the wheel.
fn max_reach(l: &LinkLengths, h: f64) -> Option<f64> {
    let n = 720;
    let mut best: Option<f64> = None;
    for i in 0..=n {
        let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / n as f64;
        let ck = (h - l.thigh * th.cos()) / l.shank;
        if !(-1.0..=1.0).contains(&ck) {
            continue;
        }
        let sk = (1.0 - ck * ck).sqrt();
        for s in [sk, -sk] {
            let x = -l.thigh * th.sin() - l.shank * s;
            let v = x * x;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> (LinkLengths, DesignParams) {
        let p = RobotParams::preset();
        (LinkLengths::of(&p), DesignParams::of(&p).unwrap())
    }

    #[test]
    fn moment_arms_preset() {
        let (a, b) = solve_moment_arms(4.2, 5.8).unwrap();
        assert!((a - 0.64).abs() < 1e-9);
        assert!((b - 1.36).abs() < 1e-9);
        let (a, b) = solve_moment_arms(0.0, 5.8).unwrap();
        assert_eq!((a, b), (1.0, 1.0));
        let (ea, eb) = solve_moment_arms_exact(4.2, 5.8).unwrap();
        assert!((ea + eb - 2.0).abs() < 1e-15);
        assert!((eb - ea - 4.2 / 5.8).abs() < 1e-15);
        assert!(solve_moment_arms(1.0, 0.0).is_err());
    }

    #[test]
    fn beta_value() {
        let (_, d) = preset();
        assert!((d.beta() - 0.7912).abs() < 1e-12);
    }

    #[test]
    fn torques_vanish_without_load_and_for_vertical_shank() {
        let (l, _) = preset();
        assert_eq!(static_joint_torques([0.1, 0.5, -0.3], &l, 0.0), (0.0, 0.0));
        let (_, tk) = static_joint_torques([0.1, 0.5, 0.0], &l, 100.0);
        assert!(tk.abs() < 1e-15);
    }

    #[test]
    fn ik_matches_planar_com() {
        let (l, d) = preset();
        let s = pelvis_ik(0.38, &l, &d).unwrap();
        assert!(!s.pelvis_saturated);
        let off = planar_com_offset([s.pelvis_pitch, s.thigh_pitch, s.shank_pitch], &l, &d);
        assert!(off.abs() < 1e-12, "{off}");
        let (r1, r2) = s.residuals(&l);
        assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
    }

    #[test]
    fn ik_low_height_saturates_pelvis() {
        let (l, d) = preset();
        let s = pelvis_ik(0.2, &l, &d).unwrap();
        assert!(s.pelvis_saturated);
        let off = planar_com_offset([s.pelvis_pitch, s.thigh_pitch, s.shank_pitch], &l, &d);
        assert!((off.abs() - s.com_violation.abs()).abs() < 1e-12);
    }

    #[test]
    fn ik_rejects_unreachable() {
        let (l, d) = preset();
        assert!(matches!(pelvis_ik(0.5, &l, &d), Err(Error::InfeasibleHeight { .. })));
        assert!(pelvis_ik(-0.1, &l, &d).is_err());
    }

    #[test]
    fn singleton_grid_returns_preset() {
        let (l, d) = preset();
        let g = DesignGrid::around(&l, 1, 0.3);
        let r = design_nlp_grid(&g, &d).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.best().unwrap().lengths, l);
        assert!(r.best().unwrap().cost.unwrap() > 0.0);
    }

    #[test]
    fn cost_is_linear_in_weights() {
        let (l, d) = preset();
        let mut g = DesignGrid::around(&l, 3, 0.2);
        let a = design_nlp_grid(&g, &d).unwrap();
        g.weights *= 2.0;
        let b = design_nlp_grid(&g, &d).unwrap();
        for (x, y) in a.candidates.iter().zip(&b.candidates) {
            match (x.cost, y.cost) {
                (Some(cx), Some(cy)) => assert!((cy - 2.0 * cx).abs() < 1e-12 * cx.max(1.0)),
                (None, None) => {}
                _ => panic!("feasibility changed with weights"),
            }
        }
    }

    #[test]
    fn lin_range_values() {
        assert_eq!(LinRange::new(1.0, 2.0, 3).values(), vec![1.0, 1.5, 2.0]);
        assert_eq!(LinRange::single(0.4).values(), vec![0.4]);
    }
}
