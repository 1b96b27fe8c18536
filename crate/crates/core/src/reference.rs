//! Reference generation: the hip-height posture map built from the pelvis
//! inverse kinematics and piecewise reference timelines.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{pelvis_ik, DesignParams, LinkLengths, HIP_HEIGHT_BAND};
use crate::error::{Error, Result};
use crate::robot::{Robot, NUM_DOF};

/// Balanced postures sampled over the hip-height band.
#[derive(Debug, Clone, PartialEq)]
pub struct PostureMap {
    hip: Vec<f64>,
    pelvis_pitch: Vec<f64>,
    /// Upper-body CoM height above the wheel centres.
    com_height: Vec<f64>,
    legs: Vec<(f64, f64)>,
}

impl PostureMap {
    pub fn new(robot: &Robot, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Input("posture map needs at least two samples".into()));
        }
        let lengths = LinkLengths::of(&robot.params);
        let design = DesignParams::of(&robot.params)?;
        let (lo, hi) = HIP_HEIGHT_BAND;
        let upper = robot.upper_bodies();
        let mut map = Self {
            hip: Vec::with_capacity(samples),
            pelvis_pitch: Vec::with_capacity(samples),
            com_height: Vec::with_capacity(samples),
            legs: Vec::with_capacity(samples),
        };
        for i in 0..samples {
            let h = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let ik = pelvis_ik(h, &lengths, &design)?;
            let guess = map.legs.last().copied().unwrap_or((ik.thigh_pitch, ik.shank_pitch));
            let q = robot.balanced_stance(h, ik.pelvis_pitch, guess)?;
            let kin = robot.tree.kinematics(&q, &DVector::zeros(NUM_DOF))?;
            let z = kin.com_state(&upper)?.position.z - robot.params.wheel_radius;
            map.hip.push(h);
            map.pelvis_pitch.push(ik.pelvis_pitch);
            map.com_height.push(z);
            let pitch = q[4];
            map.legs.push((q[6] + pitch, q[7] + q[6] + pitch));
        }
        if map.com_height.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Numerical {
                routine: "PostureMap::new",
                detail: "CoM height is not monotone in hip height".into(),
                residual: 0.0,
            });
        }
        Ok(map)
    }

    pub fn band(&self) -> (f64, f64) {
        (self.hip[0], *self.hip.last().unwrap())
    }

    fn locate(xs: &[f64], x: f64) -> (usize, f64) {
        let n = xs.len();
        let x = x.clamp(xs[0], xs[n - 1]);
        let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        (i, t)
    }

    fn lerp(ys: &[f64], i: usize, t: f64) -> f64 {
        ys[i] + t * (ys[i + 1] - ys[i])
    }

    /// Pelvis pitch from the inverse kinematics at hip height `h`.
    pub fn pelvis_pitch(&self, h: f64) -> f64 {
        let (i, t) = Self::locate(&self.hip, h);
        Self::lerp(&self.pelvis_pitch, i, t)
    }

    /// Upper-body CoM height above the wheel centres and its slope `dz/dh`.
    pub fn com_height(&self, h: f64) -> (f64, f64) {
        let (i, t) = Self::locate(&self.hip, h);
        let slope = (self.com_height[i + 1] - self.com_height[i]) / (self.hip[i + 1] - self.hip[i]);
        (Self::lerp(&self.com_height, i, t), slope)
    }

    /// Hip height whose balanced posture has CoM height `z` above the
    /// wheel centres, clamped to the band.
    pub fn hip_for_com_height(&self, z: f64) -> f64 {
        let (i, t) = Self::locate(&self.com_height, z);
        Self::lerp(&self.hip, i, t)
    }

    /// Balanced stance at hip height `h`, wheels on flat ground at the origin.
    pub fn stance(&self, robot: &Robot, h: f64, offset: f64) -> Result<DVector<f64>> {
        let (i, t) = Self::locate(&self.hip, h);
        let k = if t < 0.5 { i } else { i + 1 };
        robot.offset_stance(h, self.pelvis_pitch(h), offset, self.legs[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    Step,
}

/// How the CoM-height task reference is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightMode {
    /// Follow the hip-height channel; CoM height and pelvis pitch come from
    /// the posture map relative to the wheels.
    #[default]
    Hip,
    /// Hold the world CoM height channel; the hip height adapts to the
    /// terrain under the wheels.
    WorldCom,
}

/// One timeline entry; absent channels keep their previous course.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t: f64,
    pub velocity: Option<f64>,
    pub yaw: Option<f64>,
    pub roll: Option<f64>,
    pub hip_height: Option<f64>,
    pub com_height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceTimeline {
    pub interpolation: Interpolation,
    pub height_mode: HeightMode,
    pub keyframes: Vec<Keyframe>,
}

/// Channel values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub rate: f64,
}

impl ReferenceTimeline {
    pub fn validate(&self) -> Result<()> {
        for w in self.keyframes.windows(2) {
            if !(w[1].t >= w[0].t) {
                return Err(Error::Config("reference keyframes must be sorted by time".into()));
            }
        }
        for k in &self.keyframes {
            if !k.t.is_finite() {
                return Err(Error::Config("reference keyframe time must be finite".into()));
            }
            if let Some(h) = k.hip_height {
                let (lo, hi) = HIP_HEIGHT_BAND;
                if !(lo..=hi).contains(&h) {
                    return Err(Error::Config(format!(
                        "hip_height {h} outside the operating band [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn channel(&self, t: f64, default: f64, get: impl Fn(&Keyframe) -> Option<f64>) -> Sample {
        let points: Vec<(f64, f64)> = self.keyframes.iter().filter_map(|k| get(k).map(|v| (k.t, v))).collect();
        let Some(first) = points.first() else {
            return Sample { value: default, rate: 0.0 };
        };
        if t < first.0 {
            return Sample { value: first.1, rate: 0.0 };
        }
        let i = points.partition_point(|p| p.0 <= t);
        if i >= points.len() {
            return Sample {
                value: points[points.len() - 1].1,
                rate: 0.0,
            };
        }
        let (t0, v0) = points[i - 1];
        let (t1, v1) = points[i];
        match self.interpolation {
            Interpolation::Step => Sample { value: v0, rate: 0.0 },
            Interpolation::Linear => {
                let rate = (v1 - v0) / (t1 - t0);
                Sample {
                    value: v0 + rate * (t - t0),
                    rate,
                }
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Sample {
        self.channel(t, 0.0, |k| k.velocity)
    }

    pub fn yaw(&self, t: f64) -> Sample {
        self.channel(t, 0.0, |k| k.yaw)
    }

    pub fn roll(&self, t: f64) -> Sample {
        self.channel(t, 0.0, |k| k.roll)
    }

    pub fn hip_height(&self, t: f64, default: f64) -> Sample {
        self.channel(t, default, |k| k.hip_height)
    }

    pub fn com_height(&self, t: f64, default: f64) -> Sample {
        self.channel(t, default, |k| k.com_height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posture_map_round_trip() {
        let robot = Robot::preset();
        let map = PostureMap::new(&robot, 24).unwrap();
        for h in [0.22, 0.3, 0.37, 0.42] {
            let (z, slope) = map.com_height(h);
            assert!(slope > 0.0);
            assert!((map.hip_for_com_height(z) - h).abs() < 1e-9);
        }
        let q = map.stance(&robot, 0.35, 0.0).unwrap();
        assert!((q[4] - map.pelvis_pitch(0.35)).abs() < 1e-12);
    }

    #[test]
    fn timeline_channels() {
        let tl = ReferenceTimeline {
            interpolation: Interpolation::Linear,
            height_mode: HeightMode::Hip,
            keyframes: vec![
                Keyframe {
                    t: 0.0,
                    velocity: Some(0.0),
                    ..Default::default()
                },
                Keyframe {
                    t: 2.0,
                    velocity: Some(1.0),
                    yaw: Some(0.5),
                    ..Default::default()
                },
            ],
        };
        let v = tl.velocity(1.0);
        assert!((v.value - 0.5).abs() < 1e-15 && (v.rate - 0.5).abs() < 1e-15);
        assert_eq!(tl.velocity(5.0).value, 1.0);
        assert_eq!(tl.yaw(1.0).value, 0.5);
        assert_eq!(tl.roll(1.0).value, 0.0);
        let step = ReferenceTimeline {
            interpolation: Interpolation::Step,
            ..tl.clone()
        };
        assert_eq!(step.velocity(1.999).value, 0.0);
        assert_eq!(step.velocity(2.0).value, 1.0);
    }
}
