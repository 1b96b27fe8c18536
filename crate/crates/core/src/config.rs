//! Scenario configuration files (TOML).
//!
//! Every section is optional; omitted values fall back to the robot preset,
//! the default controller gains and the defaults of the named scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clf::ClfWeights;
use crate::error::{Error, Result};
use crate::reference::{HeightMode, Interpolation, Keyframe, ReferenceTimeline};
use crate::robot::RobotParams;
use crate::simulator::{SimSettings, Terrain};
use crate::wbc::WbcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Stand,
    HeightSweep,
    VelocityStep,
    SlopeClimb,
    Impulse,
    LateralShake,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Stand,
        ScenarioKind::HeightSweep,
        ScenarioKind::VelocityStep,
        ScenarioKind::SlopeClimb,
        ScenarioKind::Impulse,
        ScenarioKind::LateralShake,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Stand => "stand",
            ScenarioKind::HeightSweep => "height-sweep",
            ScenarioKind::VelocityStep => "velocity-step",
            ScenarioKind::SlopeClimb => "slope-climb",
            ScenarioKind::Impulse => "impulse",
            ScenarioKind::LateralShake => "lateral-shake",
        }
    }

    pub fn default_duration(self) -> f64 {
        match self {
            ScenarioKind::Stand => 5.0,
            ScenarioKind::HeightSweep => 10.0,
            ScenarioKind::VelocityStep => 6.0,
            ScenarioKind::SlopeClimb => 8.0,
            ScenarioKind::Impulse => 4.5,
            ScenarioKind::LateralShake => 6.0,
        }
    }

    pub fn default_terrain(self) -> Terrain {
        match self {
            ScenarioKind::SlopeClimb => Terrain::Slopes {
                angle_deg: 15.0,
                run: 0.5,
                start: 1.0,
                blend: 0.05,
            },
            _ => Terrain::Flat,
        }
    }

    pub fn default_hip_height(self) -> f64 {
        match self {
            ScenarioKind::HeightSweep | ScenarioKind::SlopeClimb => 0.40,
            _ => 0.35,
        }
    }

    pub fn default_references(self) -> ReferenceTimeline {
        let key = |t: f64| Keyframe {
            t,
            ..Default::default()
        };
        match self {
            ScenarioKind::HeightSweep => ReferenceTimeline {
                interpolation: Interpolation::Linear,
                height_mode: HeightMode::Hip,
                keyframes: [(0.0, 0.40), (1.0, 0.40), (5.5, 0.24), (10.0, 0.40)]
                    .into_iter()
                    .map(|(t, h)| Keyframe {
                        hip_height: Some(h),
                        ..key(t)
                    })
                    .collect(),
            },
            ScenarioKind::VelocityStep => ReferenceTimeline {
                interpolation: Interpolation::Step,
                height_mode: HeightMode::Hip,
                keyframes: vec![Keyframe {
                    velocity: Some(1.0),
                    ..key(0.0)
                }],
            },
            ScenarioKind::SlopeClimb => ReferenceTimeline {
                interpolation: Interpolation::Linear,
                height_mode: HeightMode::WorldCom,
                keyframes: vec![
                    Keyframe {
                        velocity: Some(0.0),
                        ..key(0.0)
                    },
                    Keyframe {
                        velocity: Some(0.5),
                        ..key(1.0)
                    },
                ],
            },
            _ => ReferenceTimeline::default(),
        }
    }

    pub fn default_disturbances(self) -> Vec<Disturbance> {
        match self {
            ScenarioKind::Impulse => vec![Disturbance::Impulse {
                body: default_body(),
                start: 0.5,
                duration: 0.05,
                impulse: [5.0, 0.0, 0.0],
            }],
            ScenarioKind::LateralShake => vec![Disturbance::LateralShake {
                body: default_body(),
                start: 1.0,
                duration: 4.0,
                amplitude: 15.0,
                frequency: 1.5,
            }],
            _ => Vec::new(),
        }
    }
}

fn default_body() -> String {
    "pelvis".into()
}

/// External load applied at a body's centre of mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Disturbance {
    /// Constant force delivering `impulse` (N·s, world) over the window.
    Impulse {
        #[serde(default = "default_body")]
        body: String,
        start: f64,
        duration: f64,
        impulse: [f64; 3],
    },
    /// Sinusoidal lateral force of `amplitude` N.
    LateralShake {
        #[serde(default = "default_body")]
        body: String,
        start: f64,
        duration: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl Disturbance {
    pub fn body(&self) -> &str {
        match self {
            Disturbance::Impulse { body, .. } | Disturbance::LateralShake { body, .. } => body,
        }
    }

    fn window(&self) -> (f64, f64) {
        match *self {
            Disturbance::Impulse { start, duration, .. } | Disturbance::LateralShake { start, duration, .. } => {
                (start, duration)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (start, duration) = self.window();
        if !(start >= 0.0) || !(duration > 0.0) || !start.is_finite() || !duration.is_finite() {
            return Err(Error::Config("disturbance needs start ≥ 0 and duration > 0".into()));
        }
        match self {
            Disturbance::Impulse { impulse, .. } if impulse.iter().any(|v| !v.is_finite()) => {
                Err(Error::Config("impulse must be finite".into()))
            }
            Disturbance::LateralShake { amplitude, frequency, .. } if !(amplitude.is_finite() && *frequency > 0.0) => {
                Err(Error::Config("lateral shake needs a finite amplitude and positive frequency".into()))
            }
            _ => Ok(()),
        }
    }

    /// World force at time `t`.
    pub fn force(&self, t: f64) -> nalgebra::Vector3<f64> {
        let (start, duration) = self.window();
        if t < start || t >= start + duration {
            return nalgebra::Vector3::zeros();
        }
        match *self {
            Disturbance::Impulse { impulse, .. } => nalgebra::Vector3::from(impulse) / duration,
            Disturbance::LateralShake {
                amplitude, frequency, ..
            } => {
                let s = (std::f64::consts::TAU * frequency * (t - start)).sin();
                nalgebra::Vector3::new(0.0, amplitude * s, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    /// Hip height of the initial balanced stance; the scenario default when absent.
    pub hip_height: Option<f64>,
    /// Upper-body CoM ahead of the wheel axle, m.
    pub offset: f64,
    /// Forward velocity of the whole robot, m/s.
    pub velocity: f64,
    /// Amplitude of a uniform random perturbation of the joint velocities.
    pub joint_velocity_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub controller: WbcConfig,
    #[serde(default)]
    pub clf: ClfWeights,
    #[serde(default)]
    pub simulation: SimSettings,
    #[serde(default)]
    pub terrain: Option<Terrain>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub references: Option<ReferenceTimeline>,
    #[serde(default)]
    pub disturbances: Option<Vec<Disturbance>>,
}

impl ScenarioConfig {
    /// Scenario with every value at its default.
    pub fn preset(kind: ScenarioKind) -> Self {
        Self {
            scenario: kind,
            duration: None,
            seed: 0,
            output_dir: None,
            robot: RobotParams::preset(),
            controller: WbcConfig::default(),
            clf: ClfWeights::default(),
            simulation: SimSettings::default(),
            terrain: None,
            initial: InitialState::default(),
            references: None,
            disturbances: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.scenario.default_duration())
    }

    pub fn terrain(&self) -> Terrain {
        self.terrain.unwrap_or_else(|| self.scenario.default_terrain())
    }

    pub fn references(&self) -> ReferenceTimeline {
        self.references.clone().unwrap_or_else(|| self.scenario.default_references())
    }

    pub fn disturbances(&self) -> Vec<Disturbance> {
        self.disturbances.clone().unwrap_or_else(|| self.scenario.default_disturbances())
    }

    pub fn hip_height(&self) -> f64 {
        self.initial.hip_height.unwrap_or_else(|| self.scenario.default_hip_height())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.duration();
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Config(format!("duration must be positive, got {d}")));
        }
        self.robot.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.controller.validate()?;
        if !(self.clf.r > 0.0) || self.clf.q.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("CLF weights must be positive".into()));
        }
        self.simulation.validate()?;
        self.terrain().validate()?;
        self.references().validate()?;
        for d in self.disturbances() {
            d.validate()?;
        }
        let (lo, hi) = crate::design::HIP_HEIGHT_BAND;
        let h = self.hip_height();
        if !(lo..=hi).contains(&h) {
            return Err(Error::Config(format!("initial hip_height {h} outside [{lo}, {hi}]")));
        }
        let ratio = self.controller.dt / self.simulation.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Config(format!(
                "control period {} must be an integer multiple of the simulation step {}",
                self.controller.dt, self.simulation.dt
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ScenarioConfig::from_toml_str("scenario = \"velocity-step\"\n").unwrap();
        assert_eq!(c.scenario, ScenarioKind::VelocityStep);
        assert_eq!(c.controller, WbcConfig::default());
        assert_eq!(c.duration(), 6.0);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = ScenarioConfig::from_toml_str("scenario = \"stand\"\n\n[controller]\nfriction = 0.4\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
scenario = "impulse"
duration = 2.0

[controller.com_height]
kp = 50.0
kd = 5.0
weight = 10.0

[[disturbances]]
kind = "impulse"
start = 0.2
duration = 0.02
impulse = [2.0, 0.0, 0.0]
"#;
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(c.controller.com_height.kp, 50.0);
        assert_eq!(c.disturbances().len(), 1);
        let f = c.disturbances()[0].force(0.21);
        assert!((f.x - 100.0).abs() < 1e-12);
        assert_eq!(c.disturbances()[0].force(0.25).x, 0.0);
    }

    #[test]
    fn bad_timing_rejected() {
        let text = "scenario = \"stand\"\n[simulation]\ndt = 3e-4\n";
        assert!(ScenarioConfig::from_toml_str(text).is_err());
    }
}
