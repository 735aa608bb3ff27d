//! Scenario files: versioned TOML with `scene`, `device` and `learner` sections.
//!
//! ```toml
//! version = 1
//!
//! [scene]
//! kind = "wall-switch"          # wall-switch | rocker | drawer
//! texture_seed = 11
//! device = [0.0, 1.0, 1.2]      # placement (m); y fixes the wall plane
//! wall_size = [3.0, 2.5]        # width, height (m)
//! image_size = [480, 640]       # H, W (px)
//! focal = 900.0
//! principal = [319.5, 239.5]
//! camera_height = 1.2
//! nominal_pose = { x = 0.0, y = 0.4, heading = 1.5707963267948966 }
//! pose_noise = [0.0185, 0.0179] # std of the point 50 cm ahead, x and y (m)
//!
//! [device]
//! label_noise = 0.0
//!
//! [learner]
//! seed_point = [0.0, 1.0, 1.168]
//! ```

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceConfig, DeviceKind};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose2};
use crate::scene::ScenarioConfig;
use crate::svm::SvmParams;

pub const SCENARIO_VERSION: u32 = 1;

/// Learner and training-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// User-designated starting location for the forward behavior.
    pub seed_point: [f64; 3],
    /// Candidate points sampled per observation.
    pub candidates: usize,
    /// Std-dev (m) of the Gaussian search prior per axis.
    pub sampler_std: [f64; 3],
    /// Std-dev (m) of the spherical initialization Gaussian, per behavior
    /// (forward, reverse).
    pub init_std: [f64; 2],
    /// Maximum initialization trials.
    pub init_cap: usize,
    /// Maximum labels per approach visit.
    pub visit_budget: usize,
    pub practice_poses: usize,
    /// Maximum labels per behavior before training gives up.
    pub label_cap: usize,
    /// Maximum attempts when executing a trained behavior.
    pub max_attempts: usize,
    pub pca_dims: usize,
    /// RBF width; `None` picks 1 / (dims * feature variance).
    pub gamma: Option<f64>,
    /// Negative-class cost C-; C+ is scaled by #neg/#pos.
    pub cost: f64,
    pub tolerance: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            seed_point: [0.0, 1.0, 1.2],
            candidates: 200,
            sampler_std: [0.03, 0.03, 0.03],
            init_std: [0.02, 0.02],
            init_cap: 50,
            visit_budget: 6,
            practice_poses: 8,
            label_cap: 300,
            max_attempts: 10,
            pca_dims: 50,
            gamma: None,
            cost: 1.0,
            tolerance: 1e-3,
        }
    }
}

impl LearnerConfig {
    pub fn seed(&self) -> Point3 {
        Point3::new(self.seed_point[0], self.seed_point[1], self.seed_point[2])
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            gamma: self.gamma,
            c_neg: self.cost,
            c_pos: None,
            tolerance: self.tolerance,
            ..SvmParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.candidates == 0 {
            return bad("candidates must be >= 1");
        }
        if self.sampler_std.iter().chain(&self.init_std).any(|s| !(*s > 0.0)) {
            return bad("sampler and init std-devs must be > 0");
        }
        if self.visit_budget == 0 || self.practice_poses == 0 || self.max_attempts == 0 {
            return bad("visit budget, practice poses and attempts must be >= 1");
        }
        if self.pca_dims == 0 {
            return bad("pca_dims must be >= 1");
        }
        if self.gamma.is_some_and(|g| !(g > 0.0)) || !(self.cost > 0.0) || !(self.tolerance > 0.0) {
            return bad("gamma, cost and tolerance must be > 0");
        }
        Ok(())
    }
}

/// Complete description of one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub scene: ScenarioConfig,
    #[serde(default)]
    pub device: DeviceConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported scenario version {}", s.version)));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.device.validate()?;
        self.learner.validate()
    }

    /// Built-in standard scenario for a device kind.
    pub fn standard(kind: DeviceKind) -> Self {
        let (scene, learner) = match kind {
            DeviceKind::WallSwitch => (
                wall_scene(kind, 11, [0.0185, 0.0179]),
                LearnerConfig { seed_point: [0.0, 1.0, 1.2 - 0.032], gamma: None, ..Default::default() },
            ),
            DeviceKind::Rocker => (
                wall_scene(kind, 23, [0.0155, 0.0238]),
                LearnerConfig { seed_point: [0.0, 1.0, 1.2 + 0.02], ..Default::default() },
            ),
            DeviceKind::Drawer => (
                ScenarioConfig {
                    kind,
                    texture_seed: 37,
                    device: [0.0, 1.0, 0.75],
                    wall_size: [3.0, 2.5],
                    image_size: [480, 640],
                    focal: 600.0,
                    principal: [319.5, 239.5],
                    camera_height: 0.75,
                    nominal_pose: Pose2::new(0.0, 0.1, FRAC_PI_2),
                    pose_noise: [0.0185, 0.0179],
                    cloud_stride: 2,
                },
                LearnerConfig {
                    seed_point: [0.0, 1.0, 0.75],
                    sampler_std: [0.08, 0.08, 0.06],
                    init_std: [0.02, 0.06],
                    ..Default::default()
                },
            ),
        };
        Scenario { version: SCENARIO_VERSION, scene, device: DeviceConfig::default(), learner }
    }
}

fn wall_scene(kind: DeviceKind, texture_seed: u64, pose_noise: [f64; 2]) -> ScenarioConfig {
    ScenarioConfig {
        kind,
        texture_seed,
        device: [0.0, 1.0, 1.2],
        wall_size: [3.0, 2.5],
        image_size: [480, 640],
        focal: 900.0,
        principal: [319.5, 239.5],
        camera_height: 1.2,
        nominal_pose: Pose2::new(0.0, 0.4, FRAC_PI_2),
        pose_noise,
        cloud_stride: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_scenarios_round_trip_through_toml() {
        for kind in DeviceKind::ALL {
            let s = Scenario::standard(kind);
            s.validate().unwrap();
            let back = Scenario::from_toml(&s.to_toml()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn rejects_wrong_version_and_unknown_keys() {
        let mut text = Scenario::standard(DeviceKind::Rocker).to_toml();
        text = text.replacen("version = 1", "version = 2", 1);
        assert!(matches!(Scenario::from_toml(&text), Err(Error::InvalidConfig(_))));
        let text = Scenario::standard(DeviceKind::Rocker).to_toml() + "\nbogus = 3\n";
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"
version = 1
[scene]
kind = "drawer"
texture_seed = 1
device = [0.0, 1.0, 0.75]
wall_size = [3.0, 2.5]
image_size = [480, 640]
focal = 600.0
principal = [319.5, 239.5]
camera_height = 0.75
nominal_pose = { x = 0.0, y = 0.1, heading = 1.5707963267948966 }
pose_noise = [0.0, 0.0]
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.scene.cloud_stride, 2);
        assert_eq!(s.learner.visit_budget, 6);
        assert_eq!(s.learner.practice_poses, 8);
        assert_eq!(s.device.min_travel, 0.10);
    }
}
