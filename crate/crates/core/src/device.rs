//! Binary-state devices, behavior execution and verification.
//!
//! Each device supports a pair of complementary behaviors. `Forward` drives
//! the device from inactive to active (switch on, rocker on, drawer open) and
//! `Reverse` drives it back. A behavior succeeds only when the device is in
//! its start state and the contact point falls inside its success region.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::rng::SimRng;
use crate::scene::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    #[serde(alias = "light-switch")]
    WallSwitch,
    Rocker,
    Drawer,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 3] = [DeviceKind::WallSwitch, DeviceKind::Rocker, DeviceKind::Drawer];

    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::WallSwitch => "wall-switch",
            DeviceKind::Rocker => "rocker",
            DeviceKind::Drawer => "drawer",
        }
    }

    /// Whether toggling the device changes the room lighting.
    pub fn is_lit(self) -> bool {
        !matches!(self, DeviceKind::Drawer)
    }
}

/// One side of a complementary behavior pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    /// Inactive -> active.
    Forward,
    /// Active -> inactive.
    Reverse,
}

impl Behavior {
    pub const BOTH: [Behavior; 2] = [Behavior::Forward, Behavior::Reverse];

    pub fn complement(self) -> Behavior {
        match self {
            Behavior::Forward => Behavior::Reverse,
            Behavior::Reverse => Behavior::Forward,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self, kind: DeviceKind) -> &'static str {
        match (kind, self) {
            (DeviceKind::WallSwitch, Behavior::Forward) => "switch-on",
            (DeviceKind::WallSwitch, Behavior::Reverse) => "switch-off",
            (DeviceKind::Rocker, Behavior::Forward) => "rocker-on",
            (DeviceKind::Rocker, Behavior::Reverse) => "rocker-off",
            (DeviceKind::Drawer, Behavior::Forward) => "drawer-open",
            (DeviceKind::Drawer, Behavior::Reverse) => "drawer-close",
        }
    }
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region3 {
    pub min: Point3,
    pub max: Point3,
}

impl Region3 {
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Unsigned distance from `p` to the box boundary, measured in the wall
    /// plane (x, z).
    pub fn boundary_distance_xz(&self, p: &Point3) -> f64 {
        let dx_out = (self.min.x - p.x).max(p.x - self.max.x);
        let dz_out = (self.min.z - p.z).max(p.z - self.max.z);
        if dx_out <= 0.0 && dz_out <= 0.0 {
            (-dx_out).min(-dz_out)
        } else {
            let ox = dx_out.max(0.0);
            let oz = dz_out.max(0.0);
            (ox * ox + oz * oz).sqrt()
        }
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }
}

/// Success-detection method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerifierKind {
    /// Ground truth from the simulator.
    Oracle,
    /// Success iff the mean image intensity changes by more than `threshold`.
    IntensityDiff { threshold: f64 },
    /// Success iff the gripper travelled at least `min_travel` metres.
    Displacement { min_travel: f64 },
}

/// Device geometry and verifier tuning read from the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    /// Probability of flipping an outcome inside the boundary shell.
    pub label_noise: f64,
    /// Width of the boundary shell (m) where label noise applies.
    pub noise_shell: f64,
    /// Distance a drawer moves when operated successfully (m).
    pub drawer_travel: f64,
    /// Mean-intensity change that counts as a lighting change.
    pub intensity_threshold: f64,
    /// Minimum gripper travel for drawer behaviors (m).
    pub min_travel: f64,
    /// Use ground truth instead of the sensor-based verifier.
    pub oracle_verifier: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            label_noise: 0.0,
            noise_shell: 0.005,
            drawer_travel: 0.15,
            intensity_threshold: 10.0,
            min_travel: 0.10,
            oracle_verifier: false,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label_noise must be in [0, 1]".into()));
        }
        if self.noise_shell < 0.0 || self.drawer_travel < 0.0 || self.min_travel < 0.0 {
            return Err(Error::InvalidConfig("device distances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn verifier(&self, kind: DeviceKind) -> VerifierKind {
        if self.oracle_verifier {
            return VerifierKind::Oracle;
        }
        match kind {
            DeviceKind::WallSwitch | DeviceKind::Rocker => {
                VerifierKind::IntensityDiff { threshold: self.intensity_threshold }
            }
            DeviceKind::Drawer => VerifierKind::Displacement { min_travel: self.min_travel },
        }
    }
}

/// Result of running a behavior at a 3D location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorOutcome {
    pub success: bool,
    /// Location handed to the complementary behavior.
    pub point: Point3,
    /// Simulated gripper travel while in contact (m).
    pub travel: f64,
}

/// Plate and part dimensions (m), all centred on the device placement.
pub mod dims {
    pub const PLATE_HALF_W: f64 = 0.035;
    pub const PLATE_HALF_H: f64 = 0.057;
    pub const TOGGLE_HALF_W: f64 = 0.004;
    pub const TOGGLE_HALF_H: f64 = 0.012;
    pub const PADDLE_HALF_W: f64 = 0.02;
    pub const PADDLE_HALF_H: f64 = 0.035;
    pub const DRAWER_HALF_W: f64 = 0.20;
    pub const DRAWER_HALF_H: f64 = 0.08;
    pub const HANDLE_HALF_W: f64 = 0.06;
    pub const HANDLE_HALF_H: f64 = 0.01;

    /// Light switch finger band: half-width and vertical span from the toggle centre.
    pub const SWITCH_BAND_HALF_W: f64 = 0.01;
    pub const SWITCH_BAND_NEAR: f64 = 0.012;
    pub const SWITCH_BAND_FAR: f64 = 0.052;
    /// Rocker dead zone half-height.
    pub const ROCKER_DEAD_HALF: f64 = 0.005;

    pub const SWITCH_OFFSET: f64 = 0.08;
    pub const ROCKER_OFFSET: f64 = 0.05;
    /// Half-thickness of success regions normal to the wall.
    pub const REGION_DEPTH: f64 = 0.02;
}

/// A binary-state device with ground-truth success regions.
#[derive(Debug, Clone)]
pub struct SimDevice {
    kind: DeviceKind,
    center: Point3,
    active: bool,
    config: DeviceConfig,
    noise_rng: SimRng,
}

impl SimDevice {
    /// A new device in its inactive state (switch off, drawer closed).
    pub fn new(kind: DeviceKind, center: Point3, config: DeviceConfig, noise_seed: u64) -> Self {
        Self { kind, center, active: false, config, noise_rng: SimRng::seed_from_u64(noise_seed) }
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    /// Force the world state (evaluation resets between trials).
    pub fn set_active(&mut self, active: bool) {
        self.active = active;
    }

    pub fn verifier(&self) -> VerifierKind {
        self.config.verifier(self.kind)
    }

    pub fn region(&self, which: Behavior) -> Region3 {
        use dims::*;
        let c = self.center;
        let bx = |hw: f64, z0: f64, z1: f64| Region3 {
            min: Point3::new(c.x - hw, c.y - REGION_DEPTH, c.z + z0),
            max: Point3::new(c.x + hw, c.y + REGION_DEPTH, c.z + z1),
        };
        match (self.kind, which) {
            (DeviceKind::WallSwitch, Behavior::Forward) => {
                bx(SWITCH_BAND_HALF_W, -SWITCH_BAND_FAR, -SWITCH_BAND_NEAR)
            }
            (DeviceKind::WallSwitch, Behavior::Reverse) => {
                bx(SWITCH_BAND_HALF_W, SWITCH_BAND_NEAR, SWITCH_BAND_FAR)
            }
            (DeviceKind::Rocker, Behavior::Forward) => bx(PADDLE_HALF_W, ROCKER_DEAD_HALF, PADDLE_HALF_H),
            (DeviceKind::Rocker, Behavior::Reverse) => bx(PADDLE_HALF_W, -PADDLE_HALF_H, -ROCKER_DEAD_HALF),
            (DeviceKind::Drawer, Behavior::Forward) => bx(HANDLE_HALF_W, -HANDLE_HALF_H, HANDLE_HALF_H),
            (DeviceKind::Drawer, Behavior::Reverse) => bx(DRAWER_HALF_W, -DRAWER_HALF_H, DRAWER_HALF_H),
        }
    }

    /// Displacement applied to the contact point on success.
    pub fn complement_offset(&self, which: Behavior) -> Vector3<f64> {
        let sign = match which {
            Behavior::Forward => 1.0,
            Behavior::Reverse => -1.0,
        };
        match self.kind {
            // Flip-up starts below the toggle and slides up past it.
            DeviceKind::WallSwitch => Vector3::new(0.0, 0.0, sign * dims::SWITCH_OFFSET),
            // Pressing the top hands over to the bottom half and vice versa.
            DeviceKind::Rocker => Vector3::new(0.0, 0.0, -sign * dims::ROCKER_OFFSET),
            // Gripper tip ends displaced along the drawer normal (towards the robot when opening).
            DeviceKind::Drawer => Vector3::new(0.0, -sign * self.config.drawer_travel, 0.0),
        }
    }

    pub fn is_start_state(&self, which: Behavior) -> bool {
        match which {
            Behavior::Forward => !self.active,
            Behavior::Reverse => self.active,
        }
    }

    pub fn is_goal_state(&self, which: Behavior) -> bool {
        !self.is_start_state(which)
    }

    /// Whichever behavior can currently succeed.
    pub fn applicable(&self) -> Behavior {
        if self.active {
            Behavior::Reverse
        } else {
            Behavior::Forward
        }
    }

    /// Run `which` with contact point `p`. Failure leaves the device untouched
    /// and hands back `p` itself.
    pub fn execute_behavior(&mut self, which: Behavior, p: Point3) -> BehaviorOutcome {
        if !self.is_start_state(which) {
            return BehaviorOutcome { success: false, point: p, travel: 0.0 };
        }
        let region = self.region(which);
        let mut success = region.contains(&p);
        if self.config.label_noise > 0.0
            && (p.y - self.center.y).abs() <= dims::REGION_DEPTH
            && region.boundary_distance_xz(&p) <= self.config.noise_shell
        {
            let draw: f64 = self.noise_rng.random();
            if draw < self.config.label_noise {
                success = !success;
            }
        }
        if success {
            self.active = !self.active;
            let travel = if self.kind == DeviceKind::Drawer { self.config.drawer_travel } else { 0.0 };
            BehaviorOutcome { success, point: p + self.complement_offset(which), travel }
        } else {
            BehaviorOutcome { success, point: p, travel: 0.0 }
        }
    }
}

/// Decide success from before/after sensor readings.
pub fn verify(
    kind: VerifierKind,
    before: &Observation,
    after: &Observation,
    truth: &BehaviorOutcome,
) -> Result<bool> {
    let (a, b) = (&before.image, &after.image);
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ImageSizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(match kind {
        VerifierKind::Oracle => truth.success,
        VerifierKind::IntensityDiff { threshold } => {
            (b.mean_intensity() - a.mean_intensity()).abs() > threshold
        }
        VerifierKind::Displacement { min_travel } => truth.travel >= min_travel,
    })
}
