//! Synthetic planar scenes, registered captures and navigation noise.
//!
//! A scene is one textured wall plane at `y = device.y`. Texture is a pure
//! function of the wall coordinates, the texture seed and the device state, so
//! every view of the same physical spot sees the same appearance.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::device::{dims, DeviceKind, SimDevice};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Point3, Pose2};
use crate::image::RgbImage;

/// Largest patch width plus one; images must be at least this big.
pub const MIN_IMAGE_SIDE: usize = 322;
/// Gain applied to every pixel while a lit device is on.
pub const ILLUMINATION_GAIN: f64 = 1.25;
/// Distance ahead of the base at which navigation error is specified.
pub const LOOKAHEAD: f64 = 0.5;
/// Fraction of the look-ahead point's lateral error attributed to heading.
pub const HEADING_SHARE: f64 = 0.5;

const VOID: [u8; 3] = [24, 24, 28];

/// Geometry, optics and noise for one simulated environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: DeviceKind,
    pub texture_seed: u64,
    /// Device placement (m). Its `y` fixes the wall plane.
    pub device: [f64; 3],
    /// Wall width and height (m); x spans [-w/2, w/2], z spans [0, h].
    pub wall_size: [f64; 2],
    /// Image height and width (px).
    pub image_size: [usize; 2],
    pub focal: f64,
    /// Principal point (cx, cy) in pixels.
    pub principal: [f64; 2],
    pub camera_height: f64,
    pub nominal_pose: Pose2,
    /// Std-dev (m) of the point 50 cm ahead of the robot in world x and y.
    pub pose_noise: [f64; 2],
    /// Pixel stride of the registered point cloud.
    #[serde(default = "default_stride")]
    pub cloud_stride: usize,
}

fn default_stride() -> usize {
    2
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.image_size;
        if h < MIN_IMAGE_SIDE || w < MIN_IMAGE_SIDE {
            return Err(Error::InvalidConfig(format!("image {h}x{w} smaller than {MIN_IMAGE_SIDE}px")));
        }
        if self.pose_noise.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("pose noise std-devs must be >= 0".into()));
        }
        if !(self.focal > 0.0) || self.wall_size.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("focal length and wall size must be positive".into()));
        }
        if self.cloud_stride == 0 {
            return Err(Error::InvalidConfig("cloud_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn device_point(&self) -> Point3 {
        Point3::new(self.device[0], self.device[1], self.device[2])
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics { focal: self.focal, cx: self.principal[0], cy: self.principal[1] }
    }

    pub fn camera(&self, pose: Pose2) -> Camera {
        Camera { pose, height: self.camera_height, intrinsics: self.intrinsics() }
    }

    pub fn noise(&self) -> PoseNoise {
        PoseNoise { std_x: self.pose_noise[0], std_y: self.pose_noise[1] }
    }

    fn wall_contains(&self, x: f64, z: f64) -> bool {
        let [w, h] = self.wall_size;
        x.abs() <= w / 2.0 && (0.0..=h).contains(&z)
    }
}

/// Navigation error expressed at the look-ahead point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseNoise {
    pub std_x: f64,
    pub std_y: f64,
}

/// Perturb a nominal base pose. The point `LOOKAHEAD` ahead of the perturbed
/// pose is displaced from the nominal one by exactly N(0, std_x^2) x
/// N(0, std_y^2); part of the lateral component is realised as heading error.
pub fn sample_approach_pose<R: Rng + ?Sized>(nominal: Pose2, noise: PoseNoise, rng: &mut R) -> Pose2 {
    if noise.std_x == 0.0 && noise.std_y == 0.0 {
        return nominal;
    }
    let dx = Normal::new(0.0, noise.std_x).expect("finite std").sample(rng);
    let dy = Normal::new(0.0, noise.std_y).expect("finite std").sample(rng);
    let (lx, ly) = nominal.lateral();
    let lateral = dx * lx + dy * ly;
    let heading = nominal.heading + HEADING_SHARE * lateral / LOOKAHEAD;
    let (px, py) = nominal.point_ahead(LOOKAHEAD);
    let (px, py) = (px + dx, py + dy);
    Pose2::new(px - LOOKAHEAD * heading.cos(), py - LOOKAHEAD * heading.sin(), heading)
}

/// A rendered-on-demand scene for one device state.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    config: ScenarioConfig,
    kind: DeviceKind,
    center: Point3,
    active: bool,
    palette: Palette,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Palette {
    base: [f64; 3],
    gradient: [f64; 2],
}

impl Palette {
    fn from_seed(seed: u64) -> Self {
        let h = mix(seed, 0x5eed);
        let unit = |k: u32| ((h >> (k * 8)) & 0xff) as f64 / 255.0;
        Palette {
            base: [105.0 + 50.0 * unit(0), 100.0 + 50.0 * unit(1), 90.0 + 50.0 * unit(2)],
            gradient: [(unit(3) - 0.5) * 30.0, (unit(4) - 0.5) * 30.0],
        }
    }
}

/// Build the scene for the device's current state.
pub fn generate_scene(config: &ScenarioConfig, device: &SimDevice) -> Result<SceneModel> {
    config.validate()?;
    let center = device.center();
    if !config.wall_contains(center.x, center.z) {
        return Err(Error::DeviceOutsideWall { x: center.x, z: center.z });
    }
    Ok(SceneModel {
        config: config.clone(),
        kind: device.kind(),
        center,
        active: device.is_active(),
        palette: Palette::from_seed(config.texture_seed),
    })
}

impl SceneModel {
    pub fn wall_y(&self) -> f64 {
        self.center.y
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Scene illumination level in [0, 1].
    pub fn brightness(&self) -> f64 {
        if self.kind.is_lit() && self.active {
            1.0
        } else {
            1.0 / ILLUMINATION_GAIN
        }
    }

    fn gain(&self) -> f64 {
        self.brightness() * ILLUMINATION_GAIN
    }

    /// Final 8-bit colour of a wall point, or `None` off the wall.
    pub fn color_at(&self, x: f64, z: f64) -> Option<[u8; 3]> {
        if !self.config.wall_contains(x, z) {
            return None;
        }
        let rgb = self.radiance(x, z);
        let g = self.gain();
        Some(rgb.map(|c| (c * g).round().clamp(0.0, 255.0) as u8))
    }

    /// Unlit surface colour.
    fn radiance(&self, x: f64, z: f64) -> [f64; 3] {
        let seed = self.config.texture_seed;
        let dx = x - self.center.x;
        let dz = z - self.center.z;
        if let Some(rgb) = self.device_radiance(dx, dz) {
            return rgb;
        }
        let p = &self.palette;
        let fine = cell_noise(x, z, 0.003, seed ^ 0xA1) * 9.0;
        let blotch = value_noise(x, z, 0.025, seed ^ 0xB2) * 7.0;
        let shade = p.gradient[0] * x + p.gradient[1] * (z - self.center.z) + fine + blotch;
        [p.base[0] + shade, p.base[1] + shade * 0.95, p.base[2] + shade * 0.9]
    }

    fn device_radiance(&self, dx: f64, dz: f64) -> Option<[f64; 3]> {
        use dims::*;
        let seed = self.config.texture_seed;
        let speck = |salt: u64, amp: f64| cell_noise(dx, dz, 0.002, seed ^ salt) * amp;
        let add = |c: [f64; 3], s: f64| [c[0] + s, c[1] + s, c[2] + s];
        match self.kind {
            DeviceKind::WallSwitch | DeviceKind::Rocker => {
                if dx.abs() > PLATE_HALF_W || dz.abs() > PLATE_HALF_H {
                    return None;
                }
                let plate = [190.0, 186.0, 176.0];
                let edge = (PLATE_HALF_W - dx.abs()).min(PLATE_HALF_H - dz.abs());
                if edge < 0.003 {
                    // bevel: lit from above
                    let s = if dz > 0.0 { 6.0 } else { -22.0 };
                    return Some(add(plate, s + speck(0x11, 3.0)));
                }
                let screw = (dx * dx + (dz.abs() - 0.045).powi(2)).sqrt();
                if screw < 0.0025 {
                    return Some(add([140.0, 138.0, 134.0], speck(0x12, 4.0)));
                }
                if self.kind == DeviceKind::WallSwitch {
                    if dx.abs() <= TOGGLE_HALF_W && dz.abs() <= TOGGLE_HALF_H {
                        let upper = dz >= 0.0;
                        let lit = upper == self.active;
                        let s = if lit { 12.0 } else { -38.0 };
                        return Some(add([168.0, 162.0, 150.0], s + speck(0x13, 3.0)));
                    }
                    let collar = dx.abs() <= TOGGLE_HALF_W + 0.003 && dz.abs() <= TOGGLE_HALF_H + 0.004;
                    if collar {
                        return Some(add(plate, -14.0 + speck(0x14, 3.0)));
                    }
                } else {
                    let in_paddle = dx.abs() <= PADDLE_HALF_W && dz.abs() <= PADDLE_HALF_H;
                    let groove = dx.abs() <= PADDLE_HALF_W + 0.0015 && dz.abs() <= PADDLE_HALF_H + 0.0015;
                    if in_paddle {
                        let upper = dz >= 0.0;
                        // the pressed half sits recessed and darker
                        let pressed = upper == self.active;
                        let s = if pressed { -26.0 } else { 8.0 };
                        return Some(add([182.0, 178.0, 168.0], s + speck(0x15, 3.0)));
                    }
                    if groove {
                        return Some([118.0, 114.0, 108.0]);
                    }
                }
                Some(add(plate, speck(0x16, 4.0)))
            }
            DeviceKind::Drawer => {
                let on_face = dx.abs() <= DRAWER_HALF_W && dz.abs() <= DRAWER_HALF_H;
                if !on_face {
                    if self.active && dx.abs() <= DRAWER_HALF_W && dz > DRAWER_HALF_H && dz <= DRAWER_HALF_H + 0.018 {
                        // open drawer exposes its dark interior above the face
                        return Some(add([38.0, 30.0, 24.0], speck(0x21, 4.0)));
                    }
                    if self.active && dx.abs() <= DRAWER_HALF_W && (-DRAWER_HALF_H - 0.012..-DRAWER_HALF_H).contains(&dz) {
                        return Some(add([62.0, 52.0, 44.0], speck(0x22, 4.0)));
                    }
                    return None;
                }
                if dx.abs() <= HANDLE_HALF_W && dz.abs() <= HANDLE_HALF_H {
                    let highlight = if dz > 0.003 { 28.0 } else if dz < -0.005 { -30.0 } else { 0.0 };
                    return Some(add([168.0, 170.0, 176.0], highlight + speck(0x23, 5.0)));
                }
                let post = (dx.abs() - HANDLE_HALF_W).abs() < 0.006 && dz.abs() <= 0.016;
                if post {
                    return Some(add([96.0, 96.0, 100.0], speck(0x24, 4.0)));
                }
                let edge = (DRAWER_HALF_W - dx.abs()).min(DRAWER_HALF_H - dz.abs());
                if edge < 0.005 {
                    return Some(add([82.0, 58.0, 38.0], speck(0x25, 4.0)));
                }
                let grain = (dz * 420.0 + 2.0 * (dx * 23.0).sin()).sin() * 10.0;
                let s = grain + speck(0x26, 6.0);
                Some([150.0 + s, 104.0 + s * 0.8, 64.0 + s * 0.6])
            }
        }
    }

    /// Whether a wall point lies on the device's visible parts.
    pub fn on_device(&self, x: f64, z: f64) -> bool {
        self.device_radiance(x - self.center.x, z - self.center.z).is_some()
    }
}

/// One registered cloud point and the pixel it was measured through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub point: Point3,
    pub pixel: (u32, u32),
}

/// A registered RGB image and point cloud from one approach.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: RgbImage,
    pub cloud: Vec<CloudPoint>,
    pub camera: Camera,
    pub brightness: f64,
}

/// Render the scene from `pose` and build the registered cloud.
pub fn capture(scene: &SceneModel, pose: Pose2) -> Result<Observation> {
    let config = &scene.config;
    let camera = config.camera(pose);
    let [h, w] = config.image_size;
    match camera.project(&scene.center) {
        Some((u, v)) if u >= 0.0 && v >= 0.0 && u <= (w - 1) as f64 && v <= (h - 1) as f64 => {}
        _ => return Err(Error::DeviceOutsideFrustum),
    }
    let wall_y = scene.wall_y();
    let stride = config.cloud_stride;
    let mut image = RgbImage::new(w, h);
    let mut cloud = Vec::with_capacity((w / stride + 1) * (h / stride + 1));
    for v in 0..h {
        for u in 0..w {
            let hit = camera.cast_to_plane(u as f64, v as f64, wall_y);
            let color = hit.and_then(|p| scene.color_at(p.x, p.z));
            match (hit, color) {
                (Some(p), Some(rgb)) => {
                    image.put(u, v, rgb);
                    if u % stride == 0 && v % stride == 0 {
                        cloud.push(CloudPoint { point: p, pixel: (u as u32, v as u32) });
                    }
                }
                _ => image.put(u, v, VOID),
            }
        }
    }
    Ok(Observation { image, cloud, camera, brightness: scene.brightness() })
}

impl Observation {
    /// Index of the cloud point closest to `p`.
    pub fn nearest_cloud_point(&self, p: &Point3) -> Option<usize> {
        self.cloud
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.point - p).norm_squared();
                let db = (b.1.point - p).norm_squared();
                da.total_cmp(&db).then(a.0.cmp(&b.0))
            })
            .map(|(i, _)| i)
    }
}

#[inline]
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iz: i64, salt: u64) -> f64 {
    let h = mix(mix(ix as u64, iz as u64 ^ 0x1234_5678), salt);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Piecewise-constant noise in [-1, 1] on square cells of side `cell`.
fn cell_noise(x: f64, z: f64, cell: f64, salt: u64) -> f64 {
    lattice((x / cell).floor() as i64, (z / cell).floor() as i64, salt)
}

/// Bilinear value noise in [-1, 1].
fn value_noise(x: f64, z: f64, cell: f64, salt: u64) -> f64 {
    let (fx, fz) = (x / cell, z / cell);
    let (ix, iz) = (fx.floor(), fz.floor());
    let (tx, tz) = (fx - ix, fz - iz);
    let (ix, iz) = (ix as i64, iz as i64);
    let a = lattice(ix, iz, salt) * (1.0 - tx) + lattice(ix + 1, iz, salt) * tx;
    let b = lattice(ix, iz + 1, salt) * (1.0 - tx) + lattice(ix + 1, iz + 1, salt) * tx;
    a * (1.0 - tz) + b * tz
}
