//! Poses, the pinhole camera and wall-plane ray casting.
//!
//! World frame: `x` runs along the wall, `y` points from the robot into the
//! wall, `z` is up. The camera looks along the robot heading with no pitch.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Point3 = nalgebra::Point3<f64>;

/// Planar mobile-base pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }

    pub fn forward(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    /// Unit vector pointing to the robot's left.
    pub fn lateral(&self) -> (f64, f64) {
        (-self.heading.sin(), self.heading.cos())
    }

    /// Point `dist` metres straight ahead of the base.
    pub fn point_ahead(&self, dist: f64) -> (f64, f64) {
        let (fx, fy) = self.forward();
        (self.x + dist * fx, self.y + dist * fy)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    /// Focal length in pixels (square pixels).
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Pinhole camera mounted on the base at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub pose: Pose2,
    pub height: f64,
    pub intrinsics: Intrinsics,
}

impl Camera {
    pub fn center(&self) -> Point3 {
        Point3::new(self.pose.x, self.pose.y, self.height)
    }

    fn axes(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (c, s) = (self.pose.heading.cos(), self.pose.heading.sin());
        let forward = Vector3::new(c, s, 0.0);
        let right = Vector3::new(s, -c, 0.0);
        let down = Vector3::new(0.0, 0.0, -1.0);
        (forward, right, down)
    }

    /// Project a world point to continuous pixel coordinates `(u, v)`.
    /// Returns `None` for points at or behind the image plane.
    pub fn project(&self, p: &Point3) -> Option<(f64, f64)> {
        let (f, r, d) = self.axes();
        let rel = p - self.center();
        let zc = rel.dot(&f);
        if zc <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.cx + k.focal * rel.dot(&r) / zc, k.cy + k.focal * rel.dot(&d) / zc))
    }

    /// World-space direction of the ray through pixel `(u, v)`; its forward
    /// component is exactly one, so `center + t * ray` has depth `t`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        let (f, r, d) = self.axes();
        let k = &self.intrinsics;
        f + r * ((u - k.cx) / k.focal) + d * ((v - k.cy) / k.focal)
    }

    /// Back-project a pixel at a given camera depth.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Point3 {
        self.center() + self.ray(u, v) * depth
    }

    /// Depth of a world point along the optical axis.
    pub fn depth_of(&self, p: &Point3) -> f64 {
        let (f, _, _) = self.axes();
        (p - self.center()).dot(&f)
    }

    /// Intersect the pixel ray with the plane `y = plane_y`.
    pub fn cast_to_plane(&self, u: f64, v: f64, plane_y: f64) -> Option<Point3> {
        let ray = self.ray(u, v);
        if ray.y.abs() < 1e-12 {
            return None;
        }
        let t = (plane_y - self.pose.y) / ray.y;
        (t > 0.0).then(|| self.center() + ray * t)
    }
}
