//! Camera model, 2D/3D conversion and pointing-ray math.
//!
//! Conventions: positions are meters, frames are right-handed with +z into
//! the scene (x right, y down for camera frames).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{HandKeypoints, INDEX_PIP, INDEX_TIP};

/// Tolerance for geometric equalities.
pub const GEOM_EPS: f64 = 1e-9;
/// Tip/PIP separation below which a finger has no usable direction.
pub const DEGENERATE_FINGER_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("index tip and PIP coincide (separation {0:e} m)")]
    DegenerateFinger(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("rotation is not a proper orthonormal matrix")]
    InvalidRotation,
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A point (or free vector) in 3D, in meters.
///
/// Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > f64::EPSILON).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        self.into()
    }

    /// Lexicographic comparison on (x, y, z), used for deterministic tie-breaks.
    pub fn lex_cmp(&self, o: &Point3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Continuous pixel coordinates, serialized as `[u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

impl From<[f64; 2]> for Pixel {
    fn from(a: [f64; 2]) -> Self {
        Pixel::new(a[0], a[1])
    }
}

impl From<Pixel> for [f64; 2] {
    fn from(p: Pixel) -> Self {
        [p.u, p.v]
    }
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;
    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl Default for CameraIntrinsics {
    /// A 640x480 camera with 600 px focal length, principal point at the center.
    fn default() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if !(cx >= 0.0 && cx < f64::from(width)) || !(cy >= 0.0 && cy < f64::from(height)) {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
}

/// A half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    origin: Point3,
    direction: Point3,
}

impl Ray {
    /// Builds a ray; `direction` must already be unit length within 1e-9.
    pub fn new(origin: Point3, direction: Point3) -> Result<Self, GeometryError> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let n = direction.norm();
        if (n - 1.0).abs() > GEOM_EPS {
            return Err(GeometryError::NonUnitDirection(n));
        }
        Ok(Self { origin, direction })
    }

    /// Builds a ray through `origin` towards `through`.
    pub fn towards(origin: Point3, through: Point3) -> Result<Self, GeometryError> {
        let d = (through - origin)
            .normalized()
            .ok_or(GeometryError::DegenerateFinger(0.0))?;
        Ray::new(origin, d)
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn direction(&self) -> Point3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

/// Rotation followed by translation: `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: [[f64; 3]; 3],
    translation: Point3,
}

impl RigidTransform {
    pub fn new(rotation: [[f64; 3]; 3], translation: Point3) -> Result<Self, GeometryError> {
        let r = rotation;
        for i in 0..3 {
            for j in 0..3 {
                let rtr: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (rtr - expect).abs() > GEOM_EPS {
                    return Err(GeometryError::InvalidRotation);
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > GEOM_EPS {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Point3::ORIGIN,
        }
    }

    pub fn translation(t: Point3) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    /// Rotation of `angle` radians about `axis` (Rodrigues), then translation.
    pub fn from_axis_angle(axis: Point3, angle: f64, translation: Point3) -> Self {
        let Some(k) = axis.normalized() else {
            return Self::translation(translation);
        };
        let (s, c) = angle.sin_cos();
        let v = 1.0 - c;
        let rotation = [
            [
                c + k.x * k.x * v,
                k.x * k.y * v - k.z * s,
                k.x * k.z * v + k.y * s,
            ],
            [
                k.y * k.x * v + k.z * s,
                c + k.y * k.y * v,
                k.y * k.z * v - k.x * s,
            ],
            [
                k.z * k.x * v - k.y * s,
                k.z * k.y * v + k.x * s,
                c + k.z * k.z * v,
            ],
        ];
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        self.rotation
    }

    pub fn rotate(&self, p: Point3) -> Point3 {
        let r = &self.rotation;
        Point3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z,
        )
    }

    pub fn apply_ray(&self, ray: &Ray) -> Ray {
        let d = self.rotate(ray.direction);
        // re-normalize to absorb rounding in the rotation
        Ray {
            origin: apply_transform(self, ray.origin),
            direction: d * (1.0 / d.norm()),
        }
    }
}

/// Back-projects a pixel at the given depth into the camera frame.
pub fn deproject(
    pixel: Pixel,
    depth: f64,
    cam: &CameraIntrinsics,
) -> Result<Point3, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(Point3::new(
        (pixel.u - cam.cx) * depth / cam.fx,
        (pixel.v - cam.cy) * depth / cam.fy,
        depth,
    ))
}

/// Projects a camera-frame point onto the image plane.
pub fn project(point: Point3, cam: &CameraIntrinsics) -> Result<Pixel, GeometryError> {
    if !(point.z > 0.0) {
        return Err(GeometryError::BehindCamera(point.z));
    }
    Ok(Pixel::new(
        cam.fx * point.x / point.z + cam.cx,
        cam.fy * point.y / point.z + cam.cy,
    ))
}

pub fn apply_transform(t: &RigidTransform, p: Point3) -> Point3 {
    t.rotate(p) + t.translation
}

/// Distance from `p` to the half-line `r` (points behind the origin measure
/// to the origin).
pub fn ray_point_distance(r: &Ray, p: Point3) -> f64 {
    let rel = p - r.origin;
    let t = rel.dot(r.direction).max(0.0);
    (rel - r.direction * t).norm()
}

/// The pointing ray: from the index fingertip along PIP -> tip.
pub fn pointing_ray(hand: &HandKeypoints) -> Result<Ray, GeometryError> {
    let tip = hand.world[INDEX_TIP];
    let pip = hand.world[INDEX_PIP];
    if !tip.is_finite() || !pip.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let v = tip - pip;
    let len = v.norm();
    if len <= DEGENERATE_FINGER_EPS {
        return Err(GeometryError::DegenerateFinger(len));
    }
    Ray::new(tip, v * (1.0 / len))
}
