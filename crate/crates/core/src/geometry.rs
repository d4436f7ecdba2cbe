//! Pinhole camera, rigid poses and similarity transforms.
//!
//! Poses are camera-to-world everywhere. Pixel coordinates are continuous
//! with integer values at pixel centers, so pixel `(i, j)` covers
//! `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Pinhole intrinsics for a `width x height` image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fx.is_finite() && fy > 0.0 && fy.is_finite()) {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidIntrinsics("image size must be non-zero"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::InvalidIntrinsics("principal point outside the image"));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn project(&self, point: &Vec3) -> Result<Vec2> {
        if !(point.z > 0.0) {
            return Err(Error::NonPositiveDepth);
        }
        Ok(Vec2::new(
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        ))
    }

    pub fn unproject(&self, pixel: &Vec2, depth: f64) -> Result<Vec3> {
        if !(depth > 0.0) {
            return Err(Error::NonPositiveDepth);
        }
        Ok(Vec3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        ))
    }

    /// Direction through `pixel` scaled so that its z component is 1.
    pub fn ray(&self, pixel: &Vec2) -> Vec3 {
        Vec3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0)
    }

    /// Row-major index of the pixel whose center is nearest to `pixel`, if inside the image.
    pub fn nearest_pixel(&self, pixel: &Vec2) -> Option<usize> {
        let u = pixel.x.round();
        let v = pixel.y.round();
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some(v as usize * self.width as usize + u as usize)
        } else {
            None
        }
    }
}

/// Camera-to-world rigid motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    /// Builds a pose from raw quaternion components, renormalizing them.
    pub fn from_components(translation: [f64; 3], quat_xyzw: [f64; 4]) -> Result<Self> {
        let [qx, qy, qz, qw] = quat_xyzw;
        let q = Quaternion::new(qw, qx, qy, qz);
        let n = q.norm();
        if !(n.is_finite() && n > 0.0) || translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPose);
        }
        Ok(Self {
            rotation: UnitQuaternion::new_normalize(q),
            translation: Vec3::from(translation),
        })
    }

    /// Pose whose camera axes, expressed in world coordinates, are the given columns.
    pub fn from_axes(x_axis: Vec3, y_axis: Vec3, z_axis: Vec3, center: Vec3) -> Self {
        let m = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);
        let rot = nalgebra::Rotation3::from_matrix(&m);
        Self { rotation: UnitQuaternion::from_rotation_matrix(&rot), translation: center }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.coords.iter().all(|c| c.is_finite())
            && self.translation.iter().all(|c| c.is_finite())
    }

    /// Maps a camera-frame point into the world.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Maps a world point into the camera frame.
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }

    pub fn center(&self) -> Vec3 {
        self.translation
    }

    /// Camera +z axis in world coordinates.
    pub fn optical_axis(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self { rotation, translation: -(rotation * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        let q = self.rotation.into_inner() * other.rotation.into_inner();
        Self {
            rotation: UnitQuaternion::new_normalize(q),
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Scale, rotation and translation: `x -> scale * R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: UnitQuaternion::identity(), translation: Vec3::zeros() }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NonPositiveScale);
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn from_scale(scale: f64) -> Result<Self> {
        Self::new(scale, UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v * self.scale
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        let q = self.rotation.into_inner() * other.rotation.into_inner();
        Self {
            scale: self.scale * other.scale,
            rotation: UnitQuaternion::new_normalize(q),
            translation: self.transform_point(&other.translation),
        }
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        let scale = 1.0 / self.scale;
        Self { scale, rotation, translation: -(rotation * self.translation) * scale }
    }

    /// Carries a camera pose along: the center is mapped, the orientation rotated.
    pub fn transform_pose(&self, pose: &RigidPose) -> RigidPose {
        let q = self.rotation.into_inner() * pose.rotation.into_inner();
        RigidPose {
            rotation: UnitQuaternion::new_normalize(q),
            translation: self.transform_point(&pose.translation),
        }
    }

    /// Rotation angle, in radians, of `self.rotation⁻¹ · other.rotation`.
    pub fn rotation_angle_to(&self, other: &SimilarityTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}
