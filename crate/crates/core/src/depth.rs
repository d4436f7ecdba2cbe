//! Per-pixel Gaussian depth maps, their likelihood under sparse SfM
//! landmarks, and scale recovery.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, RigidPose, Vec3};

/// One video frame's depth distribution. A pixel is invalid when its mean is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub frame_id: u32,
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidPose,
    /// Row-major mean depth along the optical axis.
    pub mean: Vec<f64>,
    /// Row-major standard deviation of the depth.
    pub stddev: Vec<f64>,
    pub color: Vec<[u8; 3]>,
}

impl DepthFrame {
    pub fn new(
        frame_id: u32,
        intrinsics: CameraIntrinsics,
        pose: RigidPose,
        mean: Vec<f64>,
        stddev: Vec<f64>,
        color: Vec<[u8; 3]>,
    ) -> Result<Self> {
        let n = intrinsics.pixel_count();
        for len in [mean.len(), stddev.len(), color.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        Ok(Self { frame_id, intrinsics, pose, mean, stddev, color })
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    pub fn is_valid(&self, pixel: usize) -> bool {
        let d = self.mean[pixel];
        d > 0.0 && d.is_finite() && self.stddev[pixel] > 0.0
    }

    pub fn valid_count(&self) -> usize {
        (0..self.mean.len()).filter(|&i| self.is_valid(i)).count()
    }

    /// World-space points of every valid pixel.
    pub fn back_project(&self) -> impl Iterator<Item = Vec3> + '_ {
        let w = self.width();
        (0..self.mean.len()).filter(|&i| self.is_valid(i)).map(move |i| {
            let ray = self.intrinsics.ray(&crate::geometry::Vec2::new((i % w) as f64, (i / w) as f64));
            self.pose.transform_point(&(ray * self.mean[i]))
        })
    }

    /// Mean and stddev multiplied by `s`; pose and color untouched.
    pub fn apply_scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveScale);
        }
        Ok(Self {
            mean: self.mean.iter().map(|d| d * s).collect(),
            stddev: self.stddev.iter().map(|d| d * s).collect(),
            ..self.clone()
        })
    }
}

/// Landmarks with the ids of the frames that observe them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePointCloud {
    pub points: Vec<Vec3>,
    pub visibility: Vec<Vec<u32>>,
}

impl SparsePointCloud {
    pub fn new(points: Vec<Vec3>, visibility: Vec<Vec<u32>>) -> Result<Self> {
        if points.len() != visibility.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: visibility.len() });
        }
        Ok(Self { points, visibility })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn observed_by(&self, frame_id: u32) -> impl Iterator<Item = &Vec3> + '_ {
        self.points
            .iter()
            .zip(&self.visibility)
            .filter(move |(_, vis)| vis.contains(&frame_id))
            .map(|(p, _)| p)
    }
}

/// A landmark paired with the depth distribution at its projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSample {
    /// Camera-frame depth of the landmark.
    pub depth: f64,
    pub mean: f64,
    pub stddev: f64,
}

/// Landmarks visible in `frame` that project (nearest pixel) onto a valid depth.
pub fn landmark_samples(frame: &DepthFrame, cloud: &SparsePointCloud) -> Vec<LandmarkSample> {
    cloud
        .observed_by(frame.frame_id)
        .filter_map(|p| {
            let pc = frame.pose.inverse_transform_point(p);
            let px = frame.intrinsics.project(&pc).ok()?;
            let i = frame.intrinsics.nearest_pixel(&px)?;
            frame.is_valid(i).then(|| LandmarkSample { depth: pc.z, mean: frame.mean[i], stddev: frame.stddev[i] })
        })
        .collect()
}

/// Negative log-likelihood of the landmark depths under the per-pixel
/// Gaussians, without the constant `ln sqrt(2 pi)` terms.
pub fn nll_score(frame: &DepthFrame, cloud: &SparsePointCloud) -> Result<f64> {
    let samples = landmark_samples(frame, cloud);
    if samples.is_empty() {
        return Err(Error::NoVisiblePoints);
    }
    Ok(samples
        .iter()
        .map(|s| {
            let r = s.depth - s.mean;
            r * r / (2.0 * s.stddev * s.stddev) + s.stddev.ln()
        })
        .sum())
}

/// Median of landmark depth over predicted depth. Multiplying the frame
/// by the result makes it consistent with the landmarks.
pub fn recover_scale(frame: &DepthFrame, cloud: &SparsePointCloud) -> Result<f64> {
    let ratios: Vec<f64> = landmark_samples(frame, cloud).iter().map(|s| s.depth / s.mean).collect();
    median(ratios).ok_or(Error::NoVisiblePoints)
}

/// One scale for a whole sequence: the median ratio over every frame's landmarks.
pub fn recover_scale_global(frames: &[DepthFrame], cloud: &SparsePointCloud) -> Result<f64> {
    let ratios: Vec<f64> = frames
        .iter()
        .flat_map(|f| landmark_samples(f, cloud).into_iter().map(|s| s.depth / s.mean))
        .collect();
    median(ratios).ok_or(Error::NoVisiblePoints)
}

pub(crate) fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}
