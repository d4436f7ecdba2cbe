//! Truncated signed distance fusion with uncertainty-driven truncation.
//!
//! Each voxel center is projected into the depth frame and paired with
//! the nearest pixel. The signed distance is the depth difference along
//! the optical axis, positive in front of the surface. The truncation
//! band of every ray is `clamp(k * sigma, tau_min, tau_max)`, so uncertain
//! depths produce a shallower ramp.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::depth::{recover_scale, recover_scale_global, DepthFrame, SparsePointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::Aabb;

/// How much each depth sample counts in the running average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `1 / max(sigma, sigma_floor)`.
    #[default]
    InverseSigma,
    Uniform,
}

/// How frames are brought to the landmark scale before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    #[default]
    PerFrame,
    Global,
    /// Depths are used as given.
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub voxel_size: f64,
    /// Truncation is `sigma_multiplier * sigma` before clamping.
    pub sigma_multiplier: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub weight_cap: f64,
    pub sigma_floor: f64,
    pub weighting: Weighting,
    pub scale_mode: ScaleMode,
    /// Explicit volume bounds; auto-fit to the data when `None`.
    pub bounds: Option<Aabb>,
}

impl FusionConfig {
    /// Defaults scaled to the voxel size: 3-sigma support, truncation
    /// between 2 and 10 voxels, weights capped at 100.
    pub fn with_voxel_size(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            sigma_multiplier: 3.0,
            tau_min: 2.0 * voxel_size,
            tau_max: 10.0 * voxel_size,
            weight_cap: 100.0,
            sigma_floor: 1e-3,
            weighting: Weighting::InverseSigma,
            scale_mode: ScaleMode::PerFrame,
            bounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return bad("voxel_size must be positive");
        }
        if !(self.sigma_multiplier > 0.0) {
            return bad("sigma_multiplier must be positive");
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite()) {
            return bad("need 0 < tau_min <= tau_max");
        }
        if !(self.weight_cap > 0.0) {
            return bad("weight_cap must be positive");
        }
        if !(self.sigma_floor > 0.0) {
            return bad("sigma_floor must be positive");
        }
        Ok(())
    }

    pub fn truncation_for_sigma(&self, sigma: f64) -> f64 {
        truncation_for_sigma(sigma, self)
    }
}

/// `clamp(k * sigma, tau_min, tau_max)`.
pub fn truncation_for_sigma(sigma: f64, cfg: &FusionConfig) -> f64 {
    (cfg.sigma_multiplier * sigma).max(cfg.tau_min).min(cfg.tau_max)
}

/// Dense voxel grid. Voxel `(i, j, k)` is centered at
/// `origin + voxel_size * (i, j, k)`; storage is x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub tsdf: Vec<f64>,
    pub weight: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

impl TsdfVolume {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if n == 0 {
            return Err(Error::EmptyVolume);
        }
        if !(voxel_size > 0.0) {
            return Err(Error::InvalidConfig("voxel_size must be positive".into()));
        }
        Ok(Self {
            origin,
            voxel_size,
            dims,
            tsdf: alloc::vec![1.0; n],
            weight: alloc::vec![0.0; n],
            color: alloc::vec![[0.0; 3]; n],
        })
    }

    /// Smallest grid whose voxel centers cover `bounds`.
    pub fn covering(bounds: &Aabb, voxel_size: f64) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::EmptyVolume);
        }
        let ext = bounds.extent();
        let dims = [0, 1, 2].map(|a| (ext[a] / voxel_size).ceil() as usize + 1);
        Self::new(bounds.min, voxel_size, dims)
    }

    /// Fills every voxel from `f(center) -> (tsdf, weight, rgb)`; tsdf is clamped to [-1, 1].
    pub fn from_fn(origin: Vec3, voxel_size: f64, dims: [usize; 3], mut f: impl FnMut(Vec3) -> (f64, f64, [f64; 3])) -> Result<Self> {
        let mut vol = Self::new(origin, voxel_size, dims)?;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = vol.index(i, j, k);
                    let (t, w, c) = f(vol.voxel_center(i, j, k));
                    vol.tsdf[idx] = t.clamp(-1.0, 1.0);
                    vol.weight[idx] = w;
                    vol.color[idx] = c;
                }
            }
        }
        Ok(vol)
    }

    pub fn voxel_count(&self) -> usize {
        self.tsdf.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    pub fn bounds(&self) -> Aabb {
        let last = self.voxel_center(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1);
        Aabb { min: self.origin, max: last }
    }

    /// Fuses one (already scale-corrected) frame into the volume.
    pub fn integrate_frame(&mut self, frame: &DepthFrame, cfg: &FusionConfig) -> Result<()> {
        if !frame.pose.is_finite() {
            return Err(Error::InvalidPose);
        }
        if self.voxel_count() == 0 {
            return Err(Error::EmptyVolume);
        }
        let k = &frame.intrinsics;
        let width = k.width as f64;
        let height = k.height as f64;
        let rot = frame.pose.rotation.inverse().to_rotation_matrix();
        let r = rot.matrix();
        let cam_origin = -(r * frame.pose.translation);
        let step = self.voxel_size;
        let [nx, ny, nz] = self.dims;

        for kz in 0..nz {
            for jy in 0..ny {
                // camera-frame position of voxel (0, jy, kz); x steps are a constant offset
                let row_start = self.voxel_center(0, jy, kz);
                let base = r * row_start + cam_origin;
                let dx = r.column(0) * step;
                let row = self.index(0, jy, kz);
                for ix in 0..nx {
                    let p = base + dx * ix as f64;
                    if !(p.z > 0.0) {
                        continue;
                    }
                    let u = (k.fx * p.x / p.z + k.cx).round();
                    let v = (k.fy * p.y / p.z + k.cy).round();
                    if !(u >= 0.0 && v >= 0.0 && u < width && v < height) {
                        continue;
                    }
                    let pix = v as usize * k.width as usize + u as usize;
                    if !frame.is_valid(pix) {
                        continue;
                    }
                    let sigma = frame.stddev[pix];
                    let tau = truncation_for_sigma(sigma, cfg);
                    let sdf = frame.mean[pix] - p.z;
                    if sdf < -tau {
                        continue;
                    }
                    let sample = (sdf / tau).clamp(-1.0, 1.0);
                    let w = match cfg.weighting {
                        Weighting::InverseSigma => 1.0 / sigma.max(cfg.sigma_floor),
                        Weighting::Uniform => 1.0,
                    };
                    let idx = row + ix;
                    let old_w = self.weight[idx];
                    let total = old_w + w;
                    self.tsdf[idx] = (old_w * self.tsdf[idx] + w * sample) / total;
                    let rgb = frame.color[pix];
                    let c = &mut self.color[idx];
                    for ch in 0..3 {
                        c[ch] = (old_w * c[ch] + w * rgb[ch] as f64) / total;
                    }
                    self.weight[idx] = total.min(cfg.weight_cap);
                }
            }
        }
        Ok(())
    }
}

/// Output of [`fuse_sequence`].
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub volume: TsdfVolume,
    /// Scale applied to each input frame, in input order.
    pub scales: Vec<f64>,
}

/// Brings every frame to the landmark scale, fits the volume to the
/// back-projected depths padded by `tau_max`, and fuses the frames in order.
pub fn fuse_sequence(frames: &[DepthFrame], cloud: &SparsePointCloud, cfg: &FusionConfig) -> Result<FusionResult> {
    cfg.validate()?;
    if frames.iter().all(|f| f.valid_count() == 0) {
        return Err(Error::NoValidDepths);
    }
    let scales: Vec<f64> = match cfg.scale_mode {
        ScaleMode::PerFrame => frames.iter().map(|f| recover_scale(f, cloud)).collect::<Result<_>>()?,
        ScaleMode::Global => alloc::vec![recover_scale_global(frames, cloud)?; frames.len()],
        ScaleMode::Disabled => alloc::vec![1.0; frames.len()],
    };
    let scaled: Vec<DepthFrame> = frames
        .iter()
        .zip(&scales)
        .map(|(f, &s)| if s == 1.0 { Ok(f.clone()) } else { f.apply_scale(s) })
        .collect::<Result<_>>()?;

    let bounds = match cfg.bounds {
        Some(b) => b,
        None => {
            let mut b = Aabb::empty();
            for f in &scaled {
                for p in f.back_project() {
                    b.grow(&p);
                }
            }
            if b.is_empty() {
                return Err(Error::NoValidDepths);
            }
            b.padded(cfg.tau_max)
        }
    };
    let mut volume = TsdfVolume::covering(&bounds, cfg.voxel_size)?;
    for f in &scaled {
        volume.integrate_frame(f, cfg)?;
    }
    Ok(FusionResult { volume, scales })
}
