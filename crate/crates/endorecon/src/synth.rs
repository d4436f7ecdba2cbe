//! Synthetic phantom datasets.

use std::fmt::Write as _;

use endorecon_core::phantom::{render_depth, sample_sparse, Phantom, PhantomSpec, RenderConfig};
use endorecon_core::seed::substream;
use endorecon_core::{CameraIntrinsics, DepthFrame, RigidPose, TriangleBvh, TriangleMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub noise: f64,
    pub sparse_points: usize,
    /// Per-frame depth scale is `exp(U(-j, j))`; 0 disables.
    pub scale_jitter: f64,
    pub length: f64,
    pub bend_angle: f64,
    pub seed: u64,
    /// Render threads; `None` uses every core. Output does not depend on it.
    pub threads: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames: 60,
            width: 320,
            height: 256,
            focal: 160.0,
            noise: 0.01,
            sparse_points: 3000,
            scale_jitter: 0.2,
            length: 120.0,
            bend_angle: 0.5,
            seed: 0,
            threads: None,
        }
    }
}

impl SynthConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let (w, h) = (self.width as f64, self.height as f64);
        Ok(CameraIntrinsics::new(self.focal, self.focal, w / 2.0, h / 2.0, self.width, self.height)?)
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            length: self.length,
            bend_angle: self.bend_angle,
            seed: substream(self.seed, "harness"),
            ..PhantomSpec::default()
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("frames", self.frames.to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("focal", self.focal.to_string()),
            ("noise", self.noise.to_string()),
            ("sparse_points", self.sparse_points.to_string()),
            ("scale_jitter", self.scale_jitter.to_string()),
            ("length", self.length.to_string()),
            ("bend_angle", self.bend_angle.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

/// Ground truth next to the dataset it produced.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub phantom: Phantom,
    pub mesh: TriangleMesh,
    pub bvh: TriangleBvh,
    pub poses: Vec<RigidPose>,
    /// Unknown per-frame factor baked into each depth map.
    pub depth_scales: Vec<f64>,
}

/// Renders the phantom along its trajectory. Frames render in parallel;
/// noise is keyed per pixel so the output does not depend on the split.
pub fn generate(cfg: &SynthConfig) -> Result<Synthetic> {
    let k = cfg.intrinsics()?;
    let phantom = Phantom::new(cfg.phantom_spec())?;
    let mesh = phantom.mesh();
    let bvh = TriangleBvh::new(&mesh)?;
    let poses = phantom.trajectory(cfg.frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "scale"));
    let depth_scales: Vec<f64> = (0..poses.len())
        .map(|_| if cfg.scale_jitter > 0.0 { rng.random_range(-cfg.scale_jitter..cfg.scale_jitter).exp() } else { 1.0 })
        .collect();
    let base = RenderConfig { noise_sigma_rel: cfg.noise, seed: substream(cfg.seed, "render"), ..RenderConfig::default() };

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = cfg.threads.unwrap_or(cores).clamp(1, poses.len().max(1));
    let mut frames: Vec<Option<Result<DepthFrame>>> = (0..poses.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (t, chunk) in frames.chunks_mut(poses.len().div_ceil(threads).max(1)).enumerate() {
            let (bvh, poses, depth_scales, k) = (&bvh, &poses, &depth_scales, &k);
            let start = t * poses.len().div_ceil(threads).max(1);
            s.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    let i = start + j;
                    let rc = RenderConfig { depth_scale: depth_scales[i], ..base };
                    *slot = Some(render_depth(bvh, &poses[i], k, &rc, i as u32).map_err(Into::into));
                }
            });
        }
    });
    let frames = frames.into_iter().map(|f| f.expect("every frame rendered")).collect::<Result<Vec<_>>>()?;
    let cloud = sample_sparse(&mesh, &bvh, &poses, &k, cfg.sparse_points, substream(cfg.seed, "sparse"))?;
    Ok(Synthetic { dataset: Dataset { intrinsics: k, frames, cloud }, phantom, mesh, bvh, poses, depth_scales })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_does_not_depend_on_thread_count() {
        let base = SynthConfig { frames: 5, width: 32, height: 24, focal: 16.0, sparse_points: 50, ..Default::default() };
        let one = generate(&SynthConfig { threads: Some(1), ..base.clone() }).unwrap();
        let three = generate(&SynthConfig { threads: Some(3), ..base }).unwrap();
        assert_eq!(one.dataset.frames, three.dataset.frames);
        assert_eq!(one.dataset.cloud, three.dataset.cloud);
        assert_eq!(one.depth_scales, three.depth_scales);
        assert!(one.depth_scales.iter().all(|s| (s.ln()).abs() <= 0.2));
    }
}
