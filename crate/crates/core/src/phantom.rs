//! Synthetic cavity phantom: a bent tube of varying radius with a
//! sinusoidal wall perturbation, a camera trajectory through it, a
//! ray-cast depth renderer and a sparse landmark sampler. Together they
//! provide ground truth for end-to-end tests.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvh::TriangleBvh;
use crate::depth::{DepthFrame, SparsePointCloud};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, RigidPose, Vec2, Vec3};
use crate::mesh::TriangleMesh;
use crate::seed::substream;

/// Shape of the tube phantom. Lengths are in world units (millimetres by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub length: f64,
    /// Radius control points, evenly spaced from one end of the axis to
    /// the other and linearly interpolated.
    pub radii: Vec<f64>,
    pub bump_amplitude: f64,
    /// Number of bump periods along the axis and around the circumference.
    pub bump_frequency: u32,
    /// Total turning angle of the centerline (radians, constant curvature).
    pub bend_angle: f64,
    pub axial_segments: usize,
    pub angular_segments: usize,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            length: 120.0,
            radii: alloc::vec![12.0, 16.0, 20.0, 17.0, 12.0, 9.0, 11.0],
            bump_amplitude: 0.8,
            bump_frequency: 4,
            bend_angle: 0.5,
            axial_segments: 240,
            angular_segments: 96,
            seed: 7,
        }
    }
}

impl PhantomSpec {
    /// Straight constant-radius cylinder.
    pub fn cylinder(length: f64, radius: f64, axial_segments: usize, angular_segments: usize) -> Self {
        Self {
            length,
            radii: alloc::vec![radius],
            bump_amplitude: 0.0,
            bump_frequency: 0,
            bend_angle: 0.0,
            axial_segments,
            angular_segments,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidSpec("length must be positive"));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidSpec("radii must be positive"));
        }
        if !(self.bump_amplitude >= 0.0) {
            return Err(Error::InvalidSpec("bump amplitude must be non-negative"));
        }
        let min_r = self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_r = self.radii.iter().cloned().fold(0.0, f64::max);
        if !(min_r - self.bump_amplitude > 0.0) {
            return Err(Error::InvalidSpec("radius must stay positive after perturbation"));
        }
        if self.axial_segments < 16 || self.angular_segments < 16 {
            return Err(Error::InvalidSpec("tessellation must be at least 16x16"));
        }
        if !(self.bend_angle >= 0.0 && self.bend_angle <= PI / 2.0) {
            return Err(Error::InvalidSpec("bend angle must lie in [0, pi/2]"));
        }
        if self.bend_angle > 0.0 && self.length / self.bend_angle <= max_r + self.bump_amplitude {
            return Err(Error::InvalidSpec("bend is too tight for the radius"));
        }
        Ok(())
    }
}

/// Frame of the centerline at arc length `s`.
#[derive(Debug, Clone, Copy)]
pub struct AxisFrame {
    pub point: Vec3,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

/// A validated phantom with its seeded bump phases.
#[derive(Debug, Clone)]
pub struct Phantom {
    spec: PhantomSpec,
    axial_phase: f64,
    angular_phase: f64,
}

impl Phantom {
    pub fn new(spec: PhantomSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(substream(spec.seed, "phantom"));
        let axial_phase = rng.random_range(0.0..TAU);
        let angular_phase = rng.random_range(0.0..TAU);
        Ok(Self { spec, axial_phase, angular_phase })
    }

    pub fn spec(&self) -> &PhantomSpec {
        &self.spec
    }

    pub fn axis(&self, s: f64) -> AxisFrame {
        let bend = self.spec.bend_angle;
        if bend == 0.0 {
            return AxisFrame { point: Vec3::new(0.0, 0.0, s), tangent: Vec3::z(), normal: Vec3::x(), binormal: Vec3::y() };
        }
        let rho = self.spec.length / bend;
        let phi = s / rho;
        let (sin, cos) = phi.sin_cos();
        AxisFrame {
            point: Vec3::new(rho * (1.0 - cos), 0.0, rho * sin),
            tangent: Vec3::new(sin, 0.0, cos),
            normal: Vec3::new(cos, 0.0, -sin),
            binormal: Vec3::y(),
        }
    }

    /// Unperturbed radius at arc length `s`.
    pub fn base_radius(&self, s: f64) -> f64 {
        let r = &self.spec.radii;
        if r.len() == 1 {
            return r[0];
        }
        let x = (s / self.spec.length).clamp(0.0, 1.0) * (r.len() - 1) as f64;
        let i = (x.floor() as usize).min(r.len() - 2);
        let f = x - i as f64;
        r[i] * (1.0 - f) + r[i + 1] * f
    }

    /// Smallest wall radius anywhere on the ring at `s`.
    pub fn min_radius(&self, s: f64) -> f64 {
        self.base_radius(s) - self.spec.bump_amplitude
    }

    pub fn radius(&self, s: f64, theta: f64) -> f64 {
        let f = self.spec.bump_frequency as f64;
        let axial = (TAU * f * s / self.spec.length + self.axial_phase).sin();
        let around = (f * theta + self.angular_phase).cos();
        self.base_radius(s) + self.spec.bump_amplitude * axial * around
    }

    pub fn wall_point(&self, s: f64, theta: f64) -> Vec3 {
        let a = self.axis(s);
        let (sin, cos) = theta.sin_cos();
        a.point + (a.normal * cos + a.binormal * sin) * self.radius(s, theta)
    }

    /// Closed tube with fan end caps. Normals face the lumen.
    pub fn mesh(&self) -> TriangleMesh {
        let na = self.spec.axial_segments;
        let nt = self.spec.angular_segments;
        let mut vertices = Vec::with_capacity((na + 1) * nt + 2);
        for i in 0..=na {
            let s = self.spec.length * i as f64 / na as f64;
            for j in 0..nt {
                vertices.push(self.wall_point(s, TAU * j as f64 / nt as f64));
            }
        }
        let ring = |i: usize, j: usize| (i * nt + j % nt) as u32;
        let mut triangles = Vec::with_capacity(2 * na * nt + 2 * nt);
        for i in 0..na {
            for j in 0..nt {
                triangles.push([ring(i, j), ring(i + 1, j), ring(i, j + 1)]);
                triangles.push([ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            }
        }
        let start = vertices.len() as u32;
        vertices.push(self.axis(0.0).point);
        let end = vertices.len() as u32;
        vertices.push(self.axis(self.spec.length).point);
        for j in 0..nt {
            triangles.push([start, ring(0, j), ring(0, j + 1)]);
            triangles.push([end, ring(na, j + 1), ring(na, j)]);
        }
        TriangleMesh { vertices, colors: None, triangles }
    }

    /// Camera path along the axis with small smooth lateral offsets and
    /// look-around. Offsets and look-around vanish at both ends.
    pub fn trajectory(&self, n_frames: usize) -> Result<Vec<RigidPose>> {
        if n_frames < 2 {
            return Err(Error::InvalidSpec("a trajectory needs at least two frames"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(substream(self.spec.seed, "trajectory"));
        let mut harmonic = || (rng.random_range(1..=3u32) as f64, if rng.random::<bool>() { 1.0 } else { -1.0 });
        let (m_off1, sg_off1) = harmonic();
        let (m_off2, sg_off2) = harmonic();
        let (m_yaw, sg_yaw) = harmonic();
        let (m_pitch, sg_pitch) = harmonic();
        let (s0, s1) = (0.08 * self.spec.length, 0.85 * self.spec.length);

        Ok((0..n_frames)
            .map(|k| {
                let t = k as f64 / (n_frames - 1) as f64;
                let s = s0 + (s1 - s0) * t;
                let a = self.axis(s);
                let lateral = 0.15 * self.min_radius(s);
                let center = a.point
                    + a.normal * (lateral * sg_off1 * (PI * m_off1 * t).sin())
                    + a.binormal * (lateral * sg_off2 * (PI * m_off2 * t).sin());
                let yaw = 0.2 * sg_yaw * (PI * m_yaw * t).sin();
                let pitch = 0.15 * sg_pitch * (PI * m_pitch * t).sin();
                let forward = (a.tangent + a.normal * yaw.tan() + a.binormal * pitch.tan()).normalize();
                let x_axis = a.binormal.cross(&forward).normalize();
                let y_axis = forward.cross(&x_axis);
                RigidPose::from_axes(x_axis, y_axis, forward, center)
            })
            .collect())
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<TriangleMesh> {
    Ok(Phantom::new(spec.clone())?.mesh())
}

pub fn generate_trajectory(spec: &PhantomSpec, n_frames: usize) -> Result<Vec<RigidPose>> {
    Phantom::new(spec.clone())?.trajectory(n_frames)
}

/// Depth noise and reported uncertainty of the renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Noise standard deviation relative to depth.
    pub noise_sigma_rel: f64,
    /// Reported stddev is `max(noise_sigma_rel * depth, sigma_floor)`.
    pub sigma_floor: f64,
    /// Unknown per-frame scale multiplied into mean and stddev,
    /// mimicking a monocular depth estimate.
    pub depth_scale: f64,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { noise_sigma_rel: 0.01, sigma_floor: 1e-3, depth_scale: 1.0, seed: 0 }
    }
}

/// Procedural wall texture.
pub fn wall_color(p: &Vec3) -> [u8; 3] {
    let r = 170.0 + 60.0 * (0.8 * p.x + 0.5 * p.z).sin();
    let g = 90.0 + 50.0 * (0.7 * p.y - 0.4 * p.z + 1.0).sin();
    let b = 80.0 + 40.0 * (0.9 * p.z + 0.3 * p.x).cos();
    [r, g, b].map(|c| c.round().clamp(0.0, 255.0) as u8)
}

/// Standard normal draw for one pixel, reproducible from
/// `(seed, frame_id, pixel)` alone.
fn pixel_noise(rng: &mut ChaCha8Rng, pixel: usize) -> f64 {
    rng.set_word_pos(pixel as u128 * 4);
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Ray-casts one depth frame. Depth is measured along the optical axis;
/// pixels whose ray misses the mesh are marked invalid.
pub fn render_depth(bvh: &TriangleBvh, pose: &RigidPose, k: &CameraIntrinsics, cfg: &RenderConfig, frame_id: u32) -> Result<DepthFrame> {
    if !(bvh.bounds().diagonal() > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    if !pose.is_finite() {
        return Err(Error::InvalidPose);
    }
    if !(cfg.depth_scale > 0.0) {
        return Err(Error::NonPositiveScale);
    }
    let n = k.pixel_count();
    let w = k.width as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(frame_id as u64);
    let origin = pose.center();
    let mut mean = alloc::vec![0.0; n];
    let mut stddev = alloc::vec![0.0; n];
    let mut color = alloc::vec![[0u8; 3]; n];
    for i in 0..n {
        let ray = k.ray(&Vec2::new((i % w) as f64, (i / w) as f64));
        let dir = pose.rotation * ray;
        let Some(hit) = bvh.intersect_ray(&origin, &dir, 0.0) else {
            continue;
        };
        let depth = hit.t;
        let noisy = if cfg.noise_sigma_rel > 0.0 {
            depth + cfg.noise_sigma_rel * depth * pixel_noise(&mut rng, i)
        } else {
            depth
        };
        if !(noisy > 0.0) {
            continue;
        }
        mean[i] = noisy * cfg.depth_scale;
        stddev[i] = (cfg.noise_sigma_rel * depth).max(cfg.sigma_floor) * cfg.depth_scale;
        color[i] = wall_color(&(origin + dir * depth));
    }
    DepthFrame::new(frame_id, *k, *pose, mean, stddev, color)
}

/// Whether `p` on face `face` is seen by `pose`: in front of and facing
/// the camera, inside the image, and not occluded.
pub fn is_visible(mesh: &TriangleMesh, bvh: &TriangleBvh, face: usize, p: &Vec3, pose: &RigidPose, k: &CameraIntrinsics) -> bool {
    let c = pose.center();
    let to_camera = c - p;
    if mesh.face_normal(face).dot(&to_camera) <= 0.0 {
        return false;
    }
    let pc = pose.inverse_transform_point(p);
    let Ok(px) = k.project(&pc) else {
        return false;
    };
    if k.nearest_pixel(&px).is_none() {
        return false;
    }
    match bvh.intersect_ray(&c, &(p - c), 0.0) {
        Some(hit) => hit.t >= 1.0 - 1e-9,
        None => true,
    }
}

/// Uniform surface samples seen by at least `min_views` poses, with the
/// indices of the poses that see them. Frame ids are pose indices.
pub fn sample_visible(
    mesh: &TriangleMesh,
    bvh: &TriangleBvh,
    poses: &[RigidPose],
    k: &CameraIntrinsics,
    n_points: usize,
    min_views: usize,
    seed: u64,
) -> Result<SparsePointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    let mut visibility = Vec::with_capacity(n_points);
    let max_attempts = 200 * n_points.max(1);
    let mut attempts = 0;
    while points.len() < n_points && attempts < max_attempts {
        let batch = (n_points - points.len()).max(64);
        for (p, face) in mesh.sample_surface_with_faces(batch, &mut rng) {
            attempts += 1;
            let seen: Vec<u32> = poses
                .iter()
                .enumerate()
                .filter(|(_, pose)| is_visible(mesh, bvh, face, &p, pose, k))
                .map(|(i, _)| i as u32)
                .collect();
            if seen.len() >= min_views.max(1) {
                points.push(p);
                visibility.push(seen);
                if points.len() == n_points {
                    break;
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoVisibleSurface);
    }
    SparsePointCloud::new(points, visibility)
}

/// Simulated SfM landmarks: surface points seen from two or more poses.
pub fn sample_sparse(
    mesh: &TriangleMesh,
    bvh: &TriangleBvh,
    poses: &[RigidPose],
    k: &CameraIntrinsics,
    n_points: usize,
    seed: u64,
) -> Result<SparsePointCloud> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("need at least one point".into()));
    }
    sample_visible(mesh, bvh, poses, k, n_points, 2, seed)
}
