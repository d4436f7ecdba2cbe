//! Directory layout shared by `synth`, `reconstruct` and `evaluate`:
//!
//! ```text
//! intrinsics.txt   fx fy cx cy width height
//! trajectory.txt   frame_id tx ty tz qx qy qz qw
//! sparse.ply       landmarks with visibility lists
//! phantom.ply      reference mesh (synthetic data only)
//! depth/NNNNNN.dpth
//! color/NNNNNN.ppm (optional; grey when absent)
//! ```

use std::path::{Path, PathBuf};

use endorecon_core::{CameraIntrinsics, DepthFrame, SparsePointCloud, TriangleMesh};

use crate::error::{Error, FormatError, Result};
use crate::formats::binary::{decode_depth, encode_depth, DepthImage};
use crate::formats::{ply, ppm, read_file, read_text, text, write_file};

pub const INTRINSICS: &str = "intrinsics.txt";
pub const TRAJECTORY: &str = "trajectory.txt";
pub const SPARSE: &str = "sparse.ply";
pub const PHANTOM: &str = "phantom.ply";

pub fn depth_path(dir: &Path, frame_id: u32) -> PathBuf {
    dir.join("depth").join(format!("{frame_id:06}.dpth"))
}

pub fn color_path(dir: &Path, frame_id: u32) -> PathBuf {
    dir.join("color").join(format!("{frame_id:06}.ppm"))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<DepthFrame>,
    pub cloud: SparsePointCloud,
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    text::read_intrinsics(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(u32, endorecon_core::RigidPose)>> {
    text::read_trajectory(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn read_cloud(path: &Path) -> Result<SparsePointCloud> {
    ply::read_cloud(&read_file(path)?).map_err(|e| e.at(path))
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    ply::read_mesh(&read_file(path)?).map_err(|e| e.at(path))
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    write_file(path, &ply::write_mesh(mesh))
}

fn check_size(path: &Path, k: &CameraIntrinsics, w: u32, h: u32, at: usize) -> Result<()> {
    if (w, h) != (k.width, k.height) {
        let msg = format!("image is {w}x{h} but the intrinsics say {}x{}", k.width, k.height);
        return Err(FormatError::new(at, msg).at(path));
    }
    Ok(())
}

/// Loads every frame listed in the trajectory.
pub fn load(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found")));
    }
    let k = read_intrinsics(&dir.join(INTRINSICS))?;
    let trajectory = read_trajectory(&dir.join(TRAJECTORY))?;
    let cloud = read_cloud(&dir.join(SPARSE))?;
    let mut frames = Vec::with_capacity(trajectory.len());
    for (id, pose) in trajectory {
        let path = depth_path(dir, id);
        let img = decode_depth(&read_file(&path)?).map_err(|e| e.at(&path))?;
        check_size(&path, &k, img.width, img.height, 4)?;
        let cpath = color_path(dir, id);
        let color = if cpath.exists() {
            let (w, h, px) = ppm::read_ppm(&read_file(&cpath)?).map_err(|e| e.at(&cpath))?;
            check_size(&cpath, &k, w, h, 0)?;
            px
        } else {
            vec![[128; 3]; k.pixel_count()]
        };
        frames.push(DepthFrame::new(id, k, pose, img.mean, img.stddev, color)?);
    }
    Ok(Dataset { intrinsics: k, frames, cloud })
}

/// Writes a dataset; `reference` goes to `phantom.ply` when given.
pub fn save(dir: &Path, data: &Dataset, reference: Option<&TriangleMesh>) -> Result<()> {
    let k = &data.intrinsics;
    write_file(&dir.join(INTRINSICS), text::write_intrinsics(k).as_bytes())?;
    let poses: Vec<_> = data.frames.iter().map(|f| (f.frame_id, f.pose)).collect();
    write_file(&dir.join(TRAJECTORY), text::write_trajectory(&poses).as_bytes())?;
    write_file(&dir.join(SPARSE), &ply::write_cloud(&data.cloud))?;
    if let Some(mesh) = reference {
        write_mesh(&dir.join(PHANTOM), mesh)?;
    }
    for f in &data.frames {
        let img = DepthImage { width: k.width, height: k.height, mean: f.mean.clone(), stddev: f.stddev.clone() };
        write_file(&depth_path(dir, f.frame_id), &encode_depth(&img))?;
        write_file(&color_path(dir, f.frame_id), &ppm::write_ppm(k.width, k.height, &f.color))?;
    }
    Ok(())
}
