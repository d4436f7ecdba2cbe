//! The `reconstruct`, `consistency` and `match` commands as library calls.

use std::fmt::Write as _;
use std::path::Path;

use endorecon_core::matching::{match_subpixel, DescriptorMap};
use endorecon_core::seed::{subsample, substream};
use endorecon_core::{fuse_sequence, marching_cubes, DepthFrame, TriangleMesh, TsdfVolume, Vec2, WatertightReport};

use crate::config::{InitMode, PipelineConfig};
use crate::dataset::{self, Dataset};
use crate::error::Result;
use crate::evaluate::{push_watertight, register_meshes, Metrics};
use crate::formats::binary::encode_volume;
use crate::formats::text::MatchRecord;
use crate::formats::write_file;

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mesh: TriangleMesh,
    pub watertight: WatertightReport,
    /// `(frame_id, scale)` for every fused frame.
    pub scales: Vec<(u32, f64)>,
    pub volume: TsdfVolume,
}

/// Frame indices kept by a `keep`-of-`block` rule; all frames when `keep == block`.
pub fn select_frames(count: usize, keep: usize, block: usize, seed: u64) -> Result<Vec<usize>> {
    if keep == block {
        return Ok((0..count).collect());
    }
    Ok(subsample(count, keep, block, seed)?)
}

/// Scale recovery, fusion and surface extraction over the chosen frames.
pub fn reconstruct(data: &Dataset, frames: &[usize], cfg: &PipelineConfig) -> Result<Reconstruction> {
    let chosen: Vec<DepthFrame> = frames.iter().map(|&i| data.frames[i].clone()).collect();
    let fused = fuse_sequence(&chosen, &data.cloud, &cfg.fusion())?;
    let mesh = marching_cubes(&fused.volume, cfg.min_weight)?;
    Ok(Reconstruction {
        watertight: mesh.check_watertight(),
        scales: chosen.iter().map(|f| f.frame_id).zip(fused.scales).collect(),
        volume: fused.volume,
        mesh,
    })
}

pub fn watertight_text(w: &WatertightReport) -> String {
    format!(
        "boundary_edges {}\nnon_manifold_edges {}\ncomponents {}\nwatertight {}\n",
        w.boundary_edge_count, w.non_manifold_edge_count, w.connected_component_count, w.is_watertight
    )
}

fn write_reconstruction(dir: &Path, stem: &str, r: &Reconstruction, dump_volume: bool) -> Result<()> {
    dataset::write_mesh(&dir.join(format!("{stem}.ply")), &r.mesh)?;
    write_file(&dir.join(format!("{stem}_watertight.txt")), watertight_text(&r.watertight).as_bytes())?;
    let mut scales = String::new();
    for (id, s) in &r.scales {
        writeln!(scales, "{id} {s}").unwrap();
    }
    write_file(&dir.join(format!("{stem}_scales.txt")), scales.as_bytes())?;
    if dump_volume {
        write_file(&dir.join(format!("{stem}.tsdf")), &encode_volume(&r.volume))?;
    }
    Ok(())
}

pub fn echo_config(dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    write_file(&dir.join("config.txt"), cfg.to_text().as_bytes())
}

/// `reconstruct`: writes `mesh.ply`, `mesh_watertight.txt`, `mesh_scales.txt`
/// and `config.txt`, plus `mesh.tsdf` when `dump_volume` is set.
pub fn cmd_reconstruct(data: &Dataset, cfg: &PipelineConfig, out: &Path) -> Result<Reconstruction> {
    echo_config(out, cfg)?;
    let frames = select_frames(data.frames.len(), cfg.subsample_keep, cfg.subsample_block, cfg.seed)?;
    let r = reconstruct(data, &frames, cfg)?;
    write_reconstruction(out, "mesh", &r, cfg.dump_volume)?;
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct Consistency {
    pub full: Reconstruction,
    pub runs: [Reconstruction; 2],
    pub metrics: Metrics,
}

/// Full run plus two independently subsampled runs, registered pairwise.
pub fn consistency(data: &Dataset, cfg: &PipelineConfig) -> Result<Consistency> {
    let all: Vec<usize> = (0..data.frames.len()).collect();
    let full = reconstruct(data, &all, cfg)?;
    let run = |name: &str| -> Result<Reconstruction> {
        let frames = select_frames(data.frames.len(), cfg.consistency_keep, cfg.subsample_block, substream(cfg.seed, name))?;
        reconstruct(data, &frames, cfg)
    };
    let runs = [run("consistency a")?, run("consistency b")?];
    let mut m = Metrics::default();
    m.push("frames_full", full.scales.len() as f64, "count");
    m.push("frames_a", runs[0].scales.len() as f64, "count");
    m.push("frames_b", runs[1].scales.len() as f64, "count");
    // all runs share the landmark frame, so registration starts at identity
    for (name, src, dst) in [("a_to_b", &runs[0], &runs[1]), ("a_to_full", &runs[0], &full), ("b_to_full", &runs[1], &full)] {
        let reg = register_meshes(&src.mesh, &dst.mesh, InitMode::Identity, cfg, substream(cfg.seed, name))?;
        m.push_stats(&format!("{name}_residual"), &reg.stats);
        m.push(format!("{name}_scale"), reg.transform.scale, "ratio");
        m.push(format!("{name}_rotation"), reg.transform.rotation.angle().to_degrees(), "deg");
    }
    for (name, r) in [("full", &full), ("a", &runs[0]), ("b", &runs[1])] {
        push_watertight(&mut m, name, &r.mesh);
    }
    Ok(Consistency { full, runs, metrics: m })
}

pub fn cmd_consistency(data: &Dataset, cfg: &PipelineConfig, out: &Path) -> Result<Consistency> {
    echo_config(out, cfg)?;
    let c = consistency(data, cfg)?;
    write_reconstruction(out, "mesh_full", &c.full, cfg.dump_volume)?;
    write_reconstruction(out, "mesh_a", &c.runs[0], cfg.dump_volume)?;
    write_reconstruction(out, "mesh_b", &c.runs[1], cfg.dump_volume)?;
    c.metrics.write(out, "consistency")?;
    Ok(c)
}

/// Subpixel match of every query pixel of `source` inside `target`.
pub fn match_queries(source: &DescriptorMap, target: &DescriptorMap, queries: &[Vec2], refine_factor: u32) -> Result<Vec<MatchRecord>> {
    queries
        .iter()
        .map(|q| {
            let m = match_subpixel(q, source, target, refine_factor)?;
            Ok(MatchRecord { query: *q, matched: m.pixel, score: m.score })
        })
        .collect()
}
