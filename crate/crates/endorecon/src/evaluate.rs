//! Reconstruction-versus-reference metrics.

use std::fmt::Write as _;
use std::path::Path;

use endorecon_core::registration::coarse_init;
use endorecon_core::seed::substream;
use endorecon_core::{
    cross_section_series, point_to_mesh, register_sim3, Error as CoreError, Registration, RigidPose,
    SectionSeries, SimilarityTransform, SparsePointCloud, TriangleMesh, Vec3,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitMode, PipelineConfig};
use crate::error::Result;
use crate::formats::write_file;

/// Ordered `metric value unit` rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics(pub Vec<(String, f64, &'static str)>);

impl Metrics {
    pub fn push(&mut self, name: impl Into<String>, value: f64, unit: &'static str) {
        self.0.push((name.into(), value, unit));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _, _)| n == name).map(|r| r.1)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, v, u) in &self.0 {
            writeln!(out, "{n} {v} {u}").unwrap();
        }
        out
    }

    /// One object keyed by metric name; NaN becomes `null`.
    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (n, v, u) in &self.0 {
            map.insert(n.clone(), serde_json::json!({ "value": v, "unit": u }));
        }
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).unwrap();
        s.push('\n');
        s
    }

    /// Writes `<stem>.txt` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_file(&dir.join(format!("{stem}.txt")), self.to_text().as_bytes())?;
        write_file(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())
    }

    pub fn push_stats(&mut self, prefix: &str, s: &endorecon_core::DistanceStats) {
        self.push(format!("{prefix}_mean"), s.mean, "mm");
        self.push(format!("{prefix}_std"), s.stddev, "mm");
        self.push(format!("{prefix}_median"), s.median, "mm");
        self.push(format!("{prefix}_max"), s.max, "mm");
    }
}

/// Seeded uniform surface samples.
pub fn surface_samples(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Vec3> {
    mesh.sample_surface(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Registers surface samples of `source` onto `target`.
pub fn register_meshes(
    source: &TriangleMesh,
    target: &TriangleMesh,
    init: InitMode,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Registration> {
    if source.is_empty() || target.is_empty() {
        return Err(CoreError::EmptyMesh.into());
    }
    let samples = surface_samples(source, cfg.eval_samples, substream(seed, "source samples"));
    let init = match init {
        InitMode::Identity => SimilarityTransform::identity(),
        InitMode::Centroid => {
            let reference = surface_samples(target, cfg.eval_samples, substream(seed, "target samples"));
            coarse_init(&samples, &reference)?
        }
    };
    Ok(register_sim3(&samples, target, &init, &cfg.icp(target.extent()))?)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub registration: Registration,
    pub sections: std::result::Result<SectionSeries, CoreError>,
}

pub fn evaluate(
    recon: &TriangleMesh,
    reference: &TriangleMesh,
    trajectory: &[RigidPose],
    cloud: &SparsePointCloud,
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let mut m = Metrics::default();
    let sparse = point_to_mesh(&cloud.points, recon)?;
    m.push_stats("sparse_to_recon", &sparse);
    m.push("sparse_points", sparse.count as f64, "count");

    let reg = register_meshes(recon, reference, cfg.icp_init, cfg, substream(cfg.seed, "evaluate"))?;
    m.push_stats("registration_residual", &reg.stats);
    m.push("registration_trimmed_mean", reg.trimmed_mean(cfg.icp_trim), "mm");
    m.push("registration_scale", reg.transform.scale, "ratio");
    m.push(
        "registration_rotation",
        reg.transform.rotation.angle().to_degrees(),
        "deg",
    );
    m.push("registration_translation", reg.transform.translation.norm(), "mm");
    m.push("registration_iterations", reg.iterations as f64, "count");
    m.push("registration_converged", reg.converged as u8 as f64, "bool");

    let sections = cross_section_series(recon, reference, trajectory, &reg.transform);
    match &sections {
        Ok(s) => {
            m.push("cross_section_mean_relative_difference", s.mean_relative_difference, "ratio");
            m.push("cross_section_poses", (s.per_pose.len() - s.skipped) as f64, "count");
            m.push("cross_section_skipped", s.skipped as f64, "count");
        }
        Err(e) => {
            let skipped = match e {
                CoreError::AllSectionsFailed { skipped } => *skipped,
                _ => trajectory.len(),
            };
            m.push("cross_section_mean_relative_difference", f64::NAN, "ratio");
            m.push("cross_section_poses", 0.0, "count");
            m.push("cross_section_skipped", skipped as f64, "count");
        }
    }
    push_watertight(&mut m, "recon", recon);
    Ok(Evaluation { metrics: m, registration: reg, sections })
}

pub fn push_watertight(m: &mut Metrics, prefix: &str, mesh: &TriangleMesh) {
    let w = mesh.check_watertight();
    m.push(format!("{prefix}_boundary_edges"), w.boundary_edge_count as f64, "count");
    m.push(format!("{prefix}_non_manifold_edges"), w.non_manifold_edge_count as f64, "count");
    m.push(format!("{prefix}_components"), w.connected_component_count as f64, "count");
    m.push(format!("{prefix}_watertight"), w.is_watertight as u8 as f64, "bool");
}

#[cfg(test)]
mod tests {
    use super::*;
    use endorecon_core::phantom::{generate_phantom, generate_trajectory, PhantomSpec};

    #[test]
    fn metrics_text_and_json_agree() {
        let mut m = Metrics::default();
        m.push("a", 1.5, "mm");
        m.push("b", f64::NAN, "ratio");
        assert_eq!(m.to_text(), "a 1.5 mm\nb NaN ratio\n");
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["a"]["value"], 1.5);
        assert!(v["b"]["value"].is_null());
        assert_eq!(v["b"]["unit"], "ratio");
    }

    #[test]
    fn reference_against_itself() {
        let spec = PhantomSpec::cylinder(60.0, 8.0, 30, 48);
        let mesh = generate_phantom(&spec).unwrap();
        let poses = generate_trajectory(&spec, 6).unwrap();
        let cloud = SparsePointCloud::new(mesh.vertices[..50].to_vec(), vec![vec![0]; 50]).unwrap();
        let cfg = PipelineConfig { icp_init: InitMode::Identity, eval_samples: 500, ..Default::default() };
        let ev = evaluate(&mesh, &mesh, &poses, &cloud, &cfg).unwrap();
        assert!(ev.metrics.get("sparse_to_recon_max").unwrap() < 1e-9);
        assert!(ev.metrics.get("registration_residual_mean").unwrap() < 1e-9);
        assert!(ev.metrics.get("cross_section_mean_relative_difference").unwrap() < 1e-9);
        assert_eq!(ev.metrics.get("recon_watertight"), Some(1.0));
    }
}
