//! Point-to-mesh distances and trimmed similarity ICP.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::bvh::TriangleBvh;
use crate::depth::median;
use crate::error::{Error, Result};
use crate::geometry::{SimilarityTransform, Vec3};
use crate::mesh::TriangleMesh;

/// Summary of a set of non-negative distances.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceStats {
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
    pub per_point: Option<Vec<f64>>,
}

impl DistanceStats {
    pub fn from_distances(distances: Vec<f64>, keep_per_point: bool) -> Self {
        let count = distances.len();
        if count == 0 {
            return Self::default();
        }
        let mean = distances.iter().sum::<f64>() / count as f64;
        let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / count as f64;
        let max = distances.iter().cloned().fold(0.0, f64::max);
        let median = median(distances.clone()).unwrap_or(0.0);
        Self { mean, stddev: var.sqrt(), median, max, count, per_point: keep_per_point.then_some(distances) }
    }
}

/// Distance from each point to the nearest point of any triangle.
pub fn point_to_mesh(points: &[Vec3], mesh: &TriangleMesh) -> Result<DistanceStats> {
    let bvh = TriangleBvh::new(mesh)?;
    Ok(point_to_bvh(points, &bvh))
}

pub fn point_to_bvh(points: &[Vec3], bvh: &TriangleBvh) -> DistanceStats {
    let d = points.iter().map(|p| bvh.closest_point(p).distance).collect();
    DistanceStats::from_distances(d, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Fraction of the worst correspondences dropped every iteration.
    pub trim_fraction: f64,
    /// Stop once the kept-set RMS residual changes by less than this.
    pub tol: f64,
}

impl IcpConfig {
    /// 100 iterations, 10% trimming, tolerance `1e-7 * extent`.
    pub fn for_extent(extent: f64) -> Self {
        Self { max_iters: 100, trim_fraction: 0.1, tol: 1e-7 * extent }
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub transform: SimilarityTransform,
    /// Distances of every transformed source point to the target.
    pub stats: DistanceStats,
    /// Kept-set RMS residual at each iteration, before that iteration's update.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Registration {
    /// Mean over the best `1 - trim_fraction` of the final distances.
    pub fn trimmed_mean(&self, trim_fraction: f64) -> f64 {
        let mut d = self.stats.per_point.clone().unwrap_or_default();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_unstable_by(|a, b| a.total_cmp(b));
        let keep = kept_count(d.len(), trim_fraction);
        d[..keep].iter().sum::<f64>() / keep as f64
    }
}

fn kept_count(n: usize, trim_fraction: f64) -> usize {
    ((n as f64 * (1.0 - trim_fraction)).round() as usize).clamp(1, n)
}

/// Weighted least-squares similarity mapping `src[i]` onto `dst[i]`
/// (Umeyama's SVD construction).
pub fn estimate_similarity(src: &[Vec3], dst: &[Vec3], weights: Option<&[f64]>) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch { expected: src.len(), found: dst.len() });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: src.len() });
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..src.len()).map(w).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig("weights must have a positive sum".into()));
    }
    let mu_s = (0..src.len()).map(|i| src[i] * w(i)).sum::<Vec3>() / total;
    let mu_d = (0..dst.len()).map(|i| dst[i] * w(i)).sum::<Vec3>() / total;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for i in 0..src.len() {
        let a = src[i] - mu_s;
        let b = dst[i] - mu_d;
        cov += b * a.transpose() * w(i);
        var_s += a.norm_squared() * w(i);
    }
    cov /= total;
    var_s /= total;
    if !(var_s > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.ok_or(Error::DegenerateMesh)?, svd.v_t.ok_or(Error::DegenerateMesh)?);
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let d = svd.singular_values;
    let trace = d[0] * s[(0, 0)] + d[1] * s[(1, 1)] + d[2] * s[(2, 2)];
    let scale = trace / var_s;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = mu_d - rotation * mu_s * scale;
    SimilarityTransform::new(scale, rotation, translation)
}

/// Identity rotation; matches centroids and RMS radii.
pub fn coarse_init(source: &[Vec3], target: &[Vec3]) -> Result<SimilarityTransform> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let centroid = |p: &[Vec3]| p.iter().sum::<Vec3>() / p.len() as f64;
    let rms = |p: &[Vec3], c: &Vec3| (p.iter().map(|x| (x - c).norm_squared()).sum::<f64>() / p.len() as f64).sqrt();
    let (cs, ct) = (centroid(source), centroid(target));
    let (rs, rt) = (rms(source, &cs), rms(target, &ct));
    let scale = if rs > 0.0 && rt > 0.0 { rt / rs } else { 1.0 };
    SimilarityTransform::new(scale, UnitQuaternion::identity(), ct - cs * scale)
}

/// Closest points and distances of every transformed source point, with
/// the kept-set RMS residual.
struct Matches {
    points: Vec<Vec3>,
    distances: Vec<f64>,
    kept: Vec<usize>,
    rms: f64,
}

fn match_points(source: &[Vec3], bvh: &TriangleBvh, transform: &SimilarityTransform, keep: usize) -> Matches {
    let (points, distances): (Vec<Vec3>, Vec<f64>) = source
        .iter()
        .map(|p| {
            let hit = bvh.closest_point(&transform.transform_point(p));
            (hit.point, hit.distance)
        })
        .unzip();
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    order.truncate(keep);
    let rms = (order.iter().map(|&i| distances[i] * distances[i]).sum::<f64>() / keep as f64).sqrt();
    Matches { points, distances, kept: order, rms }
}

type Params = [f64; 7];

fn to_params(t: &SimilarityTransform) -> Params {
    let w = t.rotation.scaled_axis();
    [t.scale.ln(), w.x, w.y, w.z, t.translation.x, t.translation.y, t.translation.z]
}

fn from_params(p: &Params) -> Option<SimilarityTransform> {
    let rotation = UnitQuaternion::from_scaled_axis(Vec3::new(p[1], p[2], p[3]));
    SimilarityTransform::new(p[0].exp(), rotation, Vec3::new(p[4], p[5], p[6])).ok()
}

/// Trimmed ICP over similarity transforms against the closest points of a mesh.
///
/// Each iteration pairs every transformed source point with its closest
/// point on `target`, keeps the best `1 - trim_fraction` pairs and solves
/// for the similarity that best maps the original source points onto
/// them. Plain ICP creeps along weakly constrained directions, so the
/// step is then extrapolated (doubling) for as long as that lowers the
/// kept-set RMS. The kept-set RMS never increases.
pub fn register_sim3(source: &[Vec3], target: &TriangleMesh, init: &SimilarityTransform, cfg: &IcpConfig) -> Result<Registration> {
    if source.len() < 7 {
        return Err(Error::TooFewPoints { needed: 7, found: source.len() });
    }
    if !(0.0..1.0).contains(&cfg.trim_fraction) {
        return Err(Error::InvalidConfig("trim_fraction must lie in [0, 1)".into()));
    }
    let bvh = TriangleBvh::new(target)?;
    let keep = kept_count(source.len(), cfg.trim_fraction).max(7.min(source.len()));
    let mut transform = *init;
    let mut current = match_points(source, &bvh, &transform, keep);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if let Some(&prev) = history.last() {
            if (prev - current.rms).abs() < cfg.tol {
                history.push(current.rms);
                converged = true;
                break;
            }
        }
        history.push(current.rms);
        let src: Vec<Vec3> = current.kept.iter().map(|&i| source[i]).collect();
        let dst: Vec<Vec3> = current.kept.iter().map(|&i| current.points[i]).collect();
        let Ok(mut best) = estimate_similarity(&src, &dst, None) else {
            break;
        };
        let mut best_matches = match_points(source, &bvh, &best, keep);
        let (from, to) = (to_params(&transform), to_params(&best));
        let mut alpha = 2.0;
        while alpha <= 64.0 {
            let p: Params = core::array::from_fn(|i| from[i] + alpha * (to[i] - from[i]));
            let Some(candidate) = from_params(&p) else {
                break;
            };
            let m = match_points(source, &bvh, &candidate, keep);
            if !(m.rms < best_matches.rms) {
                break;
            }
            best = candidate;
            best_matches = m;
            alpha *= 2.0;
        }
        transform = best;
        current = best_matches;
        iterations += 1;
    }

    let stats = DistanceStats::from_distances(current.distances, true);
    Ok(Registration { transform, stats, history, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::box_mesh;
    use nalgebra::Vector3;

    #[test]
    fn stats_from_known_distances() {
        let s = DistanceStats::from_distances(alloc::vec![1.0, 2.0, 3.0, 6.0], false);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.max, 6.0);
        assert!((s.stddev - (3.5f64).sqrt()).abs() < 1e-12);
        assert!(s.per_point.is_none());
    }

    #[test]
    fn point_above_triangle_interior() {
        let m = TriangleMesh::new(
            alloc::vec![Vec3::new(-10.0, -10.0, 0.0), Vec3::new(10.0, -10.0, 0.0), Vec3::new(0.0, 10.0, 0.0)],
            None,
            alloc::vec![[0, 1, 2]],
        )
        .unwrap();
        let s = point_to_mesh(&[Vec3::new(0.5, 0.5, 0.7)], &m).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-12);
        let own = point_to_mesh(&m.vertices, &m).unwrap();
        assert_eq!(own.mean, 0.0);
        assert!(matches!(point_to_mesh(&[Vec3::zeros()], &TriangleMesh::default()), Err(Error::EmptyMesh)));
    }

    #[test]
    fn similarity_estimate_is_exact_on_clean_pairs() {
        let truth = SimilarityTransform::new(
            1.7,
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.8),
            Vec3::new(0.3, -1.0, 2.0),
        )
        .unwrap();
        let src: Vec<Vec3> = (0..20).map(|i| Vec3::new((i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();
        let est = estimate_similarity(&src, &dst, None).unwrap();
        assert!((est.scale - 1.7).abs() < 1e-10);
        assert!(est.rotation_angle_to(&truth) < 1e-10);
        assert!((est.translation - truth.translation).norm() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let m = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let r = register_sim3(&m.vertices[..6], &m, &SimilarityTransform::identity(), &IcpConfig::for_extent(1.0));
        assert!(matches!(r, Err(Error::TooFewPoints { needed: 7, found: 6 })));
    }

    #[test]
    fn identity_on_own_vertices() {
        let m = box_mesh(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0));
        let r = register_sim3(&m.vertices, &m, &SimilarityTransform::identity(), &IcpConfig::for_extent(1.0)).unwrap();
        assert!(r.stats.mean < 1e-12);
        assert!((r.transform.scale - 1.0).abs() < 1e-9);
        assert!(r.transform.translation.norm() < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn coarse_init_matches_centroid_and_spread() {
        let a: Vec<Vec3> = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]].iter().map(|p| Vec3::from(*p)).collect();
        let b: Vec<Vec3> = a.iter().map(|p| p * 3.0 + Vec3::new(1.0, 1.0, 1.0)).collect();
        let t = coarse_init(&a, &b).unwrap();
        assert!((t.scale - 3.0).abs() < 1e-12);
        for (p, q) in a.iter().zip(&b) {
            assert!((t.transform_point(p) - q).norm() < 1e-12);
        }
    }
}
