//! Planar cross-sections of a mesh anchored at camera poses.
//!
//! The cutting plane passes through the camera center with the optical
//! axis as normal. Intersection points are keyed by the mesh edge they
//! lie on, so neighbouring triangles produce bit-identical endpoints and
//! contours close exactly on welded meshes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::geometry::{RigidPose, SimilarityTransform, Vec2, Vec3};
use crate::mesh::TriangleMesh;

/// Closed intersection contour in plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub plane_origin: Vec3,
    pub plane_normal: Vec3,
    /// In-plane axes: camera x and y in world coordinates.
    pub plane_axes: [Vec3; 2],
    /// Closed polyline, first point repeated at the end.
    pub contour: Vec<Vec2>,
    pub area: f64,
}

impl CrossSection {
    pub fn to_world(&self, p: &Vec2) -> Vec3 {
        self.plane_origin + self.plane_axes[0] * p.x + self.plane_axes[1] * p.y
    }
}

/// Shoelace area of a closed polygon (absolute value).
pub fn polygon_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice.abs()
}

/// Even-odd point-in-polygon test.
pub fn contains_point(polygon: &[Vec2], p: &Vec2) -> bool {
    let n = polygon.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

type EdgeKey = (u32, u32);

/// Maps each vertex to the lowest index holding exactly the same position.
fn canonical_vertices(mesh: &TriangleMesh) -> Vec<u32> {
    let mut order: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    let key = |i: u32| {
        let v = mesh.vertices[i as usize];
        (v.x.to_bits(), v.y.to_bits(), v.z.to_bits())
    };
    order.sort_by_key(|&i| (key(i), i));
    let mut canon: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    let mut run_start = 0;
    for w in 1..=order.len() {
        if w == order.len() || key(order[w]) != key(order[run_start]) {
            for &i in &order[run_start..w] {
                canon[i as usize] = order[run_start];
            }
            run_start = w;
        }
    }
    canon
}

/// Intersects `mesh` with the plane of `pose` and measures the selected loop.
///
/// The loop containing the camera center is chosen (the innermost if
/// several nest); otherwise the loop whose centroid is nearest the center.
pub fn cross_section(mesh: &TriangleMesh, pose: &RigidPose) -> Result<CrossSection> {
    let origin = pose.center();
    let normal = pose.optical_axis();
    let axes = [pose.rotation * Vec3::x(), pose.rotation * Vec3::y()];
    let to_plane = |p: &Vec3| {
        let d = p - origin;
        Vec2::new(d.dot(&axes[0]), d.dot(&axes[1]))
    };

    let canon = canonical_vertices(mesh);
    let dist: Vec<f64> = mesh.vertices.iter().map(|v| (v - origin).dot(&normal)).collect();
    // points exactly on the plane count as positive
    let below = |i: u32| dist[i as usize] < 0.0;

    let mut points: BTreeMap<EdgeKey, Vec2> = BTreeMap::new();
    let mut segments: Vec<[EdgeKey; 2]> = Vec::new();
    for tri in &mesh.triangles {
        let ids = tri.map(|i| canon[i as usize]);
        let mut ends = [(0u32, 0u32); 2];
        let mut found = 0;
        for (a, b) in [(ids[0], ids[1]), (ids[1], ids[2]), (ids[2], ids[0])] {
            if below(a) == below(b) {
                continue;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            points.entry(key).or_insert_with(|| {
                let (da, db) = (dist[key.0 as usize], dist[key.1 as usize]);
                let (pa, pb) = (mesh.vertices[key.0 as usize], mesh.vertices[key.1 as usize]);
                to_plane(&(pa + (pb - pa) * (da / (da - db))))
            });
            if found < 2 {
                ends[found] = key;
            }
            found += 1;
        }
        if found == 2 && ends[0] != ends[1] {
            segments.push(ends);
        }
    }
    if segments.is_empty() {
        return Err(Error::NoIntersection);
    }

    let tol = 1e-6 * mesh.extent();
    let (loops, open) = stitch(&segments, &points, tol);
    if loops.is_empty() && open == 0 {
        return Err(Error::NoIntersection);
    }

    let center = Vec2::zeros();
    let containing = loops
        .iter()
        .filter(|l| contains_point(l, &center))
        .min_by(|a, b| polygon_area(a).total_cmp(&polygon_area(b)));
    let chosen = match containing {
        Some(l) => l,
        None if open > 0 => return Err(Error::OpenContour),
        None => loops
            .iter()
            .min_by(|a, b| {
                let ca = a.iter().sum::<Vec2>() / a.len() as f64;
                let cb = b.iter().sum::<Vec2>() / b.len() as f64;
                ca.norm_squared().total_cmp(&cb.norm_squared())
            })
            .ok_or(Error::OpenContour)?,
    };

    let area = polygon_area(chosen);
    let mut contour = chosen.clone();
    contour.push(chosen[0]);
    Ok(CrossSection { plane_origin: origin, plane_normal: normal, plane_axes: axes, contour, area })
}

/// Chains segments into loops through shared edge keys. Chains left open
/// are joined end to end when their endpoints lie within `tol`. Returns
/// the closed loops (without repeated first point) and the number of
/// chains that stayed open.
fn stitch(segments: &[[EdgeKey; 2]], points: &BTreeMap<EdgeKey, Vec2>, tol: f64) -> (Vec<Vec<Vec2>>, usize) {
    let mut incident: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        incident.entry(s[0]).or_default().push(i);
        incident.entry(s[1]).or_default().push(i);
    }
    let mut used = alloc::vec![false; segments.len()];
    let mut loops = Vec::new();
    let mut chains: Vec<Vec<Vec2>> = Vec::new();

    let next_segment = |key: &EdgeKey, used: &[bool]| -> Option<usize> {
        let list = &incident[key];
        if list.len() != 2 {
            return None;
        }
        list.iter().copied().find(|&s| !used[s])
    };

    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let [first, second] = segments[start];
        // walk forward from `second`, then backward from `first`
        let mut forward = alloc::vec![first, second];
        let mut closed = false;
        let mut cur = second;
        while let Some(s) = next_segment(&cur, &used) {
            used[s] = true;
            let [a, b] = segments[s];
            cur = if a == cur { b } else { a };
            if cur == first {
                closed = true;
                break;
            }
            forward.push(cur);
        }
        if closed {
            loops.push(forward.iter().map(|k| points[k]).collect());
            continue;
        }
        let mut backward = Vec::new();
        let mut cur = first;
        while let Some(s) = next_segment(&cur, &used) {
            used[s] = true;
            let [a, b] = segments[s];
            cur = if a == cur { b } else { a };
            backward.push(cur);
        }
        backward.reverse();
        backward.extend(forward);
        chains.push(backward.iter().map(|k| points[k]).collect());
    }

    // join open chains whose ends meet within tolerance
    let mut open = 0;
    while let Some(mut chain) = chains.pop() {
        loop {
            let head = chain[0];
            let tail = *chain.last().unwrap_or(&head);
            if chain.len() > 2 && (head - tail).norm() <= tol {
                chain.pop();
                loops.push(chain);
                break;
            }
            let mut joined = false;
            for i in 0..chains.len() {
                let (h, t) = (chains[i][0], *chains[i].last().unwrap_or(&chains[i][0]));
                if (tail - h).norm() <= tol {
                    let other = chains.swap_remove(i);
                    chain.extend(other.into_iter().skip(1));
                    joined = true;
                    break;
                }
                if (tail - t).norm() <= tol {
                    let other = chains.swap_remove(i);
                    chain.extend(other.into_iter().rev().skip(1));
                    joined = true;
                    break;
                }
            }
            if !joined {
                open += 1;
                break;
            }
        }
    }
    (loops, open)
}

/// Outcome of comparing sections of two meshes along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSeries {
    pub mean_relative_difference: f64,
    /// `|A_recon - A_ref| / A_ref` per pose; `None` where either section failed.
    pub per_pose: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Average relative cross-section area difference along a trajectory.
///
/// `trajectory` is expressed in the reconstruction frame; `registration`
/// maps that frame onto the reference, and is applied to both the
/// reconstruction and the poses.
pub fn cross_section_series(
    recon: &TriangleMesh,
    reference: &TriangleMesh,
    trajectory: &[RigidPose],
    registration: &SimilarityTransform,
) -> Result<SectionSeries> {
    if trajectory.is_empty() {
        return Err(Error::AllSectionsFailed { skipped: 0 });
    }
    let registered = recon.transformed(registration);
    let per_pose: Vec<Option<f64>> = trajectory
        .iter()
        .map(|pose| {
            let pose = registration.transform_pose(pose);
            let a = cross_section(&registered, &pose).ok()?.area;
            let b = cross_section(reference, &pose).ok()?.area;
            (b > 0.0).then(|| (a - b).abs() / b)
        })
        .collect();
    let valid: Vec<f64> = per_pose.iter().flatten().copied().collect();
    let skipped = per_pose.len() - valid.len();
    if valid.is_empty() {
        return Err(Error::AllSectionsFailed { skipped });
    }
    Ok(SectionSeries {
        mean_relative_difference: valid.iter().sum::<f64>() / valid.len() as f64,
        per_pose,
        skipped,
    })
}
