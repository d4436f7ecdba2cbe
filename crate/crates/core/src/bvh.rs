//! Bounding-volume hierarchy over mesh triangles, answering closest-point
//! and first-hit ray queries.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{Aabb, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: first triangle slot and count; interior: index of the second child
    // (the first child follows the node directly)
    start: u32,
    count: u32,
}

/// Closest point on the mesh to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
}

/// First intersection of a ray with the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter: the hit lies at `origin + t * dir`.
    pub t: f64,
    pub triangle: usize,
}

/// Immutable acceleration structure; safe to share between readers.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let triangles: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|i| mesh.triangle(i)).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        build(&triangles, &centroids, &mut order, 0, &mut nodes);
        Ok(Self { triangles, order, nodes })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn closest_point(&self, p: &Vec3) -> ClosestHit {
        let mut best = ClosestHit { point: Vec3::zeros(), distance: f64::INFINITY, triangle: usize::MAX };
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_squared(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let ti = self.order[slot as usize] as usize;
                    let [a, b, c] = &self.triangles[ti];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && ti < best.triangle) {
                        best_d2 = d2;
                        best = ClosestHit { point: q, distance: 0.0, triangle: ti };
                    }
                }
            } else {
                let (l, r) = (ni + 1, node.start as usize);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // visit the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.distance = best_d2.sqrt();
        best
    }

    /// Nearest two-sided hit with `t > t_min`.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<RayHit> {
        let inv = dir.map(|c| 1.0 / c);
        let mut best: Option<RayHit> = None;
        let mut t_best = f64::INFINITY;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, t_best).is_none() {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let ti = self.order[slot as usize] as usize;
                    let [a, b, c] = &self.triangles[ti];
                    if let Some(t) = ray_triangle(origin, dir, a, b, c) {
                        let closer = t < t_best || (t == t_best && best.is_some_and(|h| ti < h.triangle));
                        if t > t_min && closer {
                            t_best = t;
                            best = Some(RayHit { t, triangle: ti });
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(ni + 1);
            }
        }
        best
    }
}

fn build(triangles: &[[Vec3; 3]], centroids: &[Vec3], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &ti in order.iter() {
        for v in &triangles[ti as usize] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[ti as usize]);
    }
    let index = nodes.len();
    nodes.push(Node { bounds, start: offset as u32, count: order.len() as u32 });
    let ext = cbounds.extent();
    if order.len() <= LEAF_SIZE || ext.max() <= 0.0 {
        return index;
    }
    let axis = ext.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(triangles, centroids, left, offset, nodes);
    let r = build(triangles, centroids, right, offset + mid, nodes);
    nodes[index].start = r as u32;
    nodes[index].count = 0;
    index
}

/// Closest point on triangle `abc` to `p`, by Voronoi-region classification.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Two-sided Möller–Trumbore intersection; returns the ray parameter.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    const EDGE_EPS: f64 = 1e-12;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}
