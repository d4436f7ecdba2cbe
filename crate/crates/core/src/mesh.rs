//! Indexed triangle meshes and watertightness auditing.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{SimilarityTransform, Vec3};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self { min: self.min.add_scalar(-pad), max: self.max.add_scalar(pad) }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test. Returns the entry parameter if the ray hits within `[0, t_max]`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            if inv_dir[i].is_infinite() {
                // parallel to the slab: inside or never
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) * inv_dir[i];
            let b = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if lo > t0 {
                t0 = lo;
            }
            if hi < t1 {
                t1 = hi;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Indexed triangle mesh. Triangles wind counter-clockwise seen from the
/// outside, where "outside" is the positive side of the signed distance
/// field the mesh was extracted from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub triangles: Vec<[u32; 3]>,
}

/// Edge-incidence audit of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatertightReport {
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
    pub connected_component_count: usize,
    pub is_watertight: bool,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, colors: Option<Vec<[u8; 3]>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != vertices.len() {
                return Err(Error::DimensionMismatch { expected: vertices.len(), found: c.len() });
            }
        }
        for t in &triangles {
            for &i in t {
                if i as usize >= vertices.len() {
                    return Err(Error::IndexOutOfRange { index: i, vertex_count: vertices.len() });
                }
            }
        }
        Ok(Self { vertices, colors, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Non-normalized face normal (twice the area).
    pub fn face_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Bounding-box diagonal.
    pub fn extent(&self) -> f64 {
        self.bounds().diagonal()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| 0.5 * self.face_normal(i).norm()).sum()
    }

    /// Divergence-theorem volume; positive when normals point away from the enclosed region.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| t.transform_point(v)).collect(),
            colors: self.colors.clone(),
            triangles: self.triangles.clone(),
        }
    }

    /// Reverses the winding of every triangle.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            colors: self.colors.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Draws `n` points uniformly over the surface area.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        self.sample_surface_with_faces(n, rng).into_iter().map(|(p, _)| p).collect()
    }

    pub(crate) fn sample_surface_with_faces<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(Vec3, usize)> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            total += 0.5 * self.face_normal(i).norm();
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let r = rng.random_range(0.0..total);
                let face = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
                let [a, b, c] = self.triangle(face);
                let mut s: f64 = rng.random();
                let mut t: f64 = rng.random();
                if s + t > 1.0 {
                    s = 1.0 - s;
                    t = 1.0 - t;
                }
                (a + (b - a) * s + (c - a) * t, face)
            })
            .collect()
    }

    /// Counts edge incidences: boundary edges border one triangle,
    /// non-manifold edges three or more.
    pub fn check_watertight(&self) -> WatertightReport {
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(self.triangles.len() * 3);
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                edges.push(if p < q { (p, q) } else { (q, p) });
            }
        }
        edges.sort_unstable();
        let mut boundary = 0;
        let mut non_manifold = 0;
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            match j - i {
                1 => boundary += 1,
                2 => {}
                _ => non_manifold += 1,
            }
            i = j;
        }

        let mut sets = DisjointSets::new(self.vertices.len());
        let mut used = alloc::vec![false; self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            sets.union(a as usize, b as usize);
            sets.union(a as usize, c as usize);
            used[a as usize] = true;
            used[b as usize] = true;
            used[c as usize] = true;
        }
        let components = (0..self.vertices.len()).filter(|&v| used[v] && sets.find(v) == v).count();

        WatertightReport {
            boundary_edge_count: boundary,
            non_manifold_edge_count: non_manifold,
            connected_component_count: components,
            is_watertight: boundary == 0 && non_manifold == 0,
        }
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the representative is deterministic
            if ra < rb {
                self.parent[rb] = ra;
            } else {
                self.parent[ra] = rb;
            }
        }
    }
}

/// Closed unit tetrahedron, outward winding.
pub fn tetrahedron() -> TriangleMesh {
    TriangleMesh {
        vertices: alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        colors: None,
        triangles: alloc::vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    }
}

/// Axis-aligned box `[min, max]`, outward winding, 12 triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(if x { max.x } else { min.x }, if y { max.y } else { min.y }, if z { max.z } else { min.z })
    };
    let vertices = alloc::vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let triangles = alloc::vec![
        [0, 3, 2], [0, 2, 1], // -z
        [4, 5, 6], [4, 6, 7], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [3, 7, 6], [3, 6, 2], // +y
        [0, 4, 7], [0, 7, 3], // -x
        [1, 2, 6], [1, 6, 5], // +x
    ];
    TriangleMesh { vertices, colors: None, triangles }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_is_open() {
        let m = TriangleMesh::new(
            alloc::vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            None,
            alloc::vec![[0, 1, 2]],
        )
        .unwrap();
        let r = m.check_watertight();
        assert_eq!(r.boundary_edge_count, 3);
        assert_eq!(r.non_manifold_edge_count, 0);
        assert_eq!(r.connected_component_count, 1);
        assert!(!r.is_watertight);
    }

    #[test]
    fn tetrahedron_is_closed() {
        let t = tetrahedron();
        let r = t.check_watertight();
        assert_eq!(r, WatertightReport {
            boundary_edge_count: 0,
            non_manifold_edge_count: 0,
            connected_component_count: 1,
            is_watertight: true,
        });
        assert!((t.signed_volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn box_volume_and_area() {
        let b = box_mesh(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 3.0, 0.5));
        assert!(b.check_watertight().is_watertight);
        assert!((b.signed_volume() - 3.0).abs() < 1e-12);
        assert!((b.surface_area() - 2.0 * (6.0 + 1.0 + 1.5)).abs() < 1e-12);
        assert!((b.flipped().signed_volume() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn fin_edge_is_non_manifold() {
        let mut t = tetrahedron();
        t.vertices.push(Vec3::new(-1.0, -1.0, -1.0));
        t.triangles.push([0, 1, 4]);
        let r = t.check_watertight();
        assert_eq!(r.non_manifold_edge_count, 1);
        assert_eq!(r.boundary_edge_count, 2);
        assert!(!r.is_watertight);
    }

    #[test]
    fn counts_components() {
        let mut a = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let b = box_mesh(Vec3::repeat(3.0), Vec3::repeat(4.0));
        let offset = a.vertices.len() as u32;
        a.vertices.extend(b.vertices);
        a.triangles.extend(b.triangles.iter().map(|t| t.map(|i| i + offset)));
        assert_eq!(a.check_watertight().connected_component_count, 2);
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let err = TriangleMesh::new(alloc::vec![Vec3::zeros()], None, alloc::vec![[0, 0, 1]]);
        assert!(matches!(err, Err(Error::IndexOutOfRange { index: 1, .. })));
    }

    #[test]
    fn ray_box_slab() {
        let b = Aabb { min: Vec3::repeat(-1.0), max: Vec3::repeat(1.0) };
        let o = Vec3::new(-5.0, 0.0, 0.0);
        let d = Vec3::new(1.0, 0.0, 0.0);
        let inv = d.map(|c| 1.0 / c);
        assert_eq!(b.ray_entry(&o, &inv, 100.0), Some(4.0));
        assert_eq!(b.ray_entry(&o, &inv, 3.0), None);
        let miss = Vec3::new(-5.0, 2.0, 0.0);
        assert_eq!(b.ray_entry(&miss, &inv, 100.0), None);
        // grazing along a face
        let on_face = Vec3::new(-5.0, 1.0, 0.0);
        assert_eq!(b.ray_entry(&on_face, &inv, 100.0), Some(4.0));
        let neg = Vec3::new(-1.0, -0.0, 0.0).map(|c| 1.0 / c);
        assert_eq!(b.ray_entry(&Vec3::new(5.0, -1.0, 0.0), &neg, 100.0), Some(4.0));
    }
}
