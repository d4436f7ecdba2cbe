//! Zero level-set extraction from a TSDF volume.
//!
//! Uses the classic 256-case triangle table without ambiguity
//! resolution. Cubes with any corner weighted below `min_weight` are
//! skipped, leaving open boundaries at the observation frontier.
//! Vertices are welded by global edge id, so adjacent cubes share them
//! exactly; a vertex that lands on a voxel center is keyed by the voxel.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mc_table::TRI_TABLE;
use crate::mesh::TriangleMesh;
use crate::tsdf::TsdfVolume;

pub const DEFAULT_MIN_WEIGHT: f64 = 1e-6;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const NONE: u32 = u32::MAX;

struct Welder<'a> {
    vol: &'a TsdfVolume,
    edge_vertex: Vec<u32>,
    corner_vertex: Vec<u32>,
    vertices: Vec<Vec3>,
    colors: Vec<[u8; 3]>,
}

impl Welder<'_> {
    fn corner(&mut self, idx: usize, pos: [usize; 3]) -> u32 {
        if self.corner_vertex[idx] == NONE {
            self.corner_vertex[idx] = self.vertices.len() as u32;
            self.vertices.push(self.vol.voxel_center(pos[0], pos[1], pos[2]));
            self.colors.push(to_rgb(&self.vol.color[idx]));
        }
        self.corner_vertex[idx]
    }

    fn vertex_on_edge(&mut self, a: [usize; 3], b: [usize; 3]) -> u32 {
        let vol = self.vol;
        let ia = vol.index(a[0], a[1], a[2]);
        let ib = vol.index(b[0], b[1], b[2]);
        let (va, vb) = (vol.tsdf[ia], vol.tsdf[ib]);
        if va == 0.0 {
            return self.corner(ia, a);
        }
        if vb == 0.0 {
            return self.corner(ib, b);
        }
        let axis = (0..3).find(|&d| a[d] != b[d]).unwrap_or(0);
        let lower = if a[axis] < b[axis] { ia } else { ib };
        let key = lower * 3 + axis;
        if self.edge_vertex[key] == NONE {
            let t = va / (va - vb);
            let pa = vol.voxel_center(a[0], a[1], a[2]);
            let pb = vol.voxel_center(b[0], b[1], b[2]);
            let (ca, cb) = (vol.color[ia], vol.color[ib]);
            let c = [0, 1, 2].map(|i| ca[i] + t * (cb[i] - ca[i]));
            self.edge_vertex[key] = self.vertices.len() as u32;
            self.vertices.push(pa + (pb - pa) * t);
            self.colors.push(to_rgb(&c));
        }
        self.edge_vertex[key]
    }
}

fn to_rgb(c: &[f64; 3]) -> [u8; 3] {
    c.map(|x| x.round().clamp(0.0, 255.0) as u8)
}

/// Triangulates the `tsdf = 0` surface of every fully observed cube.
pub fn marching_cubes(vol: &TsdfVolume, min_weight: f64) -> Result<TriangleMesh> {
    let [nx, ny, nz] = vol.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::EmptyVolume);
    }
    let n = vol.voxel_count();
    let mut welder = Welder {
        vol,
        edge_vertex: alloc::vec![NONE; n * 3],
        corner_vertex: alloc::vec![NONE; n],
        vertices: Vec::new(),
        colors: Vec::new(),
    };
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            'cube: for i in 0..nx - 1 {
                let mut pos = [[0usize; 3]; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    let p = [i + off[0], j + off[1], k + off[2]];
                    let idx = vol.index(p[0], p[1], p[2]);
                    if !(vol.weight[idx] >= min_weight) {
                        continue 'cube;
                    }
                    if vol.tsdf[idx] < 0.0 {
                        case |= 1 << c;
                    }
                    pos[c] = p;
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_ids = [NONE; 12];
                for tri in row.chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let mut ids = [0u32; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let e = e as usize;
                        if edge_ids[e] == NONE {
                            let [a, b] = EDGES[e];
                            edge_ids[e] = welder.vertex_on_edge(pos[a], pos[b]);
                        }
                        *slot = edge_ids[e];
                    }
                    if ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2] {
                        continue;
                    }
                    // table winding faces the negative side; flip to face outward
                    triangles.push([ids[0], ids[2], ids[1]]);
                }
            }
        }
    }

    Ok(TriangleMesh { vertices: welder.vertices, colors: Some(welder.colors), triangles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_volume(n: usize, extent: f64) -> TsdfVolume {
        let h = extent / (n - 1) as f64;
        let o = Vec3::repeat(-extent / 2.0);
        TsdfVolume::from_fn(o, h, [n, n, n], |p| (p.norm() - 1.0, 1.0, [p.x * 100.0 + 128.0, 50.0, 200.0])).unwrap()
    }

    #[test]
    fn constant_field_gives_empty_mesh() {
        let vol = TsdfVolume::from_fn(Vec3::zeros(), 1.0, [4, 4, 4], |_| (1.0, 1.0, [0.0; 3])).unwrap();
        let m = marching_cubes(&vol, DEFAULT_MIN_WEIGHT).unwrap();
        assert!(m.vertices.is_empty() && m.triangles.is_empty());
    }

    #[test]
    fn rejects_flat_volume() {
        let vol = TsdfVolume::new(Vec3::zeros(), 1.0, [1, 4, 4]).unwrap();
        assert_eq!(marching_cubes(&vol, 0.0), Err(Error::EmptyVolume));
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let vol = sphere_volume(24, 2.6);
        let m = marching_cubes(&vol, DEFAULT_MIN_WEIGHT).unwrap();
        let report = m.check_watertight();
        assert!(report.is_watertight, "{report:?}");
        assert_eq!(report.connected_component_count, 1);
        assert!(m.signed_volume() > 0.0);
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.triangle(t);
            let centroid = (a + b + c) / 3.0;
            assert!(m.face_normal(t).dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn vertices_lie_on_straddling_edges() {
        let vol = sphere_volume(16, 2.6);
        let m = marching_cubes(&vol, DEFAULT_MIN_WEIGHT).unwrap();
        let h = vol.voxel_size;
        for v in &m.vertices {
            // trilinear reconstruction along the edge is the linear interpolant
            let g = (v - vol.origin) / h;
            let on_axis = (0..3).filter(|&d| (g[d] - g[d].round()).abs() < 1e-9).count();
            assert!(on_axis >= 2, "vertex {v:?} not on a grid edge");
            let axis = (0..3).find(|&d| (g[d] - g[d].round()).abs() >= 1e-9);
            if let Some(axis) = axis {
                let mut lo = g.map(|x| x.round() as usize);
                lo[axis] = g[axis].floor() as usize;
                let mut hi = lo;
                hi[axis] += 1;
                let a = vol.tsdf[vol.index(lo[0], lo[1], lo[2])];
                let b = vol.tsdf[vol.index(hi[0], hi[1], hi[2])];
                assert!((a < 0.0) != (b < 0.0));
                let t = g[axis] - lo[axis] as f64;
                assert!((a + t * (b - a)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn weight_gating_opens_the_surface() {
        let mut vol = sphere_volume(20, 2.6);
        for k in 0..vol.dims[2] {
            for j in 0..vol.dims[1] {
                for i in 0..vol.dims[0] {
                    if vol.voxel_center(i, j, k).z > 0.3 {
                        let idx = vol.index(i, j, k);
                        vol.weight[idx] = 0.0;
                    }
                }
            }
        }
        let m = marching_cubes(&vol, DEFAULT_MIN_WEIGHT).unwrap();
        let r = m.check_watertight();
        assert!(r.boundary_edge_count > 0 && !r.is_watertight);
        assert!(m.vertices.iter().all(|v| v.z <= 0.3 + vol.voxel_size));
    }

    #[test]
    fn exact_zero_corners_are_welded() {
        // plane through a layer of voxel centers
        let vol = TsdfVolume::from_fn(Vec3::zeros(), 1.0, [4, 4, 5], |p| ((p.z - 2.0) * 0.25, 1.0, [0.0; 3])).unwrap();
        let m = marching_cubes(&vol, DEFAULT_MIN_WEIGHT).unwrap();
        assert!(!m.triangles.is_empty());
        assert!(m.vertices.iter().all(|v| v.z == 2.0));
        let mut sorted: Vec<_> = m.vertices.iter().map(|v| (v.x as i64, v.y as i64)).collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), m.vertices.len());
        assert!((m.surface_area() - 9.0).abs() < 1e-12);
    }
}
