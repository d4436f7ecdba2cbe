//! Geometry, matching, depth fusion, surface extraction and evaluation
//! for reconstructing cavity surfaces from monocular depth estimates.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command
//! line live in the `endorecon` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bvh;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod marching_cubes;
pub mod matching;
mod mc_table;
pub mod mesh;
pub mod phantom;
pub mod registration;
pub mod section;
pub mod seed;
pub mod tsdf;

pub use bvh::TriangleBvh;
pub use depth::{DepthFrame, SparsePointCloud};
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, RigidPose, SimilarityTransform, Vec2, Vec3};
pub use marching_cubes::marching_cubes;
pub use mesh::{Aabb, TriangleMesh, WatertightReport};
pub use registration::{point_to_mesh, register_sim3, DistanceStats, IcpConfig, Registration};
pub use section::{cross_section, cross_section_series, CrossSection, SectionSeries};
pub use tsdf::{fuse_sequence, FusionConfig, TsdfVolume};
