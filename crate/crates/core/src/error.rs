use alloc::string::String;

/// Errors produced by the reconstruction and evaluation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point has non-positive depth")]
    NonPositiveDepth,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("descriptor channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("buffer of length {found} does not match expected length {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("query pixel lies outside the image")]
    OutOfBounds,
    #[error("no landmark of the cloud is visible in the frame")]
    NoVisiblePoints,
    #[error("scale factor must be positive and finite")]
    NonPositiveScale,
    #[error("pose is not finite")]
    InvalidPose,
    #[error("volume has too few voxels")]
    EmptyVolume,
    #[error("no valid depth sample in any frame")]
    NoValidDepths,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange { index: u32, vertex_count: usize },
    #[error("too few points: need at least {needed}, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("plane does not intersect the mesh")]
    NoIntersection,
    #[error("intersection contour could not be closed")]
    OpenContour,
    #[error("every cross-section failed ({skipped} poses skipped)")]
    AllSectionsFailed { skipped: usize },
    #[error("invalid phantom specification: {0}")]
    InvalidSpec(&'static str),
    #[error("no surface point is visible from two or more poses")]
    NoVisibleSurface,
    #[error("mesh is degenerate")]
    DegenerateMesh,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
