//! Compact neural double height fields (CN-DHF).
//!
//! A closed shape is decomposed into a handful of double-height-field axes,
//! each axis gets a small sine-activated MLP that predicts the lower and upper
//! surface heights over the plane orthogonal to the axis, and the shape is
//! recovered as the intersection of the per-axis occupancies.
//!
//! Module map:
//! - [`mesh`], [`bvh`]: triangle meshes, OBJ/STL IO, normalization, surface
//!   sampling and watertight ray casting.
//! - [`axis_select`]: visibility analysis and greedy axis selection.
//! - [`raster`]: ground-truth height rasters, the numerical Laplacian and
//!   height-field mesh export.
//! - [`siren`], [`train`]: the per-axis neural field, its loss and optimizer.
//! - [`occupancy`]: per-axis and intersected occupancy, ray marching.
//! - [`reconstruct`]: voxelization and marching cubes.
//! - [`metrics`]: ray-stabbing samples, Chamfer-L1, Hausdorff and IoU.
//! - [`pipeline`]: the decompose/bake/train/reconstruct/eval/stats stages.

pub mod axis_select;
pub mod bvh;
mod error;
pub mod fastmath;
pub mod fixtures;
pub mod format;
pub mod mesh;
pub mod metrics;
pub mod occupancy;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod reconstruct;
pub mod rotation;
pub mod siren;
pub mod train;

pub use error::{Error, Result};
pub use mesh::{TriangleMesh, Vec3};

/// Derives a stage-specific seed from a global seed and a stage label.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
