//! Near-field point-light image formation, image-ratio equations and per-voxel rank correction.

mod albedo;
mod model;
mod system;

pub use albedo::{recover_albedo, AlbedoEstimate, MIN_VIEW_COS};
pub use model::{
    all_pairs, attenuation, ratio_coefficients, ratio_vector, ring_pairs, saturation_mask, shade, LightGeometry,
    SATURATION_HIGH, SATURATION_LOW,
};
pub use system::{
    assemble_voxel_system, normal_matrix, rank_corrected, visibility_weight, RatioEquation, VoxelSystem, RANK_THRESHOLD,
};
