//! Ground-truth oracle: ray-traced near-field photometric-stereo renders of known meshes and the
//! degraded initial estimates used to benchmark reconstructions.

mod benchmark;
mod carve;
mod render;
mod scene;

pub use benchmark::{
    degraded_estimate, make_benchmark, visual_hull, Benchmark, EstimateKind, InitialEstimate, HULL_RESOLUTION,
    NOISE_LEVELS, TRIANGLE_BUDGETS,
};
pub use carve::voxel_carve;
pub use render::{Quantization, Renderer, ShadowStats, SurfaceHit};
pub use scene::{
    blob_displacement, faceted_cuboid, preset_mesh, preset_scene, Albedo, Preset, RigLayout, SyntheticScene, ViewRig,
    PRESET_HALF_EXTENT, PRESET_RADIUS, PRESET_SEED,
};
