//! Narrow-band octree holding the signed distance field: construction from a mesh, band
//! subdivision, neighbour queries, segment occlusion tests and isosurface extraction.

pub mod dump;
mod marching;
pub mod raycast;
mod tables;
mod tree;

pub use self::dump::{read_volume, write_volume, VolumeDump};
pub use self::marching::{extract_mesh, marching_cubes_grid};
pub use self::raycast::{raycast, MeshOccluder, Occluder, RayOutcome};
pub use self::tree::{
    build_initial_volume, pixel_footprint, refinement_complete, Axis, Cube, Direction, LeafPayload, OctreeNode,
    SdfVolume, BAND_HALF_WIDTH, MAX_LEVEL,
};
