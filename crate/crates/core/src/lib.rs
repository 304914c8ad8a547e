//! Volumetric multi-view photometric stereo.
//!
//! A signed distance field stored on a narrow-band octree is recovered from calibrated
//! near-field photometric stereo images taken from several viewpoints. Image ratios give an
//! albedo-free linear constraint `b · ∇d = 0` per pair of lights; the constraints of all views
//! are fused per voxel, rank-corrected, and integrated globally by a Tikhonov-regularised least
//! squares solve. The octree is refined around the surface until voxels project below a pixel.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`,
//! which is what the pipeline and the command line use.

mod error;
pub mod geometry;
pub mod octree;
pub mod photometric;
pub mod pipeline;
mod scalar;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3f = geometry::Vec3<f64>;
pub type Mat3f = geometry::Mat3<f64>;
pub type Cameraf = geometry::Camera<f64>;
pub type PointLightf = geometry::PointLight<f64>;
pub type Meshf = geometry::TriangleMesh<f64>;
pub type Imagef = geometry::Image<f64>;
pub type PsViewf = geometry::PsView<f64>;
pub type SdfVolumef = octree::SdfVolume<f64>;
