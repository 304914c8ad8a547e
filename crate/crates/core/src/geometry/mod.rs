//! Geometric foundations: vectors, cameras, lights, meshes, images, distance transforms and
//! mesh error metrics.

pub mod bvh;
mod camera;
pub mod decimate;
pub mod distance;
mod image;
pub mod io;
mod light;
mod linalg;
mod mesh;
pub mod metrics;

pub use self::camera::{Camera, Projection};
pub use self::decimate::{decimate, degrade_mesh};
pub use self::distance::{signed_distance_transform, MeshDistance};
pub use self::image::{BilinearSupport, Image, Mask, PsView};
pub use self::light::PointLight;
pub use self::linalg::{Mat3, Vec3};
pub use self::mesh::TriangleMesh;
pub use self::metrics::{hausdorff_report, rms_hausdorff, HausdorffReport};
