//! Sampled mesh-to-mesh distances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::TriangleMesh;
use crate::{Error, Real, Result};

/// Seed used for surface sampling so that metrics are reproducible.
pub const SAMPLING_SEED: u64 = 0x5eed_0f_d157;

/// One-sided distance statistics from samples on a source mesh to a target surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub rms: f64,
    pub max: f64,
    pub mean: f64,
}

/// Both directions of the sampled Hausdorff comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    pub samples: usize,
    /// Samples on the reconstruction measured against the ground truth.
    pub forward: OneSided,
    /// Samples on the ground truth measured against the reconstruction.
    pub backward: OneSided,
}

/// RMS of point-to-surface distances from `sample_count` area-uniform samples on
/// `reconstructed` to the nearest point on `ground_truth`.
pub fn rms_hausdorff<T: Real>(
    reconstructed: &TriangleMesh<T>,
    ground_truth: &TriangleMesh<T>,
    sample_count: usize,
) -> Result<T> {
    Ok(T::of(one_sided(reconstructed, ground_truth, sample_count, SAMPLING_SEED)?.rms))
}

pub fn one_sided<T: Real>(
    source: &TriangleMesh<T>,
    target: &TriangleMesh<T>,
    sample_count: usize,
    seed: u64,
) -> Result<OneSided> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Mesh("Hausdorff distance needs two non-empty meshes".into()));
    }
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = source.sample_surface(sample_count, &mut rng);
    let bvh = Bvh::new(target);
    let d2: Vec<f64> = samples
        .par_iter()
        .map(|&p| bvh.closest_point(p).map(|c| c.distance_squared.as_f64()).unwrap_or(f64::INFINITY))
        .collect();
    let n = d2.len() as f64;
    Ok(OneSided {
        rms: (d2.iter().sum::<f64>() / n).sqrt(),
        max: d2.iter().cloned().fold(0.0, f64::max).sqrt(),
        mean: d2.iter().map(|v| v.sqrt()).sum::<f64>() / n,
    })
}

pub fn hausdorff_report<T: Real>(
    reconstructed: &TriangleMesh<T>,
    ground_truth: &TriangleMesh<T>,
    sample_count: usize,
) -> Result<HausdorffReport> {
    Ok(HausdorffReport {
        samples: sample_count,
        forward: one_sided(reconstructed, ground_truth, sample_count, SAMPLING_SEED)?,
        backward: one_sided(ground_truth, reconstructed, sample_count, SAMPLING_SEED)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn self_distance_is_zero() {
        let m = TriangleMesh::<f64>::icosphere(3, 1.0, Vec3::zero());
        assert!(rms_hausdorff(&m, &m, 2000).unwrap() < 1e-9);
    }

    #[test]
    fn concentric_spheres() {
        let a = TriangleMesh::<f64>::icosphere(6, 1.1, Vec3::zero());
        let b = TriangleMesh::<f64>::icosphere(6, 1.0, Vec3::zero());
        let d = rms_hausdorff(&a, &b, 5000).unwrap();
        assert!((d - 0.1).abs() < 1e-3, "{d}");
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let m = TriangleMesh::<f64>::icosphere(1, 1.0, Vec3::zero());
        assert!(rms_hausdorff(&TriangleMesh::default(), &m, 10).is_err());
        assert!(rms_hausdorff(&m, &TriangleMesh::default(), 10).is_err());
    }

    #[test]
    fn monotone_under_offset() {
        let gt = TriangleMesh::<f64>::icosphere(4, 1.0, Vec3::zero());
        let mut last = 0.0;
        for r in [1.01, 1.05, 1.2] {
            let d = rms_hausdorff(&TriangleMesh::icosphere(4, r, Vec3::zero()), &gt, 1000).unwrap();
            assert!(d >= 0.0 && d > last);
            last = d;
        }
    }
}
