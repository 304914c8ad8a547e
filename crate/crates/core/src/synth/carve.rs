use rayon::prelude::*;

use crate::geometry::{Camera, Mask, TriangleMesh, Vec3};
use crate::octree::{marching_cubes_grid, Cube};
use crate::{Error, Real, Result};

/// Visual hull by voxel carving: a cell of a `resolution³` grid over `bounds` survives iff its
/// centre projects inside every silhouette. The surface is the 0.5 level of the occupancy,
/// closed against the bounds.
pub fn voxel_carve<T: Real>(
    views: &[(Camera<T>, Mask)],
    bounds: Cube<T>,
    resolution: usize,
) -> Result<TriangleMesh<T>> {
    if views.is_empty() {
        return Err(Error::InvalidInput("voxel carving needs at least one silhouette".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("voxel carving resolution must be at least 2".into()));
    }
    for (cam, mask) in views {
        if (mask.width, mask.height) != (cam.width, cam.height) {
            return Err(Error::InvalidInput("silhouette size differs from the camera resolution".into()));
        }
    }
    let h = bounds.size / T::of(resolution as f64);
    // One empty layer of padding on every side keeps the surface closed where the hull meets
    // the bounds.
    let n = resolution + 2;
    let origin = bounds.min + Vec3::splat(h * T::of(0.5) - h);
    let values: Vec<T> = (0..n * n * n)
        .into_par_iter()
        .map(|i| {
            let c = [i % n, (i / n) % n, i / (n * n)];
            if c.iter().any(|&k| k == 0 || k == n - 1) {
                return T::of(0.5);
            }
            let p = origin + Vec3::new(T::of(c[0] as f64), T::of(c[1] as f64), T::of(c[2] as f64)) * h;
            let inside = views.iter().all(|(cam, mask)| {
                let proj = cam.project(p);
                if !proj.in_frustum {
                    return false;
                }
                let x = proj.u[0].round().to_u32();
                let y = proj.u[1].round().to_u32();
                match (x, y) {
                    (Some(x), Some(y)) if x < cam.width && y < cam.height => mask.get(x, y),
                    _ => false,
                }
            });
            if inside {
                T::of(-0.5)
            } else {
                T::of(0.5)
            }
        })
        .collect();
    let mesh = marching_cubes_grid([n, n, n], origin, h, &values);
    if mesh.triangles.is_empty() {
        return Err(Error::Mesh("visual hull is empty: no voxel projects inside every silhouette".into()));
    }
    Ok(mesh)
}
