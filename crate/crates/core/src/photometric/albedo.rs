use rayon::prelude::*;

use super::model::LightGeometry;
use crate::geometry::{PsView, TriangleMesh, Vec3};
use crate::octree::{raycast, Occluder, RayOutcome};
use crate::Real;

/// Views seeing a vertex more obliquely than this (cosine between normal and view direction)
/// are ignored: a pixel there spans too much surface for a reliable sample.
pub const MIN_VIEW_COS: f64 = 0.5;

/// Per-vertex albedo of a reconstructed mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct AlbedoEstimate<T> {
    pub albedo: Vec<T>,
    /// `false` for vertices no view and light observed; their albedo is 0.
    pub visible: Vec<bool>,
}

impl<T: Real> AlbedoEstimate<T> {
    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    /// Copies the estimate into the grey RGB albedo of `mesh`.
    pub fn apply(&self, mesh: &mut TriangleMesh<T>) {
        mesh.albedo = Some(self.albedo.iter().map(|&a| [a, a, a]).collect());
    }
}

/// Least-squares albedo `ρ = Σ w i s / Σ w s²` per vertex with shading `s = a n̂ · L̂` and view
/// weight `w = n̂ · v`, gathered over every view that sees the vertex within [`MIN_VIEW_COS`]
/// and every light that reaches it.
pub fn recover_albedo<T: Real, O: Occluder<T> + ?Sized>(
    mesh: &TriangleMesh<T>,
    views: &[PsView<T>],
    geometry: &O,
) -> AlbedoEstimate<T> {
    let normals = mesh.vertex_normals();
    let per_vertex: Vec<(T, bool)> =
        mesh.vertices.par_iter().zip(normals.par_iter()).map(|(&x, &n)| vertex_albedo(x, n, views, geometry)).collect();
    let (albedo, visible) = per_vertex.into_iter().unzip();
    AlbedoEstimate { albedo, visible }
}

fn vertex_albedo<T: Real, O: Occluder<T> + ?Sized>(
    x: Vec3<T>,
    n: Vec3<T>,
    views: &[PsView<T>],
    geometry: &O,
) -> (T, bool) {
    let Some(n) = n.try_normalized() else { return (T::zero(), false) };
    let mut num = T::zero();
    let mut den = T::zero();
    for view in views {
        let cam = view.camera.center();
        let w = n.dot(view.camera.view_direction(x));
        if w < T::of(MIN_VIEW_COS) {
            continue;
        }
        let proj = view.camera.project(x);
        if !proj.in_frustum || raycast(geometry, x, cam) == RayOutcome::Blocked {
            continue;
        }
        for (j, light) in view.lights.iter().enumerate() {
            let Ok(g) = LightGeometry::new(light, x) else { continue };
            let s = g.attenuation * n.dot(g.to_light);
            if s <= T::zero() {
                continue;
            }
            let Some(i) = view.sample_image(j, proj.u) else { continue };
            if raycast(geometry, x, light.position) == RayOutcome::Blocked {
                continue;
            }
            num = num + w * i * s;
            den = den + w * s * s;
        }
    }
    if den > T::zero() {
        (num / den, true)
    } else {
        (T::zero(), false)
    }
}
