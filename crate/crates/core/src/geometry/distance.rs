//! Signed distance to a triangle mesh using angle-weighted pseudonormals for the sign.

use std::collections::HashMap;

use rayon::prelude::*;

use super::bvh::{Bvh, Feature};
use super::{TriangleMesh, Vec3};
use crate::{Error, Real, Result};

/// Precomputed signed-distance oracle for one mesh. Negative inside, positive outside.
#[derive(Clone, Debug)]
pub struct MeshDistance<T> {
    bvh: Bvh<T>,
    triangles: Vec<[u32; 3]>,
    face_normals: Vec<Vec3<T>>,
    vertex_normals: Vec<Vec3<T>>,
    edge_normals: HashMap<(u32, u32), Vec3<T>>,
}

impl<T: Real> MeshDistance<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Mesh("cannot build a distance field for an empty mesh".into()));
        }
        mesh.check_orientation()?;
        let face_normals: Vec<Vec3<T>> = (0..mesh.triangles.len())
            .map(|t| mesh.triangle_cross(t).try_normalized().unwrap_or_else(Vec3::zero))
            .collect();
        let mut vertex_normals = vec![Vec3::zero(); mesh.vertices.len()];
        let mut edge_normals: HashMap<(u32, u32), Vec3<T>> = HashMap::with_capacity(mesh.triangles.len() * 2);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let n = face_normals[t];
            let p = mesh.triangle(t);
            for k in 0..3 {
                let e1 = (p[(k + 1) % 3] - p[k]).try_normalized();
                let e2 = (p[(k + 2) % 3] - p[k]).try_normalized();
                if let (Some(e1), Some(e2)) = (e1, e2) {
                    let angle = e1.dot(e2).max(-T::one()).min(T::one()).acos();
                    vertex_normals[tri[k] as usize] += n * angle;
                }
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_normals.entry((a.min(b), a.max(b))).or_insert_with(Vec3::zero) += n;
            }
        }
        Ok(Self { bvh: Bvh::new(mesh), triangles: mesh.triangles.clone(), face_normals, vertex_normals, edge_normals })
    }

    pub fn bvh(&self) -> &Bvh<T> {
        &self.bvh
    }

    pub fn unsigned_distance(&self, p: Vec3<T>) -> T {
        self.bvh.closest_point(p).map(|c| c.distance_squared.sqrt()).unwrap_or_else(T::infinity)
    }

    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        let Some(cp) = self.bvh.closest_point(p) else {
            return T::infinity();
        };
        let dist = cp.distance_squared.sqrt();
        if dist == T::zero() {
            return dist;
        }
        let tri = self.triangles[cp.triangle];
        let normal = match cp.feature {
            Feature::Face => self.face_normals[cp.triangle],
            Feature::Vertex(k) => self.vertex_normals[tri[k as usize] as usize],
            Feature::Edge(a, b) => {
                let (i, j) = (tri[a as usize], tri[b as usize]);
                self.edge_normals[&(i.min(j), i.max(j))]
            }
        };
        if (p - cp.point).dot(normal) < T::zero() {
            -dist
        } else {
            dist
        }
    }
}

/// Signed distance from every query point to `mesh` (negative inside, positive outside).
pub fn signed_distance_transform<T: Real>(mesh: &TriangleMesh<T>, query_points: &[Vec3<T>]) -> Result<Vec<T>> {
    let field = MeshDistance::new(mesh)?;
    Ok(query_points.par_iter().map(|&p| field.signed_distance(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere() -> TriangleMesh<f64> {
        TriangleMesh::icosphere(5, 1.0, Vec3::zero())
    }

    #[test]
    fn sphere_outside_and_inside() {
        let m = sphere();
        let d = signed_distance_transform(&m, &[Vec3::new(0.0, 0.0, 2.0), Vec3::zero()]).unwrap();
        // Facet sag of a level-5 icosphere is below 1e-3.
        assert!((d[0] - 1.0).abs() < 1e-3, "{}", d[0]);
        assert!((d[1] + 1.0).abs() < 1e-3, "{}", d[1]);
    }

    #[test]
    fn on_vertex_is_zero() {
        let m = sphere();
        let d = signed_distance_transform(&m, &[m.vertices[17]]).unwrap();
        assert!(d[0].abs() < 1e-9);
    }

    #[test]
    fn sign_near_edges_and_vertices_of_a_cube() {
        let m = TriangleMesh::cuboid(Vec3::<f64>::splat(-1.0), Vec3::splat(1.0));
        let f = MeshDistance::new(&m).unwrap();
        // Points whose nearest feature is a vertex or an edge.
        assert!(f.signed_distance(Vec3::new(1.1, 1.1, 1.1)) > 0.0);
        assert!(f.signed_distance(Vec3::new(1.1, 1.1, 0.0)) > 0.0);
        assert!(f.signed_distance(Vec3::new(0.95, 0.95, 0.95)) < 0.0);
        assert!((f.signed_distance(Vec3::new(0.0, 0.0, 0.5)) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn eikonal_away_from_medial_axis() {
        let m = sphere();
        let f = MeshDistance::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..200 {
            let dir =
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64))
                    .normalized();
            let r = rng.random_range(0.5..1.5);
            let p = dir * r;
            let g = Vec3::new(
                f.signed_distance(p + Vec3::unit(0) * h) - f.signed_distance(p - Vec3::unit(0) * h),
                f.signed_distance(p + Vec3::unit(1) * h) - f.signed_distance(p - Vec3::unit(1) * h),
                f.signed_distance(p + Vec3::unit(2) * h) - f.signed_distance(p - Vec3::unit(2) * h),
            ) / (2.0 * h);
            assert!((g.norm() - 1.0).abs() < 1e-2, "|grad| = {} at {:?}", g.norm(), p);
        }
    }

    #[test]
    fn non_orientable_input_rejected() {
        let mut m = TriangleMesh::cuboid(Vec3::<f64>::zero(), Vec3::splat(1.0));
        m.triangles[3].swap(0, 1);
        assert!(MeshDistance::new(&m).is_err());
    }
}
