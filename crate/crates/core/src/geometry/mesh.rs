use std::collections::HashMap;

use rand::Rng;

use super::Vec3;
use crate::{Error, Real, Result};

/// Indexed triangle mesh with optional per-vertex albedo.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    /// RGB albedo per vertex, each channel in `[0, 1]`.
    pub albedo: Option<Vec<[T; 3]>>,
}

impl<T: Real> TriangleMesh<T> {
    /// Validates indices and finiteness, then drops degenerate triangles.
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::Mesh(format!("non-finite vertex {v:?}")));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Mesh(format!("triangle {t:?} indexes past {n} vertices")));
        }
        let mut mesh = Self { vertices, triangles, albedo: None };
        mesh.remove_degenerate();
        Ok(mesh)
    }

    pub fn with_albedo(mut self, albedo: Vec<[T; 3]>) -> Result<Self> {
        if albedo.len() != self.vertices.len() {
            return Err(Error::Mesh("albedo length must match vertex count".into()));
        }
        self.albedo = Some(albedo);
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalised normal, twice the triangle area in length.
    pub fn triangle_cross(&self, t: usize) -> Vec3<T> {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, t: usize) -> T {
        self.triangle_cross(t).norm() * T::of(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn signed_volume(&self) -> T {
        let sixth = T::one() / T::of(6.0);
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(b.cross(c)) * sixth
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    /// Removes zero-area triangles and triangles with repeated indices.
    pub fn remove_degenerate(&mut self) -> usize {
        let before = self.triangles.len();
        let verts = &self.vertices;
        self.triangles.retain(|&[a, b, c]| {
            if a == b || b == c || a == c {
                return false;
            }
            let (pa, pb, pc) = (verts[a as usize], verts[b as usize], verts[c as usize]);
            let cross = (pb - pa).cross(pc - pa);
            let scale = (pb - pa).norm_squared().max((pc - pa).norm_squared());
            cross.norm() > T::tiny() * scale
        });
        before - self.triangles.len()
    }

    /// Drops vertices no triangle references, remapping indices.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut albedo = self.albedo.as_ref().map(|_| Vec::new());
        for tri in &mut self.triangles {
            for i in tri.iter_mut() {
                let old = *i as usize;
                if remap[old] == u32::MAX {
                    remap[old] = vertices.len() as u32;
                    vertices.push(self.vertices[old]);
                    if let (Some(dst), Some(src)) = (albedo.as_mut(), self.albedo.as_ref()) {
                        dst.push(src[old]);
                    }
                }
                *i = remap[old];
            }
        }
        self.vertices = vertices;
        self.albedo = albedo;
    }

    /// Checks that no directed edge is used twice, which would make the mesh non-orientable or
    /// inconsistently wound.
    pub fn check_orientation(&self) -> Result<()> {
        let mut seen: HashMap<(u32, u32), usize> = HashMap::with_capacity(self.triangles.len() * 3);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if let Some(prev) = seen.insert(e, t) {
                    return Err(Error::Mesh(format!(
                        "triangles {prev} and {t} share directed edge {e:?}: inconsistent orientation"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of edges used by exactly one triangle.
    pub fn boundary_edge_count(&self) -> usize {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c == 1).count()
    }

    /// Flips the winding if the enclosed volume is negative.
    pub fn orient_outward(&mut self) {
        if self.signed_volume() < T::zero() {
            self.flip();
        }
    }

    pub fn flip(&mut self) {
        for tri in &mut self.triangles {
            tri.swap(1, 2);
        }
    }

    /// Area-weighted vertex normals (unit length; zero for isolated vertices).
    pub fn vertex_normals(&self) -> Vec<Vec3<T>> {
        let mut normals = vec![Vec3::zero(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.triangle_cross(t);
            for &i in tri {
                normals[i as usize] += n;
            }
        }
        normals.into_iter().map(|n| n.try_normalized().unwrap_or_else(Vec3::zero)).collect()
    }

    /// Mean length over unique edges.
    pub fn average_edge_length(&self) -> T {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        if edges.is_empty() {
            return T::zero();
        }
        let total: T = edges.iter().map(|&(a, b)| self.vertices[a as usize].distance(self.vertices[b as usize])).sum();
        total / T::of(edges.len() as f64)
    }

    /// Concatenates two meshes.
    pub fn merged(&self, other: &Self) -> Self {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        let albedo = match (&self.albedo, &other.albedo) {
            (Some(a), Some(b)) => Some(a.iter().chain(b.iter()).copied().collect()),
            _ => None,
        };
        Self { vertices, triangles, albedo }
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        Self { vertices: self.vertices.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// `count` points distributed uniformly by area.
    pub fn sample_surface<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec3<T>> {
        let mut cdf = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0f64;
        for t in 0..self.triangles.len() {
            acc += self.triangle_area(t).as_f64();
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Vec::new();
        }
        (0..count)
            .map(|_| {
                let r = rng.random::<f64>() * acc;
                let t = cdf.partition_point(|&c| c < r).min(cdf.len() - 1);
                let [a, b, c] = self.triangle(t);
                let (mut s1, mut s2) = (rng.random::<f64>(), rng.random::<f64>());
                if s1 + s2 > 1.0 {
                    s1 = 1.0 - s1;
                    s2 = 1.0 - s2;
                }
                a + (b - a) * T::of(s1) + (c - a) * T::of(s2)
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
            albedo: self.albedo.as_ref().map(|a| {
                a.iter().map(|c| [U::of(c[0].as_f64()), U::of(c[1].as_f64()), U::of(c[2].as_f64())]).collect()
            }),
        }
    }

    /// Geodesic sphere from a subdivided icosahedron; `subdivisions` 5 gives 20480 triangles.
    pub fn icosphere(subdivisions: u32, radius: T, center: Vec3<T>) -> Self {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let mut verts: Vec<[f64; 3]> = vec![
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut tris: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let normalize = |v: [f64; 3]| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        verts.iter_mut().for_each(|v| *v = normalize(*v));
        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(tris.len() * 4);
            let mut mid = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
                *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (pa, pb) = (verts[a as usize], verts[b as usize]);
                    verts.push(normalize([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0]));
                    (verts.len() - 1) as u32
                })
            };
            for &[a, b, c] in &tris {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let vertices = verts.into_iter().map(|v| center + Vec3::from_f64(v) * radius).collect();
        Self { vertices, triangles: tris, albedo: None }
    }

    /// Axis-aligned box, outward oriented, 12 triangles.
    pub fn cuboid(min: Vec3<T>, max: Vec3<T>) -> Self {
        let c = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        let vertices = (0..8).map(c).collect();
        let triangles = vec![
            [0, 2, 3],
            [0, 3, 1],
            [4, 5, 7],
            [4, 7, 6],
            [0, 1, 5],
            [0, 5, 4],
            [2, 6, 7],
            [2, 7, 3],
            [0, 4, 6],
            [0, 6, 2],
            [1, 3, 7],
            [1, 7, 5],
        ];
        Self { vertices, triangles, albedo: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_is_closed_and_outward() {
        let m = TriangleMesh::<f64>::icosphere(3, 2.0, Vec3::zero());
        assert_eq!(m.triangles.len(), 20 * 64);
        assert_eq!(m.boundary_edge_count(), 0);
        m.check_orientation().unwrap();
        assert!(m.signed_volume() > 0.0);
        for v in &m.vertices {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cuboid_volume() {
        let m = TriangleMesh::cuboid(Vec3::new(0.0f64, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0));
        assert!((m.signed_volume() - 6.0).abs() < 1e-12);
        m.check_orientation().unwrap();
        assert_eq!(m.boundary_edge_count(), 0);
    }

    #[test]
    fn rejects_bad_indices_and_drops_degenerates() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn detects_inconsistent_winding() {
        let mut m = TriangleMesh::cuboid(Vec3::<f64>::zero(), Vec3::splat(1.0));
        m.triangles[0].swap(1, 2);
        assert!(m.check_orientation().is_err());
    }

    #[test]
    fn orient_outward_flips_inverted() {
        let mut m = TriangleMesh::<f64>::icosphere(1, 1.0, Vec3::zero());
        m.flip();
        assert!(m.signed_volume() < 0.0);
        m.orient_outward();
        assert!(m.signed_volume() > 0.0);
    }
}
