//! Bounding volume hierarchy over the triangles of a mesh.
//!
//! Answers nearest-point, first-hit and segment-occlusion queries; used by the distance
//! transform, the error metrics, the renderer and the exact mesh occlusion test.

use super::{TriangleMesh, Vec3};
use crate::Real;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    min: Vec3<T>,
    max: Vec3<T>,
    /// Leaf: first primitive slot. Inner: index of the right child (left child is `self + 1`).
    start: u32,
    /// Zero for inner nodes.
    count: u32,
}

/// Which feature of a triangle the closest point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Edge between local corners `(a, b)`, `a < b`.
    Edge(u8, u8),
    /// Local corner index.
    Vertex(u8),
}

#[derive(Clone, Copy, Debug)]
pub struct ClosestPoint<T> {
    pub triangle: usize,
    pub point: Vec3<T>,
    pub distance_squared: T,
    pub feature: Feature,
}

#[derive(Clone, Copy, Debug)]
pub struct RayHit<T> {
    pub triangle: usize,
    pub t: T,
    /// Barycentric weights of corners 1 and 2; corner 0 gets `1 - u - v`.
    pub u: T,
    pub v: T,
}

#[derive(Clone, Debug)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<u32>,
    tris: Vec<[Vec3<T>; 3]>,
}

impl<T: Real> Bvh<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Self {
        let tris: Vec<[Vec3<T>; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let centroids: Vec<Vec3<T>> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / T::of(3.0)).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        if !tris.is_empty() {
            build(&mut nodes, &mut order, 0, tris.len(), &tris, &centroids);
        }
        Self { nodes, order, tris }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3<T>; 3] {
        self.tris[t]
    }

    pub fn closest_point(&self, p: Vec3<T>) -> Option<ClosestPoint<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestPoint<T>> = None;
        let mut best_d2 = T::infinity();
        let mut stack: Vec<(usize, T)> = Vec::with_capacity(64);
        stack.push((0, box_distance_squared(&self.nodes[0], p)));
        while let Some((idx, d2)) = stack.pop() {
            if d2 >= best_d2 {
                continue;
            }
            let node = &self.nodes[idx];
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let t = self.order[slot as usize] as usize;
                    let (point, feature) = closest_on_triangle(p, &self.tris[t]);
                    let dd = (point - p).norm_squared();
                    if dd < best_d2 {
                        best_d2 = dd;
                        best = Some(ClosestPoint { triangle: t, point, distance_squared: dd, feature });
                    }
                }
            } else {
                let (l, r) = (idx + 1, node.start as usize);
                let dl = box_distance_squared(&self.nodes[l], p);
                let dr = box_distance_squared(&self.nodes[r], p);
                // Push the farther child first so the nearer one is explored first.
                if dl < dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }

    /// Nearest intersection with `t` in `(t_min, t_max)` along `origin + t·dir`.
    pub fn first_hit(&self, origin: Vec3<T>, dir: Vec3<T>, t_min: T, t_max: T) -> Option<RayHit<T>> {
        self.traverse(origin, dir, t_min, t_max, false)
    }

    /// Whether any triangle intersects the ray for `t` in `(t_min, t_max)`.
    pub fn any_hit(&self, origin: Vec3<T>, dir: Vec3<T>, t_min: T, t_max: T) -> bool {
        self.traverse(origin, dir, t_min, t_max, true).is_some()
    }

    fn traverse(&self, origin: Vec3<T>, dir: Vec3<T>, t_min: T, t_max: T, any: bool) -> Option<RayHit<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(T::one() / dir.x, T::one() / dir.y, T::one() / dir.z);
        let mut best: Option<RayHit<T>> = None;
        let mut limit = t_max;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if !slab_hit(node, origin, inv, t_min, limit) {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let t = self.order[slot as usize] as usize;
                    if let Some((tt, u, v)) = intersect_triangle(origin, dir, &self.tris[t]) {
                        if tt > t_min && tt < limit {
                            limit = tt;
                            best = Some(RayHit { triangle: t, t: tt, u, v });
                            if any {
                                return best;
                            }
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(idx + 1);
            }
        }
        best
    }
}

fn build<T: Real>(
    nodes: &mut Vec<Node<T>>,
    order: &mut [u32],
    start: usize,
    end: usize,
    tris: &[[Vec3<T>; 3]],
    centroids: &[Vec3<T>],
) -> usize {
    let slice = &mut order[start..end];
    let mut min = Vec3::splat(T::infinity());
    let mut max = Vec3::splat(T::neg_infinity());
    let mut cmin = min;
    let mut cmax = max;
    for &t in slice.iter() {
        for v in &tris[t as usize] {
            min = min.min(*v);
            max = max.max(*v);
        }
        cmin = cmin.min(centroids[t as usize]);
        cmax = cmax.max(centroids[t as usize]);
    }
    let idx = nodes.len();
    nodes.push(Node { min, max, start: start as u32, count: (end - start) as u32 });
    if end - start <= LEAF_SIZE {
        return idx;
    }
    let axis = (cmax - cmin).argmax();
    let mid = (end - start) / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    build(nodes, order, start, start + mid, tris, centroids);
    let right = build(nodes, order, start + mid, end, tris, centroids);
    nodes[idx].start = right as u32;
    nodes[idx].count = 0;
    idx
}

fn box_distance_squared<T: Real>(node: &Node<T>, p: Vec3<T>) -> T {
    let mut d2 = T::zero();
    for a in 0..3 {
        let v = if p[a] < node.min[a] {
            node.min[a] - p[a]
        } else if p[a] > node.max[a] {
            p[a] - node.max[a]
        } else {
            T::zero()
        };
        d2 = d2 + v * v;
    }
    d2
}

fn slab_hit<T: Real>(node: &Node<T>, origin: Vec3<T>, inv: Vec3<T>, t_min: T, t_max: T) -> bool {
    let mut lo = t_min;
    let mut hi = t_max;
    for a in 0..3 {
        let mut t0 = (node.min[a] - origin[a]) * inv[a];
        let mut t1 = (node.max[a] - origin[a]) * inv[a];
        if t0.is_nan() || t1.is_nan() {
            // Ray parallel to the slab and starting on its boundary plane.
            if origin[a] < node.min[a] || origin[a] > node.max[a] {
                return false;
            }
            continue;
        }
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        lo = lo.max(t0);
        hi = hi.min(t1);
        if lo > hi {
            return false;
        }
    }
    true
}

/// Möller–Trumbore, two-sided. Returns `(t, u, v)`.
pub fn intersect_triangle<T: Real>(origin: Vec3<T>, dir: Vec3<T>, tri: &[Vec3<T>; 3]) -> Option<(T, T, T)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(e2);
    let det = e1.dot(pvec);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= T::epsilon() * scale {
        return None;
    }
    let inv_det = T::one() / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(pvec) * inv_det;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = dir.dot(qvec) * inv_det;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    Some((e2.dot(qvec) * inv_det, u, v))
}

/// Closest point on a triangle and the feature it lies on (Voronoi region classification).
pub fn closest_on_triangle<T: Real>(p: Vec3<T>, tri: &[Vec3<T>; 3]) -> (Vec3<T>, Feature) {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return (a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= T::zero() && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= T::zero() && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1, 2));
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}
