//! Segment occlusion queries against the SDF volume or an exact triangle mesh.

use std::cmp::Ordering;

use super::SdfVolume;
use crate::geometry::bvh::Bvh;
use crate::geometry::{TriangleMesh, Vec3};
use crate::Real;

/// End trim of every segment, in finest voxel edges.
pub const RAY_EPSILON_VOXELS: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayOutcome {
    Clear,
    Blocked,
}

/// Surface estimate that can block line segments.
pub trait Occluder<T: Real>: Sync {
    /// Whether the segment `(a + ε, b − ε)` crosses the surface. Implementations are symmetric in
    /// their endpoints.
    fn blocks(&self, a: Vec3<T>, b: Vec3<T>) -> bool;
}

/// Tests the segment from `origin` to `target` against `geometry`.
pub fn raycast<T: Real, O: Occluder<T> + ?Sized>(geometry: &O, origin: Vec3<T>, target: Vec3<T>) -> RayOutcome {
    if geometry.blocks(origin, target) {
        RayOutcome::Blocked
    } else {
        RayOutcome::Clear
    }
}

/// Orders endpoints lexicographically so that both query directions run the same computation.
fn canonical<T: Real>(a: Vec3<T>, b: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let key = |v: Vec3<T>| [v.x, v.y, v.z];
    match key(a).partial_cmp(&key(b)) {
        Some(Ordering::Greater) => (b, a),
        _ => (a, b),
    }
}

/// Exact segment test against a triangle mesh.
#[derive(Clone, Debug)]
pub struct MeshOccluder<T> {
    bvh: Bvh<T>,
    epsilon: T,
}

impl<T: Real> MeshOccluder<T> {
    pub fn new(mesh: &TriangleMesh<T>, epsilon: T) -> Self {
        Self { bvh: Bvh::new(mesh), epsilon }
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }
}

impl<T: Real> Occluder<T> for MeshOccluder<T> {
    fn blocks(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let (a, b) = canonical(a, b);
        let delta = b - a;
        let len = delta.norm();
        if len <= self.epsilon * T::of(2.0) {
            return false;
        }
        self.bvh.any_hit(a, delta / len, self.epsilon, len - self.epsilon)
    }
}

impl<T: Real> SdfVolume<T> {
    pub fn ray_epsilon(&self) -> T {
        T::of(RAY_EPSILON_VOXELS) * self.finest_edge()
    }

    /// Interpolated value at `p` and a lower bound on the distance from `p` to the zero set
    /// implied by the covering leaf. Points outside the bounds are treated as outside.
    fn probe(&self, p: Vec3<T>) -> (bool, T) {
        let b = self.bounds();
        if !b.contains(p) {
            return (true, T::zero());
        }
        let h = self.finest_edge();
        let leaf = match self.dense_lattice() {
            Some(lat) => lat.leaf[lat.index(b.cell_of(self.level(), p))] as usize,
            None => self.locate(p),
        };
        let node = &self.nodes()[leaf];
        // Stale values outside the band and the interpolant's deviation from a true distance are
        // absorbed by one finest edge of margin.
        let safe = node.value.abs() - (p - self.node_center(leaf)).norm() - h;
        if safe > h {
            (node.value > T::zero(), safe)
        } else {
            (self.interpolate(p) > T::zero(), safe)
        }
    }
}

impl<T: Real> Occluder<T> for SdfVolume<T> {
    /// Samples the sign of the interpolated field at half finest-edge steps, striding over
    /// regions the covering leaves prove surface-free.
    fn blocks(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let (a, b) = canonical(a, b);
        let delta = b - a;
        let len = delta.norm();
        let eps = self.ray_epsilon();
        if len <= eps * T::of(2.0) {
            return false;
        }
        let dir = delta / len;
        let (t_start, t_end) = (eps, len - eps);
        let outside_start = self.probe(a + dir * t_start).0;
        if self.probe(a + dir * t_end).0 != outside_start {
            return true;
        }
        // Clip to the bounds; outside them the field is positive.
        let bounds = self.bounds();
        let (lo, hi) = (bounds.min, bounds.max());
        let (mut t0, mut t1) = (t_start, t_end);
        for axis in 0..3 {
            if dir[axis] == T::zero() {
                if a[axis] < lo[axis] || a[axis] > hi[axis] {
                    return false;
                }
                continue;
            }
            let inv = T::one() / dir[axis];
            let (mut ta, mut tb) = ((lo[axis] - a[axis]) * inv, (hi[axis] - a[axis]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        if t0 > t1 {
            return false;
        }
        let min_step = self.finest_edge() * T::of(0.5);
        let mut t = t0;
        loop {
            let (outside, safe) = self.probe(a + dir * t);
            if outside != outside_start {
                return true;
            }
            if t >= t1 {
                return false;
            }
            t = (t + min_step.max(safe)).min(t1);
        }
    }
}
