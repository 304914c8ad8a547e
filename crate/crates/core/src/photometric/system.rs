use crate::geometry::{Mat3, PsView, Vec3};
use crate::octree::{raycast, Occluder, RayOutcome};
use crate::Real;

/// Relative threshold on `Λ₂ / Λ₁` below which a voxel counts as under-constrained.
pub const RANK_THRESHOLD: f64 = 1e-4;

/// One weighted ratio equation `w b · ∇d = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEquation<T> {
    pub b: Vec3<T>,
    pub weight: T,
    pub view: usize,
    pub pair: (usize, usize),
}

/// Rank-corrected per-voxel system `B′ ∇d = q₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelSystem<T> {
    pub b_prime: Mat3<T>,
    pub q3: Vec3<T>,
    pub well_constrained: bool,
}

impl<T: Real> VoxelSystem<T> {
    /// Pure prior: `B′ = I`, `q₃ = n̂_prior`.
    pub fn prior(n_prior: Vec3<T>) -> Self {
        Self { b_prime: Mat3::identity(), q3: unit_or_z(n_prior), well_constrained: false }
    }
}

fn unit_or_z<T: Real>(v: Vec3<T>) -> Vec3<T> {
    v.try_normalized().unwrap_or_else(|| Vec3::unit(2))
}

/// `B = Σ w² b bᵀ`.
pub fn normal_matrix<T: Real>(equations: &[RatioEquation<T>]) -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for eq in equations {
        let wb = eq.b * eq.weight;
        for i in 0..3 {
            for j in i..3 {
                m[i][j] = m[i][j] + wb[i] * wb[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    Mat3::from_rows(m)
}

/// Rank correction of `B` with the default threshold.
pub fn assemble_voxel_system<T: Real>(equations: &[RatioEquation<T>], n_prior: Vec3<T>) -> VoxelSystem<T> {
    rank_corrected(normal_matrix(equations), n_prior, T::of(RANK_THRESHOLD))
}

/// Eigen-decomposes `B`, zeroes `Λ₃`, and returns `B′ = QΛ′Qᵀ + I` with `q₃` oriented along
/// `n_prior`. Falls back to the pure prior when `Λ₂ ≤ τ Λ₁`.
pub fn rank_corrected<T: Real>(b: Mat3<T>, n_prior: Vec3<T>, rank_threshold: T) -> VoxelSystem<T> {
    let (values, vectors) = b.symmetric_eigen();
    if !(values.x > T::zero()) || !(values.y > rank_threshold * values.x) {
        return VoxelSystem::prior(n_prior);
    }
    let q = [vectors.column(0), vectors.column(1), vectors.column(2)];
    let mut b_prime = Mat3::identity();
    for (lambda, v) in [(values.x, q[0]), (values.y, q[1])] {
        b_prime = b_prime.add(&Mat3::outer(v, v).scale(lambda));
    }
    let mut q3 = q[2].normalized();
    if q3.dot(n_prior) < T::zero() {
        q3 = -q3;
    }
    VoxelSystem { b_prime, q3, well_constrained: true }
}

/// Weight of pair `(h, k)` of `view` at `x`: 0 when the camera or either light is blocked by
/// `geometry`, otherwise `max(n̂ · v_q, 0)`.
pub fn visibility_weight<T: Real, O: Occluder<T> + ?Sized>(
    x: Vec3<T>,
    n_est: Vec3<T>,
    view: &PsView<T>,
    pair: (usize, usize),
    geometry: &O,
) -> T {
    let Some(n) = n_est.try_normalized() else { return T::zero() };
    let cam = view.camera.center();
    let w = n.dot(view.camera.view_direction(x)).max(T::zero());
    if w == T::zero() {
        return w;
    }
    for target in [cam, view.lights[pair.0].position, view.lights[pair.1].position] {
        if raycast(geometry, x, target) == RayOutcome::Blocked {
            return T::zero();
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, Image, PointLight, TriangleMesh};
    use crate::octree::MeshOccluder;

    fn eq(b: Vec3<f64>) -> RatioEquation<f64> {
        RatioEquation { b, weight: 1.0, view: 0, pair: (0, 1) }
    }

    #[test]
    fn axis_aligned_pair() {
        let s = assemble_voxel_system(
            &[eq(Vec3::new(1.0, 0.0, 0.0)), eq(Vec3::new(0.0, 1.0, 0.0))],
            Vec3::new(0.0, 0.0, 1.0),
        );
        assert!(s.well_constrained);
        assert!(s.b_prime.max_abs_diff(&Mat3::diagonal(Vec3::new(2.0, 2.0, 1.0))) < 1e-12);
        assert!((s.q3 - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn rank_one_falls_back_to_prior() {
        let prior = Vec3::new(0.0, 3.0, 4.0);
        let s = assemble_voxel_system(&[eq(Vec3::new(1.0, 0.0, 0.0))], prior);
        assert!(!s.well_constrained);
        assert_eq!(s.b_prime, Mat3::identity());
        assert!((s.q3 - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
        let empty = assemble_voxel_system(&[], prior);
        assert!(!empty.well_constrained);
    }

    #[test]
    fn q3_follows_prior_sign() {
        let eqs = [eq(Vec3::new(1.0, 0.0, 0.0)), eq(Vec3::new(0.0, 1.0, 0.0))];
        let down = assemble_voxel_system(&eqs, Vec3::new(0.1, 0.0, -1.0));
        assert!((down.q3 - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    fn facing_view() -> PsView<f64> {
        let cam =
            Camera::look_at(Vec3::new(0.0, 0.0, 10.0), Vec3::zero(), Vec3::new(0.0, 1.0, 0.0), 10.0, 9, 9).unwrap();
        let lights = vec![
            PointLight::aimed(Vec3::new(3.0, 0.0, 10.0), Vec3::zero(), 100.0, 1.0).unwrap(),
            PointLight::aimed(Vec3::new(-3.0, 0.0, 10.0), Vec3::zero(), 100.0, 1.0).unwrap(),
        ];
        PsView::new(cam, lights, vec![Image::new(9, 9), Image::new(9, 9)]).unwrap()
    }

    #[test]
    fn weights_for_facing_back_facing_and_shadowed() {
        let view = facing_view();
        let nothing = MeshOccluder::new(&TriangleMesh::<f64>::default(), 0.01);
        let up = Vec3::new(0.0, 0.0, 1.0);
        assert!((visibility_weight(Vec3::zero(), up, &view, (0, 1), &nothing) - 1.0).abs() < 1e-15);
        assert_eq!(visibility_weight(Vec3::zero(), -up, &view, (0, 1), &nothing), 0.0);
        // A box between the point and light 0 only.
        let blocker = TriangleMesh::cuboid(Vec3::new(1.0, -0.5, 4.0), Vec3::new(2.0, 0.5, 5.0));
        let occ = MeshOccluder::new(&blocker, 0.01);
        assert_eq!(raycast(&occ, Vec3::zero(), view.camera.center()), RayOutcome::Clear);
        assert_eq!(visibility_weight(Vec3::zero(), up, &view, (0, 1), &occ), 0.0);
    }
}
