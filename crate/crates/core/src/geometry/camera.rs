use serde::{Deserialize, Serialize};

use super::{Mat3, Vec3};
use crate::{Error, Real, Result};

/// Pinhole camera. Pixel `(i, j)` has its centre at image coordinate `(i, j)`; the camera frame
/// has x to the right, y down and z along the optical axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera<T> {
    /// World to camera rotation.
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
    /// Focal length in pixels.
    pub focal_length: T,
    pub principal_point: [T; 2],
    pub width: u32,
    pub height: u32,
}

/// Result of projecting a world point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    pub u: [T; 2],
    pub depth: T,
    /// False when the point is behind the camera or outside `[0,width)×[0,height)`.
    pub in_frustum: bool,
}

impl<T: Real> Camera<T> {
    pub fn new(
        rotation: Mat3<T>,
        translation: Vec3<T>,
        focal_length: T,
        principal_point: [T; 2],
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let rtr = rotation.mul_mat(&rotation.transpose());
        let tol = T::of(1e-9);
        if rtr.max_abs_diff(&Mat3::identity()) > tol || (rotation.determinant() - T::one()).abs() > tol {
            return Err(Error::InvalidInput("camera rotation must be orthonormal with determinant +1".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("camera resolution must be positive".into()));
        }
        if !(focal_length > T::zero()) || !translation.is_finite() {
            return Err(Error::InvalidInput("camera focal length must be positive and finite".into()));
        }
        Ok(Self { rotation, translation, focal_length, principal_point, width, height })
    }

    /// Camera at `eye` looking at `target`. `up` picks the roll; image y points away from it.
    pub fn look_at(
        eye: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        focal_length: T,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalized()
            .ok_or_else(|| Error::InvalidInput("look_at: eye coincides with target".into()))?;
        let right = forward
            .cross(up)
            .try_normalized()
            .ok_or_else(|| Error::InvalidInput("look_at: up parallel to viewing direction".into()))?;
        let down = forward.cross(right);
        let rotation = Mat3::from_row_vectors(right, down, forward);
        let translation = -rotation.mul_vec(eye);
        let half = T::of(0.5);
        let pp = [(T::of(width as f64) - T::one()) * half, (T::of(height as f64) - T::one()) * half];
        Self::new(rotation, translation, focal_length, pp, width, height)
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    pub fn to_camera(&self, x: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(x) + self.translation
    }

    pub fn project(&self, x: Vec3<T>) -> Projection<T> {
        let c = self.to_camera(x);
        let depth = c.z;
        if !(depth > T::zero()) {
            return Projection { u: [T::nan(), T::nan()], depth, in_frustum: false };
        }
        let u = [
            self.focal_length * c.x / depth + self.principal_point[0],
            self.focal_length * c.y / depth + self.principal_point[1],
        ];
        let in_frustum = u[0] >= T::zero()
            && u[1] >= T::zero()
            && u[0] < T::of(self.width as f64)
            && u[1] < T::of(self.height as f64);
        Projection { u, depth, in_frustum }
    }

    /// Inverse of [`Camera::project`]: the world point at image coordinate `u` and camera depth.
    pub fn unproject(&self, u: [T; 2], depth: T) -> Vec3<T> {
        let c = Vec3::new(
            (u[0] - self.principal_point[0]) * depth / self.focal_length,
            (u[1] - self.principal_point[1]) * depth / self.focal_length,
            depth,
        );
        self.rotation.transpose().mul_vec(c - self.translation)
    }

    /// Unit world-space direction of the viewing ray through image coordinate `u`.
    pub fn ray_direction(&self, u: [T; 2]) -> Vec3<T> {
        let c = Vec3::new(
            (u[0] - self.principal_point[0]) / self.focal_length,
            (u[1] - self.principal_point[1]) / self.focal_length,
            T::one(),
        );
        self.rotation.transpose().mul_vec(c).normalized()
    }

    /// Unit vector from `x` toward the camera centre.
    pub fn view_direction(&self, x: Vec3<T>) -> Vec3<T> {
        (self.center() - x).normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_camera(f: f64, pp: [f64; 2]) -> Camera<f64> {
        Camera::new(Mat3::identity(), Vec3::zero(), f, pp, 100, 100).unwrap()
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let cam = identity_camera(1.0, [0.0, 0.0]);
        let p = cam.project(Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(p.u, [0.0, 0.0]);
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn similar_triangles() {
        let cam = identity_camera(100.0, [50.0, 50.0]);
        let p = cam.project(Vec3::new(0.1, 0.0, 1.0));
        assert!((p.u[0] - 60.0).abs() < 1e-12 && (p.u[1] - 50.0).abs() < 1e-12);
        assert_eq!(p.depth, 1.0);
        assert!(p.in_frustum);
    }

    #[test]
    fn behind_camera_is_out_of_frustum() {
        let cam = identity_camera(100.0, [50.0, 50.0]);
        let p = cam.project(Vec3::new(0.0, 0.0, -1.0));
        assert!(!p.in_frustum);
        assert_eq!(p.depth, -1.0);
    }

    #[test]
    fn rejects_reflection() {
        let r = Mat3::diagonal(Vec3::new(1.0, 1.0, -1.0));
        assert!(Camera::new(r, Vec3::zero(), 1.0, [0.0, 0.0], 10, 10).is_err());
        assert!(Camera::new(Mat3::identity(), Vec3::zero(), 1.0, [0.0, 0.0], 0, 10).is_err());
    }

    #[test]
    fn look_at_centers_target() {
        let cam =
            Camera::look_at(Vec3::new(10.0f64, 5.0, -30.0), Vec3::zero(), Vec3::new(0.0, 1.0, 0.0), 400.0, 601, 401)
                .unwrap();
        let p = cam.project(Vec3::zero());
        assert!((p.u[0] - 300.0).abs() < 1e-9 && (p.u[1] - 200.0).abs() < 1e-9);
        assert!((cam.center() - Vec3::new(10.0, 5.0, -30.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_round_trip(x in -20.0..20.0f64, y in -20.0..20.0f64, z in -20.0..20.0f64,
                                 ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in 0.1..1.0f64, ang in 0.0..3.0f64) {
            let rot = Mat3::rotation(Vec3::new(ax, ay, az), ang);
            let cam = Camera::new(rot, Vec3::new(0.5, -1.0, 60.0), 500.0, [320.0, 240.0], 640, 480).unwrap();
            let p = Vec3::new(x, y, z);
            let proj = cam.project(p);
            prop_assume!(proj.depth > 0.0);
            let back = cam.unproject(proj.u, proj.depth);
            prop_assert!((back - p).norm() < 1e-9);
        }
    }
}
