//! Small fixed-size vector and matrix types.

use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    /// Unit vector along `axis` (0, 1, 2).
    #[inline]
    pub fn unit(axis: usize) -> Self {
        let mut v = Self::zero();
        v[axis] = T::one();
        v
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::of(v[0]), T::of(v[1]), T::of(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(U::of(self.x.as_f64()), U::of(self.y.as_f64()), U::of(self.z.as_f64()))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Divides by the norm. The caller guarantees a non-zero vector.
    #[inline]
    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    #[inline]
    pub fn try_normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::min_positive_value() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn mul_elem(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    #[inline]
    pub fn max_component(self) -> T {
        self.x.max(self.y).max(self.z)
    }

    /// Index of the largest component.
    pub fn argmax(self) -> usize {
        if self.x >= self.y && self.x >= self.z {
            0
        } else if self.y >= self.z {
            1
        } else {
            2
        }
    }

    #[inline]
    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self) * t
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Default for Mat3<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Mat3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_row_vectors(r0: Vec3<T>, r1: Vec3<T>, r2: Vec3<T>) -> Self {
        Self { m: [[r0.x, r0.y, r0.z], [r1.x, r1.y, r1.z], [r2.x, r2.y, r2.z]] }
    }

    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self::from_row_vectors(c0, c1, c2).transpose()
    }

    pub fn zero() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diagonal(Vec3::splat(T::one()))
    }

    pub fn diagonal(d: Vec3<T>) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            r.m[i][i] = d[i];
        }
        r
    }

    /// `a bᵀ`
    pub fn outer(a: Vec3<T>, b: Vec3<T>) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = a[i] * b[j];
            }
        }
        r
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::new(self.m[i][0], self.m[i][1], self.m[i][2])
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[j][i];
            }
        }
        r
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        r
    }

    pub fn scale(&self, s: T) -> Self {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|v| *v = *v * s);
        r
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = r.m[i][j] + o.m[i][j];
            }
        }
        r
    }

    pub fn frobenius_norm(&self) -> T {
        self.m.iter().flatten().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        let mut d = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.max_abs_diff(&self.transpose()) <= tol
    }

    /// Solves `self · x = b`, returning `None` when the matrix is numerically singular.
    pub fn solve(&self, b: Vec3<T>) -> Option<Vec3<T>> {
        let det = self.determinant();
        let scale = self.frobenius_norm();
        if det.abs() <= T::tiny() * scale * scale * scale || !det.is_finite() {
            return None;
        }
        let c0 = self.column(0);
        let c1 = self.column(1);
        let c2 = self.column(2);
        Some(Vec3::new(b.dot(c1.cross(c2)) / det, c0.dot(b.cross(c2)) / det, c0.dot(c1.cross(b)) / det))
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Eigenvalues come back sorted descending; column `i` of the returned matrix is the unit
    /// eigenvector of eigenvalue `i`.
    pub fn symmetric_eigen(&self) -> (Vec3<T>, Mat3<T>) {
        let mut a = self.m;
        let mut v = Self::identity().m;
        let two = T::of(2.0);
        for _sweep in 0..64 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
            if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
        let vecs = Mat3::from_rows(v);
        let values = Vec3::new(a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]);
        let vectors = Mat3::from_columns(vecs.column(order[0]), vecs.column(order[1]), vecs.column(order[2]));
        (values, vectors)
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut r = Mat3::<U>::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = U::of(self.m[i][j].as_f64());
            }
        }
        r
    }

    /// Rotation by `angle` radians about the unit `axis` (Rodrigues).
    pub fn rotation(axis: Vec3<T>, angle: T) -> Self {
        let a = axis.normalized();
        let (s, c) = angle.sin_cos();
        let k = Mat3::from_rows([[T::zero(), -a.z, a.y], [a.z, T::zero(), -a.x], [-a.y, a.x, T::zero()]]);
        Self::identity().add(&k.scale(s)).add(&k.mul_mat(&k).scale(T::one() - c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let m = Mat3::diagonal(Vec3::new(1.0f64, 3.0, 2.0));
        let (vals, vecs) = m.symmetric_eigen();
        assert_eq!(vals, Vec3::new(3.0, 2.0, 1.0));
        assert!((vecs.column(0).y.abs() - 1.0).abs() < 1e-15);
        assert!((vecs.column(2).x.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let a = Mat3::from_rows([[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]]);
        let (vals, q) = a.symmetric_eigen();
        let back = q.mul_mat(&Mat3::diagonal(vals)).mul_mat(&q.transpose());
        assert!(back.max_abs_diff(&a) < 1e-12);
        let qtq = q.transpose().mul_mat(&q);
        assert!(qtq.max_abs_diff(&Mat3::identity()) < 1e-12);
        assert!(vals.x >= vals.y && vals.y >= vals.z);
    }

    #[test]
    fn solve_matches_product() {
        let a = Mat3::from_rows([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]);
        let x = Vec3::new(1.0, -2.0, 0.5);
        let b = a.mul_vec(x);
        let y = a.solve(b).unwrap();
        assert!((y - x).norm() < 1e-12);
        assert!(Mat3::<f64>::zero().solve(b).is_none());
    }

    #[test]
    fn rotation_is_orthonormal() {
        let r = Mat3::rotation(Vec3::new(1.0, 2.0, 3.0), 0.7f64);
        assert!(r.mul_mat(&r.transpose()).max_abs_diff(&Mat3::identity()) < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }
}
