use rayon::prelude::*;

use crate::geometry::Vec3;
use crate::octree::{Axis, Direction, SdfVolume};
use crate::Real;

/// How one gradient row was formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Forward,
    Backward,
    /// No neighbour on this axis; the row is zero.
    Zero,
}

/// One row `(d[plus] − d[minus]) / h` of the gradient operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientRow<T> {
    pub kind: RowKind,
    pub plus: u32,
    pub minus: u32,
    /// Centre-to-centre distance along the axis; 0 for zero rows.
    pub spacing: T,
}

impl<T: Real> GradientRow<T> {
    pub fn zero(voxel: u32) -> Self {
        Self { kind: RowKind::Zero, plus: voxel, minus: voxel, spacing: T::zero() }
    }

    /// Coefficient `1/h`, 0 for zero rows.
    pub fn weight(&self) -> T {
        if self.kind == RowKind::Zero {
            T::zero()
        } else {
            self.spacing.recip()
        }
    }

    #[inline]
    fn apply(&self, d: &[T]) -> T {
        if self.kind == RowKind::Zero {
            T::zero()
        } else {
            (d[self.plus as usize] - d[self.minus as usize]) / self.spacing
        }
    }
}

/// Sparse `(3·|Ω|) × |Ω|` finite-difference gradient; row `3v + a` is `∂_a` at voxel `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientOperator<T> {
    rows: Vec<GradientRow<T>>,
    voxels: usize,
}

impl<T: Real> GradientOperator<T> {
    pub fn from_rows(rows: Vec<GradientRow<T>>, voxels: usize) -> crate::Result<Self> {
        if rows.len() != 3 * voxels {
            return Err(crate::Error::InvalidInput(format!(
                "gradient needs {} rows for {voxels} voxels, got {}",
                3 * voxels,
                rows.len()
            )));
        }
        if rows.iter().any(|r| r.plus as usize >= voxels || r.minus as usize >= voxels) {
            return Err(crate::Error::InvalidInput("gradient row references a missing voxel".into()));
        }
        if rows.iter().any(|r| r.kind != RowKind::Zero && !(r.spacing > T::zero())) {
            return Err(crate::Error::InvalidInput("gradient spacing must be positive".into()));
        }
        Ok(Self { rows, voxels })
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels
    }

    pub fn rows(&self) -> &[GradientRow<T>] {
        &self.rows
    }

    pub fn row(&self, voxel: usize, axis: Axis) -> &GradientRow<T> {
        &self.rows[3 * voxel + axis.index()]
    }

    /// Voxels with at least one zero row.
    pub fn flagged_voxels(&self) -> Vec<usize> {
        (0..self.voxels).filter(|&v| self.rows[3 * v..3 * v + 3].iter().any(|r| r.kind == RowKind::Zero)).collect()
    }

    /// Voxels whose three rows are all zero; the solve holds them at the prior.
    pub fn isolated_voxels(&self) -> Vec<usize> {
        (0..self.voxels).filter(|&v| self.rows[3 * v..3 * v + 3].iter().all(|r| r.kind == RowKind::Zero)).collect()
    }

    /// `∇d` at one voxel.
    pub fn gradient_at(&self, voxel: usize, d: &[T]) -> Vec3<T> {
        let r = &self.rows[3 * voxel..3 * voxel + 3];
        Vec3::new(r[0].apply(d), r[1].apply(d), r[2].apply(d))
    }

    /// `G d`, one gradient per voxel.
    pub fn apply(&self, d: &[T]) -> Vec<Vec3<T>> {
        assert_eq!(d.len(), self.voxels);
        (0..self.voxels).into_par_iter().map(|v| self.gradient_at(v, d)).collect()
    }

    /// `Gᵀ g` for one 3-vector per voxel.
    pub fn apply_transpose(&self, g: &[Vec3<T>]) -> Vec<T> {
        assert_eq!(g.len(), self.voxels);
        let mut out = vec![T::zero(); self.voxels];
        self.accumulate_transpose(g, &mut out);
        out
    }

    pub(crate) fn accumulate_transpose(&self, g: &[Vec3<T>], out: &mut [T]) {
        for (i, row) in self.rows.iter().enumerate() {
            if row.kind == RowKind::Zero {
                continue;
            }
            let c = g[i / 3][i % 3] / row.spacing;
            out[row.plus as usize] = out[row.plus as usize] + c;
            out[row.minus as usize] = out[row.minus as usize] - c;
        }
    }

    /// Dense matrix, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.voxels]; 3 * self.voxels];
        for (i, row) in self.rows.iter().enumerate() {
            let w = row.weight();
            if w != T::zero() {
                m[i][row.plus as usize] = m[i][row.plus as usize] + w;
                m[i][row.minus as usize] = m[i][row.minus as usize] - w;
            }
        }
        m
    }
}

/// Forward differences between band voxels, falling back to backward differences and then to
/// flagged zero rows. Spacing is the centre distance along the axis, so a difference across a
/// level transition uses the 1.5× spacing of mixed-size cells.
pub fn build_gradient<T: Real>(volume: &SdfVolume<T>) -> GradientOperator<T> {
    let n = volume.len();
    let rows: Vec<GradientRow<T>> = (0..n)
        .into_par_iter()
        .flat_map_iter(|v| {
            let center = volume.voxel_center(v);
            Axis::ALL.into_iter().map(move |axis| {
                let a = axis.index();
                if let Some(f) = volume.neighbor_lookup(v, axis, Direction::Forward) {
                    let h = volume.voxel_center(f)[a] - center[a];
                    GradientRow { kind: RowKind::Forward, plus: f as u32, minus: v as u32, spacing: h }
                } else if let Some(b) = volume.neighbor_lookup(v, axis, Direction::Backward) {
                    let h = center[a] - volume.voxel_center(b)[a];
                    GradientRow { kind: RowKind::Backward, plus: v as u32, minus: b as u32, spacing: h }
                } else {
                    GradientRow::zero(v as u32)
                }
            })
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.kind == RowKind::Zero).count();
    if flagged > 0 {
        log::debug!("gradient: {flagged} of {} rows have no neighbour and are zero", rows.len());
    }
    GradientOperator { rows, voxels: n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> (GradientOperator<f64>, Vec<f64>) {
        let n = values.len();
        let mut rows = Vec::new();
        for v in 0..n {
            rows.push(if v + 1 < n {
                GradientRow { kind: RowKind::Forward, plus: v as u32 + 1, minus: v as u32, spacing: 1.0 }
            } else {
                GradientRow { kind: RowKind::Backward, plus: v as u32, minus: v as u32 - 1, spacing: 1.0 }
            });
            rows.push(GradientRow::zero(v as u32));
            rows.push(GradientRow::zero(v as u32));
        }
        (GradientOperator::from_rows(rows, n).unwrap(), values.to_vec())
    }

    #[test]
    fn linear_line_is_exact() {
        let (g, d) = line(&[0.0, 1.0, 2.0]);
        let grad = g.apply(&d);
        assert_eq!(grad.iter().map(|v| v.x).collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
        assert_eq!(g.row(2, Axis::X).kind, RowKind::Backward);
        assert_eq!(g.flagged_voxels(), vec![0, 1, 2]);
        assert!(g.isolated_voxels().is_empty());
    }

    #[test]
    fn transpose_matches_dense() {
        let (g, _) = line(&[0.0, 0.0, 0.0, 0.0]);
        let dense = g.to_dense();
        let y: Vec<Vec3<f64>> = (0..4).map(|i| Vec3::new(i as f64 + 0.5, -(i as f64), 2.0)).collect();
        let gt = g.apply_transpose(&y);
        for (j, &val) in gt.iter().enumerate() {
            let expect: f64 = (0..12).map(|i| dense[i][j] * y[i / 3][i % 3]).sum();
            assert!((val - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(GradientOperator::<f64>::from_rows(vec![GradientRow::zero(0)], 1).is_err());
        let bad = GradientRow { kind: RowKind::Forward, plus: 1, minus: 0, spacing: 0.0 };
        let mut rows = vec![GradientRow::zero(0); 6];
        rows[0] = bad;
        assert!(GradientOperator::from_rows(rows.clone(), 2).is_err());
        rows[0].spacing = 1.0;
        assert!(GradientOperator::from_rows(rows, 2).is_ok());
    }
}
