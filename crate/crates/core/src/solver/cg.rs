use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gradient::{GradientOperator, RowKind};
use crate::geometry::{Mat3, Vec3};
use crate::photometric::VoxelSystem;
use crate::{Error, Real, Result};

pub const DEFAULT_LAMBDA: f64 = 0.05;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 2000;

/// Objective `‖B′_Ω G d − q_Ω‖² + λ ‖d − d₀‖²` with one `B′` block and one `q` per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSystem<T> {
    blocks: Vec<Mat3<T>>,
    rhs: Vec<Vec3<T>>,
    lambda: T,
    prior: Vec<T>,
}

impl<T: Real> GlobalSystem<T> {
    pub fn new(blocks: Vec<Mat3<T>>, rhs: Vec<Vec3<T>>, lambda: T, prior: Vec<T>) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("regularisation weight must be positive, got {lambda}")));
        }
        if blocks.len() != rhs.len() || blocks.len() != prior.len() {
            return Err(Error::InvalidInput(format!(
                "system has {} blocks, {} right-hand sides and {} prior values",
                blocks.len(),
                rhs.len(),
                prior.len()
            )));
        }
        Ok(Self { blocks, rhs, lambda, prior })
    }

    pub fn from_voxel_systems(systems: &[VoxelSystem<T>], lambda: T, prior: Vec<T>) -> Result<Self> {
        Self::new(systems.iter().map(|s| s.b_prime).collect(), systems.iter().map(|s| s.q3).collect(), lambda, prior)
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn prior(&self) -> &[T] {
        &self.prior
    }

    pub fn blocks(&self) -> &[Mat3<T>] {
        &self.blocks
    }

    pub fn rhs(&self) -> &[Vec3<T>] {
        &self.rhs
    }

    fn check(&self, g: &GradientOperator<T>) -> Result<()> {
        if g.voxel_count() != self.len() {
            return Err(Error::InvalidInput(format!(
                "gradient covers {} voxels, system has {}",
                g.voxel_count(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Value of the objective at `d`.
    pub fn objective(&self, g: &GradientOperator<T>, d: &[T]) -> T {
        let grad = g.apply(d);
        let data: T = (0..self.len())
            .into_par_iter()
            .map(|v| (self.blocks[v].mul_vec(grad[v]) - self.rhs[v]).norm_squared())
            .sum();
        let reg: T = d.iter().zip(&self.prior).map(|(&a, &b)| (a - b) * (a - b)).sum();
        data + self.lambda * reg
    }

    /// Dense normal equations `(Gᵀ B′ᵀ B′ G + λI, Gᵀ B′ᵀ q + λ d₀)`, for tests and tiny systems.
    pub fn dense_normal_equations(&self, g: &GradientOperator<T>) -> (Vec<Vec<T>>, Vec<T>) {
        let n = self.len();
        let mut a = vec![vec![T::zero(); n]; n];
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = NormalOperator::new(self, g).apply(&e);
            for i in 0..n {
                a[i][j] = col[i];
            }
        }
        (a, NormalOperator::new(self, g).rhs())
    }
}

/// Matrix-free `A = Gᵀ B′ᵀ B′ G + λI`; only the `B′ᵀB′` blocks are stored.
struct NormalOperator<'a, T> {
    system: &'a GlobalSystem<T>,
    g: &'a GradientOperator<T>,
    gram: Vec<Mat3<T>>,
}

impl<'a, T: Real> NormalOperator<'a, T> {
    fn new(system: &'a GlobalSystem<T>, g: &'a GradientOperator<T>) -> Self {
        let gram = system.blocks.par_iter().map(|b| b.transpose().mul_mat(b)).collect();
        Self { system, g, gram }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = self.g.apply(x);
        y.par_iter_mut().zip(self.gram.par_iter()).for_each(|(v, m)| *v = m.mul_vec(*v));
        let mut out: Vec<T> = x.par_iter().map(|&xi| self.system.lambda * xi).collect();
        self.g.accumulate_transpose(&y, &mut out);
        out
    }

    fn rhs(&self) -> Vec<T> {
        let bq: Vec<Vec3<T>> = self
            .system
            .blocks
            .par_iter()
            .zip(self.system.rhs.par_iter())
            .map(|(b, q)| b.transpose().mul_vec(*q))
            .collect();
        let mut out: Vec<T> = self.system.prior.par_iter().map(|&p| self.system.lambda * p).collect();
        self.g.accumulate_transpose(&bq, &mut out);
        out
    }

    fn diagonal(&self) -> Vec<T> {
        let mut diag = vec![self.system.lambda; self.system.len()];
        let rows = self.g.rows();
        for (v, m) in self.gram.iter().enumerate() {
            let mut entries = [(0usize, 0usize, T::zero()); 6];
            let mut count = 0;
            for a in 0..3 {
                let r = &rows[3 * v + a];
                if r.kind == RowKind::Zero {
                    continue;
                }
                let w = r.weight();
                entries[count] = (a, r.plus as usize, w);
                entries[count + 1] = (a, r.minus as usize, -w);
                count += 2;
            }
            for &(a, j, c) in &entries[..count] {
                for &(b, k, e) in &entries[..count] {
                    if j == k {
                        diag[j] = diag[j] + m.row(a)[b] * c * e;
                    }
                }
            }
        }
        diag
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    Jacobi,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions<T> {
    /// Stop when `‖r‖ / ‖rhs‖` falls below this.
    pub tolerance: T,
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::of(DEFAULT_TOLERANCE),
            max_iters: DEFAULT_MAX_ITERS,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Relative residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    /// Set when the iteration limit was reached before the tolerance.
    pub fn warning(&self) -> bool {
        !self.converged
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub d: Vec<T>,
    pub report: SolveReport,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.par_iter().zip(b.par_iter()).map(|(&x, &y)| x * y).sum()
}

/// Preconditioned conjugate gradients on the normal equations, warm-started from `initial`
/// (the prior when `None`). On hitting `max_iters` the last iterate, which has the smallest
/// energy-norm error of all iterates, is returned and the report's `converged` flag is cleared.
pub fn solve<T: Real>(
    system: &GlobalSystem<T>,
    g: &GradientOperator<T>,
    options: &SolveOptions<T>,
    initial: Option<&[T]>,
) -> Result<Solution<T>> {
    system.check(g)?;
    let start = Instant::now();
    let n = system.len();
    let op = NormalOperator::new(system, g);
    let b = op.rhs();
    let mut x = match initial {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::InvalidInput(format!("initial guess has {} values, system has {n}", x0.len())));
        }
        None => system.prior.clone(),
    };
    let inv_diag: Vec<T> = match options.preconditioner {
        Preconditioner::Jacobi => op.diagonal().into_iter().map(|v| v.recip()).collect(),
        Preconditioner::None => vec![T::one(); n],
    };
    let b_norm = dot(&b, &b).sqrt();
    let scale = if b_norm > T::zero() { b_norm } else { T::one() };

    let ax = op.apply(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut rel = dot(&r, &r).sqrt() / scale;
    let mut history = vec![rel.as_f64()];
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while rel >= options.tolerance && iterations < options.max_iters {
        let ap = op.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            log::warn!("conjugate gradients broke down at iteration {iterations} (pᵀAp = {pap})");
            break;
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, &pi)| *xi = *xi + alpha * pi);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(ri, &api)| *ri = *ri - alpha * api);
        iterations += 1;
        rel = dot(&r, &r).sqrt() / scale;
        history.push(rel.as_f64());
        log::trace!("cg {iterations} residual {:.3e} {:.3}s", rel.as_f64(), start.elapsed().as_secs_f64());
        z.par_iter_mut().zip(r.par_iter().zip(inv_diag.par_iter())).for_each(|(zi, (&ri, &mi))| *zi = ri * mi);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, &zi)| *pi = zi + beta * *pi);
    }

    let converged = rel < options.tolerance;
    let report = SolveReport {
        iterations,
        relative_residual: rel.as_f64(),
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        residual_history: history,
    };
    if converged {
        log::debug!("cg converged in {iterations} iterations, residual {:.3e}", report.relative_residual);
    } else {
        log::warn!(
            "cg stopped after {iterations} iterations at residual {:.3e} (tolerance {:.1e})",
            report.relative_residual,
            options.tolerance.as_f64()
        );
    }
    Ok(Solution { d: x, report })
}

#[cfg(test)]
mod tests {
    use super::super::gradient::GradientRow;
    use super::*;

    fn chain(n: usize) -> GradientOperator<f64> {
        let mut rows = Vec::new();
        for v in 0..n {
            for a in 0..3 {
                rows.push(if a == 0 && v + 1 < n {
                    GradientRow { kind: RowKind::Forward, plus: v as u32 + 1, minus: v as u32, spacing: 0.5 }
                } else if a == 0 {
                    GradientRow { kind: RowKind::Backward, plus: v as u32, minus: v as u32 - 1, spacing: 0.5 }
                } else {
                    GradientRow::zero(v as u32)
                });
            }
        }
        GradientOperator::from_rows(rows, n).unwrap()
    }

    #[test]
    fn diagonal_matches_dense() {
        let g = chain(5);
        let blocks: Vec<Mat3<f64>> =
            (0..5).map(|i| Mat3::from_rows([[1.0 + i as f64, 0.3, 0.0], [0.3, 2.0, 0.1], [0.0, 0.1, 1.0]])).collect();
        let sys = GlobalSystem::new(blocks, vec![Vec3::new(1.0, 0.0, 0.0); 5], 0.05, vec![0.0; 5]).unwrap();
        let (a, _) = sys.dense_normal_equations(&g);
        let diag = NormalOperator::new(&sys, &g).diagonal();
        for i in 0..5 {
            assert!((diag[i] - a[i][i]).abs() < 1e-12, "{i}: {} vs {}", diag[i], a[i][i]);
        }
    }

    #[test]
    fn rejects_invalid_systems() {
        assert!(GlobalSystem::<f64>::new(vec![], vec![], 0.0, vec![]).is_err());
        assert!(GlobalSystem::new(vec![Mat3::<f64>::identity()], vec![], 0.05, vec![0.0]).is_err());
        let sys = GlobalSystem::new(vec![Mat3::identity(); 2], vec![Vec3::zero(); 2], 0.05, vec![0.0; 2]).unwrap();
        assert!(solve(&sys, &chain(3), &SolveOptions::default(), None).is_err());
        assert!(solve(&sys, &chain(2), &SolveOptions::default(), Some(&[0.0])).is_err());
    }

    #[test]
    fn iteration_limit_sets_warning() {
        let g = chain(40);
        let sys =
            GlobalSystem::new(vec![Mat3::identity(); 40], vec![Vec3::new(1.0, 0.0, 0.0); 40], 1e-3, vec![0.0; 40])
                .unwrap();
        let opts = SolveOptions { max_iters: 2, ..SolveOptions::default() };
        let s = solve(&sys, &g, &opts, None).unwrap();
        assert!(s.report.warning());
        assert_eq!(s.report.iterations, 2);
        assert_eq!(s.report.residual_history.len(), 3);
    }
}
