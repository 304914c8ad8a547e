use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Pairing, SceneConfig, SolverConfig};
use crate::geometry::io::read_mesh;
use crate::geometry::{hausdorff_report, BilinearSupport, HausdorffReport, Mat3, MeshDistance, PsView, TriangleMesh};
use crate::octree::raycast::RAY_EPSILON_VOXELS;
use crate::octree::{
    build_initial_volume, extract_mesh, raycast, refinement_complete, Cube, MeshOccluder, Occluder, RayOutcome,
    SdfVolume,
};
use crate::photometric::{
    all_pairs, rank_corrected, ratio_coefficients, recover_albedo, ring_pairs, saturation_mask, AlbedoEstimate,
    LightGeometry, VoxelSystem,
};
use crate::solver::{build_gradient, solve, GlobalSystem, GradientOperator, SolveOptions, SolveReport};
use crate::{Error, Result};

/// Everything a reconstruction reads, already loaded and masked.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub views: Vec<PsView<f64>>,
    pub initial_mesh: TriangleMesh<f64>,
    pub ground_truth: Option<TriangleMesh<f64>>,
    pub bounds: Cube<f64>,
    pub params: SolverConfig,
}

impl Inputs {
    pub fn from_config(config: &SceneConfig) -> Result<Self> {
        let initial_mesh = read_mesh(&config.resolve(&config.initial_mesh))?;
        let ground_truth = config.ground_truth.as_ref().map(|p| read_mesh(&config.resolve(p))).transpose()?;
        Ok(Self {
            views: config.load_views()?,
            initial_mesh,
            ground_truth,
            bounds: config.bounds()?,
            params: config.solver.clone(),
        })
    }

    /// Inputs from in-memory renders. The saturation masks of `params` replace the views' own
    /// masks, as when the images are loaded from files.
    pub fn from_renders(
        views: Vec<PsView<f64>>,
        initial_mesh: TriangleMesh<f64>,
        bounds: Cube<f64>,
        params: SolverConfig,
    ) -> Result<Self> {
        let (lo, hi) = (params.saturation_low, params.saturation_high);
        let views = views
            .into_iter()
            .map(|v| {
                let masks = v.images.iter().map(|i| saturation_mask(i, lo, hi)).collect();
                PsView::with_masks(v.camera, v.lights, v.images, masks)
            })
            .collect::<Result<_>>()?;
        Ok(Self { views, initial_mesh, ground_truth: None, bounds, params })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every band voxel projects below one pixel.
    PixelFootprint,
    MaxLevel,
    /// Subdivision produced no new voxels.
    Stagnation,
}

/// Bookkeeping of one solve round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Finest leaf level of the band.
    pub level: u8,
    pub voxels: usize,
    /// Ratio equations with non-zero weight.
    pub equations: usize,
    /// Fraction of image samples taken by band voxels that fall on masked pixels.
    pub masked_pixel_fraction: f64,
    /// Fraction of valid light pairs seen by the camera whose weight a shadow set to zero.
    pub shadowed_pair_fraction: f64,
    pub well_constrained: usize,
    /// Fraction of well-constrained voxels with `|∇d|` in `[0.9, 1.1]` after the solve.
    pub eikonal_fraction: f64,
    pub cg: SolveReport,
    pub wall_time_s: f64,
    /// Peak resident set size so far, when the platform reports it.
    pub peak_memory_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub surface_area: f64,
    pub boundary_edges: usize,
}

impl MeshStats {
    pub fn of(mesh: &TriangleMesh<f64>) -> Self {
        Self {
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            surface_area: mesh.surface_area(),
            boundary_edges: mesh.boundary_edge_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub mesh: MeshStats,
    /// Distances to the ground truth, when one was given.
    pub hausdorff: Option<HausdorffReport>,
    /// Same for the initial estimate, for comparison.
    pub initial_hausdorff: Option<HausdorffReport>,
    /// Fraction of vertices with a recovered albedo, when albedo was requested.
    pub albedo_visible_fraction: Option<f64>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl RunReport {
    /// RMS distance from the reconstruction to the ground truth.
    pub fn rms_hausdorff(&self) -> Option<f64> {
        self.hausdorff.map(|h| h.forward.rms)
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Result of assembling every band voxel's rank-corrected system.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub systems: Vec<VoxelSystem<f64>>,
    pub equations: usize,
    pub masked_samples: usize,
    pub samples: usize,
    pub shadowed_pairs: usize,
    pub visible_pairs: usize,
}

impl Assembly {
    pub fn well_constrained(&self) -> usize {
        self.systems.iter().filter(|s| s.well_constrained).count()
    }
}

#[derive(Default)]
struct Tally {
    equations: usize,
    masked_samples: usize,
    samples: usize,
    shadowed_pairs: usize,
    visible_pairs: usize,
}

impl Tally {
    fn add(self, o: Self) -> Self {
        Self {
            equations: self.equations + o.equations,
            masked_samples: self.masked_samples + o.masked_samples,
            samples: self.samples + o.samples,
            shadowed_pairs: self.shadowed_pairs + o.shadowed_pairs,
            visible_pairs: self.visible_pairs + o.visible_pairs,
        }
    }
}

/// Final mesh, volume and bookkeeping of a run.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub mesh: TriangleMesh<f64>,
    pub volume: SdfVolume<f64>,
    pub albedo: Option<AlbedoEstimate<f64>>,
    pub report: RunReport,
}

/// The solve/raytrace/subdivide loop, exposed round by round.
pub struct Reconstructor<'a> {
    inputs: &'a Inputs,
    prior_field: MeshDistance<f64>,
    volume: SdfVolume<f64>,
    pairs: Vec<Vec<(usize, usize)>>,
    rounds: Vec<RoundRecord>,
    warnings: Vec<String>,
    last_assembly: Option<Assembly>,
    last_gradient: Option<GradientOperator<f64>>,
    start: Instant,
}

impl<'a> Reconstructor<'a> {
    pub fn new(inputs: &'a Inputs) -> Result<Self> {
        inputs.params.validate()?;
        if inputs.views.is_empty() {
            return Err(Error::InvalidInput("no views to reconstruct from".into()));
        }
        let volume = build_initial_volume(&inputs.initial_mesh, inputs.bounds, inputs.params.base_level)?;
        let pairs = inputs
            .views
            .iter()
            .map(|v| match inputs.params.pairing {
                Pairing::All => all_pairs(v.light_count()),
                Pairing::Ring => ring_pairs(v.light_count()),
            })
            .collect();
        Ok(Self {
            inputs,
            prior_field: MeshDistance::new(&inputs.initial_mesh)?,
            volume,
            pairs,
            rounds: Vec::new(),
            warnings: Vec::new(),
            last_assembly: None,
            last_gradient: None,
            start: Instant::now(),
        })
    }

    pub fn volume(&self) -> &SdfVolume<f64> {
        &self.volume
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Systems assembled in the latest round.
    pub fn last_assembly(&self) -> Option<&Assembly> {
        self.last_assembly.as_ref()
    }

    pub fn last_gradient(&self) -> Option<&GradientOperator<f64>> {
        self.last_gradient.as_ref()
    }

    /// Per-voxel systems against the current volume. Visibility uses the initial mesh before
    /// the first solve and the current SDF afterwards.
    pub fn assemble(&self, gradient: &GradientOperator<f64>) -> Assembly {
        let d = self.volume.d();
        if self.rounds.is_empty() {
            let occluder = MeshOccluder::new(&self.inputs.initial_mesh, RAY_EPSILON_VOXELS * self.volume.finest_edge());
            self.assemble_with(gradient, d, &occluder)
        } else {
            self.assemble_with(gradient, d, &self.volume)
        }
    }

    fn assemble_with<O: Occluder<f64> + ?Sized>(&self, g: &GradientOperator<f64>, d: &[f64], occ: &O) -> Assembly {
        let results: Vec<(VoxelSystem<f64>, Tally)> =
            (0..self.volume.len()).into_par_iter().map(|v| self.assemble_voxel(v, g, d, occ)).collect();
        let mut systems = Vec::with_capacity(results.len());
        let mut tally = Tally::default();
        for (s, t) in results {
            systems.push(s);
            tally = tally.add(t);
        }
        Assembly {
            systems,
            equations: tally.equations,
            masked_samples: tally.masked_samples,
            samples: tally.samples,
            shadowed_pairs: tally.shadowed_pairs,
            visible_pairs: tally.visible_pairs,
        }
    }

    fn assemble_voxel<O: Occluder<f64> + ?Sized>(
        &self,
        v: usize,
        g: &GradientOperator<f64>,
        d: &[f64],
        occ: &O,
    ) -> (VoxelSystem<f64>, Tally) {
        let mut t = Tally::default();
        let grad = g.gradient_at(v, d);
        let Some(n) = grad.try_normalized() else { return (VoxelSystem::prior(grad), t) };
        let x = self.volume.voxel_center(v);
        // Everything is evaluated at the surface point nearest to the voxel: its pixels and light
        // geometry belong to the level set through x, and band voxels inside the object are not
        // hidden by their own surface.
        let foot = x - n * d[v];
        let floor = self.inputs.params.saturation_low;
        let mut b_acc = [[0.0f64; 3]; 3];
        let mut samples = Vec::new();
        let mut geometry = Vec::new();
        let mut lit: Vec<Option<bool>> = Vec::new();
        for (q, view) in self.inputs.views.iter().enumerate() {
            let cam = &view.camera;
            let w = n.dot(cam.view_direction(foot));
            if w <= 0.0 {
                continue;
            }
            let proj = cam.project(foot);
            if !proj.in_frustum {
                continue;
            }
            let Some(support) = BilinearSupport::new(proj.u, cam.width, cam.height) else { continue };
            if raycast(occ, foot, cam.center()) == RayOutcome::Blocked {
                continue;
            }
            samples.clear();
            geometry.clear();
            lit.clear();
            for k in 0..view.light_count() {
                let s = support.sample(&view.images[k], &view.masks[k]);
                t.samples += 1;
                if s.is_none() {
                    t.masked_samples += 1;
                }
                samples.push(s);
                geometry.push(LightGeometry::new(&view.lights[k], foot).ok());
                lit.push(None);
            }
            for &(h, k) in &self.pairs[q] {
                let (Some(i_h), Some(i_k)) = (samples[h], samples[k]) else { continue };
                if i_h < floor && i_k < floor {
                    continue;
                }
                let (Some(g_h), Some(g_k)) = (geometry[h], geometry[k]) else { continue };
                t.visible_pairs += 1;
                let mut reaches = |j: usize, gj: &LightGeometry<f64>| {
                    *lit[j].get_or_insert_with(|| {
                        n.dot(gj.to_light) > 0.0 && raycast(occ, foot, view.lights[j].position) == RayOutcome::Clear
                    })
                };
                if !(reaches(h, &g_h) && reaches(k, &g_k)) {
                    t.shadowed_pairs += 1;
                    continue;
                }
                let wb = ratio_coefficients(i_h, i_k, &g_h, &g_k) * w;
                for r in 0..3 {
                    for c in r..3 {
                        b_acc[r][c] += wb[r] * wb[c];
                    }
                }
                t.equations += 1;
            }
        }
        for r in 0..3 {
            for c in 0..r {
                b_acc[r][c] = b_acc[c][r];
            }
        }
        (rank_corrected(Mat3::from_rows(b_acc), n, self.inputs.params.rank_threshold), t)
    }

    /// Raycast, assemble and solve on the current band; records the round.
    pub fn solve_round(&mut self) -> Result<&RoundRecord> {
        let started = Instant::now();
        let params = &self.inputs.params;
        let g = build_gradient(&self.volume);
        let assembly = self.assemble(&g);
        let centers = self.volume.voxel_centers();
        let prior: Vec<f64> = centers.par_iter().map(|&c| self.prior_field.signed_distance(c)).collect();
        let system = GlobalSystem::from_voxel_systems(&assembly.systems, params.lambda, prior)?;
        let options = SolveOptions {
            tolerance: params.cg_tolerance,
            max_iters: params.cg_max_iters,
            preconditioner: params.preconditioner,
        };
        let solution = solve(&system, &g, &options, Some(self.volume.d()))?;
        if !solution.report.converged {
            self.warnings.push(format!(
                "round {}: conjugate gradients stopped at residual {:.2e} after {} iterations",
                self.rounds.len(),
                solution.report.relative_residual,
                solution.report.iterations
            ));
        }
        let eikonal_fraction = eikonal_fraction(&g, &solution.d, &assembly.systems);
        self.volume.set_d(solution.d)?;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let record = RoundRecord {
            round: self.rounds.len(),
            level: self.volume.level(),
            voxels: self.volume.len(),
            equations: assembly.equations,
            masked_pixel_fraction: ratio(assembly.masked_samples, assembly.samples),
            shadowed_pair_fraction: ratio(assembly.shadowed_pairs, assembly.visible_pairs),
            well_constrained: assembly.well_constrained(),
            eikonal_fraction,
            cg: solution.report,
            wall_time_s: started.elapsed().as_secs_f64(),
            peak_memory_bytes: peak_memory_bytes(),
        };
        log::info!(
            "round {} level {} voxels {} equations {} cg {} it residual {:.2e} ({:.1}s)",
            record.round,
            record.level,
            record.voxels,
            record.equations,
            record.cg.iterations,
            record.cg.relative_residual,
            record.wall_time_s
        );
        self.rounds.push(record);
        self.last_assembly = Some(assembly);
        self.last_gradient = Some(g);
        Ok(self.rounds.last().expect("just pushed"))
    }

    /// Stop test after a solve; subdivides the band when the loop continues.
    pub fn advance(&mut self) -> Option<StopReason> {
        if refinement_complete(&self.volume, self.inputs.views.iter().map(|v| &v.camera)) {
            return Some(StopReason::PixelFootprint);
        }
        if self.volume.level() >= self.inputs.params.max_level {
            return Some(StopReason::MaxLevel);
        }
        if self.volume.subdivide_band() == 0 {
            return Some(StopReason::Stagnation);
        }
        None
    }

    /// Runs the loop to completion and extracts the surface.
    pub fn run(mut self, recover: bool) -> Result<Reconstruction> {
        let stop_reason = loop {
            self.solve_round()?;
            if let Some(reason) = self.advance() {
                break reason;
            }
        };
        self.finish(stop_reason, recover)
    }

    /// Extracts the surface after a loop driven through [`Self::solve_round`] and [`Self::advance`].
    pub fn finish(self, stop_reason: StopReason, recover: bool) -> Result<Reconstruction> {
        let mut mesh = extract_mesh(&self.volume);
        if mesh.triangles.is_empty() {
            return Err(Error::Volume("the reconstructed signed distance field has no zero crossing".into()));
        }
        let albedo = recover.then(|| recover_albedo(&mesh, &self.inputs.views, &self.volume));
        if let Some(a) = &albedo {
            a.apply(&mut mesh);
        }
        let samples = self.inputs.params.hausdorff_samples;
        let (hausdorff, initial_hausdorff) = match &self.inputs.ground_truth {
            Some(gt) => (
                Some(hausdorff_report(&mesh, gt, samples)?),
                Some(hausdorff_report(&self.inputs.initial_mesh, gt, samples)?),
            ),
            None => (None, None),
        };
        let report = RunReport {
            rounds: self.rounds,
            stop_reason,
            mesh: MeshStats::of(&mesh),
            hausdorff,
            initial_hausdorff,
            albedo_visible_fraction: albedo.as_ref().map(|a| a.visible_count() as f64 / a.visible.len().max(1) as f64),
            warnings: self.warnings,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        Ok(Reconstruction { mesh, volume: self.volume, albedo, report })
    }
}

/// Fraction of well-constrained voxels whose finite-difference gradient norm lies in [0.9, 1.1].
pub fn eikonal_fraction(g: &GradientOperator<f64>, d: &[f64], systems: &[VoxelSystem<f64>]) -> f64 {
    let (good, total) = (0..systems.len())
        .into_par_iter()
        .filter(|&v| systems[v].well_constrained)
        .map(|v| {
            let norm = g.gradient_at(v, d).norm();
            (usize::from((0.9..=1.1).contains(&norm)), 1usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        0.0
    } else {
        good as f64 / total as f64
    }
}

/// Reconstructs from loaded inputs.
pub fn reconstruct(inputs: &Inputs, recover: bool) -> Result<Reconstruction> {
    Reconstructor::new(inputs)?.run(recover)
}

fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
