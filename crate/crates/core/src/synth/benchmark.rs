use super::carve::voxel_carve;
use super::render::Renderer;
use super::scene::{preset_scene, Preset, SyntheticScene};
use crate::geometry::{degrade_mesh, TriangleMesh};
use crate::{Real, Result};

/// Triangle budgets of the initial-estimate sweep.
pub const TRIANGLE_BUDGETS: [usize; 4] = [250, 500, 1500, 10_000];
/// Vertex noise levels of the sweep, as fractions of the mean edge length.
pub const NOISE_LEVELS: [f64; 3] = [0.0, 0.05, 0.10];
/// Carving grid resolution per axis for the visual hull.
pub const HULL_RESOLUTION: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimateKind {
    Degraded { triangles: usize, noise: f64 },
    VisualHull,
}

impl EstimateKind {
    pub fn label(&self) -> String {
        match self {
            EstimateKind::Degraded { triangles, noise } => {
                format!("tri{triangles}_noise{:02}", (noise * 100.0).round())
            }
            EstimateKind::VisualHull => "visual_hull".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialEstimate<T> {
    pub kind: EstimateKind,
    pub mesh: TriangleMesh<T>,
}

/// A preset scene with its sweep of initial estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark<T> {
    pub scene: SyntheticScene<T>,
    pub estimates: Vec<InitialEstimate<T>>,
}

impl<T: Real> Benchmark<T> {
    pub fn estimate(&self, kind: EstimateKind) -> Option<&InitialEstimate<T>> {
        self.estimates.iter().find(|e| e.kind == kind)
    }
}

/// Ground truth decimated to `triangles` with vertex noise, seeded by the scene seed and budget.
pub fn degraded_estimate<T: Real>(scene: &SyntheticScene<T>, triangles: usize, noise: f64) -> Result<TriangleMesh<T>> {
    degrade_mesh(&scene.ground_truth, triangles, noise, scene.seed ^ (triangles as u64).rotate_left(17))
}

/// Visual hull carved from the rendered silhouettes of every view.
pub fn visual_hull<T: Real>(scene: &SyntheticScene<T>, resolution: usize) -> Result<TriangleMesh<T>> {
    let renderer = Renderer::new(scene);
    let views: Vec<_> =
        (0..scene.views.len()).map(|q| (scene.views[q].camera.clone(), renderer.silhouette(q))).collect();
    voxel_carve(&views, scene.bounds, resolution)
}

/// Preset scene plus estimates at every (triangle budget, noise) cell and the visual hull.
pub fn make_benchmark<T: Real>(preset: Preset) -> Result<Benchmark<T>> {
    let scene = preset_scene::<T>(preset)?;
    let mut estimates = Vec::new();
    for &noise in &NOISE_LEVELS {
        for &triangles in &TRIANGLE_BUDGETS {
            let mesh = degraded_estimate(&scene, triangles, noise)?;
            estimates.push(InitialEstimate { kind: EstimateKind::Degraded { triangles, noise }, mesh });
        }
    }
    let hull = visual_hull(&scene, HULL_RESOLUTION)?;
    estimates.push(InitialEstimate { kind: EstimateKind::VisualHull, mesh: hull });
    Ok(Benchmark { scene, estimates })
}
