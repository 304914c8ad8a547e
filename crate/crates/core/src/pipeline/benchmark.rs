use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use super::reconstruct::{reconstruct, Inputs};
use crate::geometry::{rms_hausdorff, TriangleMesh};
use crate::synth::{make_benchmark, EstimateKind, Preset, Renderer, NOISE_LEVELS, TRIANGLE_BUDGETS};
use crate::Result;

/// Solver settings used for a preset: a finer starting level for multi-object scenes.
pub fn preset_solver_config(preset: Preset) -> SolverConfig {
    let base_level = match preset {
        Preset::TwoObject => 7,
        _ => 6,
    };
    SolverConfig { base_level, max_level: base_level.max(8), ..SolverConfig::default() }
}

/// Outcome of one initial estimate in the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub label: String,
    /// `None` for the visual hull.
    pub triangles: Option<usize>,
    pub noise: Option<f64>,
    pub initial_rms: Option<f64>,
    pub final_rms: Option<f64>,
    /// Set when this cell failed; the sweep goes on.
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub preset: String,
    pub cells: Vec<BenchmarkCell>,
}

impl BenchmarkTable {
    pub fn cell(&self, triangles: Option<usize>, noise: Option<f64>) -> Option<&BenchmarkCell> {
        self.cells.iter().find(|c| c.triangles == triangles && c.noise == noise)
    }

    /// Final error of a degraded cell.
    pub fn final_rms(&self, triangles: usize, noise: f64) -> Option<f64> {
        self.cell(Some(triangles), Some(noise)).and_then(|c| c.final_rms)
    }

    pub fn visual_hull_rms(&self) -> Option<f64> {
        self.cell(None, None).and_then(|c| c.final_rms)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BenchmarkCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// One row per noise level, one column per triangle budget, then the visual hull (filled
    /// in the noise-free row only). Failed cells are left empty.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut out = String::from("noise");
        for t in TRIANGLE_BUDGETS {
            let _ = write!(out, ",{t}");
        }
        out.push_str(",visual_hull\n");
        for (i, &noise) in NOISE_LEVELS.iter().enumerate() {
            let _ = write!(out, "{noise:.2}");
            for t in TRIANGLE_BUDGETS {
                let _ = write!(out, ",{}", fmt(self.final_rms(t, noise)));
            }
            let hull = if i == 0 { fmt(self.visual_hull_rms()) } else { String::new() };
            let _ = writeln!(out, ",{hull}");
        }
        out
    }
}

/// Reconstructs the preset from every initial estimate of its sweep and tabulates the RMS
/// Hausdorff errors against the ground truth.
pub fn run_benchmark(preset: Preset, params: &SolverConfig) -> Result<BenchmarkTable> {
    let bench = make_benchmark::<f64>(preset)?;
    let renderer = Renderer::new(&bench.scene);
    let (views, _) = renderer.render_all()?;
    let mut inputs = Inputs::from_renders(views, bench.scene.ground_truth.clone(), bench.scene.bounds, params.clone())?;
    let mut cells = Vec::with_capacity(bench.estimates.len());
    for est in &bench.estimates {
        let started = Instant::now();
        let (triangles, noise) = match est.kind {
            EstimateKind::Degraded { triangles, noise } => (Some(triangles), Some(noise)),
            EstimateKind::VisualHull => (None, None),
        };
        let label = est.kind.label();
        log::info!("benchmark {}: {label}", preset.name());
        inputs.initial_mesh = est.mesh.clone();
        let outcome = run_cell(&inputs, &bench.scene.ground_truth);
        let (initial_rms, final_rms, error) = match outcome {
            Ok((i, f)) => (Some(i), Some(f), None),
            Err(e) => {
                log::warn!("benchmark cell {label} failed: {e}");
                (None, None, Some(e.to_string()))
            }
        };
        cells.push(BenchmarkCell {
            label,
            triangles,
            noise,
            initial_rms,
            final_rms,
            error,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(BenchmarkTable { preset: preset.name().to_string(), cells })
}

fn run_cell(inputs: &Inputs, ground_truth: &TriangleMesh<f64>) -> Result<(f64, f64)> {
    let rec = reconstruct(inputs, false)?;
    let samples = inputs.params.hausdorff_samples;
    Ok((rms_hausdorff(&inputs.initial_mesh, ground_truth, samples)?, rms_hausdorff(&rec.mesh, ground_truth, samples)?))
}
