use std::fs;
use std::path::{Path, PathBuf};

use super::config::{
    BoundsConfig, CameraConfig, LightConfig, OutputConfig, SceneConfig, SolverConfig, ViewConfig, SCHEMA_VERSION,
};
use crate::geometry::io::{write_mesh, write_png, BitDepth};
use crate::geometry::TriangleMesh;
use crate::synth::{Renderer, SyntheticScene};
use crate::{Error, Result};

pub const SCENE_FILE: &str = "scene.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.ply";
pub const INITIAL_FILE: &str = "initial.ply";

/// Renders every image of `scene` to 16-bit PNG in `dir` and writes the ground truth, the
/// initial estimate and a scene config referring to them. Returns the config path.
pub fn write_scene(
    scene: &SyntheticScene<f64>,
    initial: &TriangleMesh<f64>,
    solver: SolverConfig,
    dir: &Path,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let renderer = Renderer::new(scene);
    let mut views = Vec::with_capacity(scene.views.len());
    for (q, rig) in scene.views.iter().enumerate() {
        let (images, _) = renderer.render_view(q);
        let mut lights = Vec::with_capacity(rig.lights.len());
        for (k, (light, img)) in rig.lights.iter().zip(&images).enumerate() {
            let name = PathBuf::from(format!("view{q:02}_light{k}.png"));
            write_png(&dir.join(&name), img, BitDepth::Sixteen)?;
            lights.push(LightConfig::from_light(light, name));
        }
        views.push(ViewConfig { camera: CameraConfig::from_camera(&rig.camera), lights });
    }
    write_mesh(&dir.join(GROUND_TRUTH_FILE), &scene.ground_truth)?;
    write_mesh(&dir.join(INITIAL_FILE), initial)?;
    let config = SceneConfig {
        schema_version: SCHEMA_VERSION,
        world_unit: "mm".into(),
        bounds: BoundsConfig { min: scene.bounds.min.to_f64(), size: scene.bounds.size },
        views,
        initial_mesh: INITIAL_FILE.into(),
        ground_truth: Some(GROUND_TRUTH_FILE.into()),
        solver,
        output: OutputConfig::default(),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join(SCENE_FILE);
    config.save(&path)?;
    Ok(path)
}
