use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::io::read_png;
use crate::geometry::{Camera, Mat3, PointLight, PsView, Vec3};
use crate::octree::Cube;
use crate::photometric::{saturation_mask, RANK_THRESHOLD, SATURATION_HIGH, SATURATION_LOW};
use crate::solver::{Preconditioner, DEFAULT_LAMBDA, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Scene description: calibration, image files, initial estimate and solver parameters.
/// Relative paths are resolved against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub schema_version: u32,
    /// Length unit of every coordinate, e.g. "mm". Informational; no conversion is applied.
    pub world_unit: String,
    pub bounds: BoundsConfig,
    pub views: Vec<ViewConfig>,
    pub initial_mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub min: [f64; 3],
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub camera: CameraConfig,
    pub lights: Vec<LightConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    /// World-to-camera rotation, row major.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    /// In pixels.
    pub focal_length: f64,
    pub principal_point: [f64; 2],
    /// `[width, height]`.
    pub resolution: [u32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub brightness: f64,
    pub angular_dissipation: f64,
    pub image: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every unordered light pair of a view.
    #[default]
    All,
    /// Each light with its ring successor only.
    Ring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    pub preconditioner: Preconditioner,
    pub base_level: u8,
    pub max_level: u8,
    pub saturation_low: f64,
    pub saturation_high: f64,
    pub rank_threshold: f64,
    pub pairing: Pairing,
    /// Surface samples per direction for the final error when ground truth is given.
    pub hausdorff_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            cg_tolerance: DEFAULT_TOLERANCE,
            cg_max_iters: DEFAULT_MAX_ITERS,
            preconditioner: Preconditioner::Jacobi,
            base_level: 6,
            max_level: 8,
            saturation_low: SATURATION_LOW,
            saturation_high: SATURATION_HIGH,
            rank_threshold: RANK_THRESHOLD,
            pairing: Pairing::All,
            hausdorff_samples: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("solver.lambda must be positive, got {}", self.lambda));
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return bad(format!("solver.cg_tolerance must lie in (0, 1), got {}", self.cg_tolerance));
        }
        if self.cg_max_iters == 0 {
            return bad("solver.cg_max_iters must be positive".into());
        }
        if self.base_level == 0 || self.max_level < self.base_level || self.max_level > 12 {
            return bad(format!(
                "solver levels must satisfy 1 <= base_level <= max_level <= 12, got {}..{}",
                self.base_level, self.max_level
            ));
        }
        if !(0.0 <= self.saturation_low && self.saturation_low < self.saturation_high && self.saturation_high <= 1.0) {
            return bad(format!(
                "saturation bounds must satisfy 0 <= low < high <= 1, got {}..{}",
                self.saturation_low, self.saturation_high
            ));
        }
        if !(self.rank_threshold > 0.0 && self.rank_threshold < 1.0) {
            return bad(format!("solver.rank_threshold must lie in (0, 1), got {}", self.rank_threshold));
        }
        if self.hausdorff_samples == 0 {
            return bad("solver.hausdorff_samples must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub mesh: PathBuf,
    pub report: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { mesh: "reconstruction.ply".into(), report: "report.json".into() }
    }
}

impl CameraConfig {
    pub fn from_camera(c: &Camera<f64>) -> Self {
        let r = &c.rotation;
        Self {
            rotation: [0, 1, 2].map(|i| r.row(i).to_f64()),
            translation: c.translation.to_f64(),
            focal_length: c.focal_length,
            principal_point: c.principal_point,
            resolution: [c.width, c.height],
        }
    }

    pub fn to_camera(&self) -> Result<Camera<f64>> {
        Camera::new(
            Mat3::from_rows(self.rotation),
            Vec3::from_f64(self.translation),
            self.focal_length,
            self.principal_point,
            self.resolution[0],
            self.resolution[1],
        )
    }
}

impl LightConfig {
    pub fn from_light(l: &PointLight<f64>, image: PathBuf) -> Self {
        Self {
            position: l.position.to_f64(),
            direction: l.direction.to_f64(),
            brightness: l.brightness,
            angular_dissipation: l.angular_dissipation,
            image,
        }
    }

    pub fn to_light(&self) -> Result<PointLight<f64>> {
        PointLight::new(
            Vec3::from_f64(self.position),
            Vec3::from_f64(self.direction),
            self.brightness,
            self.angular_dissipation,
        )
    }
}

impl SceneConfig {
    /// Reads, parses and validates a config, checking that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SceneConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn bounds(&self) -> Result<Cube<f64>> {
        Cube::new(Vec3::from_f64(self.bounds.min), self.bounds.size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.world_unit.trim().is_empty() {
            return Err(Error::Config("world_unit must be declared".into()));
        }
        self.bounds().map_err(|e| Error::Config(format!("bounds: {e}")))?;
        self.solver.validate()?;
        if self.views.is_empty() {
            return Err(Error::Config("at least one view is required".into()));
        }
        let mut missing = Vec::new();
        for (q, v) in self.views.iter().enumerate() {
            v.camera.to_camera().map_err(|e| Error::Config(format!("view {q} camera: {e}")))?;
            if v.lights.len() < 2 {
                return Err(Error::Config(format!("view {q} has {} lights; at least two are needed", v.lights.len())));
            }
            for (k, l) in v.lights.iter().enumerate() {
                l.to_light().map_err(|e| Error::Config(format!("view {q} light {k}: {e}")))?;
                if !self.resolve(&l.image).is_file() {
                    missing.push(self.resolve(&l.image));
                }
            }
        }
        for p in std::iter::once(&self.initial_mesh).chain(self.ground_truth.as_ref()) {
            if !self.resolve(p).is_file() {
                missing.push(self.resolve(p));
            }
        }
        if let Some(first) = missing.first() {
            return Err(Error::Config(format!(
                "{} referenced file(s) missing, first: {}",
                missing.len(),
                first.display()
            )));
        }
        Ok(())
    }

    /// Loads every image and applies the saturation masks.
    pub fn load_views(&self) -> Result<Vec<PsView<f64>>> {
        let (lo, hi) = (self.solver.saturation_low, self.solver.saturation_high);
        self.views
            .iter()
            .map(|v| {
                let camera = v.camera.to_camera()?;
                let mut lights = Vec::with_capacity(v.lights.len());
                let mut images = Vec::with_capacity(v.lights.len());
                for l in &v.lights {
                    lights.push(l.to_light()?);
                    let path = self.resolve(&l.image);
                    let img = read_png::<f64>(&path)?;
                    if img.dims() != (camera.width, camera.height) {
                        return Err(Error::format(
                            &path,
                            format!(
                                "image is {}x{} but the camera resolution is {}x{}",
                                img.width, img.height, camera.width, camera.height
                            ),
                        ));
                    }
                    images.push(img);
                }
                let masks = images.iter().map(|i| saturation_mask(i, lo, hi)).collect();
                PsView::with_masks(camera, lights, images, masks)
            })
            .collect()
    }
}
