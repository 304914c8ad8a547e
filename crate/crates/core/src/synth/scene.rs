use std::fmt;
use std::str::FromStr;

use crate::geometry::{Camera, PointLight, TriangleMesh, Vec3};
use crate::octree::Cube;
use crate::{Error, Real, Result};

/// One camera with its ring of lights.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewRig<T> {
    pub camera: Camera<T>,
    pub lights: Vec<PointLight<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Albedo<T> {
    Constant(T),
    PerVertex(Vec<T>),
}

/// Ground-truth mesh, calibrated rigs and rendering parameters of a synthetic experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene<T> {
    pub name: String,
    pub ground_truth: TriangleMesh<T>,
    pub views: Vec<ViewRig<T>>,
    pub albedo: Albedo<T>,
    /// Standard deviation of additive Gaussian image noise.
    pub noise_sigma: T,
    pub seed: u64,
    /// Reconstruction volume enclosing the object with a margin.
    pub bounds: Cube<T>,
    /// Characteristic object radius, used to express errors relatively.
    pub radius: T,
}

impl<T: Real> SyntheticScene<T> {
    /// Fails when a light sits inside the ground truth, the ground truth leaves the bounds or an
    /// albedo table has the wrong length.
    pub fn validate(&self) -> Result<()> {
        let inside = |p: Vec3<T>| self.bounds.contains(p);
        if !self.ground_truth.vertices.iter().all(|&v| inside(v)) {
            return Err(Error::InvalidInput("ground truth extends outside the scene bounds".into()));
        }
        if let Albedo::PerVertex(a) = &self.albedo {
            if a.len() != self.ground_truth.vertices.len() {
                return Err(Error::InvalidInput("per-vertex albedo length differs from the vertex count".into()));
            }
        }
        if self.views.is_empty() {
            return Err(Error::InvalidInput("scene has no views".into()));
        }
        let field = crate::geometry::MeshDistance::new(&self.ground_truth)?;
        for (q, v) in self.views.iter().enumerate() {
            for (k, l) in v.lights.iter().enumerate() {
                if field.signed_distance(l.position) <= T::zero() {
                    return Err(Error::InvalidInput(format!("light {k} of view {q} lies inside the object")));
                }
            }
        }
        Ok(())
    }

    pub fn with_albedo(mut self, albedo: T) -> Self {
        self.albedo = Albedo::Constant(albedo);
        self
    }

    pub fn with_noise(mut self, sigma: T) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn light_count(&self) -> usize {
        self.views.iter().map(|v| v.lights.len()).sum()
    }
}

/// Built-in synthetic scenes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Sphere,
    Blob,
    TwoObject,
    Plane,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Sphere, Preset::Blob, Preset::TwoObject, Preset::Plane];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sphere => "sphere",
            Preset::Blob => "blob",
            Preset::TwoObject => "two-object",
            Preset::Plane => "plane",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::InvalidInput(format!("unknown preset '{s}' (expected sphere, blob, two-object or plane)"))
        })
    }
}

/// Rig geometry shared by the presets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigLayout {
    pub views: usize,
    pub lights_per_view: usize,
    /// Distance of every camera from the scene centre.
    pub camera_distance: f64,
    /// Elevations (degrees) of the camera rings; views alternate between them.
    pub elevations: [f64; 2],
    /// Radius of the light ring around each lens.
    pub ring_radius: f64,
    pub focal_length: f64,
    pub width: u32,
    pub height: u32,
    pub brightness: f64,
    pub angular_dissipation: f64,
}

impl Default for RigLayout {
    fn default() -> Self {
        Self {
            views: 12,
            lights_per_view: 8,
            camera_distance: 45.0,
            elevations: [30.0, -30.0],
            ring_radius: 15.0,
            focal_length: 380.0,
            width: 600,
            height: 400,
            brightness: 800.0,
            angular_dissipation: 1.0,
        }
    }
}

impl RigLayout {
    /// Cameras on a sphere around `center`, each aimed at it, with `lights_per_view` LEDs evenly
    /// spaced on a ring around the lens and aimed at `center` too.
    pub fn build<T: Real>(&self, center: Vec3<T>) -> Result<Vec<ViewRig<T>>> {
        let mut rigs = Vec::with_capacity(self.views);
        for q in 0..self.views {
            let ring = q % 2;
            let azimuth = (q as f64) * 360.0 / self.views as f64;
            let (az, el) = (azimuth.to_radians(), self.elevations[ring].to_radians());
            let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            let eye = center + dir.cast::<T>() * T::of(self.camera_distance);
            let up = if el.abs() > 1.5 { Vec3::unit(1) } else { Vec3::unit(2) };
            let camera = Camera::look_at(eye, center, up, T::of(self.focal_length), self.width, self.height)?;
            let right = camera.rotation.row(0);
            let down = camera.rotation.row(1);
            let lights = (0..self.lights_per_view)
                .map(|k| {
                    let t = (k as f64) * std::f64::consts::TAU / self.lights_per_view as f64;
                    let p = eye + (right * T::of(t.cos()) + down * T::of(t.sin())) * T::of(self.ring_radius);
                    PointLight::aimed(p, center, T::of(self.brightness), T::of(self.angular_dissipation))
                })
                .collect::<Result<Vec<_>>>()?;
            rigs.push(ViewRig { camera, lights });
        }
        Ok(rigs)
    }
}

/// Object radius shared by the presets.
pub const PRESET_RADIUS: f64 = 20.0;
/// Half size of the preset reconstruction cube.
pub const PRESET_HALF_EXTENT: f64 = 24.0;
pub const PRESET_SEED: u64 = 20_170_501;

/// Radial displacement of the blob preset on the unit sphere, within ±0.1.
pub fn blob_displacement(u: Vec3<f64>) -> f64 {
    0.05 * (3.0 * u.x).sin() * (2.0 * u.y).cos() + 0.03 * (4.0 * u.z).cos() + 0.02 * (5.0 * (u.x + u.y)).sin()
}

/// Ground-truth geometry of a preset.
pub fn preset_mesh<T: Real>(preset: Preset) -> TriangleMesh<T> {
    let r = PRESET_RADIUS;
    let mesh = match preset {
        // One subdivision finer than the others so that shading normals stay within a few 1e-5 rad
        // of the analytic sphere normal.
        Preset::Sphere => TriangleMesh::<f64>::icosphere(6, r, Vec3::zero()),
        Preset::Blob => TriangleMesh::<f64>::icosphere(5, 1.0, Vec3::zero())
            .map_vertices(|v| v * (r * (1.0 + blob_displacement(v)))),
        Preset::TwoObject => {
            let a = TriangleMesh::<f64>::icosphere(5, 10.0, Vec3::new(-11.5, 0.0, 0.0));
            let b = TriangleMesh::<f64>::icosphere(5, 10.0, Vec3::new(11.5, 0.0, 0.0));
            a.merged(&b)
        }
        // A square slab whose top face is the plane z = 0.
        Preset::Plane => faceted_cuboid(Vec3::new(-r, -r, -4.0), Vec3::new(r, r, 0.0)),
    };
    mesh.cast()
}

/// Cuboid with separate vertices per face, so interpolated normals are the exact face normals.
pub fn faceted_cuboid(min: Vec3<f64>, max: Vec3<f64>) -> TriangleMesh<f64> {
    let shared = TriangleMesh::cuboid(min, max);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for quad in shared.triangles.chunks(2) {
        let base = vertices.len() as u32;
        let corners = [quad[0][0], quad[0][1], quad[0][2], quad[1][2]];
        vertices.extend(corners.iter().map(|&i| shared.vertices[i as usize]));
        triangles.push([base, base + 1, base + 2]);
        triangles.push([base, base + 2, base + 3]);
    }
    TriangleMesh { vertices, triangles, albedo: None }
}

/// Preset scene with the default rig, albedo 0.8 and noiseless images.
pub fn preset_scene<T: Real>(preset: Preset) -> Result<SyntheticScene<T>> {
    let mut layout = RigLayout::default();
    if preset == Preset::Plane {
        // Every camera above the plane.
        layout.elevations = [60.0, 40.0];
    }
    let bounds = Cube::new(Vec3::splat(T::of(-PRESET_HALF_EXTENT)), T::of(2.0 * PRESET_HALF_EXTENT))?;
    let scene = SyntheticScene {
        name: preset.name().to_string(),
        ground_truth: preset_mesh(preset),
        views: layout.build(Vec3::zero())?,
        albedo: Albedo::Constant(T::of(0.8)),
        noise_sigma: T::zero(),
        seed: PRESET_SEED,
        bounds,
        radius: T::of(PRESET_RADIUS),
    };
    scene.validate()?;
    Ok(scene)
}
