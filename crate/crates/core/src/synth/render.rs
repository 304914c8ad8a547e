use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::scene::{Albedo, SyntheticScene};
use crate::geometry::bvh::Bvh;
use crate::geometry::io::quantize16;
use crate::geometry::{Image, Mask, PsView, Vec3};
use crate::photometric::LightGeometry;
use crate::{Real, Result};

/// Intensity encoding of rendered images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Quantization {
    /// Unquantised floats.
    #[default]
    Float,
    /// Rounded to the 16-bit PNG grid.
    Sixteen,
}

/// First surface point seen through a pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit<T> {
    pub point: Vec3<T>,
    /// Interpolated unit vertex normal.
    pub normal: Vec3<T>,
    pub albedo: T,
}

/// Ray tracer for one synthetic scene.
pub struct Renderer<'a, T> {
    scene: &'a SyntheticScene<T>,
    bvh: Bvh<T>,
    normals: Vec<Vec3<T>>,
    shadow_epsilon: T,
    pub quantization: Quantization,
}

/// Shadowed and lit surface-point/light pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ShadowStats {
    /// Pairs facing the light whose segment to it is blocked.
    pub shadowed: usize,
    /// All pairs facing the light.
    pub facing: usize,
}

impl ShadowStats {
    pub fn fraction(&self) -> f64 {
        if self.facing == 0 {
            0.0
        } else {
            self.shadowed as f64 / self.facing as f64
        }
    }

    fn add(self, o: Self) -> Self {
        Self { shadowed: self.shadowed + o.shadowed, facing: self.facing + o.facing }
    }
}

impl<'a, T: Real> Renderer<'a, T> {
    pub fn new(scene: &'a SyntheticScene<T>) -> Self {
        Self {
            scene,
            bvh: Bvh::new(&scene.ground_truth),
            normals: scene.ground_truth.vertex_normals(),
            shadow_epsilon: scene.bounds.size * T::of(1e-6),
            quantization: Quantization::Float,
        }
    }

    pub fn scene(&self) -> &SyntheticScene<T> {
        self.scene
    }

    /// Surface seen through image coordinate `u` of `view`.
    pub fn trace(&self, view: usize, u: [T; 2]) -> Option<SurfaceHit<T>> {
        let camera = &self.scene.views[view].camera;
        let origin = camera.center();
        let dir = camera.ray_direction(u);
        let hit = self.bvh.first_hit(origin, dir, T::zero(), T::infinity())?;
        let tri = self.scene.ground_truth.triangles[hit.triangle];
        let w = [T::one() - hit.u - hit.v, hit.u, hit.v];
        let mut n = Vec3::zero();
        for (c, &i) in tri.iter().enumerate() {
            n += self.normals[i as usize] * w[c];
        }
        let normal =
            n.try_normalized().unwrap_or_else(|| self.scene.ground_truth.triangle_cross(hit.triangle).normalized());
        let albedo = match &self.scene.albedo {
            Albedo::Constant(a) => *a,
            Albedo::PerVertex(a) => tri.iter().enumerate().map(|(c, &i)| a[i as usize] * w[c]).sum(),
        };
        Some(SurfaceHit { point: origin + dir * hit.t, normal, albedo })
    }

    /// Whether the segment from surface point `x` to `target` meets the mesh.
    pub fn occluded(&self, x: Vec3<T>, target: Vec3<T>) -> bool {
        let delta = target - x;
        let len = delta.norm();
        if len <= self.shadow_epsilon * T::of(2.0) {
            return false;
        }
        self.bvh.any_hit(x, delta / len, self.shadow_epsilon, len - self.shadow_epsilon)
    }

    /// Noise-free radiance of `hit` under light `light` of `view`, zero in cast shadow.
    pub fn radiance(&self, view: usize, light: usize, hit: &SurfaceHit<T>) -> T {
        let l = &self.scene.views[view].lights[light];
        let Ok(g) = LightGeometry::new(l, hit.point) else { return T::zero() };
        let cos = hit.normal.dot(g.to_light);
        if cos <= T::zero() || self.occluded(hit.point, l.position) {
            return T::zero();
        }
        hit.albedo * g.attenuation * cos
    }

    /// Image of `view` under `light`: background 0, optional seeded Gaussian noise, clamped to
    /// `[0, 1]`.
    pub fn render(&self, view: usize, light: usize) -> Image<T> {
        let hits = self.hits(view);
        self.render_with_hits(view, light, &hits)
    }

    fn hits(&self, view: usize) -> Vec<Option<SurfaceHit<T>>> {
        let cam = &self.scene.views[view].camera;
        let (w, h) = (cam.width, cam.height);
        (0..w * h).into_par_iter().map(|i| self.trace(view, [T::of((i % w) as f64), T::of((i / w) as f64)])).collect()
    }

    fn render_with_hits(&self, view: usize, light: usize, hits: &[Option<SurfaceHit<T>>]) -> Image<T> {
        let cam = &self.scene.views[view].camera;
        let (w, h) = (cam.width as usize, cam.height as usize);
        let sigma = self.scene.noise_sigma.as_f64();
        let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        let mut data = vec![T::zero(); w * h];
        data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let mut rng = normal.map(|_| ChaCha8Rng::seed_from_u64(noise_seed(self.scene.seed, view, light, y)));
            for (x, out) in row.iter_mut().enumerate() {
                let mut v = hits[y * w + x].as_ref().map_or(T::zero(), |hit| self.radiance(view, light, hit));
                if let (Some(n), Some(rng)) = (normal.as_ref(), rng.as_mut()) {
                    v = v + T::of(n.sample(rng));
                }
                v = v.max(T::zero()).min(T::one());
                *out = match self.quantization {
                    Quantization::Float => v,
                    Quantization::Sixteen => quantize16(v),
                };
            }
        });
        Image::from_data(w as u32, h as u32, data).expect("image size matches camera")
    }

    /// All images of `view`, plus its silhouette.
    pub fn render_view(&self, view: usize) -> (Vec<Image<T>>, Mask) {
        let hits = self.hits(view);
        let n = self.scene.views[view].lights.len();
        let images = (0..n).map(|k| self.render_with_hits(view, k, &hits)).collect();
        let cam = &self.scene.views[view].camera;
        let silhouette =
            Mask { width: cam.width, height: cam.height, data: hits.iter().map(Option::is_some).collect() };
        (images, silhouette)
    }

    /// Every view as photometric-stereo input with all pixels valid, and the silhouettes.
    pub fn render_all(&self) -> Result<(Vec<PsView<T>>, Vec<Mask>)> {
        let mut views = Vec::with_capacity(self.scene.views.len());
        let mut silhouettes = Vec::with_capacity(self.scene.views.len());
        for q in 0..self.scene.views.len() {
            let (images, sil) = self.render_view(q);
            let rig = &self.scene.views[q];
            views.push(PsView::new(rig.camera.clone(), rig.lights.clone(), images)?);
            silhouettes.push(sil);
        }
        Ok((views, silhouettes))
    }

    /// Silhouette of `view`.
    pub fn silhouette(&self, view: usize) -> Mask {
        let cam = &self.scene.views[view].camera;
        Mask { width: cam.width, height: cam.height, data: self.hits(view).iter().map(Option::is_some).collect() }
    }

    /// Cast-shadow count over `samples` area-uniform surface points and every light of every
    /// view that faces them.
    pub fn surface_shadow_stats(&self, samples: usize, seed: u64) -> ShadowStats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = self.scene.ground_truth.sample_surface(samples, &mut rng);
        points
            .par_iter()
            .map(|&x| {
                let mut s = ShadowStats::default();
                let Some(cp) = self.bvh.closest_point(x) else { return s };
                let n = self.scene.ground_truth.triangle_cross(cp.triangle);
                for l in self.scene.views.iter().flat_map(|v| &v.lights) {
                    if n.dot(l.position - x) > T::zero() {
                        s.facing += 1;
                        if self.occluded(x, l.position) {
                            s.shadowed += 1;
                        }
                    }
                }
                s
            })
            .reduce(ShadowStats::default, ShadowStats::add)
    }
}

fn noise_seed(seed: u64, view: usize, light: usize, row: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [view as u64, light as u64, row as u64] {
        h = (h ^ v).wrapping_mul(0x1000_0000_01b3).rotate_left(29);
    }
    h
}
