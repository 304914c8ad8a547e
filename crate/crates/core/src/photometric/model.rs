use crate::geometry::{Image, Mask, PointLight, PsView, Vec3};
use crate::{Error, Real, Result};

/// Default lower bound of valid intensities; also the darkness floor of the ratio equations.
pub const SATURATION_LOW: f64 = 0.01;
/// Default upper bound of valid intensities.
pub const SATURATION_HIGH: f64 = 0.98;

/// Radiance factor of a near-field LED at `x`: `φ · max(ŝ · (x−p)/|x−p|, 0)^μ / |x−p|²`.
pub fn attenuation<T: Real>(light: &PointLight<T>, x: Vec3<T>) -> Result<T> {
    Ok(LightGeometry::new(light, x)?.attenuation)
}

/// Lambertian intensity of a surface point with unit normal `n` under `light`.
pub fn shade<T: Real>(x: Vec3<T>, n: Vec3<T>, albedo: T, light: &PointLight<T>) -> Result<T> {
    let g = LightGeometry::new(light, x)?;
    Ok(albedo * g.attenuation * n.dot(g.to_light).max(T::zero()))
}

/// Attenuation and unit surface-to-light direction of one light at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightGeometry<T> {
    pub attenuation: T,
    /// `(p − x) / |p − x|`.
    pub to_light: Vec3<T>,
}

impl<T: Real> LightGeometry<T> {
    pub fn new(light: &PointLight<T>, x: Vec3<T>) -> Result<Self> {
        let l = x - light.position;
        let dist2 = l.norm_squared();
        if !(dist2 > T::zero()) {
            return Err(Error::LightSingularity);
        }
        let dist = dist2.sqrt();
        let cos = light.direction.dot(l) / dist;
        let mu = light.angular_dissipation;
        let lobe = if mu == T::zero() {
            T::one()
        } else if cos <= T::zero() {
            T::zero()
        } else {
            cos.powf(mu)
        };
        Ok(Self { attenuation: light.brightness * lobe / dist2, to_light: -l / dist })
    }
}

/// Coefficient vector `b = i_h a_k l̂_k − i_k a_h l̂_h` of the ratio equation `b · ∇d = 0`.
pub fn ratio_coefficients<T: Real>(i_h: T, i_k: T, g_h: &LightGeometry<T>, g_k: &LightGeometry<T>) -> Vec3<T> {
    g_k.to_light * (i_h * g_k.attenuation) - g_h.to_light * (i_k * g_h.attenuation)
}

/// Ratio vector of lights `pair` of `view` at `x`. `None` when either image sample is invalid
/// or both intensities lie below `darkness_floor`.
pub fn ratio_vector<T: Real>(view: &PsView<T>, pair: (usize, usize), x: Vec3<T>, darkness_floor: T) -> Option<Vec3<T>> {
    let (h, k) = pair;
    if h == k || h >= view.light_count() || k >= view.light_count() {
        return None;
    }
    let proj = view.camera.project(x);
    if !proj.in_frustum {
        return None;
    }
    let i_h = view.sample_image(h, proj.u)?;
    let i_k = view.sample_image(k, proj.u)?;
    if i_h < darkness_floor && i_k < darkness_floor {
        return None;
    }
    let g_h = LightGeometry::new(&view.lights[h], x).ok()?;
    let g_k = LightGeometry::new(&view.lights[k], x).ok()?;
    Some(ratio_coefficients(i_h, i_k, &g_h, &g_k))
}

/// Valid pixels are those with `low < value < high`.
pub fn saturation_mask<T: Real>(image: &Image<T>, low: T, high: T) -> Mask {
    Mask { width: image.width, height: image.height, data: image.data.iter().map(|&v| v > low && v < high).collect() }
}

/// All unordered pairs `(h, k)`, `h < k`, of `n` lights.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|h| (h + 1..n).map(move |k| (h, k))).collect()
}

/// Pairs of each light with its successor around the ring, a reduced set for speed studies.
pub fn ring_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|h| (h.min((h + 1) % n), h.max((h + 1) % n))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, Mat3};

    fn light(p: Vec3<f64>, s: Vec3<f64>, phi: f64, mu: f64) -> PointLight<f64> {
        PointLight::new(p, s, phi, mu).unwrap()
    }

    #[test]
    fn attenuation_examples() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let iso = light(Vec3::zero(), z, 1.0, 0.0);
        assert_eq!(attenuation(&iso, Vec3::new(2.0, 0.0, 0.0)).unwrap(), 0.25);
        let cone = light(Vec3::zero(), z, 1.0, 1.0);
        assert_eq!(attenuation(&cone, Vec3::new(0.0, 0.0, 2.0)).unwrap(), 0.25);
        assert_eq!(attenuation(&cone, Vec3::new(2.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(attenuation(&cone, Vec3::new(0.0, 0.0, -2.0)).unwrap(), 0.0);
        assert!(matches!(attenuation(&cone, Vec3::zero()), Err(Error::LightSingularity)));
    }

    #[test]
    fn shade_examples() {
        let h = 3.0;
        let l = light(Vec3::new(0.0, 0.0, h), Vec3::new(0.0, 0.0, -1.0), h * h, 0.0);
        let n = Vec3::new(0.0, 0.0, 1.0);
        assert!((shade(Vec3::zero(), n, 1.0, &l).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(shade(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), 1.0, &l).unwrap(), 0.0);
        let p = Vec3::new(0.3, -0.2, 0.0);
        let full = shade(p, n, 1.0, &l).unwrap();
        assert_eq!(shade(p, n, 0.5, &l).unwrap(), 0.5 * full);
    }

    #[test]
    fn shade_is_monotone_in_angle() {
        let l = light(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0), 25.0, 1.0);
        let mut last = f64::INFINITY;
        for i in 0..=90 {
            let a = (i as f64).to_radians();
            let v = shade(Vec3::zero(), Vec3::new(a.sin(), 0.0, a.cos()), 1.0, &l).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn mirrored_lights_give_horizontal_b() {
        let t: f64 = 0.4;
        let gh = LightGeometry { attenuation: 2.0, to_light: Vec3::new(t.sin(), 0.0, t.cos()) };
        let gk = LightGeometry { attenuation: 2.0, to_light: Vec3::new(-t.sin(), 0.0, t.cos()) };
        let b = ratio_coefficients(0.5, 0.5, &gh, &gk);
        assert!((b - Vec3::new(-2.0 * 0.5 * 2.0 * t.sin(), 0.0, 0.0)).norm() < 1e-15);
        assert!(b.dot(Vec3::new(0.0, 0.0, 1.0)).abs() < 1e-15);
        let b = ratio_coefficients(0.0, 0.7, &gh, &gk);
        assert_eq!(b, -gh.to_light * (0.7 * 2.0));
    }

    #[test]
    fn ratio_vector_validity() {
        let cam = Camera::new(Mat3::identity(), Vec3::zero(), 10.0, [2.0, 2.0], 5, 5).unwrap();
        let lights = vec![
            light(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0, 1.0),
            light(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0, 1.0),
        ];
        let mut a = Image::new(5, 5);
        let b = Image::new(5, 5);
        a.set(2, 2, 0.5);
        let view = PsView::new(cam, lights, vec![a, b]).unwrap();
        let x = Vec3::new(0.0, 0.0, 10.0);
        assert!(ratio_vector(&view, (0, 1), x, 0.01).is_some());
        assert!(ratio_vector(&view, (0, 0), x, 0.01).is_none());
        // Both dark.
        assert!(ratio_vector(&view, (0, 1), Vec3::new(-2.0, -2.0, 10.0), 0.01).is_none());
        // Behind the camera.
        assert!(ratio_vector(&view, (0, 1), Vec3::new(0.0, 0.0, -10.0), 0.01).is_none());
    }

    #[test]
    fn saturation_defaults() {
        let img = Image::from_data(3, 1, vec![1.0, 0.5, 0.005]).unwrap();
        let m = saturation_mask(&img, SATURATION_LOW, SATURATION_HIGH);
        assert_eq!(m.data, vec![false, true, false]);
    }

    #[test]
    fn pair_enumeration() {
        assert_eq!(all_pairs(8).len(), 28);
        assert_eq!(all_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(ring_pairs(8).len(), 8);
        assert!(ring_pairs(8).iter().all(|&(h, k)| h < k));
    }
}
