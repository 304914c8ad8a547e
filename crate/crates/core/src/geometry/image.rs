use super::{Camera, PointLight};
use crate::{Error, Real, Result};

/// Row-major single-channel intensity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    pub width: u32,
    pub height: u32,
    pub data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![T::zero(); width as usize * height as usize] }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidInput("image data length does not match its dimensions".into()));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: T) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { data: self.data.iter().map(|&v| v * s).collect(), ..*self }
    }
}

impl<T: Copy> Image<T> {
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Per-pixel validity.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn valid_fraction(&self) -> f64 {
        self.data.iter().filter(|&&b| b).count() as f64 / self.data.len().max(1) as f64
    }
}

/// One calibrated viewpoint with its photometric stereo images, one per light.
#[derive(Clone, Debug)]
pub struct PsView<T> {
    pub camera: Camera<T>,
    pub lights: Vec<PointLight<T>>,
    pub images: Vec<Image<T>>,
    pub masks: Vec<Mask>,
}

impl<T: Real> PsView<T> {
    /// Builds a view with every pixel marked valid.
    pub fn new(camera: Camera<T>, lights: Vec<PointLight<T>>, images: Vec<Image<T>>) -> Result<Self> {
        let masks = images.iter().map(|i| Mask::filled(i.width, i.height, true)).collect();
        Self::with_masks(camera, lights, images, masks)
    }

    pub fn with_masks(
        camera: Camera<T>,
        lights: Vec<PointLight<T>>,
        images: Vec<Image<T>>,
        masks: Vec<Mask>,
    ) -> Result<Self> {
        if lights.len() < 2 {
            return Err(Error::InvalidInput("a view needs at least two lights to form image ratios".into()));
        }
        if images.len() != lights.len() || masks.len() != images.len() {
            return Err(Error::InvalidInput(format!(
                "view has {} lights, {} images and {} masks",
                lights.len(),
                images.len(),
                masks.len()
            )));
        }
        let dims = (camera.width, camera.height);
        if images.iter().any(|i| i.dims() != dims) || masks.iter().any(|m| (m.width, m.height) != dims) {
            return Err(Error::InvalidInput("image dimensions must equal the camera resolution".into()));
        }
        Ok(Self { camera, lights, images, masks })
    }

    pub fn light_count(&self) -> usize {
        self.lights.len()
    }

    /// Bilinear sample of image `light_index` at `u`; `None` when any support pixel is masked
    /// or outside the image.
    pub fn sample_image(&self, light_index: usize, u: [T; 2]) -> Option<T> {
        let support = BilinearSupport::new(u, self.camera.width, self.camera.height)?;
        support.sample(&self.images[light_index], &self.masks[light_index])
    }
}

/// The four pixels and weights of a bilinear lookup, shareable across the images of a view.
#[derive(Clone, Copy, Debug)]
pub struct BilinearSupport<T> {
    x0: u32,
    y0: u32,
    fx: T,
    fy: T,
}

impl<T: Real> BilinearSupport<T> {
    pub fn new(u: [T; 2], width: u32, height: u32) -> Option<Self> {
        if !(u[0] >= T::zero() && u[1] >= T::zero()) {
            return None;
        }
        let fx0 = u[0].floor();
        let fy0 = u[1].floor();
        let x0 = fx0.to_u32()?;
        let y0 = fy0.to_u32()?;
        let fx = u[0] - fx0;
        let fy = u[1] - fy0;
        // The second support pixel is only required when it carries weight.
        let need_x = fx > T::zero();
        let need_y = fy > T::zero();
        if x0 >= width || y0 >= height || (need_x && x0 + 1 >= width) || (need_y && y0 + 1 >= height) {
            return None;
        }
        Some(Self { x0, y0, fx, fy })
    }

    pub fn sample(&self, image: &Image<T>, mask: &Mask) -> Option<T> {
        let x1 = if self.fx > T::zero() { self.x0 + 1 } else { self.x0 };
        let y1 = if self.fy > T::zero() { self.y0 + 1 } else { self.y0 };
        if !(mask.get(self.x0, self.y0) && mask.get(x1, self.y0) && mask.get(self.x0, y1) && mask.get(x1, y1)) {
            return None;
        }
        let one = T::one();
        let top = image.get(self.x0, self.y0) * (one - self.fx) + image.get(x1, self.y0) * self.fx;
        let bottom = image.get(self.x0, y1) * (one - self.fx) + image.get(x1, y1) * self.fx;
        Some(top * (one - self.fy) + bottom * self.fy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Mat3, Vec3};

    fn view() -> PsView<f64> {
        let cam = Camera::new(Mat3::identity(), Vec3::zero(), 10.0, [2.0, 2.0], 4, 4).unwrap();
        let light = PointLight::new(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0), 1.0, 0.0).unwrap();
        let mut img = Image::new(4, 4);
        img.set(1, 1, 0.2);
        img.set(2, 1, 0.4);
        PsView::new(cam, vec![light.clone(), light], vec![img.clone(), img]).unwrap()
    }

    #[test]
    fn pixel_centre_returns_stored_value() {
        assert_eq!(view().sample_image(0, [1.0, 1.0]), Some(0.2));
    }

    #[test]
    fn midway_interpolates() {
        let v = view().sample_image(0, [1.5, 1.0]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn masked_support_pixel_invalidates() {
        let mut v = view();
        v.masks[0].data[1 * 4 + 2] = false;
        assert_eq!(v.sample_image(0, [1.5, 1.0]), None);
        assert!(v.sample_image(1, [1.5, 1.0]).is_some());
        assert_eq!(v.sample_image(0, [3.5, 1.0]), None);
        assert_eq!(v.sample_image(0, [-0.1, 1.0]), None);
    }

    #[test]
    fn rejects_single_light_and_bad_dims() {
        let v = view();
        assert!(PsView::new(v.camera.clone(), vec![v.lights[0].clone()], vec![v.images[0].clone()]).is_err());
        assert!(PsView::new(v.camera.clone(), v.lights.clone(), vec![Image::new(3, 4), Image::new(4, 4)]).is_err());
    }
}
