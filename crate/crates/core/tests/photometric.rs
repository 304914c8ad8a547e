use mvps::geometry::{Camera, Mat3, PointLight, PsView, TriangleMesh, Vec3};
use mvps::octree::{Cube, MeshOccluder};
use mvps::photometric::{
    assemble_voxel_system, attenuation, rank_corrected, ratio_coefficients, ratio_vector, recover_albedo,
    saturation_mask, shade, LightGeometry, RatioEquation, SATURATION_HIGH, SATURATION_LOW,
};
use mvps::synth::{Albedo, Renderer, RigLayout, SyntheticScene};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

type V = Vec3<f64>;

fn vec3() -> impl Strategy<Value = V> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| V::new(x, y, z))
}

fn unit() -> impl Strategy<Value = V> {
    vec3().prop_filter("non-degenerate", |v| v.norm() > 0.2).prop_map(|v| v.normalized())
}

/// LED somewhere above the origin, aimed at it.
fn light_above() -> impl Strategy<Value = PointLight<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64, 2.0..8.0f64, 10.0..200.0f64, 0.0..3.0f64)
        .prop_map(|(x, y, z, phi, mu)| PointLight::aimed(V::new(x, y, z), V::zero(), phi, mu).unwrap())
}

fn nalgebra_eigenvalues(m: Mat3<f64>) -> [f64; 3] {
    let r = |i: usize| m.row(i);
    let na = Matrix3::new(r(0).x, r(0).y, r(0).z, r(1).x, r(1).y, r(1).z, r(2).x, r(2).y, r(2).z);
    let mut ev: Vec<f64> = SymmetricEigen::new(na).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [ev[0], ev[1], ev[2]]
}

proptest! {
    /// Intensities produced by the model satisfy the ratio equation against the true normal.
    #[test]
    fn model_intensities_satisfy_the_ratio_equation(n in unit(), rho in 0.05..1.0f64, lh in light_above(), lk in light_above()) {
        let x = V::zero();
        let i_h = shade(x, n, rho, &lh).unwrap();
        let i_k = shade(x, n, rho, &lk).unwrap();
        prop_assume!(i_h > 1e-6 && i_k > 1e-6);
        let gh = LightGeometry::new(&lh, x).unwrap();
        let gk = LightGeometry::new(&lk, x).unwrap();
        let b = ratio_coefficients(i_h, i_k, &gh, &gk);
        let scale = i_h * gk.attenuation + i_k * gh.attenuation;
        prop_assert!(b.dot(n).abs() <= 1e-12 * scale.max(1e-300));
    }

    /// Shading is linear in the albedo.
    #[test]
    fn shading_is_linear_in_albedo(x in vec3(), n in unit(), p in vec3(), c in 0.0..4.0f64) {
        let light = PointLight::new(p * 5.0 + V::new(0.0, 0.0, 6.0), V::new(0.0, 0.0, -1.0), 50.0, 1.0).unwrap();
        let a = shade(x, n, 0.2, &light).unwrap();
        let b = shade(x, n, 0.2 * c, &light).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + a.abs() * c));
    }

    /// B′ is symmetric with smallest eigenvalue 1 and q₃ a unit vector, for any equation set.
    #[test]
    fn rank_correction_invariants(bs in prop::collection::vec((vec3(), 0.0..1.0f64), 0..12), prior in unit()) {
        let eqs: Vec<_> = bs.iter().map(|&(b, w)| RatioEquation { b, weight: w, view: 0, pair: (0, 1) }).collect();
        let sys = assemble_voxel_system(&eqs, prior);
        prop_assert!(sys.b_prime.is_symmetric(1e-12));
        let ev = nalgebra_eigenvalues(sys.b_prime);
        prop_assert!((ev[0] - 1.0).abs() <= 1e-9, "eigenvalues {:?}", ev);
        prop_assert!((sys.q3.norm() - 1.0).abs() <= 1e-9);
        prop_assert!(sys.q3.dot(prior) >= 0.0);
        // q₃ lies in the kernel of the uncorrected matrix when the voxel is well constrained.
        if sys.well_constrained {
            let r = sys.b_prime.mul_vec(sys.q3) - sys.q3;
            prop_assert!(r.norm() <= 1e-9 * (1.0 + ev[2]));
        }
    }
}

#[test]
fn attenuation_follows_inverse_square_on_axis() {
    let l = PointLight::new(V::zero(), V::new(0.0, 0.0, 1.0), 9.0, 2.0).unwrap();
    for d in [0.5, 1.0, 3.0, 10.0] {
        let a = attenuation(&l, V::new(0.0, 0.0, d)).unwrap();
        assert!((a - 9.0 / (d * d)).abs() < 1e-12);
    }
    // 60° off axis with μ = 2 gives cos² = 1/4.
    let x = V::new(3f64.sqrt(), 0.0, 1.0);
    assert!((attenuation(&l, x).unwrap() - 9.0 * 0.25 / 4.0).abs() < 1e-12);
}

/// A plane viewed by one camera with a ring of lights: q₃ from the image ratios recovers the
/// plane normal.
#[test]
fn plane_ratios_recover_the_normal() {
    let n = V::new(0.0, 0.0, 1.0);
    let eye = V::new(0.0, -3.0, 40.0);
    let cam = Camera::look_at(eye, V::zero(), V::new(0.0, 1.0, 0.0), 300.0, 200, 160).unwrap();
    let lights: Vec<_> = (0..6)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 6.0;
            PointLight::aimed(eye + V::new(12.0 * t.cos(), 12.0 * t.sin(), 0.0), V::zero(), 900.0, 1.0).unwrap()
        })
        .collect();
    // Images rendered directly from the model at each pixel's plane point.
    let images = lights
        .iter()
        .map(|l| {
            let mut img = mvps::geometry::Image::new(cam.width, cam.height);
            for y in 0..cam.height {
                for x in 0..cam.width {
                    let d = cam.ray_direction([x as f64, y as f64]);
                    let t = -eye.z / d.z;
                    img.set(x, y, shade(eye + d * t, n, 0.7, l).unwrap());
                }
            }
            img
        })
        .collect();
    let view = PsView::new(cam, lights, images).unwrap();
    let mut worst: f64 = 0.0;
    for &(x, y) in &[(0.0, 0.0), (3.0, -2.0), (-5.0, 4.0), (6.5, 6.5), (-7.0, -3.3)] {
        let p = V::new(x, y, 0.0);
        let eqs: Vec<_> = mvps::photometric::all_pairs(6)
            .into_iter()
            .filter_map(|pair| {
                ratio_vector(&view, pair, p, 0.0).map(|b| RatioEquation { b, weight: 1.0, view: 0, pair })
            })
            .collect();
        assert_eq!(eqs.len(), 15);
        let sys = assemble_voxel_system(&eqs, V::new(0.1, 0.0, 1.0));
        assert!(sys.well_constrained);
        worst = worst.max(sys.q3.dot(n).clamp(-1.0, 1.0).acos().to_degrees());
    }
    // Bilinear interpolation of a smooth image is the only error source.
    assert!(worst < 0.05, "worst angle {worst}°");
}

#[test]
fn degenerate_systems_fall_back_to_the_prior() {
    let prior = V::new(1.0, 2.0, 2.0);
    let zero = rank_corrected(Mat3::zero(), prior, 1e-4);
    assert!(!zero.well_constrained);
    assert_eq!(zero.b_prime, Mat3::identity());
    assert!((zero.q3 - prior.normalized()).norm() < 1e-15);
    let undefined = rank_corrected(Mat3::zero(), V::zero(), 1e-4);
    assert_eq!(undefined.q3, V::new(0.0, 0.0, 1.0));
}

/// Uniform-albedo render of a sphere: least squares over every view and light returns the
/// albedo at every visible vertex.
#[test]
fn albedo_round_trip_on_a_small_sphere() {
    let truth = TriangleMesh::icosphere(4, 1.0, V::zero());
    let layout = RigLayout {
        views: 4,
        lights_per_view: 4,
        camera_distance: 4.0,
        elevations: [25.0, -20.0],
        ring_radius: 1.2,
        focal_length: 150.0,
        width: 160,
        height: 120,
        brightness: 6.0,
        angular_dissipation: 1.0,
    };
    let scene = SyntheticScene {
        name: "albedo".into(),
        ground_truth: truth.clone(),
        views: layout.build(V::zero()).unwrap(),
        albedo: Albedo::Constant(0.45),
        noise_sigma: 0.0,
        seed: 1,
        bounds: Cube::new(V::splat(-1.5), 3.0).unwrap(),
        radius: 1.0,
    };
    let (views, _) = Renderer::new(&scene).render_all().unwrap();
    // Saturation masks drop the black background, as the pipeline does on load.
    let views: Vec<_> = views
        .into_iter()
        .map(|v| {
            let masks = v.images.iter().map(|i| saturation_mask(i, SATURATION_LOW, SATURATION_HIGH)).collect();
            PsView::with_masks(v.camera, v.lights, v.images, masks).unwrap()
        })
        .collect();
    let occ = MeshOccluder::new(&truth, 1e-3);
    let est = recover_albedo(&truth, &views, &occ);
    assert!(est.visible_count() > truth.vertices.len() / 2);
    for (a, &vis) in est.albedo.iter().zip(&est.visible) {
        if vis {
            // Coarse images: a pixel covers a good part of a facet here.
            assert!((a - 0.45).abs() < 5e-3, "albedo {a}");
        } else {
            assert_eq!(*a, 0.0);
        }
    }
}
