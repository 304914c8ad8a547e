use mvps::geometry::{rms_hausdorff, Camera, MeshDistance, PointLight, TriangleMesh, Vec3};
use mvps::octree::Cube;
use mvps::photometric::shade;
use mvps::synth::{
    degraded_estimate, faceted_cuboid, preset_scene, voxel_carve, Albedo, Preset, Quantization, Renderer, RigLayout,
    SyntheticScene, ViewRig,
};

type V = Vec3<f64>;

fn small_layout() -> RigLayout {
    RigLayout {
        views: 4,
        lights_per_view: 4,
        camera_distance: 4.5,
        elevations: [30.0, -30.0],
        ring_radius: 1.5,
        focal_length: 120.0,
        width: 96,
        height: 72,
        brightness: 8.0,
        angular_dissipation: 1.0,
    }
}

fn scene_of(mesh: TriangleMesh<f64>, views: Vec<ViewRig<f64>>) -> SyntheticScene<f64> {
    SyntheticScene {
        name: "test".into(),
        ground_truth: mesh,
        views,
        albedo: Albedo::Constant(0.6),
        noise_sigma: 0.0,
        seed: 7,
        bounds: Cube::new(V::splat(-2.0), 4.0).unwrap(),
        radius: 1.0,
    }
}

fn small_sphere_scene() -> SyntheticScene<f64> {
    scene_of(TriangleMesh::icosphere(5, 1.0, V::zero()), small_layout().build(V::zero()).unwrap())
}

/// Camera looking straight down at the plane z = 0 from height `h`, with one on-axis light.
fn plane_rig(h: f64, phi: f64) -> ViewRig<f64> {
    let eye = V::new(0.0, 0.0, h);
    let camera = Camera::look_at(eye, V::zero(), V::new(0.0, 1.0, 0.0), 100.0, 41, 41).unwrap();
    let light = PointLight::new(eye, V::new(0.0, 0.0, -1.0), phi, 0.0).unwrap();
    let other = PointLight::aimed(eye + V::new(1.0, 0.0, 0.0), V::zero(), phi, 0.0).unwrap();
    ViewRig { camera, lights: vec![light, other] }
}

#[test]
fn on_axis_plane_pixel_is_normalised() {
    let h = 5.0;
    let plane = faceted_cuboid(V::new(-3.0, -3.0, -1.0), V::new(3.0, 3.0, 0.0));
    let mut scene = scene_of(plane, vec![plane_rig(h, h * h)]);
    scene.albedo = Albedo::Constant(1.0);
    let img = Renderer::new(&scene).render(0, 0);
    assert!((img.get(20, 20) - 1.0).abs() < 1e-12, "centre {}", img.get(20, 20));
}

#[test]
fn occluder_casts_exact_zero_shadow() {
    let h = 5.0;
    let plane = faceted_cuboid(V::new(-3.0, -3.0, -1.0), V::new(3.0, 3.0, 0.0));
    // Small cube hovering between the plane and the light but off the camera's centre line.
    let blocker = faceted_cuboid(V::new(0.4, -0.2, 2.0), V::new(0.8, 0.2, 2.4));
    let rig = ViewRig {
        lights: vec![PointLight::aimed(V::new(1.2, 0.0, 5.0), V::zero(), 25.0, 0.0).unwrap(); 2],
        ..plane_rig(h, 25.0)
    };
    let scene = scene_of(plane.merged(&blocker), vec![rig]);
    let r = Renderer::new(&scene);
    let img = r.render(0, 0);
    let light = scene.views[0].lights[0].position;
    let mut shadowed = 0;
    for y in 0..41 {
        for x in 0..41 {
            let Some(hit) = r.trace(0, [x as f64, y as f64]) else { continue };
            if hit.point.z.abs() > 1e-9 {
                continue;
            }
            // Analytic oracle: does the segment to the light cross the blocker's box?
            let d = light - hit.point;
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            for a in 0..3 {
                let (lo, hi) = ([0.4, -0.2, 2.0][a], [0.8, 0.2, 2.4][a]);
                let (o, v) = (hit.point[a], d[a]);
                if v.abs() < 1e-15 {
                    if o < lo || o > hi {
                        t1 = -1.0;
                    }
                    continue;
                }
                let (ta, tb) = ((lo - o) / v, (hi - o) / v);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            let blocked = t0 <= t1;
            if blocked {
                shadowed += 1;
                assert_eq!(img.get(x, y), 0.0);
            } else {
                assert!(img.get(x, y) > 0.0);
            }
        }
    }
    assert!(shadowed > 5, "shadow covers {shadowed} pixels");
}

/// Per-pixel closed-form oracle: ray/sphere intersection and the analytic normal.
#[test]
fn sphere_render_matches_closed_form_shading() {
    let scene = small_sphere_scene();
    let r = Renderer::new(&scene);
    let cam = &scene.views[0].camera;
    let light = &scene.views[0].lights[1];
    let img = r.render(0, 1);
    let (o, mut checked, mut worst) = (cam.center(), 0, 0.0f64);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let d = cam.ray_direction([x as f64, y as f64]);
            let b = o.dot(d);
            let disc = b * b - (o.norm_squared() - 1.0);
            if disc < 0.05 {
                // Skip the silhouette rim where facets and the analytic sphere disagree.
                continue;
            }
            let p = o + d * (-b - disc.sqrt());
            let expected = shade(p, p, 0.6, light).unwrap();
            worst = worst.max((img.get(x, y) - expected).abs());
            checked += 1;
        }
    }
    assert!(checked > 1000);
    // Facet sag and normal interpolation of a subdivision-5 icosphere.
    assert!(worst < 0.01, "worst deviation {worst}");
}

#[test]
fn renders_are_deterministic_with_noise() {
    let scene = small_sphere_scene().with_noise(0.02);
    let a = Renderer::new(&scene).render(1, 2);
    let b = Renderer::new(&scene).render(1, 2);
    assert_eq!(a.data, b.data);
    let clean = Renderer::new(&small_sphere_scene()).render(1, 2);
    assert_ne!(a.data, clean.data);
    assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn sixteen_bit_quantisation_is_on_the_png_grid() {
    let scene = small_sphere_scene();
    let mut r = Renderer::new(&scene);
    r.quantization = Quantization::Sixteen;
    let img = r.render(0, 0);
    for &v in &img.data {
        let k = v * 65535.0;
        assert!((k - k.round()).abs() < 1e-6);
    }
}

#[test]
fn albedo_scales_unshadowed_pixels_linearly() {
    let base = small_sphere_scene();
    let doubled = small_sphere_scene().with_albedo(0.3);
    let a = Renderer::new(&base).render(2, 3);
    let b = Renderer::new(&doubled).render(2, 3);
    for (x, y) in a.data.iter().zip(&b.data) {
        assert!((y - x * 0.5).abs() < 1e-12);
    }
}

/// The same surface point under the same light has the same radiance seen from any camera.
#[test]
fn shading_is_view_independent() {
    let mut scene = small_sphere_scene();
    let lights = scene.views[0].lights.clone();
    scene.views[1].lights = lights;
    let r = Renderer::new(&scene);
    let cam0 = &scene.views[0].camera;
    let cam1 = &scene.views[1].camera;
    let mut compared = 0;
    for y in (0..cam0.height).step_by(6) {
        for x in (0..cam0.width).step_by(6) {
            let Some(h0) = r.trace(0, [x as f64, y as f64]) else { continue };
            let p1 = cam1.project(h0.point);
            if !p1.in_frustum {
                continue;
            }
            let Some(h1) = r.trace(1, p1.u) else { continue };
            if h1.point.distance(h0.point) > 1e-6 {
                continue;
            }
            for k in 0..scene.views[0].lights.len() {
                let (a, b) = (r.radiance(0, k, &h0), r.radiance(1, k, &h1));
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            compared += 1;
        }
    }
    assert!(compared > 5);
}

#[test]
fn visual_hull_contains_the_sphere() {
    let scene = small_sphere_scene();
    let r = Renderer::new(&scene);
    let views: Vec<_> = (0..4).map(|q| (scene.views[q].camera.clone(), r.silhouette(q))).collect();
    let hull = voxel_carve(&views, scene.bounds, 48).unwrap();
    assert!(hull.signed_volume() >= scene.ground_truth.signed_volume());
    let field = MeshDistance::new(&hull).unwrap();
    let cell = scene.bounds.size / 48.0;
    for v in &scene.ground_truth.vertices {
        assert!(field.signed_distance(*v) < cell, "sphere vertex outside hull");
    }
}

#[test]
fn single_view_hull_spans_the_bounds() {
    let scene = small_sphere_scene();
    let r = Renderer::new(&scene);
    let hull = voxel_carve(&[(scene.views[0].camera.clone(), r.silhouette(0))], scene.bounds, 32).unwrap();
    let (lo, hi) = hull.bounding_box().unwrap();
    let extent = (hi - lo).max_component();
    assert!(extent > 0.9 * scene.bounds.size, "extent {extent}");
}

#[test]
fn vertex_noise_increases_estimate_error() {
    let scene = preset_scene::<f64>(Preset::Sphere).unwrap();
    let clean = degraded_estimate(&scene, 1500, 0.0).unwrap();
    let noisy = degraded_estimate(&scene, 1500, 0.1).unwrap();
    assert_eq!(clean.triangles.len(), noisy.triangles.len());
    let e0 = rms_hausdorff(&clean, &scene.ground_truth, 5000).unwrap();
    let e1 = rms_hausdorff(&noisy, &scene.ground_truth, 5000).unwrap();
    assert!(e1 > e0, "{e1} <= {e0}");
}

#[test]
fn two_object_preset_casts_shadows() {
    let scene = preset_scene::<f64>(Preset::TwoObject).unwrap();
    let stats = Renderer::new(&scene).surface_shadow_stats(4000, 3);
    assert!(stats.fraction() >= 0.05, "shadowed fraction {}", stats.fraction());
    let sphere = preset_scene::<f64>(Preset::Sphere).unwrap();
    assert_eq!(Renderer::new(&sphere).surface_shadow_stats(1000, 3).shadowed, 0);
}

#[test]
fn presets_parse_and_validate() {
    for p in Preset::ALL {
        assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        let s = preset_scene::<f64>(p).unwrap();
        assert_eq!(s.views.len(), 12);
        assert_eq!(s.light_count(), 96);
    }
    assert!("cube".parse::<Preset>().is_err());
}
