use std::fs;
use std::path::Path;

use mvps::geometry::io::{read_mesh, write_mesh};
use mvps::geometry::{rms_hausdorff, BilinearSupport, TriangleMesh, Vec3};
use mvps::octree::raycast::RAY_EPSILON_VOXELS;
use mvps::octree::{extract_mesh, raycast, write_volume, Cube, MeshOccluder, RayOutcome};
use mvps::photometric::{all_pairs, ratio_vector, LightGeometry};
use mvps::pipeline::{
    evaluate, preset_solver_config, reconstruct, write_outputs, write_scene, BenchmarkCell, BenchmarkTable, Inputs,
    Reconstructor, SceneConfig, SolverConfig, StopReason,
};
use mvps::solver::build_gradient;
use mvps::synth::{degraded_estimate, preset_scene, Albedo, Preset, Renderer, RigLayout, SyntheticScene};
use mvps::Error;

type V = Vec3<f64>;

/// Millimetre-scale sphere of radius 20, like the presets, at low resolution.
fn small_scene() -> SyntheticScene<f64> {
    let layout = RigLayout {
        views: 6,
        lights_per_view: 4,
        camera_distance: 90.0,
        elevations: [30.0, -30.0],
        ring_radius: 30.0,
        focal_length: 120.0,
        width: 96,
        height: 72,
        brightness: 3200.0,
        angular_dissipation: 1.0,
    };
    SyntheticScene {
        name: "small".into(),
        ground_truth: TriangleMesh::icosphere(4, 20.0, V::zero()),
        views: layout.build(V::zero()).unwrap(),
        albedo: Albedo::Constant(0.6),
        noise_sigma: 0.0,
        seed: 11,
        bounds: Cube::new(V::splat(-40.0), 80.0).unwrap(),
        radius: 20.0,
    }
}

fn small_params() -> SolverConfig {
    SolverConfig { base_level: 5, max_level: 5, hausdorff_samples: 2000, ..SolverConfig::default() }
}

fn small_inputs() -> Inputs {
    let scene = small_scene();
    let (views, _) = Renderer::new(&scene).render_all().unwrap();
    Inputs {
        views,
        initial_mesh: degraded_estimate(&scene, 300, 0.0).unwrap(),
        ground_truth: Some(scene.ground_truth.clone()),
        bounds: scene.bounds,
        params: small_params(),
    }
}

#[test]
fn exported_scene_reconstructs_in_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene();
    let initial = degraded_estimate(&scene, 300, 0.0).unwrap();
    let path = write_scene(&scene, &initial, small_params(), dir.path()).unwrap();
    let config = SceneConfig::load(&path).unwrap();
    assert_eq!(config.views.len(), 6);
    let inputs = Inputs::from_config(&config).unwrap();
    let rec = reconstruct(&inputs, true).unwrap();
    assert_eq!(rec.report.rounds.len(), 1);
    assert_eq!(rec.report.stop_reason, StopReason::MaxLevel);
    assert!(rec.report.rounds[0].cg.converged);
    assert_eq!(rec.report.mesh.boundary_edges, 0);
    let albedo = rec.albedo.as_ref().unwrap();
    assert_eq!(albedo.albedo.len(), rec.mesh.vertices.len());
    let written = write_outputs(&config, &rec, Some(&dir.path().join("volume.sdf"))).unwrap();
    assert_eq!(written.len(), 3);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&written[1]).unwrap()).unwrap();
    assert_eq!(report["rounds"].as_array().unwrap().len(), 1);
    assert!(report["hausdorff"]["forward"]["rms"].as_f64().unwrap() < 0.5);
    let back = read_mesh::<f64>(&written[0]).unwrap();
    assert_eq!(back.triangles.len(), rec.mesh.triangles.len());
}

/// Recount of the round-0 equations from the public photometric pieces.
#[test]
fn equation_count_matches_an_independent_recount() {
    let inputs = small_inputs();
    let rec = Reconstructor::new(&inputs).unwrap();
    let vol = rec.volume();
    let g = build_gradient(vol);
    let assembly = rec.assemble(&g);
    let occ = MeshOccluder::new(&inputs.initial_mesh, RAY_EPSILON_VOXELS * vol.finest_edge());
    let floor = inputs.params.saturation_low;
    let mut count = 0;
    for v in 0..vol.len() {
        let Some(n) = g.gradient_at(v, vol.d()).try_normalized() else { continue };
        let x = vol.voxel_center(v);
        let foot = x - n * vol.d()[v];
        for view in &inputs.views {
            let cam = &view.camera;
            if n.dot(cam.view_direction(foot)) <= 0.0 || raycast(&occ, foot, cam.center()) == RayOutcome::Blocked {
                continue;
            }
            let proj = cam.project(foot);
            if !proj.in_frustum || BilinearSupport::new(proj.u, cam.width, cam.height).is_none() {
                continue;
            }
            let lit = |k: usize| {
                let l = LightGeometry::new(&view.lights[k], foot).unwrap();
                n.dot(l.to_light) > 0.0 && raycast(&occ, foot, view.lights[k].position) == RayOutcome::Clear
            };
            for pair in all_pairs(view.light_count()) {
                if ratio_vector(view, pair, foot, floor).is_some() && lit(pair.0) && lit(pair.1) {
                    count += 1;
                }
            }
        }
    }
    assert!(count > 0);
    assert_eq!(assembly.equations, count);
    assert!(assembly.visible_pairs >= assembly.equations + assembly.shadowed_pairs);
}

#[test]
fn reconstruction_is_deterministic() {
    let inputs = small_inputs();
    let a = reconstruct(&inputs, false).unwrap();
    let b = reconstruct(&inputs, false).unwrap();
    assert_eq!(a.mesh, b.mesh);
    assert_eq!(a.volume.d(), b.volume.d());
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.sdf"), dir.path().join("b.sdf"));
    write_volume(&pa, &a.volume).unwrap();
    write_volume(&pb, &b.volume).unwrap();
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
}

#[test]
fn cg_iteration_cap_is_reported_as_a_warning() {
    let mut inputs = small_inputs();
    inputs.params.cg_max_iters = 2;
    let rec = reconstruct(&inputs, false).unwrap();
    assert!(!rec.report.rounds[0].cg.converged);
    assert!(rec.report.has_warnings());
}

/// Sphere preset from a noisy 1500-triangle estimate: every round stays within 5% of the
/// previous error and the result beats the initial estimate.
#[test]
fn sphere_preset_improves_on_a_noisy_estimate() {
    let scene = preset_scene::<f64>(Preset::Sphere).unwrap();
    let (views, _) = Renderer::new(&scene).render_all().unwrap();
    let params = SolverConfig { max_level: 7, ..preset_solver_config(Preset::Sphere) };
    let inputs = Inputs {
        views,
        initial_mesh: degraded_estimate(&scene, 1500, 0.10).unwrap(),
        ground_truth: None,
        bounds: scene.bounds,
        params,
    };
    let initial = rms_hausdorff(&inputs.initial_mesh, &scene.ground_truth, 10_000).unwrap();
    let mut rec = Reconstructor::new(&inputs).unwrap();
    let mut errors = Vec::new();
    loop {
        rec.solve_round().unwrap();
        errors.push(rms_hausdorff(&extract_mesh(rec.volume()), &scene.ground_truth, 10_000).unwrap());
        if rec.advance().is_some() {
            break;
        }
    }
    assert_eq!(errors.len(), 2);
    assert!(errors[1] <= errors[0] * 1.05, "{errors:?}");
    assert!(*errors.last().unwrap() < initial, "{errors:?} vs initial {initial}");
    assert!(rec.rounds()[0].shadowed_pair_fraction > 0.0);
}

fn write_sphere(path: &Path, r: f64) {
    write_mesh(path, &TriangleMesh::icosphere(4, r, V::zero())).unwrap();
}

#[test]
fn evaluate_identical_and_offset_spheres() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ply"), dir.path().join("b.ply"));
    write_sphere(&a, 20.0);
    write_sphere(&b, 20.1);
    let same = evaluate(&a, &a, 4000).unwrap();
    assert!(same.hausdorff.forward.rms < 1e-9);
    let off = evaluate(&a, &b, 4000).unwrap();
    assert!((off.hausdorff.forward.rms - 0.1).abs() < 1e-3, "{}", off.hausdorff.forward.rms);
    assert!((off.hausdorff.backward.rms - 0.1).abs() < 1e-3);
    assert!(off.summary().contains("rms"));
    assert!(matches!(evaluate(&a, &dir.path().join("missing.ply"), 10), Err(Error::Io { .. })));
}

fn valid_config(dir: &Path) -> serde_json::Value {
    let scene = small_scene();
    let path = write_scene(&scene, &scene.ground_truth, small_params(), dir).unwrap();
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn load_edited(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> mvps::Result<SceneConfig> {
    let mut v = valid_config(dir);
    edit(&mut v);
    let path = dir.join("edited.json");
    fs::write(&path, v.to_string()).unwrap();
    SceneConfig::load(&path)
}

#[test]
fn config_errors_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let edits: Vec<(&str, Box<dyn FnOnce(&mut serde_json::Value)>)> = vec![
        ("schema", Box::new(|v| v["schema_version"] = 99.into())),
        ("lambda", Box::new(|v| v["solver"]["lambda"] = (-1.0).into())),
        ("levels", Box::new(|v| v["solver"]["max_level"] = 2.into())),
        ("unknown field", Box::new(|v| v["colour"] = "red".into())),
        ("missing image", Box::new(|v| v["views"][0]["lights"][1]["image"] = "nope.png".into())),
        ("one light", Box::new(|v| v["views"][2]["lights"].as_array_mut().unwrap().truncate(1))),
        ("bad rotation", Box::new(|v| v["views"][0]["camera"]["rotation"][0][0] = 2.0.into())),
    ];
    for (name, edit) in edits {
        let err = load_edited(dir.path(), edit).expect_err(name);
        assert!(matches!(err, Error::Config(_)), "{name}: {err}");
        assert!(err.is_input_error());
    }
    assert!(load_edited(dir.path(), |_| {}).is_ok());
    assert!(SceneConfig::load(&dir.path().join("absent.json")).unwrap_err().is_input_error());
}

#[test]
fn benchmark_csv_has_noise_rows_and_budget_columns() {
    let cell = |t: Option<usize>, n: Option<f64>, v: Option<f64>| BenchmarkCell {
        label: String::new(),
        triangles: t,
        noise: n,
        initial_rms: None,
        final_rms: v,
        error: v.is_none().then(|| "failed".into()),
        wall_time_s: 0.0,
    };
    let mut cells = Vec::new();
    for (i, n) in [0.0, 0.05, 0.10].into_iter().enumerate() {
        for (j, t) in [250, 500, 1500, 10_000].into_iter().enumerate() {
            let v = (i, j) != (2, 3);
            cells.push(cell(Some(t), Some(n), v.then_some((i * 10 + j) as f64)));
        }
    }
    cells.push(cell(None, None, Some(0.5)));
    let table = BenchmarkTable { preset: "sphere".into(), cells };
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "noise,250,500,1500,10000,visual_hull");
    assert_eq!(lines[1], "0.00,0.000000,1.000000,2.000000,3.000000,0.500000");
    assert_eq!(lines[3], "0.10,20.000000,21.000000,22.000000,,");
    assert_eq!(table.failures().count(), 1);
}
