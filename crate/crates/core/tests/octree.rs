use mvps::geometry::{MeshDistance, TriangleMesh, Vec3};
use mvps::octree::{
    build_initial_volume, extract_mesh, raycast, Axis, Cube, Direction, MeshOccluder, Occluder, RayOutcome, SdfVolume,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type V = Vec3<f64>;

fn unit_sphere_bounds() -> Cube<f64> {
    Cube::new(Vec3::splat(-2.0), 4.0).unwrap()
}

/// Brute-force count of grid cells whose centre satisfies `pred(radius)`.
fn count_cells(bounds: Cube<f64>, level: u8, pred: impl Fn(f64) -> bool) -> usize {
    let n = 1u32 << level;
    let mut count = 0;
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                if pred(bounds.cell_center(level, [x, y, z]).norm()) {
                    count += 1;
                }
            }
        }
    }
    count
}

#[test]
fn initial_band_is_surface_proportional() {
    let bounds = unit_sphere_bounds();
    let level = 5;
    let h = bounds.cell_edge(level);
    let mesh = TriangleMesh::icosphere(5, 1.0, Vec3::zero());
    let vol = build_initial_volume(&mesh, bounds, level).unwrap();
    assert_eq!(vol.leaf_count(), 1 << (3 * level));
    // The band is the analytic shell |r − 1| < 2h up to facet error of the mesh.
    let shell = count_cells(bounds, level, |r| (r - 1.0).abs() < 2.0 * h);
    let rel = (vol.len() as f64 - shell as f64).abs() / shell as f64;
    assert!(rel < 0.03, "band {} vs shell {shell}", vol.len());
    // One-voxel-thick voxelisation of the surface.
    let thin = count_cells(bounds, level, |r| (r - 1.0).abs() < 0.5 * h);
    let ratio = vol.len() as f64 / thin as f64;
    assert!((3.0..=6.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn initial_volume_errors() {
    let mesh = TriangleMesh::icosphere(3, 1.0, Vec3::new(5.0, 0.0, 0.0));
    assert!(build_initial_volume(&mesh, unit_sphere_bounds(), 4).is_err());
}

#[test]
fn subdivision_growth_is_surface_like() {
    let bounds = unit_sphere_bounds();
    let mut vol = SdfVolume::from_fn(bounds, 4, |p| p.norm() - 1.0).unwrap();
    for _ in 0..2 {
        let before = vol.len();
        vol.subdivide_band();
        let ratio = vol.len() as f64 / before as f64;
        assert!((3.0..=6.0).contains(&ratio), "ratio {ratio}");
        // Children carry the parent-level interpolant and respect the tighter band.
        for v in 0..vol.len() {
            assert!(vol.d()[v].abs() < 2.0 * vol.voxel_edge(v));
        }
    }
    // Analytic check at the new level.
    let shell = count_cells(bounds, vol.level(), |r| (r - 1.0).abs() < 2.0 * vol.finest_edge());
    let rel = (vol.len() as f64 - shell as f64).abs() / shell as f64;
    assert!(rel < 0.05, "band {} vs shell {shell}", vol.len());
}

#[test]
fn subdivision_is_idempotent_when_nothing_qualifies() {
    let bounds = unit_sphere_bounds();
    let mut vol = SdfVolume::from_fn(bounds, 3, |p| p.norm() - 1.0).unwrap();
    let d: Vec<f64> = vol.d().iter().map(|_| 10.0).collect();
    vol.set_d(d).unwrap();
    let leaves = vol.leaf_count();
    assert_eq!(vol.subdivide_band(), 0);
    assert_eq!(vol.leaf_count(), leaves);
}

/// Level 2 everywhere, level 3 for x ≥ 2 in bounds [0, 4]³; every leaf in the band.
fn two_level_tree() -> SdfVolume<f64> {
    let bounds = Cube::new(Vec3::zero(), 4.0).unwrap();
    SdfVolume::from_split_fn(bounds, |l, c| l < 2 || (l == 2 && c[0] >= 2), |_| 0.0).unwrap()
}

#[test]
fn neighbor_lookup_across_level_transition() {
    let vol = two_level_tree();
    assert_eq!(vol.len(), 2 * 4 * 4 + 2 * 4 * 4 * 8);
    let mut checked = 0;
    for v in 0..vol.len() {
        let node = vol.voxel_node(v);
        if node.level == 3 && node.coords[0] == 4 {
            // Fine voxel on the transition: its −x neighbour is the coarse leaf covering it.
            let n = vol.neighbor_lookup(v, Axis::X, Direction::Backward).expect("coarse neighbour");
            let coarse = vol.voxel_node(n);
            assert_eq!(coarse.level, 2);
            assert_eq!(coarse.coords, [1, node.coords[1] / 2, node.coords[2] / 2]);
            let spacing = vol.voxel_center(v).x - vol.voxel_center(n).x;
            assert!((spacing - 1.5 * vol.voxel_edge(v)).abs() < 1e-12);
            checked += 1;
        }
        if node.level == 2 && node.coords[0] == 1 {
            // The coarse side sees a finer region: no neighbour.
            assert_eq!(vol.neighbor_lookup(v, Axis::X, Direction::Forward), None);
        }
    }
    assert_eq!(checked, 64);
}

#[test]
fn neighbor_lookup_slab_interior_and_boundary() {
    // Band slab |z| < 2h around the plane z = 0.
    let bounds = Cube::new(Vec3::splat(-1.0), 2.0).unwrap();
    let vol = SdfVolume::from_fn(bounds, 4, |p| p.z).unwrap();
    let h = bounds.cell_edge(4);
    for v in 0..vol.len() {
        let c = vol.voxel_center(v);
        let up = vol.neighbor_lookup(v, Axis::Z, Direction::Forward);
        if c.z + h < 2.0 * h {
            let n = up.expect("interior neighbour");
            assert!((vol.voxel_center(n) - (c + Vec3::new(0.0, 0.0, h))).norm() < 1e-12);
        } else {
            assert_eq!(up, None);
        }
    }
}

#[test]
fn sphere_extraction_radius() {
    let bounds = unit_sphere_bounds();
    let vol = SdfVolume::from_fn(bounds, 6, |p| p.norm() - 1.0).unwrap();
    let h = vol.finest_edge();
    let mesh = extract_mesh(&vol);
    assert!(!mesh.is_empty());
    assert_eq!(mesh.boundary_edge_count(), 0);
    assert!(mesh.signed_volume() > 0.0);
    for p in &mesh.vertices {
        assert!((p.norm() - 1.0).abs() <= 0.5 * h, "{}", p.norm());
    }
}

#[test]
fn distance_transform_round_trip_rms() {
    let bounds = unit_sphere_bounds();
    let mesh = TriangleMesh::icosphere(6, 1.0, Vec3::zero());
    let vol = build_initial_volume(&mesh, bounds, 6).unwrap();
    let out = extract_mesh(&vol);
    let rms = (out.vertices.iter().map(|p| (p.norm() - 1.0).powi(2)).sum::<f64>() / out.vertices.len() as f64).sqrt();
    assert!(rms < 0.5 * vol.finest_edge(), "rms {rms}");
}

#[test]
fn extraction_is_crack_free_across_levels() {
    let bounds = unit_sphere_bounds();
    // Finer on the x > 0 half.
    let vol = SdfVolume::from_split_fn(bounds, |l, c| l < 4 || (l == 4 && c[0] >= 8), |p: V| p.norm() - 1.0).unwrap();
    assert_eq!(vol.level(), 5);
    let mesh = extract_mesh(&vol);
    assert_eq!(mesh.boundary_edge_count(), 0);
    mesh.check_orientation().unwrap();
    let h = bounds.cell_edge(4);
    for p in &mesh.vertices {
        assert!((p.norm() - 1.0).abs() < h, "{}", p.norm());
    }
}

/// Two spheres side by side, the setting in which shadows are cast.
fn two_spheres() -> TriangleMesh<f64> {
    let a = TriangleMesh::icosphere(4, 6.0, Vec3::new(-7.0, 0.0, 0.0));
    let b = TriangleMesh::icosphere(4, 6.0, Vec3::new(7.0, 0.0, 0.0));
    a.merged(&b)
}

#[test]
fn sdf_raycast_agrees_with_mesh_raycast() {
    let mesh = two_spheres();
    let bounds = Cube::new(Vec3::splat(-16.0), 32.0).unwrap();
    let mut vol = build_initial_volume(&mesh, bounds, 6).unwrap();
    vol.subdivide_band();
    let h = vol.finest_edge();
    let eps = vol.ray_epsilon();
    let exact = MeshOccluder::new(&mesh, eps);
    let field = MeshDistance::new(&mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let origins = mesh.sample_surface(1000, &mut rng);
    let (mut clear, mut clear_agree, mut deep, mut deep_agree) = (0, 0, 0, 0);
    for &x in &origins {
        let dir = V::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let light = x + dir.normalized() * 45.0;
        let sdf_blocked = raycast(&vol, x, light) == RayOutcome::Blocked;
        if raycast(&exact, x, light) == RayOutcome::Clear {
            clear += 1;
            clear_agree += usize::from(!sdf_blocked);
        } else {
            // Deepest penetration along the trimmed segment, sampled finely.
            let len = (light - x).norm();
            let u = (light - x) / len;
            let steps = ((len - 2.0 * eps) / (0.1 * h)) as usize;
            let depth =
                (0..=steps).map(|i| field.signed_distance(x + u * (eps + i as f64 * 0.1 * h))).fold(0.0, f64::min);
            if depth < -2.0 * h {
                deep += 1;
                deep_agree += usize::from(sdf_blocked);
            }
        }
    }
    assert!(clear > 100 && deep > 100, "clear {clear}, deep {deep}");
    assert!(clear_agree as f64 >= 0.99 * clear as f64, "{clear_agree}/{clear}");
    assert_eq!(deep_agree, deep);
}

#[test]
fn constructed_cube_occluder() {
    let cube = TriangleMesh::cuboid(Vec3::splat(-0.5), Vec3::splat(0.5));
    let bounds = Cube::new(Vec3::splat(-4.0), 8.0).unwrap();
    let vol = build_initial_volume(&cube, bounds, 6).unwrap();
    let (x, light) = (V::new(0.0, 0.0, -2.0), V::new(0.0, 0.0, 2.0));
    assert_eq!(raycast(&vol, x, light), RayOutcome::Blocked);
    assert_eq!(raycast(&MeshOccluder::new(&cube, vol.ray_epsilon()), x, light), RayOutcome::Blocked);
    let empty = TriangleMesh::<f64>::default();
    assert_eq!(raycast(&MeshOccluder::new(&empty, 0.01), x, light), RayOutcome::Clear);
}

fn sphere_volume() -> &'static SdfVolume<f64> {
    use std::sync::OnceLock;
    static VOL: OnceLock<SdfVolume<f64>> = OnceLock::new();
    VOL.get_or_init(|| SdfVolume::from_fn(unit_sphere_bounds(), 5, |p| p.norm() - 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn raycast_is_symmetric(ax in -3.0..3.0f64, ay in -3.0..3.0f64, az in -3.0..3.0f64,
                            bx in -3.0..3.0f64, by in -3.0..3.0f64, bz in -3.0..3.0f64) {
        let vol = sphere_volume();
        let (a, b) = (V::new(ax, ay, az), V::new(bx, by, bz));
        prop_assert_eq!(vol.blocks(a, b), vol.blocks(b, a));
    }

    #[test]
    fn neighbor_lookup_is_consistent(seed in 0usize..10_000) {
        let vol = sphere_volume();
        let v = seed % vol.len();
        for axis in Axis::ALL {
            if let Some(n) = vol.neighbor_lookup(v, axis, Direction::Forward) {
                if vol.voxel_node(n).level == vol.voxel_node(v).level {
                    prop_assert_eq!(vol.neighbor_lookup(n, axis, Direction::Backward), Some(v));
                }
            }
        }
    }
}
