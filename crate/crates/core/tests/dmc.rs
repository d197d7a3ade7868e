use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpmesh::dmc::*;
use sharpmesh::geom::{rotate_about_axis, Aabb};
use sharpmesh::mesh::{primitives, validate};
use sharpmesh::metrics::{directed_distance, hausdorff, sample_faces};
use sharpmesh::sdf::*;
use sharpmesh::voxel::{dilate, voxelize_surface, Structuring, VoxelPrior};
use sharpmesh::{Error, TriangleMesh, Vec3};

fn sphere() -> SphereSdf {
    SphereSdf { center: Vec3::new(0.003, -0.002, 0.001), radius: 0.4 }
}

fn extract_field<F: DistanceField>(field: &F, cfg: &ExtractionConfig) -> TriangleMesh {
    let grid = sample_sparse_grid(field, cfg.resolution, cfg.band_width()).unwrap();
    let hermite = collect_hermite(&grid, field);
    extract_dual_mesh(&grid, &hermite, cfg).unwrap()
}

fn nearest_vertex_distance(mesh: &TriangleMesh, q: &Vec3) -> f64 {
    mesh.vertices.iter().map(|v| (v - q).norm()).fold(f64::INFINITY, f64::min)
}

fn cube_corners(half: f64) -> Vec<Vec3> {
    (0..8)
        .map(|c| {
            Vec3::new(
                if c & 1 != 0 { half } else { -half },
                if c & 2 != 0 { half } else { -half },
                if c & 4 != 0 { half } else { -half },
            )
        })
        .collect()
}

#[test]
fn hermite_normals_are_radial_on_sphere() {
    let s = sphere();
    let grid = sample_sparse_grid(&s, 32, 2.0 / 32.0).unwrap();
    let hermite = collect_hermite(&grid, &s);
    assert!(!hermite.is_empty());
    let h = 1.0 / 32.0;
    for sample in &hermite {
        assert!((sample.normal.norm() - 1.0).abs() < 1e-9);
        let radial = (sample.point - s.center).normalize();
        assert!(sample.normal.dot(&radial).clamp(-1.0, 1.0).acos() < 2f64.to_radians());
        // crossing on the lattice edge segment
        let start = lattice_point(&sample.origin, 32);
        let d = sample.point - start;
        let a = sample.axis as usize;
        assert!(d[a] >= 0.0 && d[a] <= h);
        for o in (0..3).filter(|&o| o != a) {
            assert_eq!(d[o], 0.0);
        }
    }
}

#[test]
fn no_sign_change_no_samples_no_faces() {
    let mut cells = BTreeMap::new();
    cells.insert([3, 3, 3], [0.1; 8]);
    cells.insert([4, 3, 3], [0.2; 8]);
    let grid = SparseSdfGrid { resolution: 16, band: 0.125, cells, stats: SamplingStats::default() };
    let s = sphere();
    let hermite = collect_hermite(&grid, &s);
    assert!(hermite.is_empty());
    let mesh = extract_dual_mesh(&grid, &hermite, &ExtractionConfig::default().with_resolution(16)).unwrap();
    assert!(mesh.faces.is_empty());
}

#[test]
fn sphere_extraction_is_closed_and_close() {
    let s = sphere();
    let n = 64;
    let mesh = extract_field(&s, &ExtractionConfig::default().with_resolution(n));
    let r = validate(&mesh);
    assert!(r.watertight && r.manifold, "{r:?}");
    assert_eq!(mesh.euler_characteristic(), 2);
    let h = 1.0 / n as f64;
    // both directions: mesh samples to the sphere, and sphere samples to the mesh
    let to_sphere = directed_distance(&sample_faces(&mesh, 0.25 * h), &s);
    let reference = primitives::icosphere(s.radius, 6).translated(&s.center);
    let back = directed_distance(&sample_faces(&reference, 0.5 * h), &MeshSdf::new(mesh).unwrap());
    assert!(to_sphere <= 2.0 * h && back <= 2.0 * h, "{to_sphere} {back}");
}

#[test]
fn unit_cube_corners_recovered_in_linf_mode() {
    let n = 128;
    let out = remesh_watertight(&primitives::unit_cube(), &ExtractionConfig::default().with_resolution(n)).unwrap();
    let h = 1.0 / n as f64;
    for q in cube_corners(0.5) {
        assert!(nearest_vertex_distance(&out.mesh, &q) <= 1.5 * h);
    }
    assert!(validate(&out.mesh).watertight);
}

#[test]
fn missing_neighbor_is_reported() {
    let s = sphere();
    let cfg = ExtractionConfig::default().with_resolution(16);
    let mut grid = sample_sparse_grid(&s, 16, cfg.band_width()).unwrap();
    let hermite = collect_hermite(&grid, &s);
    let victim = grid.sign_change_cells()[0];
    grid.cells.remove(&victim);
    match extract_dual_mesh(&grid, &hermite, &cfg) {
        Err(Error::BandIncomplete { cells }) => assert!(cells.contains(&victim)),
        other => panic!("expected band error, got {other:?}"),
    }
}

#[test]
fn open_cube_remesh_is_watertight_with_volume() {
    let cube = primitives::box_mesh(Vec3::repeat(-0.4), Vec3::repeat(0.4));
    let open = primitives::remove_faces(&cube, |c| c.z > 0.39);
    let out = remesh_watertight(&open, &ExtractionConfig::default().with_resolution(64)).unwrap();
    let r = validate(&out.mesh);
    assert!(r.watertight && r.manifold, "{r:?}");
    let v = out.mesh.signed_volume();
    assert!((v / cube.signed_volume() - 1.0).abs() <= 0.10, "{v}");
}

#[test]
fn closed_sphere_remesh_converges() {
    let input = primitives::icosphere(0.4, 4);
    let mut errors = Vec::new();
    for n in [64u32, 128] {
        let out = remesh_watertight(&input, &ExtractionConfig::default().with_resolution(n)).unwrap();
        let h = 1.0 / n as f64;
        let d = hausdorff(&out.mesh, &input, 0.25 * h).unwrap();
        assert!(d <= 2.0 * h);
        errors.push(d);
    }
    // first-order convergence: halving h halves the error within a factor 1.5
    let ratio = errors[0] / errors[1];
    assert!(ratio >= 2.0 / 1.5, "{errors:?}");
}

fn rotated_cube_dihedral_error(mode: QefMode) -> (f64, f64) {
    let axis = Vec3::new(1.0, 2.0, 3.0).normalize();
    let (half, angle, n) = (0.28, 0.5, 128u32);
    let h = 1.0 / n as f64;
    let cube = primitives::box_mesh(Vec3::repeat(-half), Vec3::repeat(half))
        .map_vertices(|p| rotate_about_axis(p, &Vec3::zeros(), &axis, angle));
    let out = remesh_watertight(&cube, &ExtractionConfig::default().with_resolution(n).with_mode(mode)).unwrap();
    let mesh = out.mesh.map_vertices(|p| rotate_about_axis(p, &Vec3::zeros(), &axis, -angle));
    let corner = cube_corners(half)
        .iter()
        .map(|q| nearest_vertex_distance(&mesh, q))
        .fold(0.0, f64::max);
    (cube_edge_dihedral_error(&mesh, half, h), corner / h)
}

/// Mean |measured − 90°| over the 12 cube edges. Faces within 3h of an edge
/// (and away from its corners) are split by which adjacent side their normal
/// favors; the angle between the area-weighted group normals is measured.
fn cube_edge_dihedral_error(mesh: &TriangleMesh, half: f64, h: f64) -> f64 {
    let mut total = 0.0;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for (su, sv) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            let (mut na, mut nb) = (Vec3::zeros(), Vec3::zeros());
            for f in 0..mesh.faces.len() {
                let c = mesh.face_centroid(f);
                let (du, dv) = (c[u] - su * half, c[v] - sv * half);
                if c[axis].abs() > half - 4.0 * h || (du * du + dv * dv).sqrt() > 3.0 * h {
                    continue;
                }
                let n = mesh.face_normal(f) * mesh.face_area(f);
                if n[u] * su > n[v] * sv {
                    na += n;
                } else {
                    nb += n;
                }
            }
            let angle = na.normalize().dot(&nb.normalize()).clamp(-1.0, 1.0).acos();
            total += (angle - std::f64::consts::FRAC_PI_2).abs();
        }
    }
    total / 12.0
}

#[test]
fn linf_preserves_cube_edges_better_than_l2() {
    let (l2, _) = rotated_cube_dihedral_error(QefMode::L2);
    let (linf, corner) = rotated_cube_dihedral_error(QefMode::Linf);
    assert!(linf < l2, "linf {linf} l2 {l2}");
    assert!(corner <= 1.5, "corner offset {corner} h");
}

#[test]
fn hierarchical_matches_dense_with_covering_prior() {
    let mesh = primitives::icosphere(0.4, 3);
    let field = remesh_field(&mesh).unwrap();
    let cfg = ExtractionConfig::default().with_resolution(128);
    let dense = extract_field(&field, &cfg);
    let prior = dilate(&voxelize_surface(&mesh, 16).unwrap(), 1, Structuring::Chebyshev);
    let hier = extract_hierarchical(&field, &prior, &cfg).unwrap();
    assert_eq!(hier.mesh, dense);
    assert!(hier.watertight && hier.warnings.is_empty());
    let ratio = (128 / 16) as usize;
    assert!(hier.stats.fine_evaluations <= prior.occupied_count() * ratio.pow(3));
}

#[test]
fn hierarchical_prior_from_dense_ground_truth() {
    // prior = ancestors of the dense sign-change cells, exactly
    let field = remesh_field(&primitives::torus(0.3, 0.1, 32, 16)).unwrap();
    let cfg = ExtractionConfig::default().with_resolution(64);
    let grid = sample_sparse_grid(&field, 64, cfg.band_width()).unwrap();
    let mut prior = VoxelPrior::empty(8);
    for c in grid.sign_change_cells() {
        prior.set([c[0] / 8, c[1] / 8, c[2] / 8]);
    }
    let hier = extract_hierarchical(&field, &prior, &cfg).unwrap();
    assert_eq!(hier.mesh, extract_field(&field, &cfg));
}

#[test]
fn empty_prior_gives_empty_mesh_and_warning() {
    let field = remesh_field(&primitives::icosphere(0.3, 2)).unwrap();
    let cfg = ExtractionConfig::default().with_resolution(32);
    let hier = extract_hierarchical(&field, &VoxelPrior::empty(4), &cfg).unwrap();
    assert!(hier.mesh.faces.is_empty());
    assert_eq!(hier.stats.fine_evaluations, 0);
    assert!(!hier.warnings.is_empty());
}

#[test]
fn undersized_prior_reports_holes() {
    let mesh = primitives::icosphere(0.3, 2);
    let field = remesh_field(&mesh).unwrap();
    let cfg = ExtractionConfig::default().with_resolution(32);
    // keep only the lower half of the surface voxels
    let full = voxelize_surface(&mesh, 8).unwrap();
    let mut prior = VoxelPrior::empty(8);
    for c in full.occupied_cells().into_iter().filter(|c| c[2] < 4) {
        prior.set(c);
    }
    let hier = extract_hierarchical(&field, &prior, &cfg).unwrap();
    assert!(!hier.watertight);
    assert!(!hier.missing_cells.is_empty());
}

#[test]
fn config_json_keys() {
    let cfg: ExtractionConfig =
        serde_json::from_str(r#"{"resolution": 64, "qef_mode": "l2", "irls_iters": 4, "lambda": 0.01, "clamp": false}"#)
            .unwrap();
    assert_eq!(cfg.resolution, 64);
    assert_eq!(cfg.qef_mode, QefMode::L2);
    assert!(!cfg.clamp);
    assert!(serde_json::from_str::<ExtractionConfig>(r#"{"resolutio": 64}"#).is_err());
    for bad in [
        ExtractionConfig { resolution: 4, ..Default::default() },
        ExtractionConfig { lambda: -1.0, ..Default::default() },
        ExtractionConfig { irls_iters: 0, ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

fn noisy_corner_problem(rng: &mut ChaCha8Rng, h: f64) -> QefProblem {
    let q = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)) * h;
    let mut constraints = Vec::new();
    for i in 0..8 {
        let axis = i % 3;
        let mut n = Vec3::zeros();
        n[axis] = 1.0;
        n += Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let n = n.normalize();
        let mut tangent = Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)) * h;
        tangent[axis] = 0.0;
        let point = q + tangent + n * rng.gen_range(-0.05..0.05) * h;
        constraints.push(PlaneConstraint { point, normal: n, weight: 1.0 });
    }
    QefProblem::new(constraints, Aabb::new(Vec3::repeat(-0.5 * h), Vec3::repeat(0.5 * h))).unwrap()
}

#[test]
fn linf_beats_lattice_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1.0 / 128.0;
    for _ in 0..10 {
        let p = noisy_corner_problem(&mut rng, h);
        let s = solve_qef(&p, QefMode::Linf, 0.0, 16, true);
        let mut best = f64::INFINITY;
        for i in 0..41 {
            for j in 0..41 {
                for k in 0..41 {
                    let x = p.bounds.min + Vec3::new(i as f64, j as f64, k as f64) * (h / 40.0);
                    best = best.min(p.max_residual(&x));
                }
            }
        }
        assert!(s.max_residual <= best + 1e-3 * h, "{} vs lattice {}", s.max_residual, best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linf_trace_is_monotone(seed in 0u64..10_000, lambda in 0.0f64..0.01) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = noisy_corner_problem(&mut rng, 1.0);
        let trace = solve_linf_trace(&p, lambda, 12);
        for w in trace.iterates.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }

    #[test]
    fn l2_gradient_vanishes(seed in 0u64..10_000, lambda in 1e-4f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = noisy_corner_problem(&mut rng, 1.0);
        let x = solve_qef(&p, QefMode::L2, lambda, 1, false).vertex;
        let eps = 1e-6;
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut dx = Vec3::zeros();
            dx[a] = eps;
            g[a] = (p.l2_objective(&(x + dx), lambda) - p.l2_objective(&(x - dx), lambda)) / (2.0 * eps);
        }
        prop_assert!(g.norm() <= 1e-6, "gradient {}", g.norm());
    }
}
