use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpmesh::mesh::primitives;
use sharpmesh::sdf::{
    exact_winding, lattice_point, sample_sparse_grid, DistanceField, MeshSdf, SphereSdf, WindingMode,
};
use sharpmesh::{TriangleMesh, Vec3};

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// Crossings of the +x ray from p, Möller–Trumbore.
fn ray_parity_inside(mesh: &TriangleMesh, p: &Vec3) -> bool {
    let dir = Vec3::x();
    let mut hits = 0;
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let e1 = b - a;
        let e2 = c - a;
        let pv = dir.cross(&e2);
        let det = e1.dot(&pv);
        if det.abs() < 1e-14 {
            continue;
        }
        let tv = p - a;
        let u = tv.dot(&pv) / det;
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let qv = tv.cross(&e1);
        let v = dir.dot(&qv) / det;
        if v < 0.0 || u + v > 1.0 {
            continue;
        }
        if e2.dot(&qv) / det > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

#[test]
fn winding_sign_matches_ray_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mesh in [primitives::torus(0.3, 0.12, 32, 16), primitives::icosphere(0.35, 3)] {
        let sdf = MeshSdf::new(mesh.clone()).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let p = random_point(&mut rng, 0.5);
            let r = sdf.signed_distance(&p);
            if r.distance.abs() < 1e-6 {
                continue;
            }
            assert_eq!(r.distance < 0.0, ray_parity_inside(&mesh, &p), "at {p:?}");
            checked += 1;
        }
    }
}

#[test]
fn signed_distance_is_one_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sdf = MeshSdf::new(primitives::torus(0.3, 0.1, 24, 12)).unwrap();
    for _ in 0..2000 {
        let p = random_point(&mut rng, 0.6);
        let q = p + random_point(&mut rng, 0.1);
        let dp = sdf.signed_distance(&p).distance;
        let dq = sdf.signed_distance(&q).distance;
        assert!((dp - dq).abs() <= (p - q).norm() + 1e-9);
    }
}

#[test]
fn open_cube_sign_matches_intact_cube() {
    let intact = MeshSdf::new(primitives::unit_cube()).unwrap();
    let cube = primitives::unit_cube();
    // drop the +z side
    let open = primitives::remove_faces(&cube, |c| c.z > 0.49);
    assert_eq!(open.faces.len(), 10);
    let open = MeshSdf::new(open).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut tries = 0;
    while checked < 500 {
        tries += 1;
        let p = random_point(&mut rng, 0.8);
        // stay away from the hole's axis column
        if p.x.abs() < 0.5 && p.y.abs() < 0.5 && p.z > 0.0 {
            continue;
        }
        let r = open.signed_distance(&p);
        if (r.winding - 0.5).abs() <= 0.1 {
            continue;
        }
        let truth = intact.signed_distance(&p);
        assert_eq!(r.distance < 0.0, truth.distance < 0.0, "at {p:?}, w={}", r.winding);
        checked += 1;
    }
    assert!(tries < 5000);
}

#[test]
fn far_field_winding_tracks_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for mesh in [primitives::icosphere(0.4, 5), primitives::torus(0.3, 0.12, 100, 50)] {
        assert!(mesh.faces.len() >= 10_000);
        let sdf = MeshSdf::new(mesh.clone()).unwrap();
        assert!(matches!(sdf.winding, WindingMode::FarField { .. }));
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            let p = random_point(&mut rng, 0.55);
            let exact = exact_winding(&mesh, &p);
            let approx = sdf.winding_number(&p);
            worst = worst.max((approx - exact).abs());
        }
        assert!(worst <= 1e-3, "worst winding error {worst}");
    }
}

#[test]
fn grid_corners_equal_direct_evaluation() {
    let sdf = MeshSdf::new(primitives::icosphere(0.3, 3)).unwrap();
    let grid = sample_sparse_grid(&sdf, 24, 2.5 / 24.0).unwrap();
    assert!(!grid.cells.is_empty());
    for (c, corners) in &grid.cells {
        for (k, v) in corners.iter().enumerate() {
            let p = [c[0] + (k & 1) as i32, c[1] + ((k >> 1) & 1) as i32, c[2] + ((k >> 2) & 1) as i32];
            let direct = sdf.signed_distance(&lattice_point(&p, 24)).distance;
            assert_eq!(v.to_bits(), direct.to_bits());
        }
    }
    // shared corners are consistent between x-neighbors
    for (c, corners) in &grid.cells {
        if let Some(n) = grid.cells.get(&[c[0] + 1, c[1], c[2]]) {
            for k in [1, 3, 5, 7] {
                assert_eq!(corners[k].to_bits(), n[k - 1].to_bits());
            }
        }
    }
}

#[test]
fn sign_change_cells_are_active_for_open_mesh() {
    let open = primitives::open_sphere(0.35, 3, 40f64.to_radians());
    let sdf = MeshSdf::new(open).unwrap();
    let n = 32;
    let grid = sample_sparse_grid(&sdf, n, 2.0 / n as f64).unwrap();
    for (c, corners) in &grid.cells {
        for &(a, b, axis) in &sharpmesh::sdf::CELL_EDGES {
            if (corners[a] < 0.0) != (corners[b] < 0.0) {
                let o = sharpmesh::sdf::corner_offset(a);
                let p = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                for nb in sharpmesh::sdf::cells_around_edge(&p, axis) {
                    assert!(grid.cells.contains_key(&nb), "missing {nb:?}");
                }
            }
        }
    }
}

#[test]
fn sphere_active_count_near_shell_estimate() {
    let s = SphereSdf { center: Vec3::zeros(), radius: 0.4 };
    let n = 64u32;
    let h = 1.0 / n as f64;
    let band = 3.0 * h;
    let grid = sample_sparse_grid(&s, n, band).unwrap();
    let nf = n as f64;
    let estimate = 4.0 * std::f64::consts::PI * 0.16 * 2.0 * band * nf * nf * nf;
    let mut dense = 0usize;
    for i in 0..n as i32 {
        for j in 0..n as i32 {
            for k in 0..n as i32 {
                let c = Vec3::new((i as f64 + 0.5) * h - 0.5, (j as f64 + 0.5) * h - 0.5, (k as f64 + 0.5) * h - 0.5);
                if s.unsigned_distance(&c) <= band {
                    dense += 1;
                }
            }
        }
    }
    let count = grid.cells.len() as f64;
    assert_eq!(grid.cells.len(), dense);
    assert!((count / estimate - 1.0).abs() <= 0.10, "{count} vs {estimate}");
}
