use proptest::prelude::*;
use sharpmesh::geom::triangle_box_overlap;
use sharpmesh::mesh::primitives;
use sharpmesh::sdf::sample_sparse_grid;
use sharpmesh::sdf::MeshSdf;
use sharpmesh::voxel::{coverage_check, dilate, positional_encoding, voxelize_surface, Structuring, VoxelPrior};
use sharpmesh::{TriangleMesh, Vec3};

fn brute_force(mesh: &TriangleMesh, m: u32) -> VoxelPrior {
    let h = 1.0 / m as f64;
    let mut p = VoxelPrior::empty(m);
    for i in 0..m as i32 {
        for j in 0..m as i32 {
            for k in 0..m as i32 {
                let c = Vec3::new((i as f64 + 0.5) * h - 0.5, (j as f64 + 0.5) * h - 0.5, (k as f64 + 0.5) * h - 0.5);
                if (0..mesh.faces.len()).any(|f| triangle_box_overlap(&c, &Vec3::repeat(0.5 * h), mesh.triangle(f))) {
                    p.set([i, j, k]);
                }
            }
        }
    }
    p
}

#[test]
fn unit_cube_shell_at_four() {
    let p = voxelize_surface(&primitives::unit_cube(), 4).unwrap();
    assert_eq!(p.occupied_count(), 56);
    for c in [[1, 1, 1], [2, 2, 2], [1, 2, 1]] {
        assert!(!p.get(c));
    }
    assert_eq!(p, brute_force(&primitives::unit_cube(), 4));
}

#[test]
fn triangle_inside_one_cell() {
    let m = TriangleMesh::new(
        vec![Vec3::new(0.01, 0.01, 0.01), Vec3::new(0.02, 0.01, 0.01), Vec3::new(0.01, 0.02, 0.015)],
        vec![[0, 1, 2]],
    );
    let p = voxelize_surface(&m, 16).unwrap();
    assert_eq!(p.occupied_cells(), vec![[8, 8, 8]]);
}

#[test]
fn voxelization_equals_exhaustive_oracle() {
    for mesh in [
        primitives::icosphere(0.37, 2),
        primitives::torus(0.3, 0.1, 16, 8),
        primitives::box_mesh(Vec3::new(-0.31, -0.2, -0.05), Vec3::new(0.27, 0.33, 0.41)),
    ] {
        assert_eq!(voxelize_surface(&mesh, 16).unwrap(), brute_force(&mesh, 16));
    }
}

#[test]
fn coverage_reports() {
    let mesh = primitives::icosphere(0.3, 3);
    let grid = sample_sparse_grid(&MeshSdf::new(mesh.clone()).unwrap(), 32, 2.0 / 32.0).unwrap();
    let dilated = dilate(&voxelize_surface(&mesh, 8).unwrap(), 1, Structuring::Chebyshev);
    assert!(coverage_check(&dilated, &grid).unwrap().is_covered());
    assert!(coverage_check(&VoxelPrior::full(8), &grid).unwrap().is_covered());
    let empty = coverage_check(&VoxelPrior::empty(8), &grid).unwrap();
    assert_eq!(empty.missed, grid.sign_change_cells());
    assert!(!empty.missed.is_empty());
    assert!(coverage_check(&VoxelPrior::empty(6), &grid).is_err());
}

fn prior_from(cells: &[(u8, u8, u8)]) -> VoxelPrior {
    let mut p = VoxelPrior::empty(10);
    for &(i, j, k) in cells {
        p.set([i as i32 % 10, j as i32 % 10, k as i32 % 10]);
    }
    p
}

fn cheb_oracle(p: &VoxelPrior, r: i32) -> VoxelPrior {
    let mut out = VoxelPrior::empty(p.resolution);
    for c in p.occupied_cells() {
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    out.set([c[0] + dx, c[1] + dy, c[2] + dz]);
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dilation_properties(cells in proptest::collection::vec((0u8..10, 0u8..10, 0u8..10), 0..12), a in 0u32..3, b in 0u32..3) {
        let p = prior_from(&cells);
        let da = dilate(&p, a, Structuring::Chebyshev);
        let dab = dilate(&da, b, Structuring::Chebyshev);
        prop_assert!(p.occupied_cells().iter().all(|c| da.get(*c)));
        prop_assert!(da.occupied_cells().iter().all(|c| dab.get(*c)));
        let direct = dilate(&p, a + b, Structuring::Chebyshev);
        prop_assert_eq!(&dab, &direct);
        let oracle = cheb_oracle(&p, a as i32);
        prop_assert_eq!(da.occupied_cells(), oracle.occupied_cells());
        let l1 = dilate(&p, a, Structuring::L1);
        prop_assert!(l1.occupied_cells().iter().all(|c| da.get(*c)));
    }

    #[test]
    fn encoding_is_a_bijection(cells in proptest::collection::vec((0u8..10, 0u8..10, 0u8..10), 0..30)) {
        let p = prior_from(&cells);
        let e = positional_encoding(&p);
        prop_assert_eq!(e.entries.len(), p.occupied_count());
        let mut back: Vec<[i32; 3]> = e.entries.iter().map(|x| x.cell).collect();
        back.sort_by_key(|c| (c[2], c[1], c[0]));
        prop_assert_eq!(back, p.occupied_cells());
    }
}
