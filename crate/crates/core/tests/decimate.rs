use proptest::prelude::*;
use sharpmesh::decimate::{collapse_cost, decimate_detailed, decimate_to, vertex_quadrics};
use sharpmesh::mesh::{detect_sharp_edges, primitives, validate, EdgeSet};
use sharpmesh::metrics::hausdorff;
use sharpmesh::{Error, TriangleMesh, Vec3};

fn cube768() -> TriangleMesh {
    let c = primitives::unit_cube();
    primitives::subdivide_midpoint(&primitives::subdivide_midpoint(&primitives::subdivide_midpoint(&c)))
}

#[test]
fn subdivided_cube_collapses_losslessly() {
    let m = cube768();
    assert_eq!(m.faces.len(), 768);
    for preserve in [false, true] {
        let d = decimate_detailed(&m, 12, preserve, 30f64.to_radians()).unwrap();
        assert_eq!(d.mesh.faces.len(), 12);
        assert!(hausdorff(&d.mesh, &m, 0.02).unwrap() <= 1e-6);
        let r = validate(&d.mesh);
        assert!(r.watertight && r.manifold);
        let sharp = detect_sharp_edges(&d.mesh, 30f64.to_radians());
        assert_eq!(sharp.sharp.len(), 12);
        for e in &sharp.sharp.edges {
            assert!((e.deviation().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        }
    }
}

#[test]
fn sphere_keeps_topology() {
    let s = primitives::icosphere(0.4, 4);
    assert_eq!(s.faces.len(), 5120);
    let d = decimate_detailed(&s, 320, false, 0.5).unwrap();
    assert!(d.mesh.faces.len() <= 320 && d.mesh.faces.len() >= 318);
    let r = validate(&d.mesh);
    assert!(r.watertight && r.manifold);
    assert_eq!(d.mesh.euler_characteristic(), 2);
    assert!(!d.report.stopped_early);
}

#[test]
fn torus_keeps_genus() {
    let t = primitives::torus(0.3, 0.1, 48, 24);
    let d = decimate_to(&t, 400, false, 0.5).unwrap();
    assert!(validate(&d).manifold);
    assert_eq!(d.euler_characteristic(), 0);
}

#[test]
fn monotone_budget_and_error() {
    let s = primitives::icosphere(0.4, 3);
    let mut last_faces = usize::MAX;
    let mut last_error = -1.0;
    for target in [1000, 600, 300, 100, 40] {
        let d = decimate_detailed(&s, target, false, 0.5).unwrap();
        assert!(d.mesh.faces.len() <= last_faces);
        assert!(d.report.total_error >= last_error);
        last_faces = d.mesh.faces.len();
        last_error = d.report.total_error;
    }
}

#[test]
fn deterministic_reruns() {
    let s = primitives::torus(0.3, 0.1, 24, 12);
    assert_eq!(decimate_to(&s, 100, true, 0.5).unwrap(), decimate_to(&s, 100, true, 0.5).unwrap());
}

#[test]
fn rejects_non_manifold_input() {
    let mut m = primitives::unit_cube();
    let extra = m.vertices.len() as u32;
    m.vertices.push(Vec3::new(0.0, 0.0, 2.0));
    // a third face on the edge (0, 4)
    m.faces.push([0, 4, extra]);
    assert!(matches!(decimate_to(&m, 6, false, 0.5), Err(Error::NonManifold(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cost_equals_quadratic_form(edge in 0usize..1000) {
        let m = primitives::torus(0.3, 0.1, 24, 12);
        let q = vertex_quadrics(&m);
        let edges = EdgeSet::from_mesh(&m).edges;
        let e = &edges[edge % edges.len()];
        let [a, b] = e.vertices.map(|v| v as usize);
        let sum = q[a].add(&q[b]);
        let (cost, p) = collapse_cost(&sum, &m.vertices[a], &m.vertices[b]);
        let v = nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        let direct = (v.transpose() * sum.q * v)[0];
        prop_assert!(cost >= 0.0);
        prop_assert!((cost - direct).abs() <= 1e-9);
        prop_assert!((sum.q - sum.q.transpose()).norm() < 1e-15);
    }
}
