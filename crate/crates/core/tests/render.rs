use proptest::prelude::*;
use sharpmesh::mesh::primitives;
use sharpmesh::render::*;
use sharpmesh::{TriangleMesh, Vec3};

fn front(size: u32) -> Camera {
    Camera::orthographic(0.5, Vec3::new(0.0, -2.0, 0.0), Vec3::zeros(), size).unwrap()
}

fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> TriangleMesh {
    TriangleMesh::new(
        vec![Vec3::from(a), Vec3::from(b), Vec3::from(c)],
        vec![[0, 1, 2]],
    )
}

#[test]
fn empty_and_full() {
    let cam = front(32);
    assert_eq!(rasterize(&TriangleMesh::default(), &cam).foreground_count(), 0);
    let quad = TriangleMesh::new(
        vec![
            Vec3::new(-2.0, 0.0, -2.0),
            Vec3::new(2.0, 0.0, -2.0),
            Vec3::new(2.0, 0.0, 2.0),
            Vec3::new(-2.0, 0.0, 2.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    );
    let img = rasterize(&quad, &cam);
    assert_eq!(img.foreground_count(), 32 * 32);
    assert!(img.depth.iter().all(|&d| (d - 2.0).abs() < 1e-12));
    let p = Camera::new(Lens::Perspective { fov: 1.0 }, Vec3::new(0.0, -2.0, 0.0), Vec3::zeros(), Vec3::z(), 16, 8).unwrap();
    let img = rasterize(&quad.map_vertices(|v| Vec3::new(2.0 * v.x, v.y, 2.0 * v.z)), &p);
    assert_eq!(img.foreground_count(), 16 * 8);
    assert!(img.depth.iter().all(|&d| (d - 2.0).abs() < 1e-9));
}

#[test]
fn sphere_disc_area() {
    let s = primitives::icosphere(0.4, 5);
    let img = rasterize(&s, &front(256));
    let expected = std::f64::consts::PI * (0.4 * 256.0f64).powi(2);
    let n = img.foreground_count() as f64;
    assert!((n - expected).abs() / expected < 0.01, "{n} vs {expected}");
    assert_eq!(rasterize(&s, &front(256)), img);
}

#[test]
fn trajectory() {
    let lens = Lens::Orthographic { half_height: 0.5 };
    let cams = uniform_trajectory(4, 0.0, 2.0, Vec3::zeros(), lens, 8, 8).unwrap();
    let expect = [Vec3::x(), Vec3::y(), -Vec3::x(), -Vec3::y()];
    for (c, e) in cams.iter().zip(expect) {
        assert!((c.position - e * 2.0).norm() < 1e-12);
        assert_eq!(c.target, Vec3::zeros());
    }
    let center = Vec3::new(0.1, 0.2, 0.3);
    for c in uniform_trajectory(7, 0.4, 1.5, center, lens, 8, 8).unwrap() {
        assert!(((c.position - center).norm() - 1.5).abs() < 1e-12);
    }
    let one = uniform_trajectory(1, 0.0, 2.0, Vec3::zeros(), lens, 8, 8).unwrap();
    assert!((one[0].position - Vec3::x() * 2.0).norm() < 1e-12);
    assert!(uniform_trajectory(0, 0.0, 2.0, Vec3::zeros(), lens, 8, 8).is_err());
    assert!(uniform_trajectory(2, 0.0, 0.0, Vec3::zeros(), lens, 8, 8).is_err());
    assert!(uniform_trajectory(2, std::f64::consts::FRAC_PI_2, 1.0, Vec3::zeros(), lens, 8, 8).is_err());
}

#[test]
fn one_pixel_translation_shifts_one_column() {
    let cam = front(128);
    let px = cam.pixel_size().unwrap();
    let s = primitives::icosphere(0.3, 3);
    let a = rasterize(&s, &cam);
    let b = rasterize(&s.translated(&Vec3::new(px, 0.0, 0.0)), &cam);
    for y in 0..128 {
        for x in 1..127 {
            assert_eq!(a.is_set(x, y), b.is_set(x + 1, y), "pixel {x},{y}");
        }
    }
}

#[test]
fn shared_edge_covers_each_pixel_once() {
    // Pixel centers lie exactly on the diagonal and on the outer edges.
    let cam = front(16);
    let h = cam.pixel_size().unwrap();
    let (lo, hi) = (-4.5 * h, 3.5 * h);
    let a = tri([lo, 0.0, lo], [hi, 0.0, lo], [hi, 0.0, hi]);
    let b = tri([lo, 0.0, lo], [hi, 0.0, hi], [lo, 0.0, hi]);
    let mut quad = a.clone();
    quad.append(&b);
    let (na, nb, nq) = (
        rasterize(&a, &cam).foreground_count(),
        rasterize(&b, &cam).foreground_count(),
        rasterize(&quad, &cam).foreground_count(),
    );
    assert_eq!(na + nb, nq);
    assert_eq!(nq, 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearer_triangle_wins(v in prop::collection::vec(-0.6f64..0.6, 18)) {
        let cam = front(24);
        let t1 = tri([v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]);
        let t2 = tri([v[9], v[10], v[11]], [v[12], v[13], v[14]], [v[15], v[16], v[17]]);
        let mut both = t1.clone();
        both.append(&t2);
        let (i1, i2, ib) = (rasterize(&t1, &cam), rasterize(&t2, &cam), rasterize(&both, &cam));
        for k in 0..ib.depth.len() {
            prop_assert_eq!(ib.depth[k], i1.depth[k].min(i2.depth[k]));
        }
    }

    #[test]
    fn iou_symmetric_and_exact(a in prop::collection::vec(any::<bool>(), 36), b in prop::collection::vec(any::<bool>(), 36)) {
        let (ia, ib) = (RasterImage::from_mask(6, 6, &a).unwrap(), RasterImage::from_mask(6, 6, &b).unwrap());
        let (x, y) = (silhouette_iou(&ia, &ib).unwrap(), silhouette_iou(&ib, &ia).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x == 1.0, a == b);
    }
}
