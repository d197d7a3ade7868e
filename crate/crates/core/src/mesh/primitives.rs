//! Procedural meshes used as fixtures: boxes, spheres, tori, cylinders.
//! All closed primitives are outward oriented.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::TriangleMesh;
use crate::geom::Vec3;

/// Axis-aligned cube spanning [−0.5, 0.5]³. Vertex `i` has coordinate bits
/// (x = bit 0, y = bit 1, z = bit 2); faces come in pairs per cube side.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5))
}

pub fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 != 0 { max.x } else { min.x },
                if i & 2 != 0 { max.y } else { min.y },
                if i & 4 != 0 { max.z } else { min.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
    ];
    TriangleMesh::new(vertices, faces)
}

/// Split every triangle into four through edge midpoints (no smoothing).
pub fn subdivide_midpoint(mesh: &TriangleMesh) -> TriangleMesh {
    let mut vertices = mesh.vertices.clone();
    let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
    let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        *cache.entry(key).or_insert_with(|| {
            vertices.push((vertices[a as usize] + vertices[b as usize]) * 0.5);
            vertices.len() as u32 - 1
        })
    };
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriangleMesh::new(vertices, faces)
}

/// Geodesic sphere: icosahedron subdivided `level` times, 20·4^level faces.
pub fn icosphere(radius: f64, level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let vertices: Vec<Vec3> = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut mesh = TriangleMesh::new(vertices, faces);
    for _ in 0..level {
        mesh = subdivide_midpoint(&mesh);
        for v in &mut mesh.vertices {
            *v = v.normalize();
        }
    }
    for v in &mut mesh.vertices {
        *v *= radius;
    }
    orient_outward(mesh)
}

/// Latitude/longitude sphere with `rings` latitude bands and `segments`
/// longitude segments.
pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let phi = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let th = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(
                radius * phi.sin() * th.cos(),
                radius * phi.sin() * th.sin(),
                radius * phi.cos(),
            ));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let south = vertices.len() as u32 - 1;
    let ring = |r: usize, s: usize| -> u32 { 1 + ((r - 1) * segments + s % segments) as u32 };
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
        faces.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    orient_outward(TriangleMesh::new(vertices, faces))
}

/// Torus around the z axis with `2·major_segments·minor_segments` faces.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let v = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| -> u32 {
        ((i % major_segments) * minor_segments + j % minor_segments) as u32
    };
    let mut faces = Vec::with_capacity(2 * major_segments * minor_segments);
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    orient_outward(TriangleMesh::new(vertices, faces))
}

/// Closed cylinder along `axis` (0 = x, 1 = y, 2 = z) centered at `center`.
pub fn cylinder(
    radius: f64,
    length: f64,
    segments: usize,
    length_segments: usize,
    axis: usize,
    center: Vec3,
) -> TriangleMesh {
    let place = |along: f64, a: f64, b: f64| -> Vec3 {
        let local = match axis {
            0 => Vec3::new(along, a, b),
            1 => Vec3::new(b, along, a),
            _ => Vec3::new(a, b, along),
        };
        local + center
    };
    let mut vertices = Vec::new();
    for l in 0..=length_segments {
        let along = -0.5 * length + length * l as f64 / length_segments as f64;
        for s in 0..segments {
            let th = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(place(along, radius * th.cos(), radius * th.sin()));
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(place(-0.5 * length, 0.0, 0.0));
    let top = vertices.len() as u32;
    vertices.push(place(0.5 * length, 0.0, 0.0));
    let idx = |l: usize, s: usize| -> u32 { (l * segments + s % segments) as u32 };
    let mut faces = Vec::new();
    for l in 0..length_segments {
        for s in 0..segments {
            let (a, b, c, d) = (idx(l, s), idx(l, s + 1), idx(l + 1, s + 1), idx(l + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for s in 0..segments {
        faces.push([bottom, idx(0, s + 1), idx(0, s)]);
        faces.push([top, idx(length_segments, s), idx(length_segments, s + 1)]);
    }
    orient_outward(TriangleMesh::new(vertices, faces))
}

/// Flip every face when the enclosed signed volume is negative.
pub fn orient_outward(mut mesh: TriangleMesh) -> TriangleMesh {
    if mesh.signed_volume() < 0.0 {
        for f in &mut mesh.faces {
            f.swap(1, 2);
        }
    }
    mesh
}

/// Remove faces matching `pred` (applied to the face centroid).
pub fn remove_faces(mesh: &TriangleMesh, pred: impl Fn(&Vec3) -> bool) -> TriangleMesh {
    let faces = (0..mesh.faces.len())
        .filter(|&f| !pred(&mesh.face_centroid(f)))
        .map(|f| mesh.faces[f])
        .collect();
    TriangleMesh::new(mesh.vertices.clone(), faces)
}

/// Sphere with a polar cap of half-angle `cap_angle` (radians) around +z
/// removed.
pub fn open_sphere(radius: f64, level: u32, cap_angle: f64) -> TriangleMesh {
    let s = icosphere(radius, level);
    remove_faces(&s, |c| c.normalize().z > cap_angle.cos())
}

/// Two balls joined by a bar along x. Returns the mesh and the ground-truth
/// part of each face (0 for x < 0, 1 otherwise).
pub fn barbell() -> (TriangleMesh, Vec<u32>) {
    let mut mesh = icosphere(0.15, 2).translated(&Vec3::new(-0.3, 0.0, 0.0));
    mesh.append(&icosphere(0.15, 2).translated(&Vec3::new(0.3, 0.0, 0.0)));
    mesh.append(&cylinder(0.05, 0.5, 12, 8, 0, Vec3::zeros()));
    let labels = (0..mesh.faces.len())
        .map(|f| u32::from(mesh.face_centroid(f).x >= 0.0))
        .collect();
    (mesh, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;

    #[test]
    fn primitives_are_closed_and_outward() {
        for m in [
            unit_cube(),
            icosphere(0.4, 3),
            uv_sphere(0.4, 12, 24),
            torus(0.3, 0.1, 24, 12),
            cylinder(0.2, 0.5, 16, 3, 1, Vec3::zeros()),
        ] {
            let r = validate(&m);
            assert!(r.watertight && r.manifold, "{r:?}");
            assert!(m.signed_volume() > 0.0);
        }
    }

    #[test]
    fn euler_characteristic_matches_genus() {
        assert_eq!(icosphere(1.0, 3).euler_characteristic(), 2);
        assert_eq!(uv_sphere(1.0, 8, 16).euler_characteristic(), 2);
        assert_eq!(unit_cube().euler_characteristic(), 2);
        assert_eq!(torus(0.3, 0.1, 20, 10).euler_characteristic(), 0);
    }

    #[test]
    fn subdivided_cube_counts() {
        let m = subdivide_midpoint(&subdivide_midpoint(&subdivide_midpoint(&unit_cube())));
        assert_eq!(m.faces.len(), 768);
        assert!(validate(&m).watertight);
    }
}
