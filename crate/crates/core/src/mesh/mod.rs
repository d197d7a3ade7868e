//! Indexed triangle meshes: data model, IO, validation, normalization and
//! edge analysis.

mod edges;
mod io;
mod normalize;
pub mod primitives;
mod validate;

pub use edges::{detect_sharp_edges, Edge, EdgeSet, SharpEdgeReport};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub(crate) use io::write_obj_body;
pub use normalize::{normalize_to_unit_cube, NormalizationTransform};
pub use validate::{remove_degenerate_faces, validate, ValidationReport};

use crate::geom::{triangle_area, triangle_normal_raw, Aabb, Vec3};

/// Indexed triangle mesh. `face_labels`, when present, holds one part id per
/// face.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub face_labels: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            faces,
            face_labels: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Bounding box of the vertices actually referenced by faces.
    pub fn face_bbox(&self) -> Aabb {
        let mut b = Aabb::empty();
        for f in &self.faces {
            for &v in f {
                b.grow(&self.vertices[v as usize]);
            }
        }
        b
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [&Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            &self.vertices[a as usize],
            &self.vertices[b as usize],
            &self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        let n = triangle_normal_raw(a, b, c);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        triangle_area(a, b, c)
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (a + b + c) / 3.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume via the divergence theorem; positive for
    /// outward-oriented closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let a = &self.vertices[a as usize];
                let b = &self.vertices[b as usize];
                let c = &self.vertices[c as usize];
                a.dot(&b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Volume-weighted centroid of the enclosed solid.
    pub fn solid_centroid(&self) -> Option<Vec3> {
        let mut vol = 0.0;
        let mut acc = Vec3::zeros();
        for &[a, b, c] in &self.faces {
            let a = &self.vertices[a as usize];
            let b = &self.vertices[b as usize];
            let c = &self.vertices[c as usize];
            let v = a.dot(&b.cross(c)) / 6.0;
            vol += v;
            acc += (a + b + c) * (v / 4.0);
        }
        (vol.abs() > 0.0).then(|| acc / vol)
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .faces
            .iter()
            .flat_map(|f| {
                (0..3).map(move |i| {
                    let (a, b) = (f[i], f[(i + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    pub fn referenced_vertex_count(&self) -> usize {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v as usize] = true;
            }
        }
        used.iter().filter(|&&u| u).count()
    }

    /// V − E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        self.referenced_vertex_count() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    pub fn translated(&self, t: &Vec3) -> TriangleMesh {
        self.map_vertices(|v| v + t)
    }

    /// Append `other`, re-indexing its faces.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        match (&mut self.face_labels, &other.face_labels) {
            (Some(mine), Some(theirs)) => mine.extend_from_slice(theirs),
            (None, None) => {}
            _ => self.face_labels = None,
        }
    }

    /// Drop unreferenced vertices, keeping first-use order.
    pub fn compacted(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let mut out = [0u32; 3];
                for (o, &v) in out.iter_mut().zip(f) {
                    if remap[v as usize] == u32::MAX {
                        remap[v as usize] = vertices.len() as u32;
                        vertices.push(self.vertices[v as usize]);
                    }
                    *o = remap[v as usize];
                }
                out
            })
            .collect();
        TriangleMesh {
            vertices,
            faces,
            face_labels: self.face_labels.clone(),
        }
    }
}
