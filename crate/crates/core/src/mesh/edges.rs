use std::f64::consts::PI;

use super::validate::sorted_half_edges;
use super::TriangleMesh;

/// Undirected edge with its incident faces. `dihedral` is only set for
/// edges with exactly two incident faces; a flat edge has dihedral π.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [u32; 2],
    pub faces: Vec<u32>,
    pub dihedral: Option<f64>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }

    pub fn is_non_manifold(&self) -> bool {
        self.faces.len() >= 3
    }

    /// |π − dihedral|, the normal deviation across the edge.
    pub fn deviation(&self) -> Option<f64> {
        self.dihedral.map(|d| (PI - d).abs())
    }
}

/// All edges of a mesh, each appearing once, sorted by vertex pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeSet {
    pub edges: Vec<Edge>,
}

impl EdgeSet {
    pub fn from_mesh(mesh: &TriangleMesh) -> EdgeSet {
        let normals: Vec<_> = (0..mesh.faces.len()).map(|f| mesh.face_normal(f)).collect();
        let he = sorted_half_edges(mesh);
        let mut edges = Vec::new();
        let mut i = 0;
        while i < he.len() {
            let mut j = i;
            while j < he.len() && he[j].0 == he[i].0 && he[j].1 == he[i].1 {
                j += 1;
            }
            let faces: Vec<u32> = he[i..j].iter().map(|h| h.2).collect();
            let dihedral = (faces.len() == 2).then(|| {
                let c = normals[faces[0] as usize]
                    .dot(&normals[faces[1] as usize])
                    .clamp(-1.0, 1.0);
                PI - c.acos()
            });
            edges.push(Edge {
                vertices: [he[i].0, he[i].1],
                faces,
                dihedral,
            });
            i = j;
        }
        EdgeSet { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        let key = [a.min(b), a.max(b)];
        self.edges
            .binary_search_by(|e| e.vertices.cmp(&key))
            .is_ok()
    }

    /// Largest normal deviation over interior (two-face) edges.
    pub fn max_deviation(&self) -> f64 {
        self.edges
            .iter()
            .filter_map(Edge::deviation)
            .fold(0.0, f64::max)
    }
}

/// Sharp subset of a mesh's edges plus the edges that could not be
/// classified.
#[derive(Debug, Clone, Default)]
pub struct SharpEdgeReport {
    pub sharp: EdgeSet,
    pub boundary: Vec<[u32; 2]>,
    pub non_manifold: Vec<[u32; 2]>,
}

/// Edges whose normal deviation |π − dihedral| exceeds `angle_threshold`.
/// Boundary and non-manifold edges are reported separately and are never
/// classified as sharp. Assumes consistently oriented faces.
pub fn detect_sharp_edges(mesh: &TriangleMesh, angle_threshold: f64) -> SharpEdgeReport {
    let all = EdgeSet::from_mesh(mesh);
    let mut report = SharpEdgeReport::default();
    for e in all.edges {
        if e.is_boundary() {
            report.boundary.push(e.vertices);
        } else if e.is_non_manifold() {
            report.non_manifold.push(e.vertices);
        } else if e.deviation().is_some_and(|d| d > angle_threshold) {
            report.sharp.edges.push(e);
        }
    }
    report
}
