use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub watertight: bool,
    pub manifold: bool,
    pub degenerate_face_count: usize,
    pub connected_components: usize,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub non_manifold_vertices: usize,
    pub inconsistent_orientation_edges: usize,
}

fn is_degenerate(mesh: &TriangleMesh, f: usize, area_eps: f64) -> bool {
    let [a, b, c] = mesh.faces[f];
    a == b || b == c || a == c || mesh.face_area(f) <= area_eps
}

fn area_epsilon(mesh: &TriangleMesh) -> f64 {
    let d = mesh.bbox().diagonal();
    1e-12 * d * d
}

/// Remove faces with a repeated index or (near) zero area, returning the
/// cleaned mesh and the number of removed faces.
pub fn remove_degenerate_faces(mesh: &TriangleMesh) -> (TriangleMesh, usize) {
    let eps = area_epsilon(mesh);
    let keep: Vec<usize> = (0..mesh.faces.len())
        .filter(|&f| !is_degenerate(mesh, f, eps))
        .collect();
    let removed = mesh.faces.len() - keep.len();
    let out = TriangleMesh {
        vertices: mesh.vertices.clone(),
        faces: keep.iter().map(|&f| mesh.faces[f]).collect(),
        face_labels: mesh
            .face_labels
            .as_ref()
            .map(|l| keep.iter().map(|&f| l[f]).collect()),
    };
    (out, removed)
}

/// Check index range and vertex finiteness.
pub(crate) fn check_indices(mesh: &TriangleMesh) -> Result<()> {
    let n = mesh.vertices.len();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for &v in f {
            if v as usize >= n {
                return Err(Error::IndexOutOfRange {
                    face: fi,
                    index: v as i64,
                    vertex_count: n,
                });
            }
        }
    }
    if let Some(bad) = mesh.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
        return Err(Error::Other(format!("vertex {bad} is not finite")));
    }
    Ok(())
}

/// Directed half-edges sorted by undirected key: `(lo, hi, face, forward)`.
pub(crate) fn sorted_half_edges(mesh: &TriangleMesh) -> Vec<(u32, u32, u32, bool)> {
    let mut he = Vec::with_capacity(mesh.faces.len() * 3);
    for (fi, f) in mesh.faces.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            he.push((a.min(b), a.max(b), fi as u32, a < b));
        }
    }
    he.sort_unstable();
    he
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n as u32).collect())
    }
    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let p = self.0[self.0[x as usize] as usize];
            self.0[x as usize] = p;
            x = p;
        }
        x
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Topological and geometric health of a mesh. Degenerate faces are
/// counted and excluded from the topology checks.
pub fn validate(mesh: &TriangleMesh) -> ValidationReport {
    let (clean, degenerate) = remove_degenerate_faces(mesh);
    let he = sorted_half_edges(&clean);

    let mut boundary = 0;
    let mut non_manifold_edges = 0;
    let mut inconsistent = 0;
    let mut dsu = Dsu::new(clean.faces.len());
    let mut i = 0;
    while i < he.len() {
        let mut j = i;
        while j < he.len() && he[j].0 == he[i].0 && he[j].1 == he[i].1 {
            j += 1;
        }
        let group = &he[i..j];
        for w in group.windows(2) {
            dsu.union(w[0].2, w[1].2);
        }
        match group.len() {
            1 => boundary += 1,
            2 => {
                if group[0].3 == group[1].3 {
                    inconsistent += 1;
                }
            }
            _ => non_manifold_edges += 1,
        }
        i = j;
    }

    let non_manifold_vertices = count_non_manifold_vertices(&clean);

    let mut roots: Vec<u32> = (0..clean.faces.len() as u32).map(|f| dsu.find(f)).collect();
    roots.sort_unstable();
    roots.dedup();

    let manifold = non_manifold_edges == 0 && inconsistent == 0 && non_manifold_vertices == 0;
    ValidationReport {
        watertight: !clean.faces.is_empty() && boundary == 0 && non_manifold_edges == 0,
        manifold,
        degenerate_face_count: degenerate,
        connected_components: roots.len(),
        boundary_edges: boundary,
        non_manifold_edges,
        non_manifold_vertices,
        inconsistent_orientation_edges: inconsistent,
    }
}

/// A vertex is manifold when its incident faces form a single fan connected
/// through shared edges.
fn count_non_manifold_vertices(mesh: &TriangleMesh) -> usize {
    let n = mesh.vertices.len();
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (fi, f) in mesh.faces.iter().enumerate() {
        for &v in f {
            incident[v as usize].push(fi as u32);
        }
    }
    let mut bad = 0;
    for (v, faces) in incident.iter().enumerate() {
        if faces.len() <= 1 {
            continue;
        }
        // Union faces around v that share an edge through v.
        let mut parent: Vec<usize> = (0..faces.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut by_other: Vec<(u32, usize)> = Vec::with_capacity(faces.len() * 2);
        for (local, &f) in faces.iter().enumerate() {
            for &w in &mesh.faces[f as usize] {
                if w as usize != v {
                    by_other.push((w, local));
                }
            }
        }
        by_other.sort_unstable();
        for w in by_other.windows(2) {
            if w[0].0 == w[1].0 {
                let (a, b) = (find(&mut parent, w[0].1), find(&mut parent, w[1].1));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        if (1..faces.len()).any(|i| find(&mut parent, i) != root) {
            bad += 1;
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn closed_cube_is_watertight() {
        let r = validate(&primitives::unit_cube());
        assert!(r.watertight);
        assert!(r.manifold);
        assert_eq!(r.connected_components, 1);
        assert_eq!(r.degenerate_face_count, 0);
    }

    #[test]
    fn open_cube_has_boundary() {
        let mut cube = primitives::unit_cube();
        cube.faces.pop();
        let r = validate(&cube);
        assert!(!r.watertight);
        assert_eq!(r.boundary_edges, 3);
    }

    #[test]
    fn two_cubes_two_components() {
        let mut a = primitives::unit_cube();
        let b = a.translated(&crate::geom::Vec3::new(3.0, 0.0, 0.0));
        a.append(&b);
        let r = validate(&a);
        assert_eq!(r.connected_components, 2);
        assert!(r.watertight);
    }

    #[test]
    fn degenerate_faces_counted() {
        let mut cube = primitives::unit_cube();
        cube.faces.push([0, 0, 1]);
        cube.faces.push([0, 1, 2]);
        // Collinear triple.
        cube.vertices.push(crate::geom::Vec3::new(0.0, -0.5, -0.5));
        cube.faces.push([0, 1, 8]);
        let r = validate(&cube);
        assert_eq!(r.degenerate_face_count, 2);
        // the duplicate face [0,1,2] makes one edge triple-shared
        assert!(!r.manifold);
    }
}
