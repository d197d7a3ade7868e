//! Quadric error metric edge-collapse simplification.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use nalgebra::{Matrix3, Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{sorted_symmetric_eigen, triangle_normal_raw, Vec3};
use crate::mesh::{detect_sharp_edges, validate, EdgeSet, TriangleMesh};

pub const SHARP_COST_MULTIPLIER: f64 = 10.0;
/// Weight of the perpendicular planes that pin open-boundary edges.
const BOUNDARY_WEIGHT: f64 = 1e3;
const SINGULAR_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexQuadric {
    pub q: Matrix4<f64>,
    /// The vertex lies on an open boundary and carries pinning planes.
    pub boundary: bool,
}

impl VertexQuadric {
    pub fn zero() -> Self {
        VertexQuadric {
            q: Matrix4::zeros(),
            boundary: false,
        }
    }

    pub fn from_plane(normal: &Vec3, point: &Vec3, weight: f64) -> Self {
        let p = Vector4::new(normal.x, normal.y, normal.z, -normal.dot(point));
        VertexQuadric {
            q: p * p.transpose() * weight,
            boundary: false,
        }
    }

    pub fn add(&self, other: &VertexQuadric) -> VertexQuadric {
        VertexQuadric {
            q: self.q + other.q,
            boundary: self.boundary || other.boundary,
        }
    }

    /// vᵀ Q v for v = (p, 1).
    pub fn evaluate(&self, p: &Vec3) -> f64 {
        let v = Vector4::new(p.x, p.y, p.z, 1.0);
        (v.transpose() * self.q * v)[0].max(0.0)
    }
}

/// Per-vertex quadrics: area-weighted sums of incident face planes, plus
/// pinning planes along open-boundary edges.
pub fn vertex_quadrics(mesh: &TriangleMesh) -> Vec<VertexQuadric> {
    let face_q: Vec<VertexQuadric> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            let n = triangle_normal_raw(a, b, c);
            let len = n.norm();
            if len == 0.0 {
                return VertexQuadric::zero();
            }
            VertexQuadric::from_plane(&(n / len), a, 0.5 * len)
        })
        .collect();
    let mut out = vec![VertexQuadric::zero(); mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            out[v as usize] = out[v as usize].add(&face_q[f]);
        }
    }
    for e in EdgeSet::from_mesh(mesh).edges.iter().filter(|e| e.is_boundary()) {
        let f = e.faces[0] as usize;
        let [p0, p1] = e.vertices.map(|v| mesh.vertices[v as usize]);
        let along = p1 - p0;
        let side = mesh.face_normal(f).cross(&along);
        if side.norm() == 0.0 {
            continue;
        }
        let mut q = VertexQuadric::from_plane(&side.normalize(), &p0, BOUNDARY_WEIGHT * along.norm_squared());
        q.boundary = true;
        for v in e.vertices {
            out[v as usize] = out[v as usize].add(&q);
        }
    }
    out
}

/// Optimal collapse position for the summed quadric; when its 3×3 block is
/// singular, the best of endpoint A, endpoint B and the midpoint.
pub fn collapse_cost(q: &VertexQuadric, a: &Vec3, b: &Vec3) -> (f64, Vec3) {
    let m: Matrix3<f64> = q.q.fixed_view::<3, 3>(0, 0).into_owned();
    let rhs = -Vec3::new(q.q[(0, 3)], q.q[(1, 3)], q.q[(2, 3)]);
    let (vals, _) = sorted_symmetric_eigen(&m);
    if vals[2] > SINGULAR_CUTOFF * vals[0].abs().max(f64::MIN_POSITIVE) {
        if let Some(inv) = m.try_inverse() {
            let p = inv * rhs;
            return (q.evaluate(&p), p);
        }
    }
    best_of(q, &[*a, *b, (a + b) * 0.5])
}

fn best_of(q: &VertexQuadric, candidates: &[Vec3]) -> (f64, Vec3) {
    let mut best = (f64::INFINITY, candidates[0]);
    for p in candidates {
        let c = q.evaluate(p);
        if c < best.0 {
            best = (c, *p);
        }
    }
    best
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecimationReport {
    pub input_faces: usize,
    pub output_faces: usize,
    pub collapses: usize,
    /// Sum of collapse costs in the order performed.
    pub total_error: f64,
    /// The queue ran dry before reaching the target.
    pub stopped_early: bool,
    pub rejected_flips: usize,
    pub rejected_links: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decimation {
    pub mesh: TriangleMesh,
    pub report: DecimationReport,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    lo: u32,
    hi: u32,
    stamp: (u32, u32),
    position: Vec3,
    endpoint_retry: bool,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so BinaryHeap pops the cheapest, ties by lower vertex index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.lo.cmp(&self.lo))
            .then(other.hi.cmp(&self.hi))
            .then(other.endpoint_retry.cmp(&self.endpoint_retry))
    }
}

struct Collapser {
    pos: Vec<Vec3>,
    quadrics: Vec<VertexQuadric>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    version: Vec<u32>,
    alive: Vec<bool>,
    sharp: HashSet<(u32, u32)>,
    heap: BinaryHeap<Candidate>,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

impl Collapser {
    fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        let mut n = BTreeSet::new();
        for &f in &self.vertex_faces[v as usize] {
            for &u in &self.faces[f as usize] {
                if u != v {
                    n.insert(u);
                }
            }
        }
        n
    }

    fn push_edge(&mut self, a: u32, b: u32, endpoint_retry: bool) {
        let (lo, hi) = key(a, b);
        let q = self.quadrics[lo as usize].add(&self.quadrics[hi as usize]);
        let (pa, pb) = (self.pos[lo as usize], self.pos[hi as usize]);
        let (mut cost, position) = if endpoint_retry {
            best_of(&q, &[pa, pb])
        } else {
            collapse_cost(&q, &pa, &pb)
        };
        if self.sharp.contains(&(lo, hi)) {
            cost *= SHARP_COST_MULTIPLIER;
        }
        self.heap.push(Candidate {
            cost,
            lo,
            hi,
            stamp: (self.version[lo as usize], self.version[hi as usize]),
            position,
            endpoint_retry,
        });
    }

    fn valid(&self, c: &Candidate) -> bool {
        self.alive[c.lo as usize]
            && self.alive[c.hi as usize]
            && c.stamp == (self.version[c.lo as usize], self.version[c.hi as usize])
    }

    /// Faces around the edge and the link-condition verdict.
    fn link_ok(&self, a: u32, b: u32) -> bool {
        let shared: Vec<u32> = self.vertex_faces[a as usize]
            .iter()
            .copied()
            .filter(|f| self.faces[*f as usize].contains(&b))
            .collect();
        if shared.len() != 2 {
            return false;
        }
        let opposite: BTreeSet<u32> = shared
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&v| v != a && v != b)
            .collect();
        let common: BTreeSet<u32> = self.neighbors(a).intersection(&self.neighbors(b)).copied().collect();
        common == opposite
    }

    /// No surviving incident face may flip or collapse to zero area.
    fn flips(&self, a: u32, b: u32, p: &Vec3) -> bool {
        for v in [a, b] {
            for &f in &self.vertex_faces[v as usize] {
                let face = self.faces[f as usize];
                if face.contains(&a) && face.contains(&b) {
                    continue;
                }
                let old = triangle_normal_raw(
                    &self.pos[face[0] as usize],
                    &self.pos[face[1] as usize],
                    &self.pos[face[2] as usize],
                );
                let moved = face.map(|u| if u == v { *p } else { self.pos[u as usize] });
                let new = triangle_normal_raw(&moved[0], &moved[1], &moved[2]);
                if new.dot(&old) < 0.0 || new.norm_squared() <= 1e-24 * old.norm_squared() {
                    return true;
                }
            }
        }
        false
    }

    /// Merge `hi` into `lo` at position `p`. Returns the number of faces removed.
    fn collapse(&mut self, lo: u32, hi: u32, p: Vec3) -> usize {
        let (l, h) = (lo as usize, hi as usize);
        let mut removed = 0;
        let hi_faces = std::mem::take(&mut self.vertex_faces[h]);
        for f in hi_faces {
            let fi = f as usize;
            if self.faces[fi].contains(&lo) {
                self.face_alive[fi] = false;
                removed += 1;
                for u in self.faces[fi] {
                    if u != hi {
                        self.vertex_faces[u as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for u in self.faces[fi].iter_mut() {
                    if *u == hi {
                        *u = lo;
                    }
                }
                self.vertex_faces[l].push(f);
            }
        }
        let moved: Vec<(u32, u32)> = self.sharp.iter().copied().filter(|&(x, y)| x == hi || y == hi).collect();
        for (x, y) in moved {
            self.sharp.remove(&(x, y));
            let other = if x == hi { y } else { x };
            if other != lo {
                self.sharp.insert(key(lo, other));
            }
        }
        self.alive[h] = false;
        self.pos[l] = p;
        self.quadrics[l] = self.quadrics[l].add(&self.quadrics[h]);
        self.version[l] += 1;
        self.version[h] += 1;
        removed
    }
}

/// Greedy QEM simplification. The collapse order does not depend on the
/// target, so a smaller target continues the same sequence further.
pub fn decimate_detailed(
    mesh: &TriangleMesh,
    target_faces: usize,
    preserve_sharp: bool,
    sharp_threshold: f64,
) -> Result<Decimation> {
    if target_faces < 4 {
        return Err(Error::param(
            "target_faces",
            format!("{target_faces} is below the 4 faces of the smallest closed surface"),
        ));
    }
    let report = validate(mesh);
    if !report.manifold {
        return Err(Error::NonManifold(format!(
            "{} non-manifold edges, {} non-manifold vertices",
            report.non_manifold_edges, report.non_manifold_vertices
        )));
    }
    let mut out = DecimationReport {
        input_faces: mesh.faces.len(),
        output_faces: mesh.faces.len(),
        ..Default::default()
    };
    if mesh.faces.len() <= target_faces {
        return Ok(Decimation { mesh: mesh.clone(), report: out });
    }
    let sharp: HashSet<(u32, u32)> = if preserve_sharp {
        detect_sharp_edges(mesh, sharp_threshold)
            .sharp
            .edges
            .iter()
            .map(|e| key(e.vertices[0], e.vertices[1]))
            .collect()
    } else {
        HashSet::new()
    };
    let n = mesh.vertices.len();
    let mut vertex_faces = vec![Vec::new(); n];
    for (f, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            vertex_faces[v as usize].push(f as u32);
        }
    }
    let mut c = Collapser {
        pos: mesh.vertices.clone(),
        quadrics: vertex_quadrics(mesh),
        faces: mesh.faces.clone(),
        face_alive: vec![true; mesh.faces.len()],
        vertex_faces,
        version: vec![0; n],
        alive: vec![true; n],
        sharp,
        heap: BinaryHeap::new(),
    };
    for e in &EdgeSet::from_mesh(mesh).edges {
        c.push_edge(e.vertices[0], e.vertices[1], false);
    }
    let mut faces = mesh.faces.len();
    while faces > target_faces {
        let Some(cand) = c.heap.pop() else {
            out.stopped_early = true;
            break;
        };
        if !c.valid(&cand) {
            continue;
        }
        if !c.link_ok(cand.lo, cand.hi) {
            out.rejected_links += 1;
            continue;
        }
        if c.flips(cand.lo, cand.hi, &cand.position) {
            out.rejected_flips += 1;
            if !cand.endpoint_retry {
                c.push_edge(cand.lo, cand.hi, true);
            }
            continue;
        }
        faces -= c.collapse(cand.lo, cand.hi, cand.position);
        out.collapses += 1;
        out.total_error += cand.cost;
        let lo = cand.lo;
        for u in c.neighbors(lo) {
            c.push_edge(lo, u, false);
        }
    }
    let kept: Vec<[u32; 3]> = c
        .faces
        .iter()
        .zip(&c.face_alive)
        .filter(|(_, &a)| a)
        .map(|(f, _)| *f)
        .collect();
    let result = TriangleMesh::new(c.pos, kept).compacted();
    out.output_faces = result.faces.len();
    Ok(Decimation { mesh: result, report: out })
}

pub fn decimate_to(
    mesh: &TriangleMesh,
    target_faces: usize,
    preserve_sharp: bool,
    sharp_threshold: f64,
) -> Result<TriangleMesh> {
    Ok(decimate_detailed(mesh, target_faces, preserve_sharp, sharp_threshold)?.mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn planar_neighborhood_costs_nothing() {
        let m = primitives::subdivide_midpoint(&primitives::subdivide_midpoint(&primitives::unit_cube()));
        let q = vertex_quadrics(&m);
        let flat = |v: u32| {
            let n: Vec<Vec3> = (0..m.faces.len()).filter(|&f| m.faces[f].contains(&v)).map(|f| m.face_normal(f)).collect();
            n.iter().all(|x| (x - n[0]).norm() < 1e-12)
        };
        let e = EdgeSet::from_mesh(&m)
            .edges
            .into_iter()
            .find(|e| flat(e.vertices[0]) && flat(e.vertices[1]))
            .unwrap();
        let [a, b] = e.vertices.map(|v| v as usize);
        let (cost, _) = collapse_cost(&q[a].add(&q[b]), &m.vertices[a], &m.vertices[b]);
        assert!(cost.abs() < 1e-15);
    }

    #[test]
    fn corner_collapse_costs_something() {
        let m = primitives::unit_cube();
        let q = vertex_quadrics(&m);
        let (cost, _) = collapse_cost(&q[0].add(&q[1]), &m.vertices[0], &m.vertices[1]);
        assert!(cost > 0.0);
    }

    #[test]
    fn target_at_or_above_count_is_identity() {
        let m = primitives::unit_cube();
        let d = decimate_detailed(&m, 12, false, 0.5).unwrap();
        assert_eq!(d.mesh, m);
        assert_eq!(d.report.collapses, 0);
        assert!(decimate_to(&m, 3, false, 0.5).is_err());
    }
}
