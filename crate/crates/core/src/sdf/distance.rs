use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvh::{build_bvh, MeshBvh, NearestHit};
use crate::error::Result;
use crate::geom::{morton_of_point, triangle_box_overlap, triangle_winding, Aabb, TriangleRegion, Vec3};
use crate::mesh::{detect_sharp_edges, TriangleMesh};

/// Meshes with more triangles than this use the far-field winding
/// approximation instead of the exact O(T) sum.
pub const EXACT_WINDING_LIMIT: usize = 2048;

/// Opening ratio for the far-field winding expansion.
pub const FAR_FIELD_BETA: f64 = 4.0;

pub const DEFAULT_LEAF_SIZE: usize = 8;

/// Winding numbers this close to 0.5 are re-evaluated at a fixed tiny
/// offset, so points lying exactly on a hole-filling level set (lattice
/// points on a symmetric cut plane) all fall on the same side.
pub const WINDING_TIE: f64 = 1e-9;
const TIE_OFFSET: [f64; 3] = [1e-7, 0.618_034e-7, 0.381_966e-7];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistanceResult {
    /// Signed distance, negative inside.
    pub distance: f64,
    pub nearest: Vec3,
    pub winding: f64,
    /// Nearest triangle and feature, when the field is mesh-backed.
    pub triangle: Option<u32>,
    pub region: Option<TriangleRegion>,
}

impl SignedDistanceResult {
    pub fn is_inside(&self) -> bool {
        self.winding > 0.5
    }

    /// Winding number within [0.4, 0.6]; the sign is unreliable there.
    pub fn uncertain(&self) -> bool {
        (0.4..=0.6).contains(&self.winding)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    #[default]
    None,
    Morton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindingMode {
    Exact,
    FarField { beta: f64 },
}

/// A signed distance source usable by the grid sampler and the Hermite
/// collector. Implemented for meshes and for analytic test shapes.
pub trait DistanceField: Sync {
    fn unsigned_distance(&self, p: &Vec3) -> f64;

    fn signed_distance(&self, p: &Vec3) -> SignedDistanceResult;

    /// Cells (at cell size `1/resolution` over [−0.5, 0.5]³) that contain
    /// surface; flood-fill seeds.
    fn seed_cells(&self, resolution: u32) -> Vec<[i32; 3]>;

    /// Outward unit normal of the surface at a nearest point, used when the
    /// query lies on the surface and the nearest-point direction vanishes.
    fn surface_normal(&self, hit: &SignedDistanceResult) -> Option<Vec3>;

    /// Constraint weight for a Hermite sample whose nearest feature is `hit`.
    fn feature_weight(&self, _hit: &SignedDistanceResult) -> f64 {
        1.0
    }
}

/// Mesh-backed signed distance: exact unsigned distance through the BVH,
/// sign from the generalized winding number.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    pub mesh: TriangleMesh,
    pub bvh: MeshBvh,
    pub winding: WindingMode,
    sharp_edges: HashSet<(u32, u32)>,
    sharp_vertices: HashSet<u32>,
    sharp_weight: f64,
}

impl MeshSdf {
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        let bvh = build_bvh(&mesh, DEFAULT_LEAF_SIZE)?;
        let winding = if mesh.faces.len() > EXACT_WINDING_LIMIT {
            WindingMode::FarField {
                beta: FAR_FIELD_BETA,
            }
        } else {
            WindingMode::Exact
        };
        Ok(Self {
            mesh,
            bvh,
            winding,
            sharp_edges: HashSet::new(),
            sharp_vertices: HashSet::new(),
            sharp_weight: 1.0,
        })
    }

    pub fn with_winding(mut self, mode: WindingMode) -> Self {
        self.winding = mode;
        self
    }

    /// Give Hermite samples whose nearest feature is a sharp edge (or a
    /// vertex on one) the constraint weight `weight`.
    pub fn with_sharp_features(mut self, angle_threshold: f64, weight: f64) -> Self {
        let report = detect_sharp_edges(&self.mesh, angle_threshold);
        for e in &report.sharp.edges {
            self.sharp_edges.insert((e.vertices[0], e.vertices[1]));
            self.sharp_vertices.insert(e.vertices[0]);
            self.sharp_vertices.insert(e.vertices[1]);
        }
        self.sharp_weight = weight;
        self
    }

    pub fn nearest(&self, p: &Vec3) -> NearestHit {
        self.bvh.nearest(&self.mesh, p)
    }

    pub fn winding_number(&self, p: &Vec3) -> f64 {
        match self.winding {
            WindingMode::Exact => exact_winding(&self.mesh, p),
            WindingMode::FarField { beta } => self.bvh.winding_far_field(&self.mesh, p, beta),
        }
    }
}

/// Σ solid angle / 4π over all triangles, in face order.
pub fn exact_winding(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    mesh.faces
        .iter()
        .map(|&[a, b, c]| {
            triangle_winding(
                p,
                &mesh.vertices[a as usize],
                &mesh.vertices[b as usize],
                &mesh.vertices[c as usize],
            )
        })
        .sum()
}

impl DistanceField for MeshSdf {
    fn unsigned_distance(&self, p: &Vec3) -> f64 {
        self.nearest(p).distance_squared.sqrt()
    }

    fn signed_distance(&self, p: &Vec3) -> SignedDistanceResult {
        let hit = self.nearest(p);
        let mut winding = self.winding_number(p);
        if (winding - 0.5).abs() < WINDING_TIE {
            winding = self.winding_number(&(p + Vec3::from(TIE_OFFSET)));
        }
        let d = hit.distance_squared.sqrt();
        SignedDistanceResult {
            distance: if winding > 0.5 { -d } else { d },
            nearest: hit.point,
            winding,
            triangle: Some(hit.triangle),
            region: Some(hit.region),
        }
    }

    fn seed_cells(&self, resolution: u32) -> Vec<[i32; 3]> {
        mesh_seed_cells(&self.mesh, resolution)
    }

    fn surface_normal(&self, hit: &SignedDistanceResult) -> Option<Vec3> {
        let t = hit.triangle? as usize;
        let n = self.mesh.face_normal(t);
        (n.norm_squared() > 0.0).then_some(n)
    }

    fn feature_weight(&self, hit: &SignedDistanceResult) -> f64 {
        let (Some(t), Some(region)) = (hit.triangle, hit.region) else {
            return 1.0;
        };
        let f = self.mesh.faces[t as usize];
        let sharp = match region {
            TriangleRegion::Face => false,
            TriangleRegion::Edge(i) => {
                let (a, b) = (f[i as usize], f[(i as usize + 1) % 3]);
                self.sharp_edges.contains(&(a.min(b), a.max(b)))
            }
            TriangleRegion::Vertex(i) => self.sharp_vertices.contains(&f[i as usize]),
        };
        if sharp {
            self.sharp_weight
        } else {
            1.0
        }
    }
}

/// Lattice cell index containing coordinate `x` (cell size 1/N, domain
/// origin at −0.5).
#[inline]
pub fn cell_of(x: f64, resolution: u32) -> i32 {
    ((x + 0.5) * resolution as f64).floor() as i32
}

/// Cells whose closed box overlaps at least one triangle.
pub fn mesh_seed_cells(mesh: &TriangleMesh, resolution: u32) -> Vec<[i32; 3]> {
    let h = 1.0 / resolution as f64;
    let half = Vec3::repeat(0.5 * h);
    let mut out: Vec<[i32; 3]> = (0..mesh.faces.len())
        .into_par_iter()
        .flat_map_iter(|f| {
            let tri = mesh.triangle(f);
            let b = Aabb::from_points(tri);
            let lo: Vec<i32> = (0..3).map(|a| cell_of(b.min[a], resolution)).collect();
            let hi: Vec<i32> = (0..3).map(|a| cell_of(b.max[a], resolution)).collect();
            let mut cells = Vec::new();
            for i in lo[0] - 1..=hi[0] {
                for j in lo[1] - 1..=hi[1] {
                    for k in lo[2] - 1..=hi[2] {
                        let center = Vec3::new(
                            (i as f64 + 0.5) * h - 0.5,
                            (j as f64 + 0.5) * h - 0.5,
                            (k as f64 + 0.5) * h - 0.5,
                        );
                        if triangle_box_overlap(&center, &half, tri) {
                            cells.push([i, j, k]);
                        }
                    }
                }
            }
            cells
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn signed_distance(sdf: &MeshSdf, point: &Vec3) -> SignedDistanceResult {
    sdf.signed_distance(point)
}

/// Evaluate many points. Morton grouping reorders evaluation by the
/// interleaved-bit code of each point for traversal locality; the output is
/// always in input order and bitwise equal to per-point evaluation.
pub fn batch_signed_distance<F: DistanceField + ?Sized>(
    field: &F,
    points: &[Vec3],
    grouping: Grouping,
) -> Vec<SignedDistanceResult> {
    match grouping {
        Grouping::None => points.par_iter().map(|p| field.signed_distance(p)).collect(),
        Grouping::Morton => {
            if points.is_empty() {
                return Vec::new();
            }
            let bounds = Aabb::from_points(points.iter());
            let mut order: Vec<(u64, u32)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (morton_of_point(p, &bounds), i as u32))
                .collect();
            order.sort_unstable();
            let sorted: Vec<(u32, SignedDistanceResult)> = order
                .par_iter()
                .map(|&(_, i)| (i, field.signed_distance(&points[i as usize])))
                .collect();
            let mut out = vec![None; points.len()];
            for (i, r) in sorted {
                out[i as usize] = Some(r);
            }
            out.into_iter().map(|r| r.expect("every index evaluated")).collect()
        }
    }
}

/// Analytic sphere (test seam for the sampler and extractor).
#[derive(Debug, Clone, Copy)]
pub struct SphereSdf {
    pub center: Vec3,
    pub radius: f64,
}

impl DistanceField for SphereSdf {
    fn unsigned_distance(&self, p: &Vec3) -> f64 {
        ((p - self.center).norm() - self.radius).abs()
    }

    fn signed_distance(&self, p: &Vec3) -> SignedDistanceResult {
        let v = p - self.center;
        let len = v.norm();
        let dir = if len > 0.0 { v / len } else { Vec3::z() };
        let d = len - self.radius;
        SignedDistanceResult {
            distance: d,
            nearest: self.center + dir * self.radius,
            winding: if d < 0.0 { 1.0 } else { 0.0 },
            triangle: None,
            region: None,
        }
    }

    fn seed_cells(&self, resolution: u32) -> Vec<[i32; 3]> {
        let h = 1.0 / resolution as f64;
        let lo = self.center - Vec3::repeat(self.radius + h);
        let hi = self.center + Vec3::repeat(self.radius + h);
        let mut out = Vec::new();
        for i in cell_of(lo.x, resolution)..=cell_of(hi.x, resolution) {
            for j in cell_of(lo.y, resolution)..=cell_of(hi.y, resolution) {
                for k in cell_of(lo.z, resolution)..=cell_of(hi.z, resolution) {
                    let min = Vec3::new(i as f64 * h - 0.5, j as f64 * h - 0.5, k as f64 * h - 0.5);
                    let b = Aabb::new(min, min + Vec3::repeat(h));
                    let near = b.distance_squared(&self.center).sqrt();
                    let far = (0..8)
                        .map(|c| {
                            let q = Vec3::new(
                                if c & 1 != 0 { b.max.x } else { b.min.x },
                                if c & 2 != 0 { b.max.y } else { b.min.y },
                                if c & 4 != 0 { b.max.z } else { b.min.z },
                            );
                            (q - self.center).norm()
                        })
                        .fold(0.0, f64::max);
                    if near <= self.radius && far >= self.radius {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    fn surface_normal(&self, hit: &SignedDistanceResult) -> Option<Vec3> {
        Some((hit.nearest - self.center).normalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn cube_center_and_outside() {
        let sdf = MeshSdf::new(primitives::unit_cube()).unwrap();
        let r = sdf.signed_distance(&Vec3::zeros());
        assert!((r.distance + 0.5).abs() < 1e-15);
        assert!((r.winding - 1.0).abs() < 1e-12);
        let r = sdf.signed_distance(&Vec3::new(1.0, 0.0, 0.0));
        assert!((r.distance - 0.5).abs() < 1e-15);
        assert!((r.nearest - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!(!r.uncertain());
    }

    #[test]
    fn surface_point_has_zero_distance() {
        let sdf = MeshSdf::new(primitives::unit_cube()).unwrap();
        let r = sdf.signed_distance(&Vec3::new(0.5, 0.1, 0.2));
        assert!(r.distance.abs() < 1e-12);
    }

    #[test]
    fn batch_modes_agree_bitwise() {
        let sdf = MeshSdf::new(primitives::icosphere(0.4, 2)).unwrap();
        let pts: Vec<Vec3> = (0..500)
            .map(|i| {
                let t = i as f64 * 0.618;
                Vec3::new(t.sin() * 0.6, (1.3 * t).cos() * 0.6, (0.7 * t).sin() * 0.6)
            })
            .collect();
        let a = batch_signed_distance(&sdf, &pts, Grouping::None);
        let b = batch_signed_distance(&sdf, &pts, Grouping::Morton);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.distance.to_bits(), y.distance.to_bits());
            assert_eq!(x.winding.to_bits(), y.winding.to_bits());
        }
        assert!(batch_signed_distance(&sdf, &[], Grouping::Morton).is_empty());
        assert!(batch_signed_distance(&sdf, &[], Grouping::None).is_empty());
    }

    #[test]
    fn tiny_mesh_gets_a_seed_cell() {
        let tiny = primitives::unit_cube().map_vertices(|v| v * 1e-4 + Vec3::repeat(0.01));
        let seeds = mesh_seed_cells(&tiny, 16);
        assert!(!seeds.is_empty());
        assert!(seeds.contains(&[8, 8, 8]));
    }

    #[test]
    fn sharp_feature_weighting() {
        let sdf = MeshSdf::new(primitives::unit_cube())
            .unwrap()
            .with_sharp_features(30f64.to_radians(), 2.0);
        let edge = sdf.signed_distance(&Vec3::new(0.6, 0.6, 0.0));
        assert_eq!(sdf.feature_weight(&edge), 2.0);
        let face = sdf.signed_distance(&Vec3::new(0.6, 0.1, 0.0));
        assert_eq!(sdf.feature_weight(&face), 1.0);
    }
}
