use nalgebra::Matrix3;
use serde::Serialize;

use super::grouping::contact_points;
use super::{canonical_axis, Generator, JointCandidate, JointType};
use crate::geom::{sorted_symmetric_eigen, Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::sdf::{DistanceField, MeshSdf};

const DEDUP_ANGLE_DEGREES: f64 = 5.0;
const EDGE_SAMPLES: usize = 17;
const OBB_AXIS_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obb {
    pub center: Vec3,
    /// Unit axes as columns.
    pub axes: Matrix3<f64>,
    pub half: Vec3,
}

impl Obb {
    fn in_frame(mesh: &TriangleMesh, axes: Matrix3<f64>) -> Obb {
        let local: Vec<Vec3> = mesh.vertices.iter().map(|v| axes.transpose() * v).collect();
        let b = Aabb::from_points(&local);
        Obb {
            center: axes * b.center(),
            axes,
            half: b.extent() * 0.5,
        }
    }

    /// The smaller of the principal-axes box and the world-aligned box; the
    /// latter also covers principal frames made ambiguous by symmetry.
    pub fn of(mesh: &TriangleMesh) -> Obb {
        let world = Obb::in_frame(mesh, Matrix3::identity());
        let (_, vecs) = sorted_symmetric_eigen(&surface_covariance(mesh));
        let mut axes = Matrix3::zeros();
        for k in 0..3 {
            axes.set_column(k, &canonical_axis(&vecs.column(k).into_owned()));
        }
        let pca = Obb::in_frame(mesh, axes);
        if pca.volume() < world.volume() * (1.0 - 1e-9) {
            pca
        } else {
            world
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half.x * self.half.y * self.half.z
    }

    pub fn axis(&self, k: usize) -> Vec3 {
        self.axes.column(k).into_owned()
    }
}

/// Area-weighted covariance of the surface about its area centroid.
fn surface_covariance(mesh: &TriangleMesh) -> Matrix3<f64> {
    let mut area = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Matrix3::zeros();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let w = mesh.face_area(f);
        let s = a + b + c;
        area += w;
        first += s * (w / 3.0);
        second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * (w / 12.0);
    }
    if area <= 0.0 {
        return Matrix3::zeros();
    }
    let m = first / area;
    second / area - m * m.transpose()
}

fn point_covariance(points: &[Vec3]) -> (Vec3, Matrix3<f64>) {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

fn is_duplicate(a: &JointCandidate, b: &JointCandidate, tolerance: f64) -> bool {
    if a.joint_type != b.joint_type {
        return false;
    }
    let cos = a.axis.dot(&b.axis).abs().min(1.0);
    if cos.acos() >= DEDUP_ANGLE_DEGREES.to_radians() {
        return false;
    }
    match a.joint_type {
        JointType::Revolute => (b.origin - a.origin).cross(&a.axis).norm() < tolerance,
        _ => true,
    }
}

/// Ranking used by the heuristic adjudicator: score, then generator
/// priority, then generation order.
pub(crate) fn rank_cmp(a: &JointCandidate, b: &JointCandidate) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.generator.priority().cmp(&a.generator.priority()))
}

/// Candidate axes for `child` moving relative to `parent`, ranked best
/// first and deduplicated.
pub fn generate_axis_candidates(child: &TriangleMesh, parent: &TriangleMesh, contact_tolerance: f64) -> crate::Result<Vec<JointCandidate>> {
    if !(contact_tolerance > 0.0) {
        return Err(crate::Error::param("contact_tolerance", "must be positive"));
    }
    if child.faces.is_empty() || parent.faces.is_empty() {
        return Err(crate::Error::EmptyMesh);
    }
    let obb = Obb::of(child);
    let field = MeshSdf::new(parent.clone())?;
    let contact = contact_points(child, &field, contact_tolerance);
    let mut pool = Vec::new();

    let q = if contact.is_empty() {
        0.0
    } else {
        contact.iter().map(|c| 1.0 - c.2 / contact_tolerance).sum::<f64>() / contact.len() as f64
    };
    for k in 0..3 {
        for joint_type in [JointType::Prismatic, JointType::Revolute] {
            pool.push(JointCandidate {
                joint_type,
                axis: obb.axis(k),
                origin: obb.center,
                generator: Generator::ObbAxis,
                score: OBB_AXIS_WEIGHT * q,
            });
        }
    }

    if !contact.is_empty() {
        let points: Vec<Vec3> = contact.iter().map(|c| c.0).collect();
        let (centroid, cov) = point_covariance(&points);
        let (vals, vecs) = sorted_symmetric_eigen(&cov);
        let (linearity, planarity) = if vals[0] > 1e-18 {
            let r = (vals[1] / vals[0]).clamp(0.0, 1.0);
            (1.0 - r, r)
        } else {
            (0.0, 0.0)
        };

        let principal = vecs.column(0).into_owned();
        let mut edges = Vec::new();
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for (si, sj) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mid = obb.center + obb.axis(i) * (si * obb.half[i]) + obb.axis(j) * (sj * obb.half[j]);
                edges.push((obb.half[k], k, mid));
            }
        }
        edges.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (half, k, mid) in edges {
            let axis = obb.axis(k);
            let d: Vec<f64> = (0..EDGE_SAMPLES)
                .map(|s| {
                    let t = -1.0 + 2.0 * s as f64 / (EDGE_SAMPLES - 1) as f64;
                    field.unsigned_distance(&(mid + axis * (t * half)))
                })
                .collect();
            if d.iter().any(|&x| x > 2.0 * contact_tolerance) {
                continue;
            }
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            pool.push(JointCandidate {
                joint_type: JointType::Revolute,
                axis,
                origin: mid,
                generator: Generator::ObbEdge,
                score: (1.0 - mean / (2.0 * contact_tolerance)) * linearity * axis.dot(&principal).abs().min(1.0),
            });
        }

        pool.push(JointCandidate {
            joint_type: JointType::Revolute,
            axis: canonical_axis(&principal),
            origin: centroid,
            generator: Generator::ContactPca,
            score: q * linearity,
        });

        let normal_sum: Vec3 = contact.iter().map(|c| c.1).sum();
        let normal = if normal_sum.norm() > 1e-9 * contact.len() as f64 {
            normal_sum
        } else {
            vecs.column(2).into_owned()
        };
        pool.push(JointCandidate {
            joint_type: JointType::Prismatic,
            axis: canonical_axis(&normal),
            origin: centroid,
            generator: Generator::ContactNormal,
            score: q * planarity,
        });
    }

    pool.sort_by(rank_cmp);
    let mut kept: Vec<JointCandidate> = Vec::new();
    for c in pool {
        if !kept.iter().any(|k| is_duplicate(k, &c, contact_tolerance)) {
            kept.push(c);
        }
    }
    Ok(kept)
}
