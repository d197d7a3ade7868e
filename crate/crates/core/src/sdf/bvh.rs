use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geom::{closest_point_on_triangle, triangle_normal_raw, triangle_winding, Aabb, TriangleRegion, Vec3};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvhNodeKind {
    Inner { left: u32, right: u32 },
    /// Range into the triangle permutation.
    Leaf { start: u32, count: u32 },
}

#[derive(Debug, Clone)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub kind: BvhNodeKind,
    moments: WindingMoments,
}

/// Far-field expansion data for the winding number of a node's triangles.
#[derive(Debug, Clone, Copy)]
struct WindingMoments {
    /// Area-weighted centroid.
    center: Vec3,
    /// Σ aᵢ nᵢ.
    normal_sum: Vec3,
    /// Σ aᵢ nᵢ (x̄ᵢ − center)ᵀ.
    first: Matrix3<f64>,
    /// second[i] = Σ aᵢ n_i ∫(x − center)(x − center)ᵀ dA / aᵢ, per normal component.
    second: [Matrix3<f64>; 3],
    /// Max distance from `center` to any vertex in the node.
    radius: f64,
}

/// Bounding volume hierarchy over a mesh's triangles, built by median split
/// on the longest axis of the centroid bounds.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    pub nodes: Vec<BvhNode>,
    /// Triangle indices in leaf order.
    pub triangles: Vec<u32>,
    pub leaf_size: usize,
}

/// Closest triangle to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestHit {
    pub distance_squared: f64,
    pub point: Vec3,
    pub triangle: u32,
    pub region: TriangleRegion,
}

impl NearestHit {
    fn better_than(&self, other: &NearestHit) -> bool {
        self.distance_squared < other.distance_squared
            || (self.distance_squared == other.distance_squared && self.triangle < other.triangle)
    }
}

pub fn build_bvh(mesh: &TriangleMesh, leaf_size: usize) -> Result<MeshBvh> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if leaf_size == 0 {
        return Err(Error::param("leaf_size", "must be at least 1"));
    }
    let centroids: Vec<Vec3> = (0..mesh.faces.len()).map(|f| mesh.face_centroid(f)).collect();
    let mut triangles: Vec<u32> = (0..mesh.faces.len() as u32).collect();
    let mut nodes = Vec::with_capacity(2 * mesh.faces.len() / leaf_size + 1);
    build_recursive(mesh, &centroids, &mut triangles, 0, leaf_size, &mut nodes);
    Ok(MeshBvh {
        nodes,
        triangles,
        leaf_size,
    })
}

fn build_recursive(
    mesh: &TriangleMesh,
    centroids: &[Vec3],
    tris: &mut [u32],
    offset: usize,
    leaf_size: usize,
    nodes: &mut Vec<BvhNode>,
) -> u32 {
    let mut bounds = Aabb::empty();
    for &t in tris.iter() {
        for p in mesh.triangle(t as usize) {
            bounds.grow(p);
        }
    }
    let moments = compute_moments(mesh, tris);
    let id = nodes.len() as u32;
    nodes.push(BvhNode {
        bounds,
        kind: BvhNodeKind::Leaf {
            start: offset as u32,
            count: tris.len() as u32,
        },
        moments,
    });
    if tris.len() <= leaf_size {
        return id;
    }
    let cbounds = Aabb::from_points(tris.iter().map(|&t| &centroids[t as usize]));
    let axis = cbounds.longest_axis();
    let mid = tris.len() / 2;
    tris.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = tris.split_at_mut(mid);
    let left = build_recursive(mesh, centroids, lo, offset, leaf_size, nodes);
    let right = build_recursive(mesh, centroids, hi, offset + mid, leaf_size, nodes);
    nodes[id as usize].kind = BvhNodeKind::Inner { left, right };
    id
}

fn compute_moments(mesh: &TriangleMesh, tris: &[u32]) -> WindingMoments {
    let mut area = 0.0;
    let mut center = Vec3::zeros();
    let mut normal_sum = Vec3::zeros();
    for &t in tris {
        let [a, b, c] = mesh.triangle(t as usize);
        let an = triangle_normal_raw(a, b, c) * 0.5;
        let ar = an.norm();
        area += ar;
        center += (a + b + c) / 3.0 * ar;
        normal_sum += an;
    }
    if area > 0.0 {
        center /= area;
    } else if let Some(&t) = tris.first() {
        center = mesh.face_centroid(t as usize);
    }
    let mut first = Matrix3::zeros();
    let mut second = [Matrix3::zeros(); 3];
    let mut radius: f64 = 0.0;
    for &t in tris {
        let tri = mesh.triangle(t as usize);
        let an = triangle_normal_raw(tri[0], tri[1], tri[2]) * 0.5;
        let e = [tri[0] - center, tri[1] - center, tri[2] - center];
        let s = e[0] + e[1] + e[2];
        first += an * (s / 3.0).transpose();
        // ∫ y yᵀ dA over a triangle = a/12 (Σ eᵢeᵢᵀ + s sᵀ)
        let cov = (e[0] * e[0].transpose() + e[1] * e[1].transpose() + e[2] * e[2].transpose() + s * s.transpose())
            / 12.0;
        for (i, m) in second.iter_mut().enumerate() {
            *m += cov * an[i];
        }
        for p in tri {
            radius = radius.max((p - center).norm());
        }
    }
    WindingMoments {
        center,
        normal_sum,
        first,
        second,
        radius,
    }
}

impl MeshBvh {
    pub fn root(&self) -> &BvhNode {
        &self.nodes[0]
    }

    /// Nearest triangle to `p`. Ties break toward the lower triangle index
    /// so the result matches an exhaustive scan exactly.
    pub fn nearest(&self, mesh: &TriangleMesh, p: &Vec3) -> NearestHit {
        let mut best = NearestHit {
            distance_squared: f64::INFINITY,
            point: Vec3::zeros(),
            triangle: u32::MAX,
            region: TriangleRegion::Face,
        };
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((id, d2)) = stack.pop() {
            if d2 > best.distance_squared {
                continue;
            }
            let node = &self.nodes[id as usize];
            match node.kind {
                BvhNodeKind::Leaf { start, count } => {
                    for &t in &self.triangles[start as usize..(start + count) as usize] {
                        let hit = nearest_on_triangle(mesh, t, p);
                        if hit.better_than(&best) {
                            best = hit;
                        }
                    }
                }
                BvhNodeKind::Inner { left, right } => {
                    let dl = self.nodes[left as usize].bounds.distance_squared(p);
                    let dr = self.nodes[right as usize].bounds.distance_squared(p);
                    // Push the farther child first so the nearer is visited next.
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best
    }

    /// Winding number using the third-order far-field expansion for nodes
    /// whose bounding sphere is more than `beta` radii away.
    pub fn winding_far_field(&self, mesh: &TriangleMesh, p: &Vec3, beta: f64) -> f64 {
        let mut total = 0.0;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            let m = &node.moments;
            let r = m.center - p;
            let dist = r.norm();
            if dist > beta * m.radius && m.radius > 0.0 {
                total += far_field_term(m, &r, dist);
                continue;
            }
            match node.kind {
                BvhNodeKind::Leaf { start, count } => {
                    for &t in &self.triangles[start as usize..(start + count) as usize] {
                        let [a, b, c] = mesh.triangle(t as usize);
                        total += triangle_winding(p, a, b, c);
                    }
                }
                BvhNodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        total
    }
}

/// w ≈ g(r)·N + ∇g(r) : M + ½ ∇²g(r) ⋮ T with g(r) = r / (4π|r|³),
/// r = center − p.
fn far_field_term(m: &WindingMoments, r: &Vec3, dist: f64) -> f64 {
    let inv4pi = 1.0 / (4.0 * std::f64::consts::PI);
    let d3 = dist * dist * dist;
    let d5 = d3 * dist * dist;
    let zeroth = r.dot(&m.normal_sum) * inv4pi / d3;
    // ∇g = (I/|r|³ − 3 r rᵀ/|r|⁵) / 4π, contracted with M.
    let trace = m.first.trace();
    let rmr = (r.transpose() * m.first * r)[0];
    let first = (trace / d3 - 3.0 * rmr / d5) * inv4pi;
    let d7 = d5 * dist * dist;
    let mut a = 0.0;
    let mut c = 0.0;
    let mut d = 0.0;
    for i in 0..3 {
        let tr = m.second[i] * r;
        a += tr[i];
        c += r[i] * m.second[i].trace();
        d += r[i] * r.dot(&tr);
    }
    let second = 0.5 * (-3.0 * (2.0 * a + c) / d5 + 15.0 * d / d7) * inv4pi;
    zeroth + first + second
}

#[inline]
pub(crate) fn nearest_on_triangle(mesh: &TriangleMesh, t: u32, p: &Vec3) -> NearestHit {
    let [a, b, c] = mesh.triangle(t as usize);
    let (q, region) = closest_point_on_triangle(p, a, b, c);
    NearestHit {
        distance_squared: (q - p).norm_squared(),
        point: q,
        triangle: t,
        region,
    }
}

/// Exhaustive nearest-triangle scan with the same tie rule as the BVH.
pub fn nearest_exhaustive(mesh: &TriangleMesh, p: &Vec3) -> NearestHit {
    let mut best = nearest_on_triangle(mesh, 0, p);
    for t in 1..mesh.faces.len() as u32 {
        let hit = nearest_on_triangle(mesh, t, p);
        if hit.better_than(&best) {
            best = hit;
        }
    }
    best
}
