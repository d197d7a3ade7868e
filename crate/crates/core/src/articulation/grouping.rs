use rayon::prelude::*;
use serde::Serialize;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::sdf::{DistanceField, MeshSdf};

const MAX_SAMPLES_PER_PART: f64 = 200_000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contact {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// Estimated surface area within tolerance, averaged over both sides.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grouping {
    pub part_count: usize,
    pub root: usize,
    pub contacts: Vec<Contact>,
    /// (parent, child) spanning tree edges.
    pub tree: Vec<(usize, usize)>,
    /// Parts without any contact path to the root; attached with fixed joints.
    pub disconnected: Vec<usize>,
}

impl Grouping {
    pub fn contact(&self, a: usize, b: usize) -> Option<&Contact> {
        let (a, b) = (a.min(b), a.max(b));
        self.contacts.iter().find(|c| c.a == a && c.b == b)
    }
}

pub(crate) fn sample_spacing(mesh: &TriangleMesh, tolerance: f64) -> f64 {
    tolerance.max((mesh.surface_area() / MAX_SAMPLES_PER_PART).sqrt())
}

/// Lattice samples on every face: (point, face).
pub(crate) fn face_samples(mesh: &TriangleMesh, spacing: f64) -> Vec<(Vec3, usize)> {
    (0..mesh.faces.len())
        .into_par_iter()
        .flat_map_iter(|f| {
            let [a, b, c] = mesh.triangle(f);
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let k = ((longest / spacing).ceil() as usize).max(1);
            let mut pts = Vec::with_capacity((k + 1) * (k + 2) / 2);
            for i in 0..=k {
                for j in 0..=k - i {
                    let (u, v) = (i as f64 / k as f64, j as f64 / k as f64);
                    pts.push((a + (b - a) * u + (c - a) * v, f));
                }
            }
            pts
        })
        .collect()
}

/// Child surface samples within `tolerance` of the parent, with the child
/// face normal at each and the distance to the parent.
pub fn contact_points(child: &TriangleMesh, parent: &MeshSdf, tolerance: f64) -> Vec<(Vec3, Vec3, f64)> {
    face_samples(child, sample_spacing(child, tolerance))
        .into_par_iter()
        .filter_map(|(p, f)| {
            let d = parent.unsigned_distance(&p);
            (d <= tolerance).then(|| (p, child.face_normal(f), d))
        })
        .collect()
}

struct Directed {
    min_distance: f64,
    area: f64,
}

fn directed(a: &TriangleMesh, b: &MeshSdf, tolerance: f64) -> Directed {
    let samples = face_samples(a, sample_spacing(a, tolerance));
    let dist: Vec<f64> = samples.par_iter().map(|(p, _)| b.unsigned_distance(p)).collect();
    let mut per_face = vec![(0usize, 0usize); a.faces.len()];
    for ((_, f), d) in samples.iter().zip(&dist) {
        per_face[*f].1 += 1;
        if *d <= tolerance {
            per_face[*f].0 += 1;
        }
    }
    let area = per_face
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(f, (hit, n))| a.face_area(f) * *hit as f64 / *n as f64)
        .sum();
    Directed {
        min_distance: dist.iter().copied().fold(f64::INFINITY, f64::min),
        area,
    }
}

/// Contact graph, root (largest box volume) and maximum-contact spanning tree.
pub fn group_parts(parts: &[TriangleMesh], contact_tolerance: f64) -> crate::Result<Grouping> {
    if parts.is_empty() {
        return Err(crate::Error::param("parts", "at least one part is required"));
    }
    if !(contact_tolerance > 0.0) {
        return Err(crate::Error::param("contact_tolerance", "must be positive"));
    }
    let fields: Vec<MeshSdf> = parts.iter().map(|p| MeshSdf::new(p.clone())).collect::<crate::Result<_>>()?;
    let n = parts.len();
    let mut contacts = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let gap = parts[a].bbox().box_distance_squared(&parts[b].bbox()).sqrt();
            if gap > contact_tolerance {
                continue;
            }
            let ab = directed(&parts[a], &fields[b], contact_tolerance);
            let ba = directed(&parts[b], &fields[a], contact_tolerance);
            let distance = ab.min_distance.min(ba.min_distance);
            if distance <= contact_tolerance {
                contacts.push(Contact {
                    a,
                    b,
                    distance,
                    area: 0.5 * (ab.area + ba.area),
                });
            }
        }
    }

    let mut root = 0;
    for i in 1..n {
        if parts[i].bbox().volume() > parts[root].bbox().volume() {
            root = i;
        }
    }
    let mut in_tree = vec![false; n];
    in_tree[root] = true;
    let mut tree = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for c in &contacts {
            let (u, v) = match (in_tree[c.a], in_tree[c.b]) {
                (true, false) => (c.a, c.b),
                (false, true) => (c.b, c.a),
                _ => continue,
            };
            let better = match best {
                None => true,
                Some((area, bu, bv)) => c.area > area || (c.area == area && (v, u) < (bv, bu)),
            };
            if better {
                best = Some((c.area, u, v));
            }
        }
        match best {
            Some((_, u, v)) => {
                in_tree[v] = true;
                tree.push((u, v));
            }
            None => break,
        }
    }
    let disconnected: Vec<usize> = (0..n).filter(|&i| !in_tree[i]).collect();
    for &d in &disconnected {
        tree.push((root, d));
    }
    Ok(Grouping {
        part_count: n,
        root,
        contacts,
        tree,
        disconnected,
    })
}
