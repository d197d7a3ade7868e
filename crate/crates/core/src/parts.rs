//! Part segmentation post-processing: mask NMS, projection of point masks
//! onto faces, geodesic label propagation and per-part mesh splitting.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

pub const UNLABELED: u32 = u32::MAX;
pub const DEFAULT_NMS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudSample {
    pub points: Vec<Vec3>,
    pub faces: Vec<u32>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloudSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z,face\n");
        for (p, f) in self.points.iter().zip(&self.faces) {
            s.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.z, f));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<PointCloudSample> {
        let mut points = Vec::new();
        let mut faces = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::parse(format!("line {}", i + 1), "expected x,y,z,face");
            if cols.len() != 4 {
                return Err(bad());
            }
            let f = |c: &str| c.trim().parse::<f64>().map_err(|_| bad());
            points.push(Vec3::new(f(cols[0])?, f(cols[1])?, f(cols[2])?));
            faces.push(cols[3].trim().parse::<u32>().map_err(|_| bad())?);
        }
        Ok(PointCloudSample {
            points,
            faces,
            normals: None,
        })
    }
}

/// Area-proportional surface sampling with a seeded generator.
pub fn sample_surface(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloudSample> {
    if count == 0 {
        return Err(Error::param("count", "must be positive"));
    }
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if total <= 0.0 {
        return Err(Error::param("mesh", "zero surface area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.gen::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= u).min(mesh.faces.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let [a, b, c] = mesh.triangle(f);
        points.push(*a * (1.0 - s) + *b * (s * (1.0 - r2)) + *c * (s * r2));
        faces.push(f as u32);
        normals.push(mesh.face_normal(f));
    }
    Ok(PointCloudSample {
        points,
        faces,
        normals: Some(normals),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPointMask {
    /// Sorted, unique member point indices.
    pub indices: Vec<u32>,
    pub score: f64,
    pub prompt: Option<u32>,
}

impl ScoredPointMask {
    pub fn new(mut indices: Vec<u32>, score: f64, prompt: Option<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::param("mask", "empty membership"));
        }
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::param("score", format!("{score} is not in [0, 1]")));
        }
        Ok(ScoredPointMask { indices, score, prompt })
    }

    pub fn contains(&self, i: u32) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

pub fn mask_iou(a: &ScoredPointMask, b: &ScoredPointMask) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.indices.len() + b.indices.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy NMS in descending score order (stable for ties); kept masks are
/// returned in that order.
pub fn mask_nms(masks: &[ScoredPointMask], iou_threshold: f64) -> Vec<ScoredPointMask> {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| masks[b].score.total_cmp(&masks[a].score).then(a.cmp(&b)));
    let mut kept: Vec<ScoredPointMask> = Vec::new();
    for i in order {
        if kept.iter().all(|k| mask_iou(k, &masks[i]) <= iou_threshold) {
            kept.push(masks[i].clone());
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartLabeling {
    /// Per-face part id, or UNLABELED.
    pub labels: Vec<u32>,
    pub part_count: u32,
}

impl PartLabeling {
    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == UNLABELED).count()
    }

    pub fn is_complete(&self) -> bool {
        self.unlabeled_count() == 0
    }

    pub fn single_part(face_count: usize) -> Self {
        PartLabeling {
            labels: vec![0; face_count],
            part_count: 1,
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Other(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Majority vote per face over the masks its sample points belong to; ties
/// go to the earlier (higher-scoring) mask. Part ids follow mask order and
/// are compacted over masks that win at least one face.
pub fn project_to_faces(kept: &[ScoredPointMask], sample: &PointCloudSample, mesh: &TriangleMesh) -> PartLabeling {
    let mut by_face: Vec<Vec<u32>> = vec![Vec::new(); mesh.faces.len()];
    for (i, &f) in sample.faces.iter().enumerate() {
        by_face[f as usize].push(i as u32);
    }
    let winners: Vec<Option<usize>> = by_face
        .par_iter()
        .map(|points| {
            let mut best: Option<(usize, usize)> = None;
            for (m, mask) in kept.iter().enumerate() {
                let votes = points.iter().filter(|&&p| mask.contains(p)).count();
                if votes > 0 && best.is_none_or(|(_, v)| votes > v) {
                    best = Some((m, votes));
                }
            }
            best.map(|(m, _)| m)
        })
        .collect();
    let used: BTreeSet<usize> = winners.iter().flatten().copied().collect();
    let remap: HashMap<usize, u32> = used.iter().enumerate().map(|(i, &m)| (m, i as u32)).collect();
    PartLabeling {
        labels: winners
            .iter()
            .map(|w| w.map_or(UNLABELED, |m| remap[&m]))
            .collect(),
        part_count: used.len() as u32,
    }
}

/// Faces sharing an edge, with centroid-to-centroid distances.
pub fn face_adjacency(mesh: &TriangleMesh) -> Vec<Vec<(u32, f64)>> {
    let mut by_edge: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(f as u32);
        }
    }
    let centroids: Vec<Vec3> = (0..mesh.faces.len()).map(|f| mesh.face_centroid(f)).collect();
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); mesh.faces.len()];
    let mut edges: Vec<_> = by_edge.into_iter().collect();
    edges.sort_unstable_by_key(|(k, _)| *k);
    for (_, faces) in edges {
        for &a in &faces {
            for &b in &faces {
                if a != b {
                    let d = (centroids[a as usize] - centroids[b as usize]).norm();
                    adj[a as usize].push((b, d));
                }
            }
        }
    }
    for list in &mut adj {
        list.sort_by(|x, y| x.0.cmp(&y.0));
        list.dedup_by_key(|x| x.0);
    }
    adj
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PropagationReport {
    /// Components without any labeled face; each got a fresh part id.
    pub fresh_components: usize,
    pub propagated_faces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Front {
    dist: f64,
    label: u32,
    face: u32,
}
impl Eq for Front {}
impl Ord for Front {
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist
            .total_cmp(&self.dist)
            .then(o.label.cmp(&self.label))
            .then(o.face.cmp(&self.face))
    }
}
impl PartialOrd for Front {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Multi-source shortest paths over the face adjacency graph: every
/// unlabeled face takes the label of the nearest labeled face, ties to the
/// smaller part id.
pub fn propagate_labels(partial: &PartLabeling, mesh: &TriangleMesh) -> (PartLabeling, PropagationReport) {
    let adj = face_adjacency(mesh);
    let n = mesh.faces.len();
    let mut labels = partial.labels.clone();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for f in 0..n {
        if labels[f] != UNLABELED {
            dist[f] = 0.0;
            heap.push(Front { dist: 0.0, label: labels[f], face: f as u32 });
        }
    }
    let mut report = PropagationReport {
        propagated_faces: partial.unlabeled_count(),
        ..Default::default()
    };
    let mut part_count = partial.part_count;
    let mut done = vec![false; n];
    loop {
        while let Some(Front { dist: d, label, face }) = heap.pop() {
            let f = face as usize;
            if done[f] || d > dist[f] || (d == dist[f] && label != labels[f]) {
                continue;
            }
            done[f] = true;
            for &(g, w) in &adj[f] {
                let g = g as usize;
                if done[g] || partial.labels[g] != UNLABELED {
                    continue;
                }
                let nd = d + w;
                if nd < dist[g] || (nd == dist[g] && label < labels[g]) {
                    dist[g] = nd;
                    labels[g] = label;
                    heap.push(Front { dist: nd, label, face: g as u32 });
                }
            }
        }
        // An untouched component gets a fresh id from its lowest face.
        match labels.iter().position(|&l| l == UNLABELED) {
            Some(f) => {
                labels[f] = part_count;
                dist[f] = 0.0;
                heap.push(Front { dist: 0.0, label: part_count, face: f as u32 });
                part_count += 1;
                report.fresh_components += 1;
            }
            None => break,
        }
    }
    (PartLabeling { labels, part_count }, report)
}

/// One compact mesh per part id with the original face indices of each.
pub fn split_parts_with_faces(labeling: &PartLabeling, mesh: &TriangleMesh) -> Vec<(TriangleMesh, Vec<u32>)> {
    (0..labeling.part_count)
        .map(|p| {
            let ids: Vec<u32> = (0..mesh.faces.len() as u32)
                .filter(|&f| labeling.labels[f as usize] == p)
                .collect();
            let faces = ids.iter().map(|&f| mesh.faces[f as usize]).collect();
            (TriangleMesh::new(mesh.vertices.clone(), faces).compacted(), ids)
        })
        .collect()
}

pub fn split_parts(labeling: &PartLabeling, mesh: &TriangleMesh) -> Vec<TriangleMesh> {
    split_parts_with_faces(labeling, mesh).into_iter().map(|(m, _)| m).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskJson {
    pub score: f64,
    pub indices: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasksFile {
    pub points_file: String,
    pub masks: Vec<MaskJson>,
}

impl MasksFile {
    pub fn to_masks(&self, point_count: usize) -> Result<Vec<ScoredPointMask>> {
        self.masks
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if let Some(&bad) = m.indices.iter().find(|&&p| p as usize >= point_count) {
                    return Err(Error::Schema {
                        pointer: format!("/masks/{i}/indices"),
                        message: format!("point {bad} out of range for {point_count} points"),
                    });
                }
                ScoredPointMask::new(m.indices.clone(), m.score, m.prompt).map_err(|e| Error::Schema {
                    pointer: format!("/masks/{i}"),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn from_masks(points_file: &str, masks: &[ScoredPointMask]) -> Self {
        MasksFile {
            points_file: points_file.to_string(),
            masks: masks
                .iter()
                .map(|m| MaskJson {
                    score: m.score,
                    indices: m.indices.clone(),
                    prompt: m.prompt,
                })
                .collect(),
        }
    }
}

/// Synthetic segmentation output: one mask per ground-truth part where each
/// point's membership is flipped with probability `noise`, plus a weaker
/// near-duplicate of every mask for NMS to suppress.
pub fn synthetic_masks(
    sample: &PointCloudSample,
    face_parts: &[u32],
    noise: f64,
    seed: u64,
) -> Vec<ScoredPointMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = face_parts.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for p in 0..parts {
        let mut members = Vec::new();
        for (i, &f) in sample.faces.iter().enumerate() {
            let inside = face_parts[f as usize] == p;
            if inside != (rng.gen::<f64>() < noise) {
                members.push(i as u32);
            }
        }
        if members.is_empty() {
            continue;
        }
        let score = 0.9 - 0.05 * p as f64 / parts as f64;
        let dup: Vec<u32> = members.iter().copied().filter(|_| rng.gen::<f64>() < 0.9).collect();
        out.push(ScoredPointMask::new(members, score, None).expect("nonempty"));
        if !dup.is_empty() {
            out.push(ScoredPointMask::new(dup, score * 0.5, None).expect("nonempty"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(ix: &[u32], score: f64) -> ScoredPointMask {
        ScoredPointMask::new(ix.to_vec(), score, None).unwrap()
    }

    #[test]
    fn identical_and_disjoint_masks() {
        let kept = mask_nms(&[mask(&[1, 2, 3], 0.8), mask(&[1, 2, 3], 0.9)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
        let kept = mask_nms(&[mask(&[1, 2], 0.3), mask(&[3, 4], 0.9), mask(&[5], 0.5)], 0.5);
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn mask_validation() {
        assert!(ScoredPointMask::new(vec![], 0.5, None).is_err());
        assert!(ScoredPointMask::new(vec![1], f64::NAN, None).is_err());
        assert!(ScoredPointMask::new(vec![1], 1.5, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = PointCloudSample {
            points: vec![Vec3::new(0.1, -0.2, 0.3)],
            faces: vec![7],
            normals: None,
        };
        assert_eq!(PointCloudSample::from_csv(&s.to_csv()).unwrap(), s);
        assert!(PointCloudSample::from_csv("x,y,z,face\n1,2\n").is_err());
    }
}
