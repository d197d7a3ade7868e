use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::geom::Vec3;
use crate::sdf::{corner_offset, is_inside_value, lattice_point, CellIndex, DistanceField, SparseSdfGrid, CELL_EDGES};

/// A lattice edge: the lattice point it starts at and its axis.
pub type EdgeKey = (CellIndex, u8);

/// Surface crossing on a sign-change lattice edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSample {
    pub origin: CellIndex,
    pub axis: u8,
    /// Crossing by linear interpolation of the two corner values.
    pub point: Vec3,
    /// Unit normal pointing from the negative to the positive side.
    pub normal: Vec3,
    /// Point on the zero level set of the local tangent plane: the nearest
    /// surface point, or `point` when no reliable surface point exists.
    pub plane_point: Vec3,
    /// Parameter of `point` along the edge.
    pub t: f64,
    /// SDF value at the edge start.
    pub v0: f64,
    pub weight: f64,
}

impl HermiteSample {
    pub fn key(&self) -> EdgeKey {
        (self.origin, self.axis)
    }
}

/// Linear zero of the SDF between corner values `v0` and `v1`.
#[inline]
pub fn edge_crossing(v0: f64, v1: f64) -> f64 {
    (v0 / (v0 - v1)).clamp(0.0, 1.0)
}

/// Every sign-change lattice edge of the active cells, with its corner
/// values, in sorted key order.
pub fn sign_change_edges(grid: &SparseSdfGrid) -> BTreeMap<EdgeKey, (f64, f64)> {
    let mut edges = BTreeMap::new();
    for (c, corners) in &grid.cells {
        for &(a, b, axis) in &CELL_EDGES {
            if is_inside_value(corners[a]) == is_inside_value(corners[b]) {
                continue;
            }
            let o = corner_offset(a);
            let origin = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
            edges.entry((origin, axis as u8)).or_insert((corners[a], corners[b]));
        }
    }
    edges
}

/// One Hermite sample per sign-change lattice edge, sorted by edge key.
pub fn collect_hermite<F: DistanceField + ?Sized>(grid: &SparseSdfGrid, field: &F) -> Vec<HermiteSample> {
    let edges: Vec<(EdgeKey, (f64, f64))> = sign_change_edges(grid).into_iter().collect();
    let n = grid.resolution;
    let h = grid.cell_size();
    edges
        .par_iter()
        .map(|&((origin, axis), (v0, v1))| hermite_on_edge(field, origin, axis, v0, v1, n, h))
        .collect()
}

fn hermite_on_edge<F: DistanceField + ?Sized>(
    field: &F,
    origin: CellIndex,
    axis: u8,
    v0: f64,
    v1: f64,
    resolution: u32,
    h: f64,
) -> HermiteSample {
    let t = edge_crossing(v0, v1);
    let mut point = lattice_point(&origin, resolution);
    point[axis as usize] += t * h;
    // Edge direction from the negative corner to the positive one.
    let mut edge_dir = Vec3::zeros();
    edge_dir[axis as usize] = if is_inside_value(v0) { 1.0 } else { -1.0 };

    let hit = field.signed_distance(&point);
    let offset = point - hit.nearest;
    let d = offset.norm();
    let (normal, plane_point) = if d > h {
        // The crossing is a sign discontinuity rather than a nearby surface
        // (e.g. the winding jump across a hole).
        (edge_dir, point)
    } else if d < 1e-10 * h {
        let n = field.surface_normal(&hit).unwrap_or(edge_dir);
        let n = if n.dot(&edge_dir) < 0.0 { -n } else { n };
        (n, hit.nearest)
    } else {
        let n = offset / d;
        let n = if hit.distance < 0.0 { -n } else { n };
        (n, hit.nearest)
    };
    HermiteSample {
        origin,
        axis,
        point,
        normal,
        plane_point,
        t,
        v0,
        weight: field.feature_weight(&hit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_parameter() {
        assert_eq!(edge_crossing(-0.25, 0.75), 0.25);
        assert_eq!(edge_crossing(0.5, -0.5), 0.5);
    }
}
