use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::hermite::{EdgeKey, HermiteSample};
use super::qef::{solve_qef, PlaneConstraint, QefProblem};
use super::ExtractionConfig;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::sdf::{cells_around_edge, corner_offset, lattice_point, CellIndex, SparseSdfGrid, CELL_EDGES};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionStats {
    pub vertices: usize,
    pub quads: usize,
    /// QEF solves whose normal matrix was (partly) singular.
    pub qef_fallbacks: usize,
    /// Sign-change edges skipped because a neighboring cell was missing.
    pub skipped_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualMesh {
    pub mesh: TriangleMesh,
    pub stats: ExtractionStats,
    /// Cells missing around skipped edges (lenient extraction only).
    pub missing_cells: Vec<CellIndex>,
}

pub fn cell_bounds(c: &CellIndex, resolution: u32) -> Aabb {
    let min = lattice_point(c, resolution);
    Aabb::new(min, min + Vec3::repeat(1.0 / resolution as f64))
}

/// Strict dual extraction: any sign-change edge lacking one of its four
/// cells is an error naming the missing cells.
pub fn extract_dual_mesh(grid: &SparseSdfGrid, hermite: &[HermiteSample], config: &ExtractionConfig) -> Result<TriangleMesh> {
    let out = extract_dual_mesh_detailed(grid, hermite, config, true)?;
    Ok(out.mesh)
}

pub fn extract_dual_mesh_detailed(
    grid: &SparseSdfGrid,
    hermite: &[HermiteSample],
    config: &ExtractionConfig,
    strict: bool,
) -> Result<DualMesh> {
    config.validate()?;
    let n = grid.resolution;
    let by_edge: HashMap<EdgeKey, usize> = hermite.iter().enumerate().map(|(i, s)| (s.key(), i)).collect();

    let cells = grid.sign_change_cells();
    let solved: Vec<(Vec3, bool)> = cells
        .par_iter()
        .map(|c| {
            let corners = &grid.cells[c];
            let mut constraints = Vec::with_capacity(12);
            for &(a, b, axis) in &CELL_EDGES {
                if (corners[a] < 0.0) == (corners[b] < 0.0) {
                    continue;
                }
                let o = corner_offset(a);
                let key = ([c[0] + o[0], c[1] + o[1], c[2] + o[2]], axis as u8);
                if let Some(&i) = by_edge.get(&key) {
                    let s = &hermite[i];
                    constraints.push(PlaneConstraint {
                        point: s.plane_point,
                        normal: s.normal,
                        weight: s.weight,
                    });
                }
            }
            let bounds = cell_bounds(c, n);
            if constraints.is_empty() {
                return (bounds.center(), true);
            }
            let lambda = config.lambda * constraints.len() as f64;
            let problem = QefProblem::new(constraints, bounds).expect("Hermite normals are unit");
            let s = solve_qef(&problem, config.qef_mode, lambda, config.irls_iters, config.clamp);
            (s.vertex, s.singular)
        })
        .collect();

    let mut stats = ExtractionStats {
        vertices: cells.len(),
        qef_fallbacks: solved.iter().filter(|s| s.1).count(),
        ..Default::default()
    };
    let index: HashMap<CellIndex, u32> = cells.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();
    let vertices: Vec<Vec3> = solved.iter().map(|s| s.0).collect();

    let mut faces = Vec::with_capacity(2 * hermite.len());
    let mut missing: Vec<CellIndex> = Vec::new();
    for s in hermite {
        let around = cells_around_edge(&s.origin, s.axis as usize);
        let ids: Vec<Option<u32>> = around.iter().map(|c| index.get(c).copied()).collect();
        if ids.iter().any(Option::is_none) {
            missing.extend(around.iter().zip(&ids).filter(|(_, i)| i.is_none()).map(|(c, _)| *c));
            stats.skipped_edges += 1;
            continue;
        }
        let mut q: [u32; 4] = [ids[0].unwrap(), ids[1].unwrap(), ids[2].unwrap(), ids[3].unwrap()];
        if s.v0 >= 0.0 {
            q.reverse();
        }
        let [a, b, c, d] = q.map(|i| vertices[i as usize]);
        if (a - c).norm_squared() <= (b - d).norm_squared() {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        } else {
            faces.push([q[0], q[1], q[3]]);
            faces.push([q[1], q[2], q[3]]);
        }
        stats.quads += 1;
    }
    missing.sort_unstable();
    missing.dedup();
    if strict && !missing.is_empty() {
        return Err(Error::BandIncomplete { cells: missing });
    }
    Ok(DualMesh {
        mesh: TriangleMesh::new(vertices, faces),
        stats,
        missing_cells: missing,
    })
}
