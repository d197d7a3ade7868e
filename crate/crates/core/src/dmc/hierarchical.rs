use rayon::prelude::*;
use serde::Serialize;

use super::{collect_hermite, extract_dual_mesh_detailed, ExtractionConfig, ExtractionStats};
use crate::error::{Error, Result};
use crate::mesh::{validate, TriangleMesh};
use crate::sdf::grid::{validate_grid_params, GridBuilder};
use crate::sdf::{cell_center, CellIndex, DistanceField, SparseSdfGrid};
use crate::voxel::{ancestor, VoxelPrior};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HierarchicalStats {
    pub occupied_prior_cells: usize,
    pub mid_evaluations: usize,
    /// Fine cell centers evaluated against the band.
    pub fine_evaluations: usize,
    pub corner_evaluations: usize,
    pub band_cells: usize,
    pub closure_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalOutput {
    pub mesh: TriangleMesh,
    pub grid: SparseSdfGrid,
    pub stats: HierarchicalStats,
    pub extraction: ExtractionStats,
    pub watertight: bool,
    /// Cells the prior excluded although the surface needed them.
    pub missing_cells: Vec<CellIndex>,
    pub warnings: Vec<String>,
}

/// Narrow-band sampling restricted to fine cells under occupied prior cells,
/// with one intermediate scale at N/2 filtering by |SDF| ≤ 2τ at the mid
/// cell center before any fine cell inside it is evaluated.
pub fn sample_hierarchical_grid<F: DistanceField + ?Sized>(
    field: &F,
    prior: &VoxelPrior,
    resolution: u32,
    band: f64,
) -> Result<(SparseSdfGrid, HierarchicalStats)> {
    validate_grid_params(resolution, band)?;
    if prior.resolution == 0 || resolution % prior.resolution != 0 {
        return Err(Error::DimensionMismatch(format!(
            "prior resolution {} does not divide {resolution}",
            prior.resolution
        )));
    }
    let ratio = (resolution / prior.resolution) as i32;
    let coarse = prior.occupied_cells();
    let mut stats = HierarchicalStats {
        occupied_prior_cells: coarse.len(),
        ..Default::default()
    };

    // Fine cells per mid cell along each axis; 1 disables the mid scale.
    let step = if ratio % 2 == 0 { 2 } else { 1 };
    let mid_res = resolution / step as u32;
    let per_coarse = ratio / step;
    let mut mids: Vec<CellIndex> = Vec::with_capacity(coarse.len() * (per_coarse as usize).pow(3));
    for c in &coarse {
        for dz in 0..per_coarse {
            for dy in 0..per_coarse {
                for dx in 0..per_coarse {
                    mids.push([c[0] * per_coarse + dx, c[1] * per_coarse + dy, c[2] * per_coarse + dz]);
                }
            }
        }
    }
    mids.sort_unstable();
    let kept: Vec<CellIndex> = if step == 2 {
        stats.mid_evaluations = mids.len();
        let verdicts: Vec<bool> = mids
            .par_iter()
            .map(|m| field.unsigned_distance(&cell_center(m, mid_res)) <= 2.0 * band)
            .collect();
        mids.into_iter().zip(verdicts).filter(|(_, ok)| *ok).map(|(m, _)| m).collect()
    } else {
        mids
    };
    let mut fine: Vec<CellIndex> = Vec::with_capacity(kept.len() * (step as usize).pow(3));
    for m in &kept {
        for dz in 0..step {
            for dy in 0..step {
                for dx in 0..step {
                    fine.push([m[0] * step + dx, m[1] * step + dy, m[2] * step + dz]);
                }
            }
        }
    }
    fine.sort_unstable();

    let mut b = GridBuilder::new(field, resolution, band);
    b.test_band(&fine);
    b.close_sign_changes(|c| prior.get(ancestor(c, ratio)));
    let grid = b.finish();
    stats.fine_evaluations = grid.stats.center_evaluations;
    stats.corner_evaluations = grid.stats.corner_evaluations;
    stats.band_cells = grid.stats.band_cells;
    stats.closure_cells = grid.stats.closure_cells;
    Ok((grid, stats))
}

/// Prior-pruned extraction. Sign-change edges whose neighborhood the prior
/// cut off are skipped; the resulting holes are reported rather than raised.
pub fn extract_hierarchical<F: DistanceField + ?Sized>(
    field: &F,
    prior: &VoxelPrior,
    config: &ExtractionConfig,
) -> Result<HierarchicalOutput> {
    config.validate()?;
    let mut warnings = Vec::new();
    if prior.occupied_count() == 0 {
        warnings.push("occupancy prior is empty; no cells were evaluated".to_string());
    }
    let (grid, stats) = sample_hierarchical_grid(field, prior, config.resolution, config.band_width())?;
    let hermite = collect_hermite(&grid, field);
    let out = extract_dual_mesh_detailed(&grid, &hermite, config, false)?;
    if !out.missing_cells.is_empty() {
        warnings.push(format!(
            "prior excluded {} cells adjacent to the surface; output has holes",
            out.missing_cells.len()
        ));
    }
    let watertight = out.mesh.faces.is_empty() || validate(&out.mesh).watertight;
    if !watertight && out.missing_cells.is_empty() {
        warnings.push("extracted mesh is not watertight".to_string());
    }
    Ok(HierarchicalOutput {
        mesh: out.mesh,
        grid,
        stats,
        extraction: out.stats,
        watertight: watertight && out.missing_cells.is_empty(),
        missing_cells: out.missing_cells,
        warnings,
    })
}
