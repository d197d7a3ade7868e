//! Dual marching cubes over sparse SDF grids with minimax-style QEF vertex
//! placement, and prior-pruned hierarchical extraction.

pub mod extract;
pub mod hermite;
pub mod hierarchical;
pub mod qef;

use serde::{Deserialize, Serialize};

pub use extract::{cell_bounds, extract_dual_mesh, extract_dual_mesh_detailed, DualMesh, ExtractionStats};
pub use hermite::{collect_hermite, edge_crossing, sign_change_edges, EdgeKey, HermiteSample};
pub use hierarchical::{extract_hierarchical, sample_hierarchical_grid, HierarchicalOutput, HierarchicalStats};
pub use qef::{solve_linf_trace, solve_qef, LinfTrace, PlaneConstraint, QefMode, QefProblem, QefSolution};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::sdf::{sample_sparse_grid, MeshSdf, SamplingStats};

/// Dihedral deviation above which input edges count as sharp for Hermite
/// weighting.
pub const SHARP_ANGLE_DEGREES: f64 = 30.0;
pub const SHARP_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub resolution: u32,
    pub qef_mode: QefMode,
    pub irls_iters: usize,
    /// Regularization per constraint; the QEF uses λ = lambda · count.
    pub lambda: f64,
    pub clamp: bool,
    /// Band half-width in cells.
    pub band: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            resolution: 128,
            qef_mode: QefMode::Linf,
            irls_iters: 16,
            lambda: 1e-3,
            clamp: true,
            band: 2.0,
        }
    }
}

impl ExtractionConfig {
    pub fn with_resolution(self, resolution: u32) -> Self {
        ExtractionConfig { resolution, ..self }
    }

    pub fn with_mode(self, qef_mode: QefMode) -> Self {
        ExtractionConfig { qef_mode, ..self }
    }

    pub fn band_width(&self) -> f64 {
        self.band / self.resolution as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::param("resolution", format!("{} < 8", self.resolution)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("{} is not ≥ 0", self.lambda)));
        }
        if self.irls_iters < 1 {
            return Err(Error::param("irls_iters", "must be at least 1"));
        }
        if !(self.band >= 2.0 && self.band.is_finite()) {
            return Err(Error::param("band", format!("{} cells < 2", self.band)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemeshOutput {
    pub mesh: TriangleMesh,
    pub sampling: SamplingStats,
    pub extraction: ExtractionStats,
}

/// The mesh-backed field used for remeshing: winding-number sign and sharp
/// edges weighted in the Hermite data.
pub fn remesh_field(mesh: &TriangleMesh) -> Result<MeshSdf> {
    Ok(MeshSdf::new(mesh.clone())?.with_sharp_features(SHARP_ANGLE_DEGREES.to_radians(), SHARP_WEIGHT))
}

/// Sample → Hermite → dual extraction on a normalized mesh.
pub fn remesh_watertight(mesh: &TriangleMesh, config: &ExtractionConfig) -> Result<RemeshOutput> {
    config.validate()?;
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let b = mesh.bbox();
    if b.min.iter().chain(b.max.iter()).any(|x| x.abs() > 0.5 + 1e-9) {
        return Err(Error::param("mesh", "input is not normalized into [-0.5, 0.5]^3"));
    }
    let field = remesh_field(mesh)?;
    let grid = sample_sparse_grid(&field, config.resolution, config.band_width())?;
    let hermite = collect_hermite(&grid, &field);
    let out = extract_dual_mesh_detailed(&grid, &hermite, config, true)?;
    Ok(RemeshOutput {
        mesh: out.mesh,
        sampling: grid.stats,
        extraction: out.stats,
    })
}
