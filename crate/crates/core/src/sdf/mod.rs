//! Signed distance from triangle meshes and narrow-band grid sampling.

pub mod bvh;
pub mod distance;
pub mod grid;

pub use bvh::{build_bvh, nearest_exhaustive, BvhNode, BvhNodeKind, MeshBvh, NearestHit};
pub use distance::{
    batch_signed_distance, cell_of, exact_winding, mesh_seed_cells, signed_distance, DistanceField, Grouping,
    MeshSdf, SignedDistanceResult, SphereSdf, WindingMode, DEFAULT_LEAF_SIZE, EXACT_WINDING_LIMIT, FAR_FIELD_BETA,
};
pub use grid::{
    cell_center, cells_around_edge, corner_offset, is_inside_value, lattice_point, sample_sparse_grid, CellIndex, SamplingStats,
    SparseSdfGrid, CELL_EDGES,
};
