pub mod error;
pub mod geom;
pub mod mesh;
pub mod sdf;
pub mod voxel;
pub mod dmc;
pub mod metrics;
pub mod decimate;
pub mod parts;
pub mod render;
pub mod articulation;
pub mod pipeline;
pub mod scene;
pub mod urdf;

pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
pub use mesh::TriangleMesh;
