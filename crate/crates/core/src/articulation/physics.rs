use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{sorted_symmetric_eigen, Vec3};
use crate::mesh::{validate, TriangleMesh};

/// Placeholder density in kg/m³ when no table is supplied.
pub const DEFAULT_DENSITY: f64 = 500.0;
pub const DEFAULT_FRICTION: f64 = 0.5;
const MIN_VOLUME: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MassProperties {
    /// Signed volume (positive for outward orientation).
    pub volume: f64,
    pub centroid: Vec3,
    /// Inertia tensor about the centroid at unit density.
    pub inertia: Matrix3<f64>,
}

/// Volume, centroid and inertia of the solid bounded by a closed mesh, by
/// summing signed tetrahedra against the origin.
pub fn mass_properties(mesh: &TriangleMesh) -> MassProperties {
    let canonical = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 120.0;
    let mut volume = 0.0;
    let mut first = Vec3::zeros();
    let mut cov = Matrix3::zeros();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let m = Matrix3::from_columns(&[*a, *b, *c]);
        let det = m.determinant();
        volume += det / 6.0;
        first += (a + b + c) * (det / 24.0);
        cov += m * canonical * m.transpose() * det;
    }
    let centroid = if volume.abs() > 0.0 { first / volume } else { Vec3::zeros() };
    let shifted = cov - centroid * centroid.transpose() * volume;
    let inertia = Matrix3::identity() * shifted.trace() - shifted;
    MassProperties {
        volume,
        centroid,
        inertia,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalProps {
    pub mass: f64,
    pub friction: f64,
    pub density: f64,
    pub centroid: Vec3,
    /// Principal moments in kg·m², descending.
    pub inertia: Vec3,
    /// Right-handed principal axes as columns.
    pub principal_axes: Matrix3<f64>,
}

/// Mass from density and enclosed volume, solid inertia about the centroid
/// diagonalized. Missing table entries fall back to the defaults.
pub fn assign_physical_props(parts: &[TriangleMesh], densities: &[f64], frictions: &[f64]) -> Result<Vec<PhysicalProps>> {
    parts
        .iter()
        .enumerate()
        .map(|(k, part)| {
            let density = densities.get(k).copied().unwrap_or(DEFAULT_DENSITY);
            let friction = frictions.get(k).copied().unwrap_or(DEFAULT_FRICTION);
            if !(density > 0.0 && density.is_finite()) {
                return Err(Error::param("density", format!("part {k}: {density} is not positive")));
            }
            if !(friction >= 0.0 && friction.is_finite()) {
                return Err(Error::param("friction", format!("part {k}: {friction} is negative")));
            }
            let report = validate(part);
            if part.faces.is_empty() || !report.watertight {
                return Err(Error::NotWatertight(format!(
                    "part {k} does not enclose a volume; run remesh_watertight on it first"
                )));
            }
            let mp = mass_properties(part);
            if mp.volume.abs() <= MIN_VOLUME {
                return Err(Error::NotWatertight(format!(
                    "part {k} has zero volume; run remesh_watertight on it first"
                )));
            }
            // A reversed orientation flips every tetrahedron sign alike.
            let sign = mp.volume.signum();
            let mass = density * mp.volume.abs();
            let (moments, mut axes) = sorted_symmetric_eigen(&(mp.inertia * (density * sign)));
            if axes.determinant() < 0.0 {
                let c = -axes.column(2);
                axes.set_column(2, &c);
            }
            Ok(PhysicalProps {
                mass,
                friction,
                density,
                centroid: mp.centroid,
                inertia: moments,
                principal_axes: axes,
            })
        })
        .collect()
}
