//! Sampled geometric fidelity measures.

use rayon::prelude::*;

use crate::error::Result;
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::sdf::{DistanceField, MeshSdf};

/// Points covering every face on a barycentric lattice whose spacing is at
/// most `spacing`; vertices and edges are included.
pub fn sample_faces(mesh: &TriangleMesh, spacing: f64) -> Vec<Vec3> {
    (0..mesh.faces.len())
        .into_par_iter()
        .flat_map_iter(|f| {
            let [a, b, c] = mesh.triangle(f);
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let k = ((longest / spacing).ceil() as usize).max(1);
            let mut pts = Vec::with_capacity((k + 1) * (k + 2) / 2);
            for i in 0..=k {
                for j in 0..=k - i {
                    let u = i as f64 / k as f64;
                    let v = j as f64 / k as f64;
                    pts.push(a + (b - a) * u + (c - a) * v);
                }
            }
            pts
        })
        .collect()
}

/// max over samples of `a` of the distance to `field`.
pub fn directed_distance<F: DistanceField + ?Sized>(samples: &[Vec3], field: &F) -> f64 {
    samples
        .par_iter()
        .map(|p| field.unsigned_distance(p))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance estimated from face samples of both meshes.
pub fn hausdorff(a: &TriangleMesh, b: &TriangleMesh, spacing: f64) -> Result<f64> {
    let fa = MeshSdf::new(a.clone())?;
    let fb = MeshSdf::new(b.clone())?;
    let ab = directed_distance(&sample_faces(a, spacing), &fb);
    let ba = directed_distance(&sample_faces(b, spacing), &fa);
    Ok(ab.max(ba))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn identical_meshes_have_zero_distance() {
        let m = primitives::icosphere(0.3, 1);
        assert!(hausdorff(&m, &m, 0.05).unwrap() < 1e-15);
    }

    #[test]
    fn offset_cubes() {
        let a = primitives::unit_cube();
        let b = a.translated(&Vec3::new(0.1, 0.0, 0.0));
        let d = hausdorff(&a, &b, 0.05).unwrap();
        assert!((d - 0.1).abs() < 1e-12, "{d}");
    }
}
