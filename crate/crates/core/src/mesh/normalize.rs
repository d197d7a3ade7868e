use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// `x ↦ scale · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    pub fn apply_inverse(&self, p: &Vec3) -> Vec3 {
        (p - self.translation) / self.scale
    }

    pub fn inverse(&self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            translation: -self.translation / self.scale,
        }
    }
}

/// Center the bounding box at the origin and scale uniformly so the longest
/// axis spans `1 − 2·margin`.
pub fn normalize_to_unit_cube(
    mesh: &TriangleMesh,
    margin: f64,
) -> Result<(TriangleMesh, NormalizationTransform)> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::param("margin", format!("{margin} not in [0, 0.5)")));
    }
    let bbox = mesh.bbox();
    let longest = bbox.extent().max();
    if mesh.vertices.is_empty() || !(longest > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let scale = (1.0 - 2.0 * margin) / longest;
    let translation = -bbox.center() * scale;
    let t = if scale == 1.0 && translation == Vec3::zeros() {
        NormalizationTransform::identity()
    } else {
        NormalizationTransform { scale, translation }
    };
    Ok((mesh.map_vertices(|v| t.apply(v)), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use proptest::prelude::*;

    #[test]
    fn cube_zero_to_two() {
        let cube = primitives::unit_cube().map_vertices(|v| v + Vec3::repeat(0.5)).map_vertices(|v| v * 2.0);
        let (out, t) = normalize_to_unit_cube(&cube, 0.0).unwrap();
        assert_eq!(t.scale, 0.5);
        assert_eq!(t.translation, Vec3::repeat(-0.5));
        let b = out.bbox();
        assert_eq!(b.min, Vec3::repeat(-0.5));
        assert_eq!(b.max, Vec3::repeat(0.5));
    }

    #[test]
    fn normalized_input_is_identity() {
        let (_, t) = normalize_to_unit_cube(&primitives::unit_cube(), 0.0).unwrap();
        assert_eq!(t, NormalizationTransform::identity());
    }

    #[test]
    fn point_mesh_rejected() {
        let m = TriangleMesh::new(vec![Vec3::new(1.0, 2.0, 3.0); 3], vec![[0, 1, 2]]);
        assert!(matches!(normalize_to_unit_cube(&m, 0.1), Err(Error::ZeroExtent)));
        assert!(normalize_to_unit_cube(&primitives::unit_cube(), 0.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn bbox_contract_and_inverse(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 3..40),
            margin in 0.0f64..0.45,
        ) {
            let vertices: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let m = TriangleMesh::new(vertices, vec![[0, 1, 2]]);
            prop_assume!(m.bbox().extent().max() > 1e-6);
            let (out, t) = normalize_to_unit_cube(&m, margin).unwrap();
            let b = out.bbox();
            prop_assert!(b.center().norm() < 1e-12);
            prop_assert!((b.extent().max() - (1.0 - 2.0 * margin)).abs() < 1e-12);
            let ein = m.bbox().extent();
            let eout = b.extent();
            for a in 0..3 {
                prop_assert!((eout[a] - ein[a] * t.scale).abs() < 1e-12);
            }
            for (p, q) in m.vertices.iter().zip(&out.vertices) {
                let back = t.apply_inverse(q);
                prop_assert!((back - p).norm() <= 1e-9 * p.norm().max(1.0));
            }
        }
    }
}
