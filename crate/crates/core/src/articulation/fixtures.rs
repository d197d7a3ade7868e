//! Synthetic articulated objects with known joints.

use super::fit::posed_scene;
use super::{Joint, JointCandidate, JointType, Generator};
use crate::geom::Vec3;
use crate::mesh::primitives::box_mesh;
use crate::mesh::TriangleMesh;
use crate::render::{rasterize, Camera, Lens, RasterImage};

pub const FIXTURE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone)]
pub struct Fixture {
    /// Part 0 is the body.
    pub parts: Vec<TriangleMesh>,
    /// Ground-truth (parent, child, joint) with limits spanning the motion.
    pub joints: Vec<(usize, usize, Joint)>,
    pub contact_tolerance: f64,
    pub camera: Camera,
}

impl Fixture {
    /// Silhouettes of the whole object with `child` posed at each parameter.
    pub fn targets(&self, child: usize, thetas: &[f64]) -> Vec<RasterImage> {
        let (parent, joint) = self.rest_without(child);
        thetas
            .iter()
            .map(|&t| rasterize(&posed_scene(&parent, &self.parts[child], &joint, joint.joint_type, t), &self.camera))
            .collect()
    }

    /// Everything except `child`, merged, and the true joint of `child`.
    pub fn rest_without(&self, child: usize) -> (TriangleMesh, JointCandidate) {
        let mut rest = TriangleMesh::default();
        for (k, p) in self.parts.iter().enumerate() {
            if k != child {
                rest.append(p);
            }
        }
        let (_, _, j) = self.joints.iter().find(|j| j.1 == child).expect("child has a joint");
        (
            rest,
            JointCandidate {
                joint_type: j.joint_type,
                axis: j.axis,
                origin: j.origin,
                generator: Generator::ObbEdge,
                score: 1.0,
            },
        )
    }
}

pub fn fixture_camera() -> Camera {
    Camera::new(
        Lens::Orthographic { half_height: 0.6 },
        Vec3::new(1.2, -1.5, 0.9),
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::z(),
        256,
        256,
    )
    .expect("valid camera")
}

fn body() -> TriangleMesh {
    let mut b = box_mesh(Vec3::new(-0.3, 0.0, -0.3), Vec3::new(0.3, 0.4, 0.3));
    // Hinge post on the right front edge.
    b.append(&box_mesh(Vec3::new(0.3, -0.03, -0.3), Vec3::new(0.33, 0.0, 0.3)));
    b
}

fn door_joint(upper: f64) -> Joint {
    Joint {
        joint_type: JointType::Revolute,
        axis: Vec3::z(),
        origin: Vec3::new(0.3, -0.03, 0.0),
        lower: 0.0,
        upper,
    }
}

fn drawer_joint(extent: f64) -> Joint {
    Joint {
        joint_type: JointType::Prismatic,
        axis: Vec3::y(),
        origin: Vec3::new(0.0, 0.0, 0.0),
        lower: -extent,
        upper: 0.0,
    }
}

/// Body with a door hinged on its right front edge; opens to 45°.
pub fn door_fixture() -> Fixture {
    Fixture {
        parts: vec![body(), box_mesh(Vec3::new(-0.28, -0.03, -0.28), Vec3::new(0.3, -0.01, 0.28))],
        joints: vec![(0, 1, door_joint(45f64.to_radians()))],
        contact_tolerance: FIXTURE_TOLERANCE,
        camera: fixture_camera(),
    }
}

/// Body with a square-backed drawer against its front face; pulls out 0.3.
pub fn drawer_fixture() -> Fixture {
    Fixture {
        parts: vec![body(), box_mesh(Vec3::new(-0.15, -0.2, -0.15), Vec3::new(0.15, 0.0, 0.15))],
        joints: vec![(0, 1, drawer_joint(0.3))],
        contact_tolerance: FIXTURE_TOLERANCE,
        camera: fixture_camera(),
    }
}

/// Body, door on the upper half and drawer below it.
pub fn cabinet_fixture() -> Fixture {
    Fixture {
        parts: vec![
            body(),
            box_mesh(Vec3::new(-0.28, -0.03, 0.0), Vec3::new(0.3, -0.01, 0.28)),
            box_mesh(Vec3::new(-0.1, -0.2, -0.25), Vec3::new(0.1, 0.0, -0.05)),
        ],
        joints: vec![
            (0, 1, door_joint(45f64.to_radians())),
            (
                0,
                2,
                Joint {
                    origin: Vec3::new(0.0, 0.0, -0.15),
                    ..drawer_joint(0.3)
                },
            ),
        ],
        contact_tolerance: FIXTURE_TOLERANCE,
        camera: fixture_camera(),
    }
}
